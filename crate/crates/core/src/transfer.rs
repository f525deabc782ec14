//! The transfer (Ruelle) operator of a two-coordinate weight and its dual.
//!
//! Preimages of `x` under the shift are the sequences `a·x` with `a → x_0`
//! admissible, so `(L_ρ f)(x) = Σ_a ρ(a, x_0) f(a x_0 x_1 …)`. On depth-1
//! functions this is `f ↦ Bᵀf` with `B(i,j) = ρ(i,j)` on allowed transitions.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::SpectralData;
use crate::symbolic::{pow, CylinderFunction, CylinderPotential, SubshiftSpec, WordSet};

#[derive(Debug, Clone)]
pub struct TransferOperator {
    potential: CylinderPotential,
    matrix: DMatrix<f64>,
}

impl TransferOperator {
    /// Builds `L_ρ` from a potential of depth at most 2. Deeper potentials
    /// must go through [`crate::symbolic::higher_block_recode`] first.
    pub fn new(potential: &CylinderPotential) -> Result<Self> {
        let potential = potential.canonical();
        if potential.depth() != 2 {
            return Err(Error::DepthMismatch {
                expected: "<= 2 (recode deeper potentials)".into(),
                found: potential.depth(),
            });
        }
        let spec = potential.spec().clone();
        let d = spec.alphabet_size();
        let mut matrix = DMatrix::zeros(d, d);
        let log = potential.log_weights();
        for (idx, w) in log.words().iter().enumerate() {
            matrix[(w.0[0], w.0[1])] = log.values()[idx].exp();
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("weights overflow; shift the potential".into()));
        }
        Ok(TransferOperator { potential, matrix })
    }

    pub fn spec(&self) -> &SubshiftSpec {
        self.potential.spec()
    }

    pub fn potential(&self) -> &CylinderPotential {
        &self.potential
    }

    /// `B(i,j) = ρ(i,j)` on allowed transitions, zero elsewhere.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.matrix[(from, to)]
    }

    /// `L f`; depth drops by one with a floor of one.
    pub fn apply(&self, f: &CylinderFunction) -> Result<CylinderFunction> {
        if !f.spec().same_as(self.spec()) {
            return Err(Error::SpecMismatch);
        }
        let spec = self.spec();
        let d = spec.alphabet_size();
        let k = f.depth();
        let out_depth = (k.max(2)) - 1;
        let target = spec.word_set(out_depth)?;
        let src = f.words();
        let values = if k == 1 {
            (0..d)
                .map(|j| (0..d).map(|i| self.matrix[(i, j)] * f.values()[i]).sum())
                .collect()
        } else {
            let head = pow(d, k - 1);
            let x0_div = pow(d, k - 2);
            target
                .codes()
                .iter()
                .map(|&x| {
                    let x0 = (x / x0_div) as usize;
                    let mut acc = 0.0;
                    for a in 0..d {
                        let b = self.matrix[(a, x0)];
                        if b != 0.0 {
                            let idx = src
                                .index_of_code(a as u64 * head + x)
                                .expect("a·x admissible when a→x0 allowed");
                            acc += b * f.values()[idx];
                        }
                    }
                    acc
                })
                .collect()
        };
        CylinderFunction::from_values(target, values)
    }

    /// `Lⁿ f`.
    pub fn apply_n(&self, f: &CylinderFunction, n: usize) -> Result<CylinderFunction> {
        let mut out = f.clone();
        for _ in 0..n {
            out = self.apply(&out)?;
        }
        Ok(out)
    }

    /// The dual action on cylinder weights, `(L*ν)(f) = ν(Lf)`.
    pub fn dual_apply(&self, nu: &CylinderMeasure) -> Result<CylinderMeasure> {
        if !nu.spec().same_as(self.spec()) {
            return Err(Error::SpecMismatch);
        }
        let d = self.spec().alphabet_size();
        let n = nu.depth();
        let words = nu.words().clone();
        let weights = if n == 1 {
            (0..d)
                .map(|i| (0..d).map(|j| self.matrix[(i, j)] * nu.weights()[j]).sum())
                .collect()
        } else {
            // (L*ν)[a·y] = B(a, y_0) · Σ_c ν[y·c]
            let shorter = nu.marginal(n - 1)?;
            let tail_mod = pow(d, n - 1);
            let y0_div = pow(d, n - 2);
            words
                .codes()
                .iter()
                .map(|&c| {
                    let a = (c / tail_mod) as usize;
                    let y = c % tail_mod;
                    let y0 = (y / y0_div) as usize;
                    let idx = shorter.words().index_of_code(y).expect("suffix admissible");
                    self.matrix[(a, y0)] * shorter.weights()[idx]
                })
                .collect()
        };
        CylinderMeasure::new(words, weights)
    }

    /// `sup |L1 − 1|`.
    pub fn normalization_defect(&self) -> f64 {
        let d = self.spec().alphabet_size();
        (0..d)
            .map(|j| ((0..d).map(|i| self.matrix[(i, j)]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `ρ̃ = ρ k / (λ α(k))` with `L_ρ k = λ k`, so that `L_ρ̃ 1 = 1`.
    pub fn normalize(&self, spectral: &SpectralData) -> Result<TransferOperator> {
        let k = spectral.phi.values();
        if k.len() != self.spec().alphabet_size() {
            return Err(Error::SpecMismatch);
        }
        if !spectral.phi.spec().is_primitive() {
            return Err(Error::NonPrimitive);
        }
        if k.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::NonPositiveEigenfunction);
        }
        let lambda = spectral.lambda;
        let log_k: Vec<f64> = k.iter().map(|v| v.ln()).collect();
        let log_lambda = lambda.ln();
        let log = self
            .potential
            .log_weights()
            .words()
            .iter()
            .zip(self.potential.log_weights().values())
            .map(|(w, &a)| a + log_k[w.0[0]] - log_lambda - log_k[w.0[1]])
            .collect();
        let tilde = CylinderFunction::from_values(self.potential.log_weights().words().clone(), log)?;
        let op = TransferOperator::new(&CylinderPotential::from_log(tilde)?)?;
        let defect = op.normalization_defect();
        if defect > 1e-10 {
            return Err(Error::NotNormalized { deviation: defect });
        }
        Ok(op)
    }
}

/// Nonnegative weights on the admissible words of one length.
#[derive(Debug, Clone)]
pub struct CylinderMeasure {
    words: Arc<WordSet>,
    weights: Vec<f64>,
}

impl CylinderMeasure {
    pub fn new(words: Arc<WordSet>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != words.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for {} words",
                weights.len(),
                words.len()
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {bad} is negative or not finite")));
        }
        Ok(CylinderMeasure { words, weights })
    }

    pub fn zero(spec: &SubshiftSpec, depth: usize) -> Result<Self> {
        let words = spec.word_set(depth)?;
        let weights = vec![0.0; words.len()];
        Ok(CylinderMeasure { words, weights })
    }

    /// Normalized counting measure on the admissible words of length `depth`.
    pub fn uniform(spec: &SubshiftSpec, depth: usize) -> Result<Self> {
        let words = spec.word_set(depth)?;
        let w = 1.0 / words.len() as f64;
        let weights = vec![w; words.len()];
        Ok(CylinderMeasure { words, weights })
    }

    pub fn spec(&self) -> &SubshiftSpec {
        self.words.spec()
    }

    pub fn depth(&self) -> usize {
        self.words.depth()
    }

    pub fn words(&self) -> &Arc<WordSet> {
        &self.words
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn weight(&self, word: &[usize]) -> Option<f64> {
        self.words.index_of(word).map(|i| self.weights[i])
    }

    pub fn scaled(&self, s: f64) -> Self {
        CylinderMeasure {
            words: self.words.clone(),
            weights: self.weights.iter().map(|w| w * s).collect(),
        }
    }

    /// Pushes the weights down to shorter words by summing over suffixes.
    pub fn marginal(&self, depth: usize) -> Result<CylinderMeasure> {
        let n = self.depth();
        if depth > n || depth == 0 {
            return Err(Error::DepthMismatch {
                expected: format!("1..={n}"),
                found: depth,
            });
        }
        if depth == n {
            return Ok(self.clone());
        }
        let target = self.spec().word_set(depth)?;
        let div = pow(self.spec().alphabet_size(), n - depth);
        let mut weights = vec![0.0; target.len()];
        for (&c, &w) in self.words.codes().iter().zip(&self.weights) {
            let idx = target.index_of_code(c / div).expect("prefix admissible");
            weights[idx] += w;
        }
        Ok(CylinderMeasure { words: target, weights })
    }

    /// `ν(f) = Σ_w ν[w] f(w)`; `f` is lifted to this depth, so it may not be deeper.
    pub fn integrate(&self, f: &CylinderFunction) -> Result<f64> {
        if !f.spec().same_as(self.spec()) {
            return Err(Error::SpecMismatch);
        }
        let lifted = f.extend_to(self.depth())?;
        Ok(self.weights.iter().zip(lifted.values()).map(|(w, v)| w * v).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::rpf_solve;

    fn b211() -> TransferOperator {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let pot = CylinderPotential::from_weight_matrix(&f2, &[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        TransferOperator::new(&pot).unwrap()
    }

    #[test]
    fn apply_full_shift_constant_one() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = TransferOperator::new(&CylinderPotential::constant(&f2, 0.0).unwrap()).unwrap();
        for depth in 1..4 {
            let one = CylinderFunction::constant(&f2, depth, 1.0).unwrap();
            let out = op.apply(&one).unwrap();
            assert_eq!(out.depth(), (depth.max(2)) - 1);
            assert!(out.values().iter().all(|&v| v == 2.0));
        }
    }

    #[test]
    fn apply_column_sums() {
        let op = b211();
        let f = CylinderFunction::from_values(op.spec().word_set(1).unwrap(), vec![1.0, 0.0]).unwrap();
        assert_eq!(op.apply(&f).unwrap().values(), &[2.0, 1.0]);
    }

    #[test]
    fn dual_of_uniform_and_zero() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = TransferOperator::new(&CylinderPotential::constant(&f2, 0.0).unwrap()).unwrap();
        let nu = CylinderMeasure::new(f2.word_set(1).unwrap(), vec![0.5, 0.5]).unwrap();
        assert_eq!(op.dual_apply(&nu).unwrap().weights(), &[1.0, 1.0]);
        let zero = CylinderMeasure::zero(&f2, 3).unwrap();
        assert!(b211().dual_apply(&zero).unwrap().weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn dual_fixes_perron_measure() {
        let op = b211();
        let lam = (3.0 + 5f64.sqrt()) / 2.0;
        // right eigenvector of [[2,1],[1,1]]: (λ−1, 1)
        let u = [lam - 1.0, 1.0];
        let s = u[0] + u[1];
        let nu = CylinderMeasure::new(op.spec().word_set(1).unwrap(), vec![u[0] / s, u[1] / s]).unwrap();
        let out = op.dual_apply(&nu).unwrap();
        for i in 0..2 {
            assert!((out.weights()[i] - lam * nu.weights()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn normalization_full_shift_and_golden_mean() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = TransferOperator::new(&CylinderPotential::constant(&f2, 0.0).unwrap()).unwrap();
        let sd = rpf_solve(&op, 1e-12, 100_000).unwrap();
        let norm = op.normalize(&sd).unwrap();
        assert!(norm.matrix().iter().all(|&b| (b - 0.5).abs() < 1e-14));

        let gm = SubshiftSpec::golden_mean();
        let op = TransferOperator::new(&CylinderPotential::constant(&gm, 0.0).unwrap()).unwrap();
        let sd = rpf_solve(&op, 1e-12, 100_000).unwrap();
        let norm = op.normalize(&sd).unwrap();
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        // left eigenvector of [[1,1],[1,0]] is (g, 1)
        let v = [g, 1.0];
        for i in 0..2 {
            for j in 0..2 {
                let expect = if gm.allowed(i, j) { v[i] / (g * v[j]) } else { 0.0 };
                assert!((norm.weight(i, j) - expect).abs() < 1e-12);
            }
        }
        for j in 0..2 {
            let col: f64 = (0..2).map(|i| norm.weight(i, j)).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
        let one = CylinderFunction::constant(&gm, 3, 1.0).unwrap();
        assert!(norm
            .apply(&one)
            .unwrap()
            .values()
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_deep_potential() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let pot = CylinderPotential::from_log(CylinderFunction::constant(&f2, 3, 0.0).unwrap()).unwrap();
        assert!(TransferOperator::new(&pot).is_err());
    }

    #[test]
    fn marginal_and_integrate() {
        let gm = SubshiftSpec::golden_mean();
        let mu = CylinderMeasure::new(gm.word_set(2).unwrap(), vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(mu.marginal(1).unwrap().weights(), &[0.5, 0.5]);
        let f = CylinderFunction::from_values(gm.word_set(1).unwrap(), vec![1.0, 3.0]).unwrap();
        assert!((mu.integrate(&f).unwrap() - 2.0).abs() < 1e-15);
        let deep = CylinderFunction::constant(&gm, 3, 1.0).unwrap();
        assert!(mu.integrate(&deep).is_err());
    }
}
