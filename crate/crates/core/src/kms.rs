//! Measure-level KMS conditions.
//!
//! A state is represented by its restriction to cylinder functions: a
//! consistent family of cylinder weights
//! `φ[w] = s_{w_0} · Π Q(w_t, w_{t+1}) · t_{w_{n−1}}` with `Q t = t`.
//! Both the eigen-measure of `L_ρ` (`s ≡ 1`, `Q = B/λ`, `t = ν`) and a
//! stationary Markov chain (`s = p`, `Q = P`, `t ≡ 1`) have this form.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{rpf_solve_default, spectral_gap_with, MarkovMeasure, SpectralData};
use crate::symbolic::{CylinderFunction, CylinderPotential, SubshiftSpec, Word};
use crate::thermo::{bowen_root, BowenRoot, BOWEN_TOL};
use crate::transfer::{CylinderMeasure, TransferOperator};

const FAMILY_TOL: f64 = 1e-10;

/// `ρ = H^{−β}` together with its normalization `ρ̃ = ρk/(λα(k))` and the
/// cocycle `Λ = ρ · ind(E)` with `ind(E) = ρ̃^{−1}`.
#[derive(Debug, Clone)]
pub struct KmsInstance {
    pub h: CylinderFunction,
    pub beta: f64,
    pub rho: CylinderPotential,
    pub operator: TransferOperator,
    pub spectral: SpectralData,
    /// Depth-1 eigenfunction, `L_ρ k = λ k`.
    pub k: CylinderFunction,
    pub normalized: TransferOperator,
    pub rho_tilde: CylinderFunction,
    pub index: CylinderFunction,
    pub lambda_cocycle: CylinderFunction,
}

impl KmsInstance {
    /// `H` must be strictly positive and depend on at most two coordinates.
    pub fn new(h: &CylinderFunction, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "inverse temperature {beta} is not finite"
            )));
        }
        let rho = CylinderPotential::from_h(h, beta)?.canonical();
        let operator = TransferOperator::new(&rho)?;
        if !rho.spec().is_primitive() {
            return Err(Error::NonPrimitive);
        }
        let spectral = rpf_solve_default(&operator)?;
        let normalized = operator.normalize(&spectral)?;
        let rho_tilde = normalized.potential().weights();
        let index = rho_tilde.map(f64::recip);
        let lambda_cocycle = rho.weights().mul(&index)?;
        Ok(KmsInstance {
            h: h.clone(),
            beta,
            rho,
            operator,
            k: spectral.phi.clone(),
            spectral,
            normalized,
            rho_tilde,
            index,
            lambda_cocycle,
        })
    }

    pub fn spec(&self) -> &SubshiftSpec {
        self.rho.spec()
    }

    pub fn lambda(&self) -> f64 {
        self.spectral.lambda
    }

    /// The eigen-measure of `L_ρ` as a state.
    pub fn eigen_state(&self) -> Result<KmsState> {
        let d = self.spec().alphabet_size();
        let q = self.operator.matrix() / self.lambda();
        KmsState::new(self.spec(), vec![1.0; d], q, self.spectral.nu.weights().to_vec())
    }

    /// `φ̃(x) = φ(kx) / φ(k)`.
    pub fn reweighted(&self, state: &KmsState, x: &CylinderFunction) -> Result<f64> {
        Ok(state.evaluate(&self.k.mul(x)?)? / state.evaluate(&self.k)?)
    }
}

/// A positive normalized functional on cylinder functions, given by a
/// consistent family of cylinder weights.
#[derive(Debug, Clone)]
pub struct KmsState {
    spec: SubshiftSpec,
    s: Vec<f64>,
    q: DMatrix<f64>,
    t: Vec<f64>,
}

impl KmsState {
    pub fn new(spec: &SubshiftSpec, s: Vec<f64>, q: DMatrix<f64>, t: Vec<f64>) -> Result<Self> {
        let d = spec.alphabet_size();
        if s.len() != d || t.len() != d || q.nrows() != d || q.ncols() != d {
            return Err(Error::InvalidMeasure(format!("expected {d} states")));
        }
        if s.iter()
            .chain(t.iter())
            .chain(q.iter())
            .any(|x| !(*x >= 0.0) || !x.is_finite())
        {
            return Err(Error::InvalidMeasure("negative or non-finite state data".into()));
        }
        for i in 0..d {
            for j in 0..d {
                if !spec.allowed(i, j) && q[(i, j)] != 0.0 {
                    return Err(Error::InvalidMeasure(format!("mass on forbidden transition ({i},{j})")));
                }
            }
        }
        let scale = t.iter().copied().fold(0.0, f64::max);
        for i in 0..d {
            let qt: f64 = (0..d).map(|j| q[(i, j)] * t[j]).sum();
            if (qt - t[i]).abs() > FAMILY_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidMeasure(format!(
                    "cylinder family is not consistent at symbol {i}"
                )));
            }
        }
        let total: f64 = s.iter().zip(&t).map(|(a, b)| a * b).sum();
        if (total - 1.0).abs() > FAMILY_TOL {
            return Err(Error::NotNormalized {
                deviation: (total - 1.0).abs(),
            });
        }
        Ok(KmsState {
            spec: spec.clone(),
            s,
            q,
            t,
        })
    }

    pub fn from_markov(mu: &MarkovMeasure) -> Result<Self> {
        let d = mu.spec().alphabet_size();
        Self::new(
            mu.spec(),
            mu.stationary().to_vec(),
            mu.transition().clone(),
            vec![1.0; d],
        )
    }

    pub fn spec(&self) -> &SubshiftSpec {
        &self.spec
    }

    pub fn weight(&self, w: &[usize]) -> Result<f64> {
        if w.is_empty() || !self.spec.is_admissible(w) {
            return Err(Error::InadmissibleWord(w.to_vec()));
        }
        Ok(self.weight_unchecked(w))
    }

    fn weight_unchecked(&self, w: &[usize]) -> f64 {
        let last = *w.last().expect("non-empty");
        w.windows(2).fold(self.s[w[0]], |acc, p| acc * self.q[(p[0], p[1])]) * self.t[last]
    }

    pub fn cylinder_measure(&self, n: usize) -> Result<CylinderMeasure> {
        let words = self.spec.word_set(n)?;
        let weights = words.iter().map(|w| self.weight_unchecked(w.symbols())).collect();
        CylinderMeasure::new(words, weights)
    }

    /// `φ(a)`.
    pub fn evaluate(&self, a: &CylinderFunction) -> Result<f64> {
        if !a.spec().same_as(&self.spec) {
            return Err(Error::SpecMismatch);
        }
        self.cylinder_measure(a.depth())?.integrate(a)
    }

    /// Depth-1 marginal.
    pub fn marginal(&self) -> Vec<f64> {
        self.s.iter().zip(&self.t).map(|(a, b)| a * b).collect()
    }

    /// Adds `delta` to the mass of `symbol`, renormalizes, and keeps every
    /// conditional law given the first symbol.
    pub fn tilted(&self, symbol: usize, delta: f64) -> Result<Self> {
        let mut m = self.marginal();
        if symbol >= m.len() {
            return Err(Error::InvalidArgument(format!("symbol {symbol} out of range")));
        }
        m[symbol] += delta;
        let z: f64 = m.iter().sum();
        if m.iter().any(|x| *x < 0.0) || !(z > 0.0) {
            return Err(Error::InvalidArgument("tilt leaves a negative mass".into()));
        }
        let s = m
            .iter()
            .zip(&self.t)
            .map(|(mi, ti)| if *ti > 0.0 { mi / z / ti } else { 0.0 })
            .collect();
        Self::new(&self.spec, s, self.q.clone(), self.t.clone())
    }

    /// The chain of the probability `x ↦ φ(kx)/φ(k)`, which must be shift-invariant.
    pub fn gibbs_form(&self, k: &CylinderFunction) -> Result<MarkovMeasure> {
        if k.depth() != 1 || !k.spec().same_as(&self.spec) {
            return Err(Error::DepthMismatch {
                expected: "1".into(),
                found: k.depth(),
            });
        }
        let d = self.spec.alphabet_size();
        let m2 = self.cylinder_measure(2)?;
        let mut joint = DMatrix::zeros(d, d);
        for (w, &v) in m2.words().iter().zip(m2.weights()) {
            joint[(w.0[0], w.0[1])] = v * k.values()[w.0[0]];
        }
        joint /= joint.sum();
        let p: Vec<f64> = (0..d).map(|i| joint.row(i).sum()).collect();
        let mut transition = DMatrix::zeros(d, d);
        for i in 0..d {
            if p[i] > 0.0 {
                for j in 0..d {
                    transition[(i, j)] = joint[(i, j)] / p[i];
                }
            }
        }
        MarkovMeasure::new(&self.spec, p, transition)
    }
}

/// `Λ^{[n]} = Π_{i<n} αⁱ(Λ)`, a function of depth `n + 1`.
pub fn lambda_n(inst: &KmsInstance, n: usize) -> Result<CylinderFunction> {
    let mut out = CylinderFunction::constant(inst.spec(), 1, 1.0)?;
    for i in 0..n {
        out = out.mul(&inst.lambda_cocycle.alpha_pow(i)?)?;
    }
    Ok(out)
}

/// `λⁿ αⁿ(k)/k`, i.e. `λⁿ k(w_n)/k(w_0)` on words of length `n + 1`.
pub fn lambda_n_closed_form(inst: &KmsInstance, n: usize) -> Result<CylinderFunction> {
    let k = inst.k.values();
    let ln = inst.lambda().powi(n as i32);
    CylinderFunction::from_fn(inst.spec(), n + 1, |w| ln * k[w[n]] / k[w[0]])
}

/// `|φ(a) − φ(L_ρ̃(Λa))|`.
pub fn crossed_product_residual(inst: &KmsInstance, state: &KmsState, a: &CylinderFunction) -> Result<f64> {
    let image = inst.normalized.apply(&inst.lambda_cocycle.mul(a)?)?;
    Ok((state.evaluate(a)? - state.evaluate(&image)?).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxProperResidual {
    /// `|φ(a) − φ(Λ^{−[n]} αⁿ L_ρ̃ⁿ(Λ^{[n]} a))|`.
    pub residual: f64,
    /// `|φ̃(a′) − φ̃(αⁿ L_ρ̃ⁿ a′)|` with `a′ = a/k` and the unnormalized `φ̃(x) = φ(kx)`.
    pub simplified: f64,
}

pub fn approx_proper_residual(
    inst: &KmsInstance,
    state: &KmsState,
    a: &CylinderFunction,
    n: usize,
) -> Result<ApproxProperResidual> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let phi_a = state.evaluate(a)?;

    let cocycle = lambda_n_closed_form(inst, n)?;
    let pushed = inst.normalized.apply_n(&cocycle.mul(a)?, n)?.alpha_pow(n)?;
    let full = pushed.div(&cocycle)?;
    let residual = (phi_a - state.evaluate(&full)?).abs();

    let a_prime = a.div(&inst.k)?;
    let image = inst.normalized.apply_n(&a_prime, n)?.alpha_pow(n)?;
    let tilde_a = state.evaluate(&inst.k.mul(&a_prime)?)?;
    let tilde_image = state.evaluate(&inst.k.mul(&image)?)?;
    let simplified = (tilde_a - tilde_image).abs();

    Ok(ApproxProperResidual { residual, simplified })
}

/// The eigen-measure state of `L_ρ` for `ρ = H^{−β}`.
pub fn kms_measure(h: &CylinderFunction, beta: f64) -> Result<KmsState> {
    KmsInstance::new(h, beta)?.eigen_state()
}

/// The unique `β` with `P(−β log H) = 0`, the only inverse temperature at
/// which the eigen-measure has eigenvalue one.
pub fn v_algebra_beta(h: &CylinderFunction) -> Result<BowenRoot> {
    bowen_root(h, BOWEN_TOL)
}

#[derive(Debug, Clone)]
pub struct TelescopingReport {
    /// `|φ̃(L_ρ̃ a − a)|` with the normalized `φ̃`.
    pub fixed_point_residual: f64,
    /// `‖L^{n+1}a − φ̃(a)‖_∞ + ‖φ̃(a) − Lⁿa‖_∞` for `n = 1..=N`.
    pub bounds: Vec<f64>,
    pub bound_holds: bool,
    pub gap: f64,
    /// Geometric decay rate of `bounds`, measured over the steps above rounding level.
    pub empirical_rate: f64,
    pub final_bound: f64,
    pub converged: bool,
}

pub fn telescoping_convergence_check(
    inst: &KmsInstance,
    state: &KmsState,
    a: &CylinderFunction,
    n_max: usize,
) -> Result<TelescopingReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let mean = inst.reweighted(state, a)?;
    let la = inst.normalized.apply(a)?;
    let fixed_point_residual = inst.reweighted(state, &la.sub(a)?)?.abs();

    let dist = |f: &CylinderFunction| f.values().iter().fold(0.0, |m: f64, v| m.max((v - mean).abs()));
    let mut iterates = Vec::with_capacity(n_max + 2);
    iterates.push(dist(a));
    let mut current = a.clone();
    for _ in 0..=n_max {
        current = inst.normalized.apply(&current)?;
        iterates.push(dist(&current));
    }
    let bounds: Vec<f64> = (1..=n_max).map(|n| iterates[n + 1] + iterates[n]).collect();
    let slack = 1e-12 * (1.0 + a.sup_norm());
    let bound_holds = bounds.iter().all(|&b| fixed_point_residual <= b + slack);

    let peak = bounds.iter().copied().fold(0.0, f64::max);
    let start = a.depth().saturating_sub(1).min(n_max - 1);
    let last = (start + 1..n_max).rev().find(|&i| bounds[i] > 1e-10 * peak);
    let empirical_rate = match last {
        Some(i) if bounds[start] > 0.0 => (bounds[i] / bounds[start]).powf(1.0 / (i - start) as f64),
        _ => 0.0,
    };
    let final_bound = *bounds.last().expect("N ≥ 1");
    Ok(TelescopingReport {
        fixed_point_residual,
        gap: spectral_gap_with(&inst.normalized, &rpf_solve_default(&inst.normalized)?),
        bound_holds,
        empirical_rate,
        final_bound,
        converged: final_bound < 1e-9 && fixed_point_residual < 1e-9,
        bounds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSweep {
    pub crossed: f64,
    pub crossed_word: Word,
    pub approx: f64,
    pub approx_word: Word,
    /// Largest disagreement between the two forms of the approximately-proper residual.
    pub form_disagreement: f64,
    pub basis_size: usize,
}

/// Both residuals over the indicator functions of all cylinders of length
/// `1..=max_depth`. Ties in the maximum go to the lexicographically smallest word.
pub fn residual_sweep(inst: &KmsInstance, state: &KmsState, max_depth: usize, n: usize) -> Result<ResidualSweep> {
    let basis: Vec<Word> = (1..=max_depth).flat_map(|m| inst.spec().admissible_words(m)).collect();
    let results: Vec<Result<(f64, ApproxProperResidual)>> = basis
        .par_iter()
        .map(|w| {
            let a = CylinderFunction::from_fn(inst.spec(), w.len(), |x| if x == w.symbols() { 1.0 } else { 0.0 })?;
            Ok((
                crossed_product_residual(inst, state, &a)?,
                approx_proper_residual(inst, state, &a, n)?,
            ))
        })
        .collect();
    let mut crossed = (f64::NEG_INFINITY, Word(Vec::new()));
    let mut approx = (f64::NEG_INFINITY, Word(Vec::new()));
    let mut form_disagreement: f64 = 0.0;
    let better = |v: f64, w: &Word, best: &(f64, Word)| v > best.0 || (v == best.0 && w.0 < best.1 .0);
    for (w, r) in basis.iter().zip(results) {
        let (c, ap) = r?;
        if better(c, w, &crossed) {
            crossed = (c, w.clone());
        }
        if better(ap.residual, w, &approx) {
            approx = (ap.residual, w.clone());
        }
        form_disagreement = form_disagreement.max((ap.residual - ap.simplified).abs());
    }
    Ok(ResidualSweep {
        crossed: crossed.0,
        crossed_word: crossed.1,
        approx: approx.0,
        approx_word: approx.1,
        form_disagreement,
        basis_size: basis.len(),
    })
}
