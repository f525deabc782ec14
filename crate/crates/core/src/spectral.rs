//! Perron eigendata of transfer operators, eigen-measures, Gibbs measures,
//! spectral gaps and convergence of iterated normalized operators.
//!
//! Convention: the eigenfunction `φ` solves `Bᵀφ = λφ` (the action of `L` on
//! depth-1 functions) and the eigen-measure `ν` solves `Bν = λν` (the dual
//! action). `ν` is a probability vector and `φ` is scaled so that `ν(φ) = 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symbolic::{CylinderFunction, CylinderPotential, SubshiftSpec};
use crate::transfer::{CylinderMeasure, TransferOperator};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub lambda: f64,
    /// Depth-1 eigenfunction, strictly positive.
    pub phi: CylinderFunction,
    /// Depth-1 eigen-measure marginals, a probability vector.
    pub nu: CylinderMeasure,
    pub iterations: usize,
    /// `‖Bᵀφ − λφ‖_∞ / ‖φ‖_∞`.
    pub phi_residual: f64,
    /// `‖Bν − λν‖_1`.
    pub nu_residual: f64,
}

impl SpectralData {
    pub fn spec(&self) -> &SubshiftSpec {
        self.phi.spec()
    }
}

struct PowerRun {
    lambda: f64,
    vector: DVector<f64>,
    iterations: usize,
}

/// Iterations of plain power iteration before switching to `B + λ̂I`. The shift
/// damps eigenvalues of modulus close to `λ` but different argument, which
/// otherwise stall the iteration on nearly periodic matrices.
pub(crate) const SHIFT_AFTER: usize = 1_000;

fn power_iterate(m: &DMatrix<f64>, start: DVector<f64>, tol: f64, max_iter: usize) -> Result<PowerRun> {
    let mut x = &start / start.sum();
    let mut lambda_prev = f64::NAN;
    let target = tol.max(1e-14);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = m * &x;
        let sum_y: f64 = y.iter().sum();
        let lambda = sum_y / x.iter().sum::<f64>();
        residual = (&y - &x * lambda).amax() / (lambda * x.amax());
        let next = if it > SHIFT_AFTER {
            let z = y + &x * lambda;
            let s = z.sum();
            z / s
        } else {
            y / sum_y
        };
        if (lambda - lambda_prev).abs() < tol * lambda && residual < target {
            return Ok(PowerRun {
                lambda,
                vector: next,
                iterations: it,
            });
        }
        lambda_prev = lambda;
        x = next;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Two steps of shifted inverse iteration; keeps the input if they do not help.
fn polish(m: &DMatrix<f64>, run: &mut PowerRun) {
    let d = m.nrows();
    let residual = |v: &DVector<f64>| {
        let y = m * v;
        let lam = y.sum() / v.sum();
        ((&y - v * lam).amax() / (lam * v.amax()), lam)
    };
    let (r0, _) = residual(&run.vector);
    let shift = run.lambda * (1.0 + 1e-9);
    let shifted = m - DMatrix::identity(d, d) * shift;
    let lu = shifted.lu();
    let mut v = run.vector.clone();
    for _ in 0..2 {
        match lu.solve(&v) {
            Some(w) if w.iter().all(|x| x.is_finite()) => {
                let s = w.sum();
                if s == 0.0 {
                    return;
                }
                v = w / s;
            }
            _ => return,
        }
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return;
    }
    let (r1, lam) = residual(&v);
    if r1 <= r0 {
        run.vector = v;
        run.lambda = lam;
    }
}

struct Candidate {
    lambda: f64,
    phi: DVector<f64>,
    nu: DVector<f64>,
    phi_residual: f64,
    nu_residual: f64,
}

impl Candidate {
    fn new(b: &DMatrix<f64>, bt: &DMatrix<f64>, left: &PowerRun, right: &PowerRun) -> Self {
        let nu = &right.vector / right.vector.sum();
        let phi = &left.vector / nu.dot(&left.vector);
        let lambda = 0.5 * (right.lambda + left.lambda);
        let phi_residual = (bt * &phi - &phi * lambda).amax() / phi.amax();
        let nu_residual = (b * &nu - &nu * lambda).abs().sum();
        Candidate {
            lambda,
            phi,
            nu,
            phi_residual,
            nu_residual,
        }
    }

    fn worst(&self) -> f64 {
        self.phi_residual.max(self.nu_residual) / self.lambda
    }
}

/// Solves the Perron eigenproblem for `op` by power iteration on `B` and `Bᵀ`
/// from the all-ones vector.
pub fn rpf_solve(op: &TransferOperator, tol: f64, max_iter: usize) -> Result<SpectralData> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let spec = op.spec();
    if !spec.is_primitive() {
        return Err(Error::NonPrimitive);
    }
    let b = op.matrix();
    let bt = b.transpose();
    let d = b.nrows();
    let uniform = DVector::from_element(d, 1.0);
    let right = power_iterate(b, uniform.clone(), tol, max_iter)?;
    let left = power_iterate(&bt, uniform.clone(), tol, max_iter)?;
    let mut iterations = right.iterations.max(left.iterations);
    let mut best = Candidate::new(b, &bt, &left, &right);
    // inverse iteration usually sharpens the pair, but loses relative accuracy
    // in small components of badly scaled matrices, so keep whichever is better
    let (mut right, mut left) = (right, left);
    polish(b, &mut right);
    polish(&bt, &mut left);
    let polished = Candidate::new(b, &bt, &left, &right);
    if polished.worst() < best.worst() {
        best = polished;
    }
    // one more pass in the coordinates where ν is the constant vector, so that
    // every component is resolved to the same relative accuracy
    if best.worst() > tol && best.nu.iter().all(|&v| v > 0.0) {
        let nu = best.nu.clone();
        let c = DMatrix::from_fn(d, d, |i, j| b[(i, j)] * nu[j] / nu[i]);
        let ct = c.transpose();
        let start = best.phi.component_mul(&nu);
        if let (Ok(r), Ok(l)) = (
            power_iterate(&c, uniform, tol, max_iter),
            power_iterate(&ct, start, tol, max_iter),
        ) {
            iterations += r.iterations.max(l.iterations);
            let right = PowerRun {
                vector: r.vector.component_mul(&nu),
                ..r
            };
            let left = PowerRun {
                vector: l.vector.component_div(&nu),
                ..l
            };
            let refined = Candidate::new(b, &bt, &left, &right);
            if refined.worst() < best.worst() {
                best = refined;
            }
        }
    }
    let Candidate {
        lambda,
        phi,
        nu,
        phi_residual,
        nu_residual,
    } = best;
    if phi_residual > 1e-10 * lambda || nu_residual > 1e-10 * lambda {
        return Err(Error::NoConvergence {
            iterations,
            residual: phi_residual.max(nu_residual) / lambda,
        });
    }
    log::debug!("rpf_solve: lambda={lambda} after {iterations} iterations");
    Ok(SpectralData {
        lambda,
        phi: CylinderFunction::from_values(spec.word_set(1)?, phi.iter().copied().collect())?,
        nu: CylinderMeasure::new(spec.word_set(1)?, nu.iter().copied().collect())?,
        iterations,
        phi_residual,
        nu_residual,
    })
}

/// [`rpf_solve`] with the default tolerance and iteration cap.
pub fn rpf_solve_default(op: &TransferOperator) -> Result<SpectralData> {
    rpf_solve(op, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Stationary order-1 Markov chain on a subshift.
#[derive(Debug, Clone)]
pub struct MarkovMeasure {
    spec: SubshiftSpec,
    p: Vec<f64>,
    transition: DMatrix<f64>,
}

/// Tolerance used when validating externally supplied chains.
pub const MARKOV_TOL: f64 = 1e-10;

impl MarkovMeasure {
    pub fn new(spec: &SubshiftSpec, p: Vec<f64>, transition: DMatrix<f64>) -> Result<Self> {
        let d = spec.alphabet_size();
        if p.len() != d || transition.nrows() != d || transition.ncols() != d {
            return Err(Error::InvalidMeasure(format!("expected {d} states")));
        }
        if p.iter().any(|x| !(*x >= 0.0)) || transition.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidMeasure("negative or NaN probability".into()));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > MARKOV_TOL {
            return Err(Error::InvalidMeasure("stationary vector does not sum to 1".into()));
        }
        for i in 0..d {
            let row: f64 = transition.row(i).sum();
            if (row - 1.0).abs() > MARKOV_TOL {
                return Err(Error::InvalidMeasure(format!("row {i} sums to {row}")));
            }
            for j in 0..d {
                if !spec.allowed(i, j) && transition[(i, j)] != 0.0 {
                    return Err(Error::InvalidMeasure(format!(
                        "positive probability on forbidden transition ({i},{j})"
                    )));
                }
            }
        }
        let m = MarkovMeasure {
            spec: spec.clone(),
            p,
            transition,
        };
        let defect = m.stationarity_defect();
        if defect > MARKOV_TOL {
            return Err(Error::InvalidMeasure(format!("pP != p (defect {defect:e})")));
        }
        Ok(m)
    }

    /// Chain with transition matrix `P` and its stationary vector, found by a
    /// direct linear solve. Requires an irreducible `P`.
    pub fn from_transition(spec: &SubshiftSpec, transition: DMatrix<f64>) -> Result<Self> {
        let p = stationary_vector(&transition)?;
        Self::new(spec, p, transition)
    }

    pub fn spec(&self) -> &SubshiftSpec {
        &self.spec
    }

    pub fn stationary(&self) -> &[f64] {
        &self.p
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// `‖pP − p‖_∞`.
    pub fn stationarity_defect(&self) -> f64 {
        let d = self.p.len();
        (0..d)
            .map(|j| ((0..d).map(|i| self.p[i] * self.transition[(i, j)]).sum::<f64>() - self.p[j]).abs())
            .fold(0.0, f64::max)
    }

    /// `μ[w] = p_{w_0} Π P(w_t, w_{t+1})` on all admissible words of length `n`.
    pub fn cylinder_measure(&self, n: usize) -> Result<CylinderMeasure> {
        let words = self.spec.word_set(n)?;
        let weights = words
            .iter()
            .map(|w| self.cylinder_weight_unchecked(w.symbols()))
            .collect();
        CylinderMeasure::new(words, weights)
    }

    pub fn cylinder_weight(&self, w: &[usize]) -> Result<f64> {
        if w.is_empty() || !self.spec.is_admissible(w) {
            return Err(Error::InadmissibleWord(w.to_vec()));
        }
        Ok(self.cylinder_weight_unchecked(w))
    }

    fn cylinder_weight_unchecked(&self, w: &[usize]) -> f64 {
        w.windows(2)
            .fold(self.p[w[0]], |acc, pair| acc * self.transition[(pair[0], pair[1])])
    }

    /// `∫ f dμ` for a cylinder function of any depth.
    pub fn integrate(&self, f: &CylinderFunction) -> Result<f64> {
        self.cylinder_measure(f.depth())?.integrate(f)
    }
}

/// Stationary distribution of an irreducible stochastic matrix.
pub fn stationary_vector(transition: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = transition.nrows();
    // (Pᵀ − I) p = 0 with the last equation replaced by Σ p = 1
    let mut a = transition.transpose() - DMatrix::identity(d, d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(d);
    rhs[d - 1] = 1.0;
    let p = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidMeasure("transition matrix is not irreducible".into()))?;
    if p.iter().any(|x| !x.is_finite() || *x < -1e-12) {
        return Err(Error::InvalidMeasure("transition matrix is not irreducible".into()));
    }
    let p: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
    let s: f64 = p.iter().sum();
    Ok(p.into_iter().map(|x| x / s).collect())
}

/// The equilibrium Markov chain `μ = φν` of a two-coordinate potential.
#[derive(Debug, Clone)]
pub struct GibbsMeasure {
    pub markov: MarkovMeasure,
    pub potential: CylinderPotential,
    pub spectral: SpectralData,
}

impl GibbsMeasure {
    pub fn cylinder_weight(&self, w: &[usize]) -> Result<f64> {
        self.markov.cylinder_weight(w)
    }
}

/// Builds the Gibbs chain: `p_i = φ_i ν_i`, `P(i,j) = B(i,j) ν_j / (λ ν_i)`.
pub fn gibbs_measure(spectral: &SpectralData, op: &TransferOperator) -> Result<GibbsMeasure> {
    if !spectral.spec().same_as(op.spec()) {
        return Err(Error::SpecMismatch);
    }
    let d = op.spec().alphabet_size();
    let nu = spectral.nu.weights();
    let phi = spectral.phi.values();
    let lambda = spectral.lambda;
    let b = op.matrix();
    let mut transition = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            transition[(i, j)] = b[(i, j)] * nu[j] / (lambda * nu[i]);
        }
        // absorb the eigen-residual so rows are stochastic to rounding
        let s: f64 = transition.row(i).sum();
        for j in 0..d {
            transition[(i, j)] /= s;
        }
    }
    let raw: Vec<f64> = (0..d).map(|i| phi[i] * nu[i]).collect();
    let z: f64 = raw.iter().sum();
    let p = raw.into_iter().map(|x| x / z).collect();
    Ok(GibbsMeasure {
        markov: MarkovMeasure::new(op.spec(), p, transition)?,
        potential: op.potential().clone(),
        spectral: spectral.clone(),
    })
}

/// `ν[w] = λ^{−(n−1)} Π B(w_t, w_{t+1}) · ν_{w_{n−1}}`.
pub fn eigen_measure_cylinder(spectral: &SpectralData, op: &TransferOperator, w: &[usize]) -> Result<f64> {
    if w.is_empty() || !op.spec().is_admissible(w) {
        return Err(Error::InadmissibleWord(w.to_vec()));
    }
    let last = *w.last().expect("non-empty");
    let prod = w
        .windows(2)
        .fold(1.0, |acc, p| acc * op.weight(p[0], p[1]) / spectral.lambda);
    Ok(prod * spectral.nu.weights()[last])
}

/// Eigen-measure weights on all admissible words of length `n`.
pub fn eigen_measure(spectral: &SpectralData, op: &TransferOperator, n: usize) -> Result<CylinderMeasure> {
    let words = op.spec().word_set(n)?;
    let weights = words
        .iter()
        .map(|w| eigen_measure_cylinder(spectral, op, w.symbols()))
        .collect::<Result<Vec<_>>>()?;
    CylinderMeasure::new(words, weights)
}

/// `|λ₂| / λ₁` for the transfer matrix, via deflation `B − λ ν φᵀ`.
pub fn spectral_gap(op: &TransferOperator) -> Result<f64> {
    let sd = rpf_solve_default(op)?;
    Ok(spectral_gap_with(op, &sd))
}

pub fn spectral_gap_with(op: &TransferOperator, sd: &SpectralData) -> f64 {
    let d = op.spec().alphabet_size();
    if d == 1 {
        return 0.0;
    }
    let nu = DVector::from_column_slice(sd.nu.weights());
    let phi = DVector::from_column_slice(sd.phi.values());
    let deflated = op.matrix() - &nu * phi.transpose() * sd.lambda;
    let radius = if d <= 64 {
        deflated
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    } else {
        deflated_radius_iterative(&deflated)
    };
    (radius / sd.lambda).clamp(0.0, 1.0 - f64::EPSILON)
}

/// Growth rate of `‖Dⁿx‖` from a fixed start vector, with restarts every 50 steps.
fn deflated_radius_iterative(deflated: &DMatrix<f64>) -> f64 {
    let d = deflated.nrows();
    let mut x = DVector::from_fn(d, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    x /= x.norm();
    let mut estimate = 0.0;
    for _ in 0..40 {
        let mut log_growth = 0.0;
        let steps = 50;
        for _ in 0..steps {
            let y = deflated * &x;
            let n = y.norm();
            if n == 0.0 {
                return 0.0;
            }
            log_growth += n.ln();
            x = y / n;
        }
        estimate = (log_growth / steps as f64).exp();
    }
    estimate
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// `e_n = ‖Lⁿa − μ(a)‖_∞` for `n = 0..=N`.
    pub errors: Vec<f64>,
    /// `μ(a)` under the Gibbs measure of the normalized operator.
    pub mean: f64,
    pub gap: f64,
    /// Smallest `C` with `e_n ≤ C gapⁿ e_0` on the steps where the right side is representable.
    pub constant: f64,
    pub bound_holds: bool,
    /// Geometric decay rate measured once `Lⁿa` has depth 1.
    pub empirical_rate: f64,
}

/// Iterates a normalized operator on `a` and records the sup-distance to `μ(a)`.
pub fn convergence_report(
    op_norm: &TransferOperator,
    a: &CylinderFunction,
    n_steps: usize,
) -> Result<ConvergenceReport> {
    let defect = op_norm.normalization_defect();
    if defect > 1e-10 {
        return Err(Error::NotNormalized { deviation: defect });
    }
    let sd = rpf_solve_default(op_norm)?;
    let gibbs = gibbs_measure(&sd, op_norm)?;
    let mean = gibbs.markov.integrate(a)?;
    let gap = spectral_gap_with(op_norm, &sd);

    let mut errors = Vec::with_capacity(n_steps + 1);
    let mut current = a.clone();
    for n in 0..=n_steps {
        if n > 0 {
            current = op_norm.apply(&current)?;
        }
        errors.push(current.values().iter().fold(0.0, |m: f64, v| m.max((v - mean).abs())));
    }

    let e0 = errors[0];
    let mut constant: f64 = 0.0;
    let mut bound_holds = true;
    let mut scale = e0;
    for (n, &e) in errors.iter().enumerate() {
        if n > 0 {
            scale *= gap;
        }
        if scale > 1e-280 {
            constant = constant.max(e / scale);
        } else if e > 1e-12 * e0.max(1.0) && n + 1 >= a.depth() {
            bound_holds = false;
        }
    }

    let start = a.depth().saturating_sub(1).min(n_steps);
    let peak = errors.iter().copied().fold(0.0, f64::max);
    let floor = 1e-10 * peak;
    let last = (start + 1..=n_steps).rev().find(|&n| errors[n] > floor);
    let empirical_rate = match last {
        Some(n) if errors[start] > 0.0 => (errors[n] / errors[start]).powf(1.0 / (n - start) as f64),
        _ => 0.0,
    };

    Ok(ConvergenceReport {
        errors,
        mean,
        gap,
        constant,
        bound_holds,
        empirical_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn op_from(spec: &SubshiftSpec, m: &[Vec<f64>]) -> TransferOperator {
        TransferOperator::new(&CylinderPotential::from_weight_matrix(spec, m).unwrap()).unwrap()
    }

    #[test]
    fn nearly_periodic_and_badly_scaled() {
        // eigenvalues ≈ ±1: plain power iteration would not converge
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = op_from(&f2, &[vec![1e-30, 1.0], vec![1.0, 1e-30]]);
        let sd = rpf_solve_default(&op).unwrap();
        assert!((sd.lambda - 1.0).abs() < 1e-12);
        // entries spanning 27 orders of magnitude around a 3-cycle
        let s = SubshiftSpec::new(vec![vec![1, 1, 1], vec![1, 0, 1], vec![1, 0, 0]]).unwrap();
        let op = op_from(
            &s,
            &[
                vec![5e-21, 2e-27, 9e-12],
                vec![3.8e-6, 0.0, 1.0],
                vec![1.6e-8, 0.0, 0.0],
            ],
        );
        let sd = rpf_solve_default(&op).unwrap();
        assert!(sd.nu_residual <= 1e-10 * sd.lambda && sd.phi_residual <= 1e-10 * sd.lambda);
    }

    fn zero_op(spec: &SubshiftSpec) -> TransferOperator {
        TransferOperator::new(&CylinderPotential::constant(spec, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn full_two_shift_zero_potential() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let sd = rpf_solve_default(&zero_op(&f2)).unwrap();
        assert!((sd.lambda - 2.0).abs() < 1e-14);
        assert!(sd.phi.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(sd.nu.weights().iter().all(|v| (v - 0.5).abs() < 1e-14));
    }

    #[test]
    fn constant_potential_scales_lambda() {
        for d in 1..5 {
            let spec = SubshiftSpec::full_shift(d).unwrap();
            let c = 0.7;
            let op = TransferOperator::new(&CylinderPotential::constant(&spec, c).unwrap()).unwrap();
            let sd = rpf_solve_default(&op).unwrap();
            assert!((sd.lambda - d as f64 * c.exp()).abs() < 1e-12 * sd.lambda);
            assert!(sd.phi.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn two_by_two_eigenvalue() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = op_from(&f2, &[vec![2.0, 1.0], vec![1.0, 1.0]]);
        let sd = rpf_solve_default(&op).unwrap();
        assert!((sd.lambda - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_periodic_matrix() {
        let s = SubshiftSpec::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(rpf_solve_default(&zero_op(&s)).unwrap_err(), Error::NonPrimitive);
        assert_eq!(spectral_gap(&zero_op(&s)).unwrap_err(), Error::NonPrimitive);
    }

    #[test]
    fn reports_non_convergence() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = op_from(&f2, &[vec![2.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(rpf_solve(&op, 1e-12, 1), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn gibbs_full_shift_and_constant() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = zero_op(&f2);
        let g = gibbs_measure(&rpf_solve_default(&op).unwrap(), &op).unwrap();
        assert!(g.markov.stationary().iter().all(|p| (p - 0.5).abs() < 1e-14));
        assert!(g.markov.transition().iter().all(|p| (p - 0.5).abs() < 1e-14));

        let m = [vec![0.3, 1.7], vec![0.9, 0.2]];
        let op1 = op_from(&f2, &m);
        let op2 = op_from(&f2, &[vec![0.3 * 5.0, 1.7 * 5.0], vec![0.9 * 5.0, 0.2 * 5.0]]);
        let g1 = gibbs_measure(&rpf_solve_default(&op1).unwrap(), &op1).unwrap();
        let g2 = gibbs_measure(&rpf_solve_default(&op2).unwrap(), &op2).unwrap();
        for (a, b) in g1.markov.transition().iter().zip(g2.markov.transition().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in g1.markov.stationary().iter().zip(g2.markov.stationary()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parry_measure_golden_mean() {
        let gm = SubshiftSpec::golden_mean();
        let op = zero_op(&gm);
        let g = gibbs_measure(&rpf_solve_default(&op).unwrap(), &op).unwrap();
        let p = g.markov.transition();
        assert!((p[(0, 0)] - 1.0 / GOLDEN).abs() < 1e-13);
        assert!((p[(0, 1)] - 1.0 / (GOLDEN * GOLDEN)).abs() < 1e-13);
        assert!((p[(1, 0)] - 1.0).abs() < 1e-13);
        assert_eq!(p[(1, 1)], 0.0);
        // u = v ∝ (g, 1): p ∝ (g², 1)
        let z = GOLDEN * GOLDEN + 1.0;
        assert!((g.markov.stationary()[0] - GOLDEN * GOLDEN / z).abs() < 1e-13);
        assert!(g.markov.stationarity_defect() < 1e-14);
    }

    #[test]
    fn eigen_measure_cylinders() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = zero_op(&f2);
        let sd = rpf_solve_default(&op).unwrap();
        assert!((eigen_measure_cylinder(&sd, &op, &[0, 1]).unwrap() - 0.25).abs() < 1e-15);

        let gm = SubshiftSpec::golden_mean();
        let op = op_from(&gm, &[vec![0.4, 2.5], vec![1.3, 1.0]]);
        let sd = rpf_solve_default(&op).unwrap();
        for i in 0..2 {
            assert_eq!(eigen_measure_cylinder(&sd, &op, &[i]).unwrap(), sd.nu.weights()[i]);
        }
        for n in 1..5 {
            for w in gm.admissible_words(n) {
                let base = eigen_measure_cylinder(&sd, &op, w.symbols()).unwrap();
                let ext: f64 = (0..2)
                    .filter(|&j| gm.allowed(*w.0.last().unwrap(), j))
                    .map(|j| {
                        let mut v = w.0.clone();
                        v.push(j);
                        eigen_measure_cylinder(&sd, &op, &v).unwrap()
                    })
                    .sum();
                assert!((ext - base).abs() < 1e-12);
            }
        }
        assert_eq!(
            eigen_measure_cylinder(&sd, &op, &[1, 1]).unwrap_err(),
            Error::InadmissibleWord(vec![1, 1])
        );
    }

    #[test]
    fn gaps() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        assert!(spectral_gap(&zero_op(&f2)).unwrap() < 1e-12);
        let gm = SubshiftSpec::golden_mean();
        assert!((spectral_gap(&zero_op(&gm)).unwrap() - 1.0 / (GOLDEN * GOLDEN)).abs() < 1e-12);
        let one = SubshiftSpec::new(vec![vec![1]]).unwrap();
        assert_eq!(spectral_gap(&zero_op(&one)).unwrap(), 0.0);
    }

    #[test]
    fn iterative_gap_matches_direct() {
        let f3 = SubshiftSpec::full_shift(3).unwrap();
        let op = op_from(&f3, &[vec![1.0, 2.0, 0.5], vec![0.3, 1.0, 1.0], vec![2.0, 0.1, 0.7]]);
        let sd = rpf_solve_default(&op).unwrap();
        let direct = spectral_gap_with(&op, &sd);
        let nu = DVector::from_column_slice(sd.nu.weights());
        let phi = DVector::from_column_slice(sd.phi.values());
        let deflated = op.matrix() - &nu * phi.transpose() * sd.lambda;
        let iterative = deflated_radius_iterative(&deflated) / sd.lambda;
        assert!((direct - iterative).abs() < 1e-3, "{direct} vs {iterative}");
    }

    #[test]
    fn convergence_examples() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let op = zero_op(&f2);
        let norm = op.normalize(&rpf_solve_default(&op).unwrap()).unwrap();
        let one = CylinderFunction::constant(&f2, 2, 1.0).unwrap();
        let rep = convergence_report(&norm, &one, 5).unwrap();
        assert!(rep.errors.iter().all(|&e| e < 1e-15));
        let a = CylinderFunction::from_values(f2.word_set(1).unwrap(), vec![0.3, 1.9]).unwrap();
        let rep = convergence_report(&norm, &a, 5).unwrap();
        assert!(rep.errors[0] > 0.5);
        assert!(rep.errors[1] < 1e-15);
        assert!(rep.bound_holds);

        let gm = SubshiftSpec::golden_mean();
        let op = zero_op(&gm);
        let norm = op.normalize(&rpf_solve_default(&op).unwrap()).unwrap();
        let ind0 = CylinderFunction::from_values(gm.word_set(1).unwrap(), vec![1.0, 0.0]).unwrap();
        let rep = convergence_report(&norm, &ind0, 30).unwrap();
        let ratio = rep.errors[16] / rep.errors[15];
        assert!((ratio - 1.0 / (GOLDEN * GOLDEN)).abs() < 1e-6, "{ratio}");
        assert!(rep.bound_holds);

        assert!(matches!(
            convergence_report(&op, &ind0, 3),
            Err(Error::NotNormalized { .. })
        ));
    }
}
