//! Entropy as an infimum over positive cylinder functions, and pressure as a
//! sup-inf over Markov chains.
//!
//! For a positive depth-`k` function `a = e^x` the inner functional is
//! `G(x) = Σ_y μ[y] log (L a)(y) − Σ_u μ[u] x(u) + c`, with `y` ranging over
//! words of length `max(k−1, 1)` and `u` over words of length `k`. Each
//! `log (L a)(y)` is a log-sum-exp of affine functions of `x`, so `G` is convex
//! and is minimized by damped Newton.

use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::optim::{bfgs_minimize, gradient_check, newton_minimize, SmoothObjective, FD_REL_TOL};
use crate::error::{Error, Result};
use crate::spectral::MarkovMeasure;
use crate::symbolic::{higher_block_recode, CylinderFunction, CylinderPotential, SubshiftSpec, WordSet};

const NEWTON_MAX_ITER: usize = 500;
const OUTER_MAX_ITER: usize = 400;
const OUTER_GTOL: f64 = 1e-8;
const OUTER_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub restarts: usize,
    pub gradient_norm: f64,
    /// Relative error of the analytic inner gradient against central differences.
    pub fd_relative_error: f64,
    /// Outer objective at each accepted iterate, one list per restart.
    pub outer_traces: Vec<Vec<f64>>,
    pub best_restart: usize,
}

#[derive(Debug, Clone)]
pub struct VariationalResult {
    pub value: f64,
    /// The optimal positive cylinder function, scaled to max 1.
    pub argmin: CylinderFunction,
    /// The maximizing chain (min-max only).
    pub measure: Option<MarkovMeasure>,
    pub depth: usize,
    pub diagnostics: Diagnostics,
}

/// Which `x(u)` enter each `log (L a)(y)`, with the log-weight attached.
struct InfStructure {
    vars: Arc<WordSet>,
    outputs: Arc<WordSet>,
    terms: Vec<Vec<(usize, f64)>>,
}

impl InfStructure {
    fn new(pot: &CylinderPotential, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        let spec = pot.spec();
        let d = spec.alphabet_size();
        let log = pot.log_weights();
        let mut logb = vec![f64::NEG_INFINITY; d * d];
        for (w, &v) in log.words().iter().zip(log.values()) {
            logb[w.0[0] * d + w.0[1]] = v;
        }
        let vars = spec.word_set(k)?;
        let outputs = spec.word_set(k.max(2) - 1)?;
        let terms = outputs
            .iter()
            .map(|y| {
                let y0 = y.0[0];
                (0..d)
                    .filter(|&c| spec.allowed(c, y0))
                    .map(|c| {
                        let var = if k == 1 {
                            c
                        } else {
                            let mut u = Vec::with_capacity(k);
                            u.push(c);
                            u.extend_from_slice(&y.0);
                            vars.index_of(&u).expect("c·y admissible")
                        };
                        (var, logb[c * d + y0])
                    })
                    .collect()
            })
            .collect();
        Ok(InfStructure { vars, outputs, terms })
    }

    fn objective<'a>(&'a self, mu: &MarkovMeasure, constant: f64) -> Result<InfObjective<'a>> {
        let m1 = mu.cylinder_measure(self.outputs.depth())?.weights().to_vec();
        let m2 = mu.cylinder_measure(self.vars.depth())?.weights().to_vec();
        Ok(InfObjective {
            structure: self,
            m1,
            m2,
            constant,
        })
    }
}

struct InfObjective<'a> {
    structure: &'a InfStructure,
    m1: Vec<f64>,
    m2: Vec<f64>,
    constant: f64,
}

impl InfObjective<'_> {
    fn term_lse(entries: &[(usize, f64)], x: &DVector<f64>) -> (f64, f64) {
        let m = entries
            .iter()
            .map(|&(u, lb)| lb + x[u])
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = entries.iter().map(|&(u, lb)| (lb + x[u] - m).exp()).sum();
        (m + s.ln(), m)
    }
}

impl SmoothObjective for InfObjective<'_> {
    fn dim(&self) -> usize {
        self.m2.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.constant;
        for (entries, &w) in self.structure.terms.iter().zip(&self.m1) {
            if w > 0.0 {
                v += w * Self::term_lse(entries, x).0;
            }
        }
        v - self.m2.iter().zip(x.iter()).map(|(m, xi)| m * xi).sum::<f64>()
    }

    fn magnitude(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.constant.abs();
        for (entries, &w) in self.structure.terms.iter().zip(&self.m1) {
            if w > 0.0 {
                v += w * Self::term_lse(entries, x).0.abs();
            }
        }
        v + self.m2.iter().zip(x.iter()).map(|(m, xi)| (m * xi).abs()).sum::<f64>()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::from_iterator(self.m2.len(), self.m2.iter().map(|m| -m));
        for (entries, &w) in self.structure.terms.iter().zip(&self.m1) {
            if w > 0.0 {
                let (lse, _) = Self::term_lse(entries, x);
                for &(u, lb) in entries {
                    g[u] += w * (lb + x[u] - lse).exp();
                }
            }
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.m2.len();
        let mut h = DMatrix::zeros(n, n);
        for (entries, &w) in self.structure.terms.iter().zip(&self.m1) {
            if w > 0.0 {
                let (lse, _) = Self::term_lse(entries, x);
                let pi: Vec<(usize, f64)> = entries.iter().map(|&(u, lb)| (u, (lb + x[u] - lse).exp())).collect();
                for &(u, pu) in &pi {
                    h[(u, u)] += w * pu;
                    for &(v, pv) in &pi {
                        h[(u, v)] -= w * pu * pv;
                    }
                }
            }
        }
        h
    }
}

fn check_point(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| 0.5 * (1.7 * i as f64 + 0.3).sin())
}

fn validate_gradient(obj: &InfObjective<'_>) -> Result<f64> {
    let err = gradient_check(obj, &check_point(obj.dim()), 1e-5);
    if !(err < FD_REL_TOL) {
        return Err(Error::Optimizer {
            message: format!("analytic gradient disagrees with finite differences (relative error {err:e})"),
            iterations: 0,
            gradient_norm: f64::NAN,
        });
    }
    Ok(err)
}

fn argmin_function(structure: &InfStructure, x: &DVector<f64>) -> Result<CylinderFunction> {
    let m = x.max();
    CylinderFunction::from_values(structure.vars.clone(), x.iter().map(|v| (v - m).exp()).collect())
}

fn check_two_coordinate(pot: &CylinderPotential, spec: &SubshiftSpec) -> Result<CylinderPotential> {
    let pot = pot.canonical();
    if pot.depth() != 2 {
        return Err(Error::DepthMismatch {
            expected: "2 (recode first)".into(),
            found: pot.depth(),
        });
    }
    if !pot.spec().same_as(spec) {
        return Err(Error::SpecMismatch);
    }
    Ok(pot)
}

/// `inf_a μ(log(L_ρ a / (ρ a)))` over strictly positive depth-`k` functions `a`.
pub fn entropy_variational(mu: &MarkovMeasure, rho: &CylinderPotential, k: usize) -> Result<VariationalResult> {
    let rho = check_two_coordinate(rho, mu.spec())?;
    let structure = InfStructure::new(&rho, k)?;
    let constant = -mu.integrate(rho.log_weights())?;
    let obj = structure.objective(mu, constant)?;
    let fd_err = validate_gradient(&obj)?;
    let out = newton_minimize(&obj, DVector::zeros(obj.dim()), NEWTON_MAX_ITER)?;
    Ok(VariationalResult {
        value: out.value,
        argmin: argmin_function(&structure, &out.x)?,
        measure: None,
        depth: k,
        diagnostics: Diagnostics {
            iterations: out.iterations,
            restarts: 1,
            gradient_norm: out.gradient_norm,
            fd_relative_error: fd_err,
            outer_traces: Vec::new(),
            best_restart: 0,
        },
    })
}

/// The same infimum computed with two different weights. The second run uses
/// depth `max(k, e)` where `e` is the effective depth of `ρ/ρ′`, the smallest
/// class closed under the substitution `a′ = aρ/ρ′`.
pub fn entropy_rho_independence_check(
    mu: &MarkovMeasure,
    rho: &CylinderPotential,
    rho_prime: &CylinderPotential,
    k: usize,
) -> Result<(VariationalResult, VariationalResult)> {
    let rho = check_two_coordinate(rho, mu.spec())?;
    let rho_prime = check_two_coordinate(rho_prime, mu.spec())?;
    let ratio = rho.log_weights().sub(rho_prime.log_weights())?;
    let k_prime = k.max(ratio.effective_depth(1e-12));
    let first = entropy_variational(mu, &rho, k)?;
    let second = entropy_variational(mu, &rho_prime, k_prime)?;
    Ok((first, second))
}

/// `inf_f μ(log(L f / f))` over positive depth-`k` functions, for a two-coordinate potential.
pub fn inner_infimum(mu: &MarkovMeasure, pot: &CylinderPotential, k: usize) -> Result<f64> {
    let pot = check_two_coordinate(pot, mu.spec())?;
    let structure = InfStructure::new(&pot, k)?;
    let obj = structure.objective(mu, 0.0)?;
    validate_gradient(&obj)?;
    Ok(newton_minimize(&obj, DVector::zeros(obj.dim()), NEWTON_MAX_ITER)?.value)
}

/// Softmax coordinates for row-stochastic matrices on the transition support.
/// The first allowed entry of each row is the reference with coordinate 0.
struct ChainParams {
    spec: SubshiftSpec,
    free: Vec<(usize, usize)>,
}

impl ChainParams {
    fn new(spec: &SubshiftSpec) -> Self {
        let d = spec.alphabet_size();
        let mut free = Vec::new();
        for i in 0..d {
            let allowed: Vec<usize> = (0..d).filter(|&j| spec.allowed(i, j)).collect();
            free.extend(allowed.iter().skip(1).map(|&j| (i, j)));
        }
        ChainParams {
            spec: spec.clone(),
            free,
        }
    }

    fn dim(&self) -> usize {
        self.free.len()
    }

    fn chain(&self, theta: &DVector<f64>) -> Result<MarkovMeasure> {
        let d = self.spec.alphabet_size();
        let mut logits = DMatrix::from_element(d, d, f64::NEG_INFINITY);
        for i in 0..d {
            for j in 0..d {
                if self.spec.allowed(i, j) {
                    logits[(i, j)] = 0.0;
                }
            }
        }
        for (&(i, j), &t) in self.free.iter().zip(theta.iter()) {
            logits[(i, j)] = t;
        }
        let mut p = DMatrix::zeros(d, d);
        for i in 0..d {
            let m = logits.row(i).max();
            let z: f64 = logits.row(i).iter().map(|l| (l - m).exp()).sum();
            for j in 0..d {
                p[(i, j)] = (logits[(i, j)] - m).exp() / z;
            }
        }
        MarkovMeasure::from_transition(&self.spec, p)
    }
}

struct RestartOutcome {
    value: f64,
    theta: DVector<f64>,
    x: DVector<f64>,
    iterations: usize,
    gradient_norm: f64,
    trace: Vec<f64>,
}

fn run_restart(structure: &InfStructure, params: &ChainParams, theta0: DVector<f64>) -> Result<RestartOutcome> {
    let warm = RefCell::new(DVector::zeros(structure.vars.len()));
    let inner = |theta: &DVector<f64>| -> Option<f64> {
        let mu = params.chain(theta).ok()?;
        let obj = structure.objective(&mu, 0.0).ok()?;
        let start = warm.borrow().clone();
        let out = newton_minimize(&obj, start, NEWTON_MAX_ITER).ok()?;
        *warm.borrow_mut() = out.x;
        Some(out.value)
    };
    let neg = |theta: &DVector<f64>| inner(theta).map(|v| -v).unwrap_or(f64::NAN);
    let start_value = neg(&theta0);
    if !start_value.is_finite() {
        return Err(Error::Optimizer {
            message: "inner infimum failed at the starting chain".into(),
            iterations: 0,
            gradient_norm: f64::NAN,
        });
    }
    let grad = |theta: &DVector<f64>| {
        DVector::from_fn(theta.len(), |i, _| {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += OUTER_FD_STEP;
            tm[i] -= OUTER_FD_STEP;
            let g = (neg(&tp) - neg(&tm)) / (2.0 * OUTER_FD_STEP);
            if g.is_finite() {
                g
            } else {
                0.0
            }
        })
    };
    let out = bfgs_minimize(neg, grad, theta0, OUTER_GTOL, OUTER_MAX_ITER);
    // re-solve at the final chain for the maximizer's inner argmin
    let final_value = inner(&out.x).ok_or_else(|| Error::Optimizer {
        message: "inner infimum failed at the final chain".into(),
        iterations: out.iterations,
        gradient_norm: out.gradient_norm,
    })?;
    Ok(RestartOutcome {
        value: final_value,
        theta: out.x,
        x: warm.into_inner(),
        iterations: out.iterations,
        gradient_norm: out.gradient_norm,
        trace: out.trace.into_iter().map(|v| -v).collect(),
    })
}

/// `sup_μ inf_f ∫ log(L f / f) dμ` over order-1 chains on the (recoded) shift
/// and positive depth-`k` functions `f`.
pub fn pressure_minmax(pot: &CylinderPotential, k: usize, restarts: usize, seed: u64) -> Result<VariationalResult> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let recoded = higher_block_recode(&pot.canonical())?;
    let pot = recoded.potential;
    if !pot.spec().is_primitive() {
        return Err(Error::NonPrimitive);
    }
    let structure = InfStructure::new(&pot, k)?;
    let params = ChainParams::new(pot.spec());

    // validate the inner gradient once on the uniform-logit chain
    let mu0 = params.chain(&DVector::zeros(params.dim()))?;
    let fd_err = validate_gradient(&structure.objective(&mu0, 0.0)?)?;

    let starts: Vec<DVector<f64>> = (0..restarts)
        .map(|r| {
            if r == 0 {
                DVector::zeros(params.dim())
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                DVector::from_fn(params.dim(), |_, _| rng.gen_range(-1.5..1.5))
            }
        })
        .collect();
    let outcomes: Vec<Result<RestartOutcome>> = starts
        .into_par_iter()
        .map(|t0| run_restart(&structure, &params, t0))
        .collect();

    let mut best: Option<(usize, RestartOutcome)> = None;
    let mut traces = Vec::with_capacity(restarts);
    let mut total_iterations = 0;
    let mut last_err = None;
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                total_iterations += o.iterations;
                traces.push(o.trace.clone());
                let better = best.as_ref().is_none_or(|(_, b)| o.value > b.value);
                if better {
                    best = Some((idx, o));
                }
            }
            Err(e) => {
                traces.push(Vec::new());
                last_err = Some(e);
            }
        }
    }
    let (best_idx, best) = match best {
        Some(b) => b,
        None => return Err(last_err.expect("at least one restart ran")),
    };
    log::info!(
        "pressure_minmax: best restart {best_idx} value {} after {total_iterations} outer iterations",
        best.value
    );
    Ok(VariationalResult {
        value: best.value,
        argmin: argmin_function(&structure, &best.x)?,
        measure: Some(params.chain(&best.theta)?),
        depth: k,
        diagnostics: Diagnostics {
            iterations: total_iterations,
            restarts,
            gradient_norm: best.gradient_norm,
            fd_relative_error: fd_err,
            outer_traces: traces,
            best_restart: best_idx,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{gibbs_measure, rpf_solve_default};
    use crate::thermo::{entropy_oracle, pressure};
    use crate::transfer::TransferOperator;
    use std::f64::consts::LN_2;

    fn b211() -> (SubshiftSpec, CylinderPotential) {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let pot = CylinderPotential::from_weight_matrix(&f2, &[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        (f2, pot)
    }

    fn gibbs(pot: &CylinderPotential) -> MarkovMeasure {
        let op = TransferOperator::new(pot).unwrap();
        gibbs_measure(&rpf_solve_default(&op).unwrap(), &op).unwrap().markov
    }

    #[test]
    fn matched_gibbs_depth_one_attains_entropy_at_eigenfunction() {
        let (_, pot) = b211();
        let mu = gibbs(&pot);
        let res = entropy_variational(&mu, &pot, 1).unwrap();
        assert!((res.value - entropy_oracle(&mu)).abs() < 1e-10);
        assert!(res.diagnostics.fd_relative_error < FD_REL_TOL);
        // argmin ∝ φ, left eigenvector (λ−1, 1) of the symmetric matrix
        let lam = (3.0 + 5f64.sqrt()) / 2.0;
        let a = res.argmin.values();
        assert!((a[1] / a[0] - 1.0 / (lam - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn normalized_weight_gives_log_two() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let half = CylinderPotential::constant(&f2, -LN_2).unwrap();
        let mu = MarkovMeasure::new(&f2, vec![0.5, 0.5], DMatrix::from_element(2, 2, 0.5)).unwrap();
        let res = entropy_variational(&mu, &half, 1).unwrap();
        assert!((res.value - LN_2).abs() < 1e-12);
        assert!(res.argmin.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn restricted_infimum_dominates_entropy() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let one = CylinderPotential::constant(&f2, 0.0).unwrap();
        let mu = MarkovMeasure::new(
            &f2,
            vec![0.9, 0.1],
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.9, 0.1]),
        )
        .unwrap();
        let h = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        let j1 = entropy_variational(&mu, &one, 1).unwrap().value;
        let j2 = entropy_variational(&mu, &one, 2).unwrap().value;
        assert!(j1 >= j2 - 1e-9 && j2 >= h - 1e-9, "{j1} {j2} {h}");
    }

    #[test]
    fn independence_of_weight() {
        let (f2, pot) = b211();
        let mu = gibbs(&pot);
        let c1 = CylinderPotential::constant(&f2, 0.0).unwrap();
        let c5 = CylinderPotential::constant(&f2, 5f64.ln()).unwrap();
        let bern = MarkovMeasure::new(
            &f2,
            vec![0.7, 0.3],
            DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.7, 0.3]),
        )
        .unwrap();
        let (a, b) = entropy_rho_independence_check(&bern, &c1, &c5, 1).unwrap();
        assert_eq!(b.depth, 1);
        assert!((a.value - b.value).abs() < 1e-10);
        let (a, b) = entropy_rho_independence_check(&mu, &pot, &c1, 2).unwrap();
        assert!((a.value - b.value).abs() < 1e-6);
        assert!((a.value - entropy_oracle(&mu)).abs() < 1e-6);
    }

    #[test]
    fn minmax_full_shift_and_b211() {
        let f2 = SubshiftSpec::full_shift(2).unwrap();
        let zero = CylinderPotential::constant(&f2, 0.0).unwrap();
        let r = pressure_minmax(&zero, 1, 4, 7).unwrap();
        assert!((r.value - LN_2).abs() < 1e-4);
        let (_, pot) = b211();
        let r = pressure_minmax(&pot, 1, 8, 1).unwrap();
        assert!((r.value - pressure(&pot).unwrap()).abs() < 1e-4);
        for tr in &r.diagnostics.outer_traces {
            assert!(tr.iter().all(|&v| v <= pressure(&pot).unwrap() + 1e-8));
        }
    }

    #[test]
    fn minmax_is_deterministic_for_a_seed() {
        let gm = SubshiftSpec::golden_mean();
        let pot = CylinderPotential::from_weight_matrix(&gm, &[vec![0.5, 1.5], vec![2.0, 1.0]]).unwrap();
        let a = pressure_minmax(&pot, 2, 3, 11).unwrap();
        let b = pressure_minmax(&pot, 2, 3, 11).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.diagnostics, b.diagnostics);
    }
}
