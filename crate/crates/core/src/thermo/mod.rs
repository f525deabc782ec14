//! Pressure, entropy, equilibrium checks and the Bowen equation.

mod optim;
mod variational;

pub use optim::{FD_REL_TOL, GRADIENT_TOL};
pub use variational::{
    entropy_rho_independence_check, entropy_variational, inner_infimum, pressure_minmax, Diagnostics, VariationalResult,
};

use crate::error::{Error, Result};
use crate::spectral::{rpf_solve, MarkovMeasure, DEFAULT_MAX_ITER, DEFAULT_TOL, SHIFT_AFTER};
use crate::symbolic::{higher_block_recode, CylinderFunction, CylinderPotential};
use crate::transfer::TransferOperator;

pub const EQUILIBRIUM_TOL: f64 = 1e-8;
pub const MINMAX_TOL: f64 = 1e-4;
pub const BOWEN_TOL: f64 = 1e-10;
/// Above this inverse temperature the Bowen solver works with log-weights throughout.
pub const LOG_SPACE_BETA: f64 = 50.0;

/// `P(A) = log λ` of the (recoded) transfer matrix.
///
/// The potential is shifted by `−max A` before exponentiation; if some allowed
/// weight still underflows, the eigenvalue is computed in log space instead.
pub fn pressure(pot: &CylinderPotential) -> Result<f64> {
    let recoded = higher_block_recode(&pot.canonical())?;
    let pot = recoded.potential;
    if !pot.spec().is_primitive() {
        return Err(Error::NonPrimitive);
    }
    let shift = pot.log_weights().max_value();
    let shifted = pot.shifted(-shift);
    if shifted.log_weights().min_value() < -700.0 {
        return log_space_pressure(&pot);
    }
    let op = TransferOperator::new(&shifted)?;
    let sd = rpf_solve(&op, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(sd.lambda.ln() + shift)
}

/// `log` of the largest eigenvalue modulus from a dense eigen-decomposition of
/// the recoded matrix, independent of the power-iteration path.
pub fn pressure_dense_oracle(pot: &CylinderPotential) -> Result<f64> {
    let recoded = higher_block_recode(&pot.canonical())?;
    let shift = recoded.potential.log_weights().max_value();
    let op = TransferOperator::new(&recoded.potential.shifted(-shift))?;
    let radius = op
        .matrix()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if !(radius > 0.0) {
        return Err(Error::DegenerateSystem);
    }
    Ok(radius.ln() + shift)
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Power iteration on log-vectors: `y_j = LSE_i(A(i,j) + x_i)`.
/// Expects a depth-2 potential on a primitive subshift.
pub fn log_space_pressure(pot: &CylinderPotential) -> Result<f64> {
    let pot = pot.canonical();
    if pot.depth() != 2 {
        return pressure(&pot);
    }
    let spec = pot.spec();
    if !spec.is_primitive() {
        return Err(Error::NonPrimitive);
    }
    let d = spec.alphabet_size();
    let mut a = vec![f64::NEG_INFINITY; d * d];
    for (w, &v) in pot.log_weights().words().iter().zip(pot.log_weights().values()) {
        a[w.0[0] * d + w.0[1]] = v;
    }
    let mut x = vec![0.0; d];
    let mut prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=DEFAULT_MAX_ITER {
        let y: Vec<f64> = (0..d)
            .map(|j| log_sum_exp((0..d).map(|i| a[i * d + j] + x[i])))
            .collect();
        let log_lambda = log_sum_exp(y.iter().copied()) - log_sum_exp(x.iter().copied());
        residual = y
            .iter()
            .zip(&x)
            .map(|(yj, xj)| (yj - xj - log_lambda).abs())
            .fold(0.0, f64::max);
        let next: Vec<f64> = if it > SHIFT_AFTER {
            y.iter()
                .zip(&x)
                .map(|(yj, xj)| log_sum_exp([*yj, xj + log_lambda].into_iter()))
                .collect()
        } else {
            y
        };
        let norm = log_sum_exp(next.iter().copied());
        x = next.iter().map(|v| v - norm).collect();
        if (log_lambda - prev).abs() <= 1e-15 * log_lambda.abs().max(1.0) && residual < 1e-12 {
            return Ok(log_lambda);
        }
        prev = log_lambda;
    }
    Err(Error::NoConvergence {
        iterations: DEFAULT_MAX_ITER,
        residual,
    })
}

/// `h(μ) = −Σ p_i P(i,j) log P(i,j)` with `0 log 0 = 0`.
pub fn entropy_oracle(mu: &MarkovMeasure) -> f64 {
    let p = mu.stationary();
    let t = mu.transition();
    let d = p.len();
    let mut h = 0.0;
    for i in 0..d {
        for j in 0..d {
            let q = t[(i, j)];
            if q > 0.0 {
                h -= p[i] * q * q.ln();
            }
        }
    }
    h
}

/// `∫ A dμ` for a potential of any depth.
pub fn mean_potential(mu: &MarkovMeasure, pot: &CylinderPotential) -> Result<f64> {
    mu.integrate(pot.log_weights())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumReport {
    /// `h(μ) + ∫ log b dμ`.
    pub lhs: f64,
    pub p_of_b: f64,
    /// `p(b) − lhs`; nonnegative up to rounding, zero exactly at the equilibrium state.
    pub gap: f64,
}

pub fn equilibrium_check(mu: &MarkovMeasure, b: &CylinderPotential) -> Result<EquilibriumReport> {
    let b = b.canonical();
    if b.depth() != 2 {
        return Err(Error::DepthMismatch {
            expected: "2 (recode and use a chain on the block alphabet)".into(),
            found: b.depth(),
        });
    }
    if !b.spec().same_as(mu.spec()) {
        return Err(Error::SpecMismatch);
    }
    let lhs = entropy_oracle(mu) + mean_potential(mu, &b)?;
    let p_of_b = pressure(&b)?;
    Ok(EquilibriumReport {
        lhs,
        p_of_b,
        gap: p_of_b - lhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BowenRoot {
    pub beta: f64,
    /// `P(−β log H)` at the returned root.
    pub pressure: f64,
    pub iterations: usize,
}

/// `β ↦ P(−β log H)`, in log space above [`LOG_SPACE_BETA`].
pub fn bowen_pressure(h: &CylinderFunction, beta: f64) -> Result<f64> {
    let pot = CylinderPotential::from_h(h, beta)?;
    if beta > LOG_SPACE_BETA {
        let recoded = higher_block_recode(&pot.canonical())?;
        log_space_pressure(&recoded.potential)
    } else {
        pressure(&pot)
    }
}

/// Root of the Bowen equation `P(−β log H) = 0` for `min H > 1`.
pub fn bowen_root(h: &CylinderFunction, tol: f64) -> Result<BowenRoot> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let min_h = h.min_value();
    if !(min_h > 1.0) {
        return Err(Error::HNotExpanding { min_h });
    }
    let p0 = bowen_pressure(h, 0.0)?;
    if p0 <= 1e-14 {
        return Err(Error::DegenerateSystem);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    loop {
        let p = bowen_pressure(h, hi)?;
        iterations += 1;
        if p.abs() < tol {
            return Ok(BowenRoot {
                beta: hi,
                pressure: p,
                iterations,
            });
        }
        if p < 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::NoConvergence {
                iterations,
                residual: p,
            });
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let p = bowen_pressure(h, mid)?;
        iterations += 1;
        if p.abs() < tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            if p.abs() >= tol {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: p.abs(),
                });
            }
            return Ok(BowenRoot {
                beta: mid,
                pressure: p,
                iterations,
            });
        }
        if p > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
