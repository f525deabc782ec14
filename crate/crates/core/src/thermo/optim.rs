//! Small dense optimizers: damped Newton for the convex inner infimum and
//! BFGS for the outer supremum over Markov chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Gradient norm required of every inner solve.
pub const GRADIENT_TOL: f64 = 1e-9;
/// Largest accepted relative error between analytic and central-difference gradients.
pub const FD_REL_TOL: f64 = 1e-5;

pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Sum of the absolute values of the terms that make up `value(x)`; sets
    /// the rounding-noise level of finite differences.
    fn magnitude(&self, x: &DVector<f64>) -> f64 {
        self.value(x).abs()
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub fn newton_minimize<F: SmoothObjective>(f: &F, x0: DVector<f64>, max_iter: usize) -> Result<NewtonOutcome> {
    let n = f.dim();
    let mut x = x0;
    let mut value = f.value(&x);
    let mut grad = f.gradient(&x);
    for it in 0..max_iter {
        let gnorm = grad.norm();
        if gnorm < GRADIENT_TOL {
            return Ok(NewtonOutcome {
                x,
                value,
                iterations: it,
                gradient_norm: gnorm,
            });
        }
        let h = f.hessian(&x);
        let scale = h.diagonal().amax().max(1e-300);
        let mut tau = 1e-12 * scale;
        let step = loop {
            let reg = &h + DMatrix::identity(n, n) * tau;
            if let Some(ch) = reg.cholesky() {
                break ch.solve(&(-&grad));
            }
            tau *= 100.0;
            if tau > 1e12 * scale {
                break -&grad;
            }
        };
        let slope = grad.dot(&step);
        let step = if slope < 0.0 { step } else { -&grad };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-20 {
            let trial = &x + &step * t;
            let v = f.value(&trial);
            if v.is_finite() && v <= value + 1e-4 * t * slope {
                x = trial;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        grad = f.gradient(&x);
        if !accepted {
            let gnorm = grad.norm();
            if gnorm < GRADIENT_TOL {
                break;
            }
            return Err(Error::Optimizer {
                message: "line search made no progress".into(),
                iterations: it + 1,
                gradient_norm: gnorm,
            });
        }
    }
    let gnorm = grad.norm();
    if gnorm < GRADIENT_TOL {
        return Ok(NewtonOutcome {
            x,
            value,
            iterations: max_iter,
            gradient_norm: gnorm,
        });
    }
    Err(Error::Optimizer {
        message: "iteration limit reached".into(),
        iterations: max_iter,
        gradient_norm: gnorm,
    })
}

/// Relative error `‖g − g_fd‖_∞ / ‖g_fd‖_∞` of the analytic gradient against
/// central differences with step `h`.
///
/// Gradients below the level at which rounding in `f` alone would produce a
/// relative error of [`FD_REL_TOL`] are measured against that level instead.
pub fn gradient_check<F: SmoothObjective>(f: &F, x: &DVector<f64>, h: f64) -> f64 {
    let g = f.gradient(x);
    let mut fd = DVector::zeros(f.dim());
    for i in 0..f.dim() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        fd[i] = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
    }
    let noise = f64::EPSILON * f.magnitude(x).max(1.0) / h;
    let floor = (noise / FD_REL_TOL).max(1e-6);
    (&g - &fd).amax() / fd.amax().max(floor)
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective value at every accepted iterate, starting point included.
    pub trace: Vec<f64>,
}

/// Minimizes `f` by BFGS with Armijo backtracking. `grad` may be a finite-difference
/// approximation; the run stops early when the line search stalls.
pub fn bfgs_minimize(
    mut f: impl FnMut(&DVector<f64>) -> f64,
    mut grad: impl FnMut(&DVector<f64>) -> DVector<f64>,
    x0: DVector<f64>,
    gtol: f64,
    max_iter: usize,
) -> BfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut value = f(&x);
    let mut trace = vec![value];
    if n == 0 {
        return BfgsOutcome {
            x,
            iterations: 0,
            gradient_norm: 0.0,
            trace,
        };
    }
    let mut g = grad(&x);
    let mut inv_h = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    while iterations < max_iter && g.amax() >= gtol {
        iterations += 1;
        let mut dir = -(&inv_h * &g);
        if dir.dot(&g) >= 0.0 {
            inv_h = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        let slope = dir.dot(&g);
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-14 {
            let trial = &x + &dir * t;
            let v = f(&trial);
            if v.is_finite() && v <= value + 1e-4 * t * slope {
                next = Some((trial, v));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, v_new)) = next else { break };
        let g_new = grad(&x_new);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - &s * y.transpose() * rho;
            let right = &i - &y * s.transpose() * rho;
            inv_h = &left * &inv_h * &right + &s * s.transpose() * rho;
        }
        x = x_new;
        value = v_new;
        g = g_new;
        trace.push(value);
    }
    BfgsOutcome {
        x,
        iterations,
        gradient_norm: g.amax(),
        trace,
    }
}
