//! BFGS minimization with a backtracking Armijo line search, driven by
//! central-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::likelihood::numerical_gradient;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when ‖g‖∞ falls to this.
    pub gtol: f64,
    /// Stop when |Δf| ≤ ftol·max(1, |f|) and the gradient is also small.
    pub ftol: f64,
    /// Largest allowed ‖step‖∞ of a single trial.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            gtol: 1e-6,
            ftol: 1e-10,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    FunctionTolerance,
    LineSearchStalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

/// Once `ftol` triggers, the gradient must also be at most this for the run
/// to count as converged.
const FTOL_GRAD_GUARD: f64 = 1e-4;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f` from `x0`. `f` may return +∞ or NaN to reject a point.
pub fn minimize<F>(f: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsResult>
where
    F: Fn(&[f64]) -> f64,
{
    let d = x0.len();
    let clean = |v: &[f64]| {
        let y = f(v);
        if y.is_nan() {
            f64::INFINITY
        } else {
            y
        }
    };

    let mut x = DVector::from_column_slice(x0);
    let mut fx = clean(x.as_slice());
    if !fx.is_finite() {
        return Err(Error::NonFiniteValue);
    }
    let grad = |v: &DVector<f64>| numerical_gradient(clean, v.as_slice());
    let mut g = grad(&x)?;
    let mut hinv = DMatrix::<f64>::identity(d, d);
    let mut fresh = true;
    let mut resets = 0usize;

    for iter in 0..opts.max_iter {
        let gnorm = inf_norm(&g);
        if gnorm <= opts.gtol {
            return Ok(BfgsResult {
                x: x.as_slice().to_vec(),
                fx,
                grad: g,
                iterations: iter,
                converged: true,
                termination: Termination::GradientTolerance,
            });
        }

        let mut p = -(&hinv * &g);
        let mut slope = g.dot(&p);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(d, d);
            fresh = true;
            p = -g.clone();
            slope = g.dot(&p);
        }
        let pmax = inf_norm(&p);
        let mut t = if pmax > opts.max_step {
            opts.max_step / pmax
        } else {
            1.0
        };

        // Backtracking with Armijo sufficient decrease.
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &p * t;
            let fnew = clean(xn.as_slice());
            if fnew.is_finite() && fnew <= fx + 1e-4 * t * slope {
                if let Ok(gn) = grad(&xn) {
                    accepted = Some((xn, fnew, gn));
                    break;
                }
            }
            t *= 0.5;
        }

        let Some((xn, fnew, gn)) = accepted else {
            if !fresh && resets < 3 {
                hinv = DMatrix::identity(d, d);
                fresh = true;
                resets += 1;
                continue;
            }
            let converged = gnorm <= FTOL_GRAD_GUARD;
            return Ok(BfgsResult {
                x: x.as_slice().to_vec(),
                fx,
                grad: g,
                iterations: iter,
                converged,
                termination: Termination::LineSearchStalled,
            });
        };

        let s = &xn - &x;
        let y = &gn - &g;
        let df = (fx - fnew).abs();
        x = xn;
        g = gn;
        let f_prev = fx;
        fx = fnew;

        if df <= opts.ftol * f_prev.abs().max(1.0) {
            let gnorm = inf_norm(&g);
            if gnorm <= FTOL_GRAD_GUARD || gnorm <= opts.gtol {
                return Ok(BfgsResult {
                    x: x.as_slice().to_vec(),
                    fx,
                    grad: g,
                    iterations: iter + 1,
                    converged: true,
                    termination: Termination::FunctionTolerance,
                });
            }
        }

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                // Rescale the initial inverse Hessian to the observed curvature.
                hinv *= sy / y.dot(&y);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H⁺ = H − ρ(s yᵀH + H y sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            hinv -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
    }

    Ok(BfgsResult {
        x: x.as_slice().to_vec(),
        fx,
        grad: g.clone(),
        iterations: opts.max_iter,
        converged: inf_norm(&g) <= opts.gtol,
        termination: Termination::MaxIterations,
    })
}
