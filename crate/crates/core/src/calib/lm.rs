//! Dense Levenberg–Marquardt with Marquardt diagonal scaling and numeric
//! Jacobians.
//!
//! Jacobian columns are computed independently and assembled in parameter
//! order, so the result does not depend on how many threads ran them.

use nalgebra::{DMatrix, DVector};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    pub lambda0: f64,
    /// Stop once an accepted step lowers the cost by less than this
    /// fraction.
    pub ftol: f64,
    /// Central-difference step relative to `max(|x_j|, 1)`.
    pub rel_step: f64,
    /// Relative eigenvalue cut for the damped normal equations.
    pub pinv_cut: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            lambda0: 1e-3,
            ftol: 1e-12,
            rel_step: 1e-6,
            pinv_cut: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult {
    pub x: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `‖r‖²`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Jacobian at `x`.
    pub jacobian: DMatrix<f64>,
}

const LAMBDA_MAX: f64 = 1e16;

fn step_size(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

fn columns<F>(n: usize, col: F) -> Result<Vec<DVector<f64>>>
where
    F: Fn(usize) -> Result<DVector<f64>> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(&col).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(col).collect()
    }
}

fn assemble(rows: usize, cols: Vec<DVector<f64>>) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(rows, cols.len());
    for (c, v) in cols.iter().enumerate() {
        j.set_column(c, v);
    }
    j
}

/// Central differences with `h = rel · max(|x_j|, 1)`.
pub fn central_jacobian<F>(f: &F, x: &DVector<f64>, rows: usize, rel: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let cols = columns(x.len(), |j| {
        let h = step_size(x[j], rel);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let width = xp[j] - xm[j];
        Ok((f(&xp)? - f(&xm)?) / width)
    })?;
    Ok(assemble(rows, cols))
}

/// One-sided differences, used to cross-check [`central_jacobian`].
pub fn forward_jacobian<F>(f: &F, x: &DVector<f64>, rows: usize, rel: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let r0 = f(x)?;
    let cols = columns(x.len(), |j| {
        let mut xp = x.clone();
        xp[j] += step_size(x[j], rel);
        let width = xp[j] - x[j];
        Ok((f(&xp)? - &r0) / width)
    })?;
    Ok(assemble(rows, cols))
}

/// Minimizes `‖f(x)‖²` from `x0`.
///
/// A trial point where `f` fails counts as a rejected step. The run is
/// reported converged when the relative decrease drops below `ftol`, when
/// the cost reaches zero, or when no damping makes progress; it is not
/// converged only when `max_iter` runs out.
pub fn levenberg_marquardt<F>(f: &F, x0: DVector<f64>, opts: &LmOptions) -> Result<LmResult>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let mut x = x0;
    let mut r = f(&x)?;
    let rows = r.len();
    let mut cost = r.norm_squared();
    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = central_jacobian(f, &x, rows, opts.rel_step)?;

    while iterations < opts.max_iter {
        if cost == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let dmax = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let diag = jtj.diagonal().map(|d| d.max(1e-12 * dmax));

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * diag[i];
            }
            let delta = -linalg::pinv_symmetric(&a, opts.pinv_cut) * &g;
            let trial = &x + &delta;
            match f(&trial) {
                Ok(rt) if rt.norm_squared() < cost => {
                    let new_cost = rt.norm_squared();
                    let decrease = (cost - new_cost) / cost;
                    x = trial;
                    r = rt;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-15);
                    accepted = true;
                    if decrease < opts.ftol {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            converged = true;
            break;
        }
        jac = central_jacobian(f, &x, rows, opts.rel_step)?;
        if converged {
            break;
        }
    }

    Ok(LmResult {
        x,
        residuals: r,
        cost,
        iterations,
        converged,
        jacobian: jac,
    })
}
