//! Central finite differences. These are the oracles behind every
//! analytic-derivative check and the fallback when a model does not supply a
//! closed-form derivative.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Default relative step for derivative fallbacks.
pub const RELATIVE_STEP: f64 = 1e-6;

/// Per-coordinate step `h * max(1, |x_i|)`.
pub fn step_for(x: f64, h: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Central-difference gradient of a scalar map.
pub fn fd_gradient<F>(f: F, x: &Vector, h: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut grad = Vector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let hi = step_for(x[i], h);
        probe[i] = x[i] + hi;
        let fp = f(&probe);
        probe[i] = x[i] - hi;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::EvalFailed);
        }
        grad[i] = (fp - fm) / (2.0 * hi);
    }
    Ok(grad)
}

/// Central-difference Jacobian `∂f/∂x` (rows index outputs).
pub fn fd_jacobian<F>(f: F, x: &Vector, h: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let mut probe = x.clone();
    let mut columns = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = step_for(x[i], h);
        probe[i] = x[i] + hi;
        let fp = f(&probe)?;
        probe[i] = x[i] - hi;
        let fm = f(&probe)?;
        probe[i] = x[i];
        let col = (fp - fm) / (2.0 * hi);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::EvalFailed);
        }
        columns.push(col);
    }
    let rows = columns.first().map_or(0, |c| c.len());
    Ok(Matrix::from_fn(rows, x.len(), |r, c| columns[c][r]))
}

/// Central-difference partial `∂A/∂x_i` of a matrix-valued map.
pub fn fd_matrix_partial<F>(f: F, x: &Vector, i: usize, h: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Matrix>,
{
    let hi = step_for(x[i], h);
    let mut probe = x.clone();
    probe[i] = x[i] + hi;
    let fp = f(&probe)?;
    probe[i] = x[i] - hi;
    let fm = f(&probe)?;
    let d = (fp - fm) / (2.0 * hi);
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::EvalFailed);
    }
    Ok(d)
}

/// Symmetrised central-difference Hessian of a scalar map, built from the
/// second differences of `f` directly.
pub fn fd_hessian<F>(f: F, x: &Vector, h: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> f64,
{
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let mut probe = x.clone();
    let f0 = f(x);
    for i in 0..n {
        let hi = step_for(x[i], h);
        for j in i..n {
            let hj = step_for(x[j], h);
            let value = if i == j {
                probe[i] = x[i] + hi;
                let fp = f(&probe);
                probe[i] = x[i] - hi;
                let fm = f(&probe);
                probe[i] = x[i];
                (fp - 2.0 * f0 + fm) / (hi * hi)
            } else {
                let mut eval = |si: f64, sj: f64| {
                    probe[i] = x[i] + si * hi;
                    probe[j] = x[j] + sj * hj;
                    let v = f(&probe);
                    probe[i] = x[i];
                    probe[j] = x[j];
                    v
                };
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * hi * hj)
            };
            if !value.is_finite() {
                return Err(Error::EvalFailed);
            }
            hess[(i, j)] = value;
            hess[(j, i)] = value;
        }
    }
    Ok(hess)
}
