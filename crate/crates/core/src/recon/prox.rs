//! Proximal operators for the coefficient priors.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Stacks the `s × r` squeezed lateral slices of an `s × q × r` tensor
/// vertically into an `sq × r` matrix: row `j·s + i`, column `k` holds
/// `C(i, j, k)`.
pub fn tensor_to_stacked(c: &Tensor3) -> DMatrix<f64> {
    let (s, q, r) = c.dims();
    DMatrix::from_fn(s * q, r, |row, k| c.get(row % s, row / s, k))
}

/// Inverse of [`tensor_to_stacked`] for a tensor with `s` rows.
pub fn stacked_to_tensor(m: &DMatrix<f64>, s: usize) -> Result<Tensor3> {
    if s == 0 || !m.nrows().is_multiple_of(s) {
        return Err(Error::invalid(format!(
            "{} stacked rows are not a multiple of s = {s}",
            m.nrows()
        )));
    }
    let q = m.nrows() / s;
    Ok(Tensor3::from_fn(s, q, m.ncols(), |i, j, k| {
        m[(j * s + i, k)]
    }))
}

/// One-sided shrinkage `max(x − τ, 0)`: the prox of `τ‖·‖₁` plus the
/// non-negativity indicator.
pub fn prox_nonneg_l1(x: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    x.map(|v| (v - tau).max(0.0))
}

/// [`prox_nonneg_l1`] applied entrywise to a tensor.
pub fn prox_nonneg_l1_tensor(x: &Tensor3, tau: f64) -> Tensor3 {
    x.map(|v| (v - tau).max(0.0))
}

/// Singular value soft thresholding `U·diag(max(σ − τ, 0))·Vᵀ`.
pub fn prox_nuclear(x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if x.is_empty() || tau == 0.0 {
        return Ok(x.clone());
    }
    let svd = SVD::try_new(x.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("singular value decomposition did not converge".into()))?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (idx, &sigma) in svd.singular_values.iter().enumerate() {
        let shrunk = sigma - tau;
        if shrunk > 0.0 {
            out += u.column(idx) * v_t.row(idx) * shrunk;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DykstraProx {
    pub x: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Prox of `τ(‖X‖₁ + ‖X‖_*)` restricted to `X ≥ 0`, by the Dykstra-like
/// alternation between singular value shrinkage and one-sided shrinkage.
/// Stops once the two half-steps agree to `tol` in Frobenius norm.
pub fn dykstra_prox(z: &DMatrix<f64>, tau: f64, tol: f64, max_iter: usize) -> Result<DykstraProx> {
    let mut x = z.clone();
    let mut p = DMatrix::zeros(z.nrows(), z.ncols());
    let mut q = p.clone();
    for it in 1..=max_iter.max(1) {
        let y = prox_nuclear(&(&x + &p), tau)?;
        p = &x + &p - &y;
        let x_next = prox_nonneg_l1(&(&y + &q), tau);
        q = &y + &q - &x_next;
        let gap = (&y - &x_next).norm();
        x = x_next;
        if gap < tol {
            return Ok(DykstraProx {
                x,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(DykstraProx {
        x,
        iterations: max_iter.max(1),
        converged: false,
    })
}
