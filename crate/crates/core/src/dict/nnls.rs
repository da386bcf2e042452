//! Non-negative least squares in the t-product sense and the mean
//! approximation error of a dictionary on an image.

use crate::error::{Error, Result};
use crate::tensor::{FourierTensor3, Tensor3};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub coeffs: Tensor3,
    pub iterations: usize,
    pub objective: f64,
}

/// Solves `min_{C ≥ 0} ½‖D*C − X‖²_F` for one lateral slice `X` (`p × 1 × r`).
pub fn nnls_tpatch(d: &Tensor3, xj: &Tensor3, max_iter: usize, tol: f64) -> Result<Tensor3> {
    if xj.dims().1 != 1 {
        return Err(Error::invalid("nnls_tpatch expects a single lateral slice"));
    }
    Ok(nnls_lateral(d, xj, max_iter, tol)?.coeffs)
}

/// Solves the non-negative problem for every lateral slice of `X` at once.
///
/// The problem separates over lateral slices, so one joint solve gives each
/// slice's minimizer. Projected accelerated gradient with step `1/L`,
/// `L = max_k σ_max(D̂_k)²`, and a momentum restart whenever the objective
/// would increase. Stops when the relative decrease drops below `tol`.
pub fn nnls_lateral(d: &Tensor3, x: &Tensor3, max_iter: usize, tol: f64) -> Result<NnlsSolution> {
    let (p, s, r) = d.dims();
    let (px, q, rx) = x.dims();
    if (px, rx) != (p, r) {
        return Err(Error::invalid(format!(
            "dictionary {:?} and patches {:?} disagree",
            d.dims(),
            x.dims()
        )));
    }
    let d_hat = FourierTensor3::forward(d);
    let d_hat_t = d_hat.conj_transpose();
    let lipschitz = d_hat
        .slices()
        .iter()
        .map(|sl| sl.clone().singular_values().max().powi(2))
        .fold(0.0, f64::max);
    let mut coeffs = Tensor3::zeros(s, q, r);
    let half_sq = |c: &Tensor3| -> Result<f64> {
        let mut resid = d_hat.mul(&FourierTensor3::forward(c))?.inverse()?;
        resid.axpy(-1.0, x);
        Ok(0.5 * resid.fro_norm().powi(2))
    };
    let mut obj = half_sq(&coeffs)?;
    if lipschitz == 0.0 || obj == 0.0 {
        return Ok(NnlsSolution {
            coeffs,
            iterations: 0,
            objective: obj,
        });
    }
    let step = 1.0 / lipschitz;
    let mut momentum_point = coeffs.clone();
    let mut theta = 1.0_f64;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut resid = d_hat
            .mul(&FourierTensor3::forward(&momentum_point))?
            .inverse()?;
        resid.axpy(-1.0, x);
        let grad = d_hat_t.mul(&FourierTensor3::forward(&resid))?.inverse()?;
        let mut next = momentum_point.clone();
        next.axpy(-step, &grad);
        next.map_inplace(|v| v.max(0.0));
        let next_obj = half_sq(&next)?;

        if next_obj > obj && theta > 1.0 {
            // restart from the last accepted iterate without momentum
            momentum_point = coeffs.clone();
            theta = 1.0;
            continue;
        }
        let decrease = obj - next_obj;
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        momentum_point = &next + &(&(&next - &coeffs) * beta);
        theta = theta_next;
        coeffs = next;
        obj = next_obj;
        if obj == 0.0 || (decrease >= 0.0 && decrease <= tol * (obj + decrease)) {
            break;
        }
    }
    Ok(NnlsSolution {
        coeffs,
        iterations,
        objective: obj,
    })
}

#[derive(Debug, Clone)]
pub struct MaeReport {
    pub mae: f64,
    /// `‖D*C_j⋆ − X_j‖_F` for each patch.
    pub per_patch: Vec<f64>,
    pub coeffs: Tensor3,
}

/// `MAE = (1/(pqr)) Σ_j ‖D*C_j⋆ − X_j‖_F` with `C_j⋆` the non-negative
/// least-squares coefficients of patch `j`.
pub fn mean_approx_error(d: &Tensor3, x: &Tensor3, max_iter: usize, tol: f64) -> Result<MaeReport> {
    let (p, q, r) = x.dims();
    let sol = nnls_lateral(d, x, max_iter, tol)?;
    let fit = crate::tensor::tprod(d, &sol.coeffs)?;
    let diff = &fit - x;
    let per_patch: Vec<f64> = (0..q).map(|j| diff.lateral_norm(j)).collect();
    let mae = per_patch.iter().sum::<f64>() / (p * q * r) as f64;
    Ok(MaeReport {
        mae,
        per_patch,
        coeffs: sol.coeffs,
    })
}
