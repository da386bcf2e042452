//! Reconstruction quality and coefficient sparsity measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::tensor::Tensor3;

/// Magnitude above which a coefficient counts toward compressibility.
pub const COMPRESSIBILITY_THRESHOLD: f64 = 1e-4;

const SSIM_WINDOW: usize = 8;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// `‖x_exact − x‖₂ / ‖x_exact‖₂`.
pub fn relative_error(x: &[f64], x_exact: &[f64]) -> Result<f64> {
    if x.len() != x_exact.len() {
        return Err(Error::invalid(format!(
            "vectors of length {} and {} cannot be compared",
            x.len(),
            x_exact.len()
        )));
    }
    let reference = x_exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    if reference == 0.0 {
        return Err(Error::invalid("relative error against a zero reference"));
    }
    let diff = x
        .iter()
        .zip(x_exact)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    Ok(diff / reference)
}

/// Mean structural similarity over all `8 × 8` windows (uniform weights,
/// population statistics, dynamic range 1). Images smaller than 8 pixels
/// along a side use the full extent along that side.
pub fn ssim(x: &GrayImage, y: &GrayImage) -> Result<f64> {
    if (x.height(), x.width()) != (y.height(), y.width()) {
        return Err(Error::invalid(format!(
            "SSIM of a {}x{} and a {}x{} image",
            x.height(),
            x.width(),
            y.height(),
            y.width()
        )));
    }
    let (h, w) = (x.height(), x.width());
    if h == 0 || w == 0 {
        return Err(Error::invalid("SSIM of an empty image"));
    }
    let (wh, ww) = (SSIM_WINDOW.min(h), SSIM_WINDOW.min(w));
    let count = (wh * ww) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in 0..=h - wh {
        for c0 in 0..=w - ww {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for c in c0..c0 + ww {
                for r in r0..r0 + wh {
                    let (a, b) = (x.get(r, c), y.get(r, c));
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            let (mx, my) = (sx / count, sy / count);
            let vx = (sxx / count - mx * mx).max(0.0);
            let vy = (syy / count - my * my).max(0.0);
            let cov = sxy / count - mx * my;
            total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Percentage of exactly nonzero entries.
pub fn density(c: &Tensor3) -> f64 {
    percent(c, |v| v != 0.0)
}

/// Percentage of entries with magnitude above `threshold`.
pub fn compressibility(c: &Tensor3, threshold: f64) -> f64 {
    percent(c, |v| v.abs() > threshold)
}

fn percent(c: &Tensor3, pred: impl Fn(f64) -> bool) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    100.0 * c.as_slice().iter().filter(|&&v| pred(v)).count() as f64 / c.len() as f64
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub iterations: usize,
    pub density_percent: f64,
    pub compressibility_percent: f64,
    pub re: f64,
    pub ssim: f64,
    pub wall_time_seconds: f64,
}

impl MetricsReport {
    /// Scores a reconstruction against the exact image. `coeffs` is `None`
    /// for methods without a coefficient tensor (both percentages are then
    /// reported as 100).
    pub fn evaluate(
        method: impl Into<String>,
        recon: &GrayImage,
        exact: &GrayImage,
        coeffs: Option<&Tensor3>,
        iterations: usize,
        wall_time_seconds: f64,
    ) -> Result<Self> {
        let (density_percent, compressibility_percent) = match coeffs {
            Some(c) => (density(c), compressibility(c, COMPRESSIBILITY_THRESHOLD)),
            None => (100.0, 100.0),
        };
        Ok(MetricsReport {
            method: method.into(),
            iterations,
            density_percent,
            compressibility_percent,
            re: relative_error(recon.as_slice(), exact.as_slice())?,
            ssim: ssim(recon, exact)?,
            wall_time_seconds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_cases() {
        let x: Vec<f64> = (1..6).map(f64::from).collect();
        assert_eq!(relative_error(&x, &x).unwrap(), 0.0);
        assert_eq!(relative_error(&[0.0; 5], &x).unwrap(), 1.0);
        let scaled: Vec<f64> = x.iter().map(|v| 1.01 * v).collect();
        assert!((relative_error(&scaled, &x).unwrap() - 0.01).abs() < 1e-12);
        assert!(relative_error(&x, &[0.0; 5]).is_err());
        assert!(relative_error(&x, &[1.0; 4]).is_err());
    }

    #[test]
    fn ssim_constant_images() {
        let zero = GrayImage::from_fn(10, 12, |_, _| 0.0);
        let one = GrayImage::from_fn(10, 12, |_, _| 1.0);
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((ssim(&zero, &one).unwrap() - expected).abs() < 1e-15);
        assert_eq!(ssim(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn sparsity_percentages() {
        assert_eq!(density(&Tensor3::zeros(2, 3, 2)), 0.0);
        assert_eq!(compressibility(&Tensor3::filled(2, 3, 2, 1.0), 1e-4), 100.0);
        let half = Tensor3::from_fn(2, 2, 2, |i, _, _| if i == 0 { 1e-6 } else { 1.0 });
        assert_eq!(density(&half), 100.0);
        assert_eq!(compressibility(&half, COMPRESSIBILITY_THRESHOLD), 50.0);
    }
}
