use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::Tensor3;
use crate::error::{Error, Result};

/// Largest tolerated imaginary residue after the inverse DFT, relative to
/// the Frobenius norm of the real part.
const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// DFT of a real tensor along its tube fibers: `n` complex `l × m` slices.
///
/// Only produced from real tensors (or products/solves of such), so slice
/// `n − k` is always the conjugate of slice `k`. Operations compute the
/// first `⌊n/2⌋ + 1` slices and fill the rest by symmetry.
#[derive(Debug, Clone)]
pub struct FourierTensor3 {
    l: usize,
    m: usize,
    n: usize,
    slices: Vec<DMatrix<Complex64>>,
}

impl FourierTensor3 {
    pub fn forward(t: &Tensor3) -> Self {
        let (l, m, n) = t.dims();
        let lm = l * m;
        // Tube-major buffer: tube (i, j) occupies [(j·l + i)·n, … + n).
        let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); lm * n];
        let src = t.as_slice();
        for k in 0..n {
            for idx in 0..lm {
                buf[idx * n + k] = Complex64::new(src[k * lm + idx], 0.0);
            }
        }
        if n > 1 && lm > 0 {
            FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        }
        let half = n / 2 + 1;
        let mut slices: Vec<DMatrix<Complex64>> = (0..half.min(n))
            .map(|k| DMatrix::from_fn(l, m, |i, j| buf[(j * l + i) * n + k]))
            .collect();
        fill_conjugate(&mut slices, n);
        FourierTensor3 { l, m, n, slices }
    }

    /// Inverse DFT back to a real tensor.
    ///
    /// Fails with a numerical error if the discarded imaginary part exceeds
    /// `1e-8 · ‖real part‖_F`.
    pub fn inverse(&self) -> Result<Tensor3> {
        let (l, m, n) = (self.l, self.m, self.n);
        let lm = l * m;
        let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); lm * n];
        for (k, s) in self.slices.iter().enumerate() {
            for j in 0..m {
                for i in 0..l {
                    buf[(j * l + i) * n + k] = s[(i, j)];
                }
            }
        }
        if n > 1 && lm > 0 {
            FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        }
        let scale = 1.0 / n as f64;
        let mut data = vec![0.0; lm * n];
        let (mut re2, mut im2) = (0.0, 0.0);
        for k in 0..n {
            for idx in 0..lm {
                let z = buf[idx * n + k] * scale;
                data[k * lm + idx] = z.re;
                re2 += z.re * z.re;
                im2 += z.im * z.im;
            }
        }
        if im2.sqrt() > IMAG_RESIDUE_TOL * re2.sqrt() {
            return Err(Error::Numerical(format!(
                "inverse DFT left imaginary residue {:.3e} against real norm {:.3e}",
                im2.sqrt(),
                re2.sqrt()
            )));
        }
        Tensor3::from_vec(l, m, n, data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.l, self.m, self.n)
    }

    pub fn slice(&self, k: usize) -> &DMatrix<Complex64> {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[DMatrix<Complex64>] {
        &self.slices
    }

    fn half(&self) -> usize {
        self.n / 2 + 1
    }

    /// Builds a tensor from independently computed low-frequency slices.
    fn from_half(l: usize, m: usize, n: usize, mut slices: Vec<DMatrix<Complex64>>) -> Self {
        fill_conjugate(&mut slices, n);
        FourierTensor3 { l, m, n, slices }
    }

    /// Frequency-wise product, the Fourier image of the t-product.
    pub fn mul(&self, rhs: &FourierTensor3) -> Result<FourierTensor3> {
        if self.m != rhs.l || self.n != rhs.n {
            return Err(Error::invalid(format!(
                "t-product of {:?} and {:?}: inner or tube dimensions differ",
                self.dims(),
                rhs.dims()
            )));
        }
        let half = self.half().min(self.n);
        let slices = (0..half)
            .map(|k| &self.slices[k] * &rhs.slices[k])
            .collect();
        Ok(Self::from_half(self.l, rhs.m, self.n, slices))
    }

    /// Conjugate transpose of each slice: the Fourier image of [`super::ttranspose`].
    pub fn conj_transpose(&self) -> FourierTensor3 {
        FourierTensor3 {
            l: self.m,
            m: self.l,
            n: self.n,
            slices: self.slices.iter().map(|s| s.adjoint()).collect(),
        }
    }

    pub fn add(&self, rhs: &FourierTensor3) -> FourierTensor3 {
        assert_eq!(self.dims(), rhs.dims(), "Fourier add dimension mismatch");
        FourierTensor3 {
            l: self.l,
            m: self.m,
            n: self.n,
            slices: self
                .slices
                .iter()
                .zip(&rhs.slices)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Adds `rho · I` (the Fourier image of `rho` times the identity tensor,
    /// which is `rho · I` at every frequency).
    pub fn add_scaled_identity(&mut self, rho: f64) {
        assert_eq!(self.l, self.m, "identity shift needs square slices");
        for s in &mut self.slices {
            for i in 0..self.l {
                s[(i, i)] += Complex64::new(rho, 0.0);
            }
        }
    }

    /// Solves `self * X = rhs` frequency by frequency with a Cholesky factorization.
    pub fn solve_spd(&self, rhs: &FourierTensor3) -> Result<FourierTensor3> {
        self.check_solve(rhs, rhs.l)?;
        let half = self.half().min(self.n);
        let mut out = Vec::with_capacity(half);
        for k in 0..half {
            let chol = self.factor(k)?;
            out.push(chol.solve(&rhs.slices[k]));
        }
        Ok(Self::from_half(rhs.l, rhs.m, self.n, out))
    }

    /// Solves `X * self = rhs` frequency by frequency.
    pub fn solve_spd_right(&self, rhs: &FourierTensor3) -> Result<FourierTensor3> {
        self.check_solve(rhs, rhs.m)?;
        let half = self.half().min(self.n);
        let mut out = Vec::with_capacity(half);
        for k in 0..half {
            let chol = self.factor(k)?;
            // X Â = B̂  ⇔  Â X̂ᴴ = B̂ᴴ for Hermitian Â.
            out.push(chol.solve(&rhs.slices[k].adjoint()).adjoint());
        }
        Ok(Self::from_half(rhs.l, rhs.m, self.n, out))
    }

    fn check_solve(&self, rhs: &FourierTensor3, shared: usize) -> Result<()> {
        if self.l != self.m || shared != self.l || rhs.n != self.n {
            return Err(Error::invalid(format!(
                "cannot solve with system {:?} and right-hand side {:?}",
                self.dims(),
                rhs.dims()
            )));
        }
        Ok(())
    }

    fn factor(&self, k: usize) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
        let a = &self.slices[k];
        let herm = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let chol = Cholesky::new(herm).ok_or(Error::NotPositiveDefinite { frequency: k })?;
        // For complex scalars nalgebra takes complex square roots of the
        // pivots instead of failing; a Hermitian PD factor has a real
        // positive diagonal.
        let l = chol.l_dirty();
        let pd = (0..l.nrows()).all(|i| {
            let d = l[(i, i)];
            d.re.is_finite() && d.re > 0.0 && d.im.abs() <= 1e-12 * d.re
        });
        if !pd {
            return Err(Error::NotPositiveDefinite { frequency: k });
        }
        Ok(chol)
    }
}

fn fill_conjugate(slices: &mut Vec<DMatrix<Complex64>>, n: usize) {
    let half = slices.len();
    for k in half..n {
        let mirrored = slices[n - k].map(|z| z.conj());
        slices.push(mirrored);
    }
}
