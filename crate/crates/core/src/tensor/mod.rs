//! Dense third-order tensors and the t-product algebra.
//!
//! A [`Tensor3`] of size `l × m × n` is stored frontal-slice-major with each
//! frontal slice column-major, so element `(i, j, k)` lives at
//! `(k·m + j)·l + i`. This is exactly the column stacking of the frontal
//! slices, and each frontal slice can be viewed in place as an nalgebra
//! matrix.
//!
//! Products and solves go through [`FourierTensor3`]: a DFT along the tube
//! fibers block-diagonalizes `circ(·)`, so the t-product becomes independent
//! matrix products per frequency. [`circ`] itself is only materialized for
//! checks.

mod fourier;
pub mod io;

pub use fourier::FourierTensor3;

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};

/// Dense real `l × m × n` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    l: usize,
    m: usize,
    n: usize,
    data: Vec<f64>,
}

/// A `1 × 1 × n` tensor; tube fibers commute under the t-product.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeFiber(pub Vec<f64>);

impl TubeFiber {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3 {
            l: 1,
            m: 1,
            n: self.0.len(),
            data: self.0.clone(),
        }
    }
}

/// Frobenius, entrywise-1 and max norms of a tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub fro: f64,
    pub sum: f64,
    pub max: f64,
}

impl Tensor3 {
    pub fn zeros(l: usize, m: usize, n: usize) -> Self {
        Tensor3 {
            l,
            m,
            n,
            data: vec![0.0; l * m * n],
        }
    }

    pub fn filled(l: usize, m: usize, n: usize, value: f64) -> Self {
        Tensor3 {
            l,
            m,
            n,
            data: vec![value; l * m * n],
        }
    }

    /// Wraps `data` given in vec order.
    pub fn from_vec(l: usize, m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != l * m * n {
            return Err(Error::invalid(format!(
                "{} values cannot fill a {l}x{m}x{n} tensor",
                data.len()
            )));
        }
        Ok(Tensor3 { l, m, n, data })
    }

    pub fn from_fn(
        l: usize,
        m: usize,
        n: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(l * m * n);
        for k in 0..n {
            for j in 0..m {
                for i in 0..l {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 { l, m, n, data }
    }

    /// Builds a tensor from its frontal slices, all of equal shape.
    pub fn from_frontal_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::invalid("at least one frontal slice is required"));
        };
        let (l, m) = first.shape();
        let mut data = Vec::with_capacity(l * m * slices.len());
        for (k, s) in slices.iter().enumerate() {
            if s.shape() != (l, m) {
                return Err(Error::invalid(format!(
                    "frontal slice {k} is {:?}, expected {:?}",
                    s.shape(),
                    (l, m)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Tensor3 {
            l,
            m,
            n: slices.len(),
            data,
        })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.l, self.m, self.n)
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.l && j < self.m && k < self.n);
        (k * self.m + j) * self.l + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    /// Values in vec order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Frontal slice `k` as an `l × m` matrix view.
    pub fn frontal(&self, k: usize) -> DMatrixView<'_, f64> {
        let size = self.l * self.m;
        DMatrixView::from_slice(&self.data[k * size..(k + 1) * size], self.l, self.m)
    }

    /// Lateral slice `j` as an `l × 1 × n` tensor.
    pub fn lateral(&self, j: usize) -> Tensor3 {
        Tensor3::from_fn(self.l, 1, self.n, |i, _, k| self.get(i, j, k))
    }

    pub fn set_lateral(&mut self, j: usize, slice: &Tensor3) -> Result<()> {
        if slice.dims() != (self.l, 1, self.n) {
            return Err(Error::invalid(format!(
                "lateral slice has dims {:?}, expected {:?}",
                slice.dims(),
                (self.l, 1, self.n)
            )));
        }
        for k in 0..self.n {
            for i in 0..self.l {
                self.set(i, j, k, slice.get(i, 0, k));
            }
        }
        Ok(())
    }

    /// Gathers the given lateral slices, in order, into a new tensor.
    pub fn select_lateral(&self, columns: &[usize]) -> Tensor3 {
        Tensor3::from_fn(self.l, columns.len(), self.n, |i, j, k| {
            self.get(i, columns[j], k)
        })
    }

    pub fn tube(&self, i: usize, j: usize) -> TubeFiber {
        TubeFiber((0..self.n).map(|k| self.get(i, j, k)).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            l: self.l,
            m: self.m,
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor3) {
        assert_eq!(self.dims(), other.dims(), "axpy dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&self, alpha: f64) -> Tensor3 {
        self.map(|v| alpha * v)
    }

    pub fn dot(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims(), other.dims(), "dot dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn norms(&self) -> Norms {
        Norms {
            fro: self.fro_norm(),
            sum: self.sum_norm(),
            max: self.max_norm(),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |acc, &v| acc.min(v))
    }

    /// Frobenius norm of lateral slice `j`.
    pub fn lateral_norm(&self, j: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.n {
            for i in 0..self.l {
                let v = self.get(i, j, k);
                acc += v * v;
            }
        }
        acc.sqrt()
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &Tensor3 {
    type Output = Tensor3;

    fn mul(self, rhs: f64) -> Tensor3 {
        self.scale(rhs)
    }
}

/// `l × 1 × n` lateral slice to the `l × n` matrix `X(i, k) = A(i, 0, k)`.
pub fn squeeze(lateral: &Tensor3) -> Result<DMatrix<f64>> {
    let (l, m, n) = lateral.dims();
    if m != 1 {
        return Err(Error::invalid(format!(
            "squeeze needs a lateral slice (middle dimension 1), got {l}x{m}x{n}"
        )));
    }
    // With m = 1 the vec layout is already the column-major l × n matrix.
    Ok(DMatrix::from_column_slice(l, n, lateral.as_slice()))
}

/// Inverse of [`squeeze`].
pub fn twist(matrix: &DMatrix<f64>) -> Tensor3 {
    let (l, n) = matrix.shape();
    Tensor3 {
        l,
        m: 1,
        n,
        data: matrix.as_slice().to_vec(),
    }
}

/// Vertical stack of the frontal slices, an `ln × m` matrix.
pub fn unfold(a: &Tensor3) -> DMatrix<f64> {
    let (l, m, n) = a.dims();
    DMatrix::from_fn(l * n, m, |row, j| a.get(row % l, j, row / l))
}

/// Inverse of [`unfold`] for a stack of `n` frontal slices.
pub fn fold(matrix: &DMatrix<f64>, n: usize) -> Result<Tensor3> {
    let (rows, m) = matrix.shape();
    if n == 0 || rows % n != 0 {
        return Err(Error::invalid(format!(
            "cannot fold {rows} rows into {n} frontal slices"
        )));
    }
    let l = rows / n;
    Ok(Tensor3::from_fn(l, m, n, |i, j, k| matrix[(k * l + i, j)]))
}

/// Block circulant matrix of size `ln × mn`; block `(a, b)` is `A^{((a − b) mod n)}`.
pub fn circ(a: &Tensor3) -> DMatrix<f64> {
    let (l, m, n) = a.dims();
    DMatrix::from_fn(l * n, m * n, |row, col| {
        let (bi, i) = (row / l, row % l);
        let (bj, j) = (col / m, col % m);
        a.get(i, j, (bi + n - bj) % n)
    })
}

/// Tensor transpose: each frontal slice transposed, slices 2..n in reverse order.
pub fn ttranspose(a: &Tensor3) -> Tensor3 {
    let (l, m, n) = a.dims();
    Tensor3::from_fn(m, l, n, |i, j, k| a.get(j, i, (n - k) % n))
}

/// `m × m × n` identity: first frontal slice `I_m`, the rest zero.
pub fn identity_tensor(m: usize, n: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(m, m, n);
    for i in 0..m {
        t.set(i, i, 0, 1.0);
    }
    t
}

/// t-product `B * C`, computed per frequency in the Fourier domain.
pub fn tprod(b: &Tensor3, c: &Tensor3) -> Result<Tensor3> {
    let (_, p, n) = b.dims();
    let (p2, _, n2) = c.dims();
    if p != p2 || n != n2 {
        return Err(Error::invalid(format!(
            "t-product of {:?} and {:?}: inner or tube dimensions differ",
            b.dims(),
            c.dims()
        )));
    }
    FourierTensor3::forward(b)
        .mul(&FourierTensor3::forward(c))?
        .inverse()
}

/// Solves `A * X = B` for `X`, where every Fourier slice of `A` is Hermitian
/// positive definite.
pub fn tsolve_spd(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    FourierTensor3::forward(a)
        .solve_spd(&FourierTensor3::forward(b))?
        .inverse()
}

/// Solves `X * A = B` for `X` (right division), same requirements as [`tsolve_spd`].
pub fn tsolve_spd_right(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    FourierTensor3::forward(a)
        .solve_spd_right(&FourierTensor3::forward(b))?
        .inverse()
}
