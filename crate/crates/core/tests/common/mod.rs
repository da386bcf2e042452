//! Reference implementations used as test oracles. Each one follows its
//! definition directly and shares no code path with the library routine it
//! checks.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tpc_core::Tensor3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(
    rng: &mut ChaCha8Rng,
    l: usize,
    m: usize,
    n: usize,
    lo: f64,
    hi: f64,
) -> Tensor3 {
    Tensor3::from_fn(l, m, n, |_, _, _| rng.random_range(lo..hi))
}

pub fn random_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// `(B*C)(:, :, k) = Σ_j B(:, :, (k − j) mod n) · C(:, :, j)`.
pub fn tprod_by_definition(b: &Tensor3, c: &Tensor3) -> Tensor3 {
    let (l, m, n) = b.dims();
    let (mc, p, nc) = c.dims();
    assert_eq!((m, n), (mc, nc));
    let mut out = Tensor3::zeros(l, p, n);
    for k in 0..n {
        for j in 0..n {
            let bk = (k + n - j) % n;
            for row in 0..l {
                for col in 0..p {
                    let mut acc = out.get(row, col, k);
                    for inner in 0..m {
                        acc += b.get(row, inner, bk) * c.get(inner, col, j);
                    }
                    out.set(row, col, k, acc);
                }
            }
        }
    }
    out
}

/// `A(i, j, k) ↦ A(j, i, (n − k) mod n)`.
pub fn ttranspose_by_definition(a: &Tensor3) -> Tensor3 {
    let (l, m, n) = a.dims();
    Tensor3::from_fn(m, l, n, |i, j, k| a.get(j, i, (n - k) % n))
}

/// Column circulant `C[v](row, col) = v[(row − col) mod n]`.
pub fn circulant(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    DMatrix::from_fn(n, n, |row, col| v[(row + n - col) % n])
}

pub fn rel_fro(a: &Tensor3, b: &Tensor3) -> f64 {
    (a - b).fro_norm() / b.fro_norm().max(1e-300)
}

/// Length of the ray `{s·n + t·d}` inside `[−N/2, N/2]²`, by counting
/// evenly spaced samples along the line.
pub fn sampled_chord(grid: usize, theta: f64, offset: f64, samples: usize) -> f64 {
    let half = grid as f64 / 2.0;
    let reach = grid as f64;
    let (dx, dy) = (theta.cos(), theta.sin());
    let (x0, y0) = (-offset * dy, offset * dx);
    let h = 2.0 * reach / samples as f64;
    let inside = (0..samples)
        .filter(|&i| {
            let t = -reach + (i as f64 + 0.5) * h;
            let (x, y) = (x0 + t * dx, y0 + t * dy);
            x.abs() < half && y.abs() < half
        })
        .count();
    inside as f64 * h
}

/// Minimizer of `τ|u| + ½(u − x)²` over `u ≥ 0` on a grid of spacing `h`.
pub fn scalar_prox_by_grid(x: f64, tau: f64, h: f64) -> f64 {
    let hi = x.abs() + 1.0;
    let steps = (hi / h).ceil() as usize;
    (0..=steps)
        .map(|i| i as f64 * h)
        .min_by(|a, b| {
            let fa = tau * a + 0.5 * (a - x) * (a - x);
            let fb = tau * b + 0.5 * (b - x) * (b - x);
            fa.total_cmp(&fb)
        })
        .unwrap()
}

/// Singular values and right singular vectors from the symmetric
/// eigendecomposition of `XᵀX`.
pub fn spectral_parts(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(x.transpose() * x);
    // eigenvalues at round-off level belong to a zero singular value
    let floor = 1e-13 * eig.eigenvalues.amax();
    let sigmas = eig
        .eigenvalues
        .iter()
        .map(|&e| if e > floor { e.sqrt() } else { 0.0 })
        .collect();
    (sigmas, eig.eigenvectors)
}

/// `‖X‖_*` via the eigenvalues of `XᵀX`.
pub fn nuclear_norm(x: &DMatrix<f64>) -> f64 {
    spectral_parts(x).0.iter().sum()
}

/// Spectral norm via the eigenvalues of `XᵀX`.
pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    spectral_parts(x).0.into_iter().fold(0.0, f64::max)
}

/// Singular value shrinkage computed as `X·V·diag(max(σ−τ,0)/σ)·Vᵀ`.
pub fn nuclear_prox_by_eigen(x: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let (sigmas, v) = spectral_parts(x);
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        sigmas.len(),
        sigmas
            .iter()
            .map(|&s| if s > tau { (s - tau) / s } else { 0.0 }),
    ));
    x * &v * scale * v.transpose()
}

/// Subgradient of the nuclear norm at `U`: `U₁V₁ᵀ` over the nonzero
/// singular values.
fn nuclear_subgradient(u: &DMatrix<f64>) -> DMatrix<f64> {
    let (sigmas, v) = spectral_parts(u);
    let mut g = DMatrix::zeros(u.nrows(), u.ncols());
    let top = sigmas.iter().cloned().fold(0.0, f64::max);
    for (idx, &s) in sigmas.iter().enumerate() {
        if s > 1e-12 * top.max(1e-300) {
            let vi = v.column(idx);
            g += (u * vi) * vi.transpose() / s;
        }
    }
    g
}

/// Projected subgradient descent with step `1/(k+1)` for
/// `min_{X ≥ 0} τ‖X‖₁ + τ‖X‖_* + ½‖X − Z‖²_F`.
pub fn composite_prox_by_subgradient(
    z: &DMatrix<f64>,
    tau: f64,
    iterations: usize,
) -> DMatrix<f64> {
    let mut x = z.map(|v| v.max(0.0));
    for k in 1..=iterations {
        let sign = x.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let g = (&x - z) + (sign + nuclear_subgradient(&x)) * tau;
        x = (&x - g / (k as f64 + 1.0)).map(|v| v.max(0.0));
    }
    x
}

/// Matrix ADMM for non-negative sparse coding with normalized non-negative
/// dictionary columns: the same six updates in plain matrix algebra.
pub struct MatrixAdmm {
    pub d: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub lambda_bar: DMatrix<f64>,
}

impl MatrixAdmm {
    pub fn step(&mut self, y: &DMatrix<f64>, lam: f64, rho: f64) {
        let p = y.nrows();
        let s = self.d.ncols();
        let radius = (p as f64).sqrt();

        let mut d = (&self.u - &self.lambda / rho).map(|v| v.max(0.0));
        for mut col in d.column_iter_mut() {
            let n = col.norm();
            if n > radius {
                col *= radius / n;
            }
        }
        self.d = d;

        let gram = self.u.transpose() * &self.u + DMatrix::identity(s, s) * rho;
        let rhs = self.u.transpose() * y + &self.lambda_bar + &self.h * rho;
        self.v = gram.lu().solve(&rhs).unwrap();

        self.h = (&self.v - &self.lambda_bar / rho).map(|v| (v - lam / rho).max(0.0));

        let gram = &self.v * self.v.transpose() + DMatrix::identity(s, s) * rho;
        let rhs = y * self.v.transpose() + &self.lambda + &self.d * rho;
        self.u = gram
            .transpose()
            .lu()
            .solve(&rhs.transpose())
            .unwrap()
            .transpose();

        self.lambda += (&self.d - &self.u) * rho;
        self.lambda_bar += (&self.h - &self.v) * rho;
    }
}

/// First frontal slice of an `l × m × 1` tensor as a matrix.
pub fn as_matrix(t: &Tensor3) -> DMatrix<f64> {
    let (l, m, n) = t.dims();
    assert_eq!(n, 1);
    DMatrix::from_fn(l, m, |i, j| t.get(i, j, 0))
}

/// Image (column-major vector) assembled from patches by the block rule:
/// lateral slice `j` is block `(j mod M/p, j div M/p)`.
pub fn image_from_patches(patches: &Tensor3, height: usize, width: usize) -> Vec<f64> {
    let (p, q, r) = patches.dims();
    let down = height / p;
    assert_eq!(q, down * (width / r));
    let mut img = vec![0.0; height * width];
    for j in 0..q {
        let (u, v) = (j % down, j / down);
        for i in 0..p {
            for k in 0..r {
                img[(v * r + k) * height + u * p + i] = patches.get(i, j, k);
            }
        }
    }
    img
}

/// Dense boundary difference operator: one row per neighbouring pixel pair
/// separated by a patch boundary.
pub fn dense_boundary_operator(height: usize, width: usize, p: usize, r: usize) -> DMatrix<f64> {
    let idx = |row: usize, col: usize| col * height + row;
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for col in (r..width).step_by(r) {
        for row in 0..height {
            rows.push((idx(row, col - 1), idx(row, col)));
        }
    }
    for row in (p..height).step_by(p) {
        for col in 0..width {
            rows.push((idx(row - 1, col), idx(row, col)));
        }
    }
    let mut l = DMatrix::zeros(rows.len(), height * width);
    for (i, (a, b)) in rows.into_iter().enumerate() {
        l[(i, a)] = -1.0;
        l[(i, b)] = 1.0;
    }
    l
}
