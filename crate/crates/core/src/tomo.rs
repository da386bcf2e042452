//! Parallel-beam tomography: system matrix, noisy sinograms and the
//! Tikhonov baseline.
//!
//! The image is an `N × N` grid of unit pixels centered on the origin, so it
//! covers `[−N/2, N/2]²`. Pixel `(row, col)` covers
//! `x ∈ [−N/2 + col, −N/2 + col + 1]`, `y ∈ [N/2 − row − 1, N/2 − row]` and is
//! column `col·N + row` of the matrix. A ray at angle `θ` and detector offset
//! `s` is the line `{s·n + t·d}` with direction `d = (cos θ, sin θ)` and normal
//! `n = (−sin θ, cos θ)`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseSystemMatrix;

/// Acquisition geometry. Angles are sampled uniformly on the half-open
/// interval `[angle_start, angle_end)` in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelGeometry {
    pub grid_size: usize,
    pub num_angles: usize,
    pub rays_per_angle: usize,
    #[serde(default)]
    pub angle_start: f64,
    #[serde(default = "default_angle_end")]
    pub angle_end: f64,
}

fn default_angle_end() -> f64 {
    180.0
}

impl ParallelGeometry {
    pub fn new(grid_size: usize, num_angles: usize, rays_per_angle: usize) -> Self {
        ParallelGeometry {
            grid_size,
            num_angles,
            rays_per_angle,
            angle_start: 0.0,
            angle_end: default_angle_end(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size == 0 || self.num_angles == 0 || self.rays_per_angle == 0 {
            return Err(Error::invalid(
                "grid size, number of angles and rays per angle must all be at least 1",
            ));
        }
        if !(self.angle_end > self.angle_start) {
            return Err(Error::invalid("angle_end must exceed angle_start"));
        }
        Ok(())
    }

    pub fn num_rays(&self) -> usize {
        self.num_angles * self.rays_per_angle
    }

    /// Projection angles in radians.
    pub fn angles(&self) -> Vec<f64> {
        let span = self.angle_end - self.angle_start;
        (0..self.num_angles)
            .map(|i| (self.angle_start + span * i as f64 / self.num_angles as f64).to_radians())
            .collect()
    }

    /// Detector offsets, equispaced across the grid diagonal `√2·N`
    /// (endpoints included).
    pub fn ray_offsets(&self) -> Vec<f64> {
        let width = std::f64::consts::SQRT_2 * self.grid_size as f64;
        if self.rays_per_angle == 1 {
            return vec![0.0];
        }
        let step = width / (self.rays_per_angle - 1) as f64;
        (0..self.rays_per_angle)
            .map(|i| -0.5 * width + step * i as f64)
            .collect()
    }
}

/// Measured projections with the acquisition that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub values: Vec<f64>,
    pub geometry: ParallelGeometry,
    pub noise_level: f64,
    pub seed: u64,
}

impl Sinogram {
    /// Projects `x` and adds relative noise at `noise_level`.
    pub fn simulate(
        a: &SparseSystemMatrix,
        geometry: &ParallelGeometry,
        x: &[f64],
        noise_level: f64,
        seed: u64,
    ) -> Result<Self> {
        if a.nrows() != geometry.num_rays() {
            return Err(Error::invalid(format!(
                "system matrix has {} rows, geometry has {} rays",
                a.nrows(),
                geometry.num_rays()
            )));
        }
        let clean = forward_project(a, x)?;
        Ok(Sinogram {
            values: add_relative_gaussian_noise(&clean, noise_level, seed)?,
            geometry: geometry.clone(),
            noise_level,
            seed,
        })
    }

    /// CSV with header `angle,ray,value`, one line per measurement.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "angle,ray,value")?;
        let nr = self.geometry.rays_per_angle;
        for (idx, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{:e}", idx / nr, idx % nr, v)?;
        }
        Ok(())
    }

    /// Little-endian `f64` values, no header.
    pub fn write_raw<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw(bytes: &[u8]) -> Result<Vec<f64>> {
        if !bytes.len().is_multiple_of(8) {
            return Err(Error::Format {
                format: "raw f64",
                reason: format!("{} bytes is not a multiple of 8", bytes.len()),
            });
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

/// Intersection lengths of one ray with the pixels of an `N × N` grid,
/// sorted by pixel column index. Empty when the ray misses the grid.
pub fn trace_ray(grid_size: usize, theta: f64, offset: f64) -> Vec<(usize, f64)> {
    let n = grid_size as f64;
    let half = 0.5 * n;
    let (dx, dy) = (theta.cos(), theta.sin());
    let (x0, y0) = (-offset * dy, offset * dx);
    const PARALLEL: f64 = 1e-12;

    // Parameter range inside the square, slab by slab.
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for (origin, dir) in [(x0, dx), (y0, dy)] {
        if dir.abs() < PARALLEL {
            if origin <= -half || origin >= half {
                return Vec::new();
            }
        } else {
            let (a, b) = ((-half - origin) / dir, (half - origin) / dir);
            t_lo = t_lo.max(a.min(b));
            t_hi = t_hi.min(a.max(b));
        }
    }
    if !(t_hi > t_lo) {
        return Vec::new();
    }

    let mut ts = vec![t_lo, t_hi];
    for (origin, dir) in [(x0, dx), (y0, dy)] {
        if dir.abs() < PARALLEL {
            continue;
        }
        for line in 0..=grid_size {
            let t = (-half + line as f64 - origin) / dir;
            if t > t_lo && t < t_hi {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);

    let min_len = 1e-12 * n.max(1.0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= min_len {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let (x, y) = (x0 + tm * dx, y0 + tm * dy);
        let col = ((x + half).floor() as isize).clamp(0, grid_size as isize - 1) as usize;
        let row = ((half - y).floor() as isize).clamp(0, grid_size as isize - 1) as usize;
        entries.push((col * grid_size + row, len));
    }
    entries.sort_by_key(|&(c, _)| c);
    // a pixel can only be split by roundoff; merge such pieces
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (c, v) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => merged.push((c, v)),
        }
    }
    merged
}

/// Builds the `N_p·N_r × N²` matrix of ray–pixel intersection lengths.
/// Rays that miss the grid keep their (empty) rows. Row `a·N_r + i` is
/// ray `i` at angle `a`.
pub fn build_parallel_matrix(geom: &ParallelGeometry) -> Result<SparseSystemMatrix> {
    geom.validate()?;
    let offsets = geom.ray_offsets();
    let angles = geom.angles();
    let rows: Vec<Vec<(usize, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = angles
            .iter()
            .map(|&theta| {
                let offsets = &offsets;
                scope.spawn(move || {
                    offsets
                        .iter()
                        .map(|&s| trace_ray(geom.grid_size, theta, s))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("ray tracing worker panicked"))
            .collect()
    });
    SparseSystemMatrix::from_rows(geom.grid_size * geom.grid_size, rows)
}

/// `b = A x`.
pub fn forward_project(a: &SparseSystemMatrix, x: &[f64]) -> Result<Vec<f64>> {
    a.matvec(x)
}

/// Adds white Gaussian noise scaled so that `‖e‖₂ / ‖b‖₂ = level` exactly.
///
/// The noise direction is drawn from ChaCha20 (stream 0) seeded with `seed`
/// via `seed_from_u64`, mapped to standard normals, then normalized.
pub fn add_relative_gaussian_noise(b: &[f64], level: f64, seed: u64) -> Result<Vec<f64>> {
    if !(level >= 0.0) {
        return Err(Error::invalid(format!(
            "noise level must be non-negative, got {level}"
        )));
    }
    if level == 0.0 {
        return Ok(b.to_vec());
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Err(Error::invalid(
            "cannot scale relative noise against a zero sinogram",
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g: Vec<f64> = (0..b.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let scale = level * b_norm / norm2(&g);
    Ok(b.iter().zip(&g).map(|(bi, gi)| bi + scale * gi).collect())
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct TikhonovSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Aᵀb − (AᵀA + λI)x‖ / ‖Aᵀb‖` at exit.
    pub relative_residual: f64,
}

/// Minimizes `‖Ax − b‖² + λ‖x‖²` by conjugate gradients on the normal
/// equations `(AᵀA + λI)x = Aᵀb`, starting from zero.
pub fn tikhonov_solve(
    a: &SparseSystemMatrix,
    b: &[f64],
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TikhonovSolution> {
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!(
            "Tikhonov parameter must be positive, got {lambda}"
        )));
    }
    let rhs = a.matvec_transpose(b)?;
    let rhs_norm = norm2(&rhs);
    let mut x = vec![0.0; a.ncols()];
    if rhs_norm == 0.0 {
        return Ok(TikhonovSolution {
            x,
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    let normal = |v: &[f64]| -> Result<Vec<f64>> {
        let mut out = a.matvec_transpose(&a.matvec(v)?)?;
        out.iter_mut().zip(v).for_each(|(o, vi)| *o += lambda * vi);
        Ok(out)
    };
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    let mut rel = rr.sqrt() / rhs_norm;
    while iterations < max_iter && rel > tol {
        let q = normal(&d)?;
        let alpha = rr / dot(&d, &q);
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += alpha * di);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        d.iter_mut()
            .zip(&r)
            .for_each(|(di, ri)| *di = ri + beta * *di);
        rr = rr_next;
        iterations += 1;
        rel = rr.sqrt() / rhs_norm;
    }
    Ok(TikhonovSolution {
        x,
        iterations,
        converged: rel <= tol,
        relative_residual: rel,
    })
}
