//! Image ↔ patch-tensor conversions and the patch-boundary difference operator.
//!
//! A `p × r` patch is a lateral slice `p × 1 × r`: patch rows run down the
//! first dimension and patch columns along the tube. Non-overlapping blocks
//! of an `M × N` image are numbered column-major over the block grid, so
//! block `(u, v)` is lateral slice `v·(M/p) + u`. [`PermutationMap`] is the
//! single place that knows this ordering.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::sparse::SparseSystemMatrix;
use crate::tensor::Tensor3;

/// Patch size and image size for a non-overlapping partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    p: usize,
    r: usize,
    height: usize,
    width: usize,
}

impl PatchGeometry {
    pub fn new(p: usize, r: usize, height: usize, width: usize) -> Result<Self> {
        if p == 0 || r == 0 {
            return Err(Error::invalid("patch dimensions must be positive"));
        }
        if height == 0 || width == 0 || !height.is_multiple_of(p) || !width.is_multiple_of(r) {
            return Err(Error::invalid(format!(
                "a {height}x{width} image cannot be partitioned into {p}x{r} patches"
            )));
        }
        Ok(PatchGeometry {
            p,
            r,
            height,
            width,
        })
    }

    pub fn for_image(img: &GrayImage, p: usize, r: usize) -> Result<Self> {
        Self::new(p, r, img.height(), img.width())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn blocks_down(&self) -> usize {
        self.height / self.p
    }

    pub fn blocks_across(&self) -> usize {
        self.width / self.r
    }

    /// Number of patches `q = (M/p)(N/r)`.
    pub fn q(&self) -> usize {
        self.blocks_down() * self.blocks_across()
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    /// `M(M/p − 1) + N(N/r − 1)`, the boundary-pixel count normalizing ψ.
    pub fn boundary_denominator(&self) -> usize {
        self.height * (self.blocks_down() - 1) + self.width * (self.blocks_across() - 1)
    }
}

/// Maps positions of `vec(X)` for a `p × q × r` patch tensor `X` to pixel
/// indices of `vec(image)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationMap {
    forward: Vec<usize>,
}

impl PermutationMap {
    pub fn new(geom: &PatchGeometry) -> Self {
        let (p, r, m) = (geom.p, geom.r, geom.height);
        let q = geom.q();
        let down = geom.blocks_down();
        let mut forward = vec![0; geom.num_pixels()];
        for k in 0..r {
            for j in 0..q {
                let (u, v) = (j % down, j / down);
                for i in 0..p {
                    let (row, col) = (u * p + i, v * r + k);
                    forward[(k * q + j) * p + i] = col * m + row;
                }
            }
        }
        PermutationMap { forward }
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Tensor-order vector to image-order vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v.len())?;
        let mut out = vec![0.0; v.len()];
        for (&dst, &x) in self.forward.iter().zip(v) {
            out[dst] = x;
        }
        Ok(out)
    }

    /// Image-order vector to tensor-order vector (the inverse permutation).
    pub fn apply_adjoint(&self, img: &[f64]) -> Result<Vec<f64>> {
        self.check(img.len())?;
        Ok(self.forward.iter().map(|&src| img[src]).collect())
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.forward.len() {
            return Err(Error::invalid(format!(
                "vector of length {len} does not match permutation of length {}",
                self.forward.len()
            )));
        }
        Ok(())
    }
}

/// Slides a `p × r` window over the image (row-major over window positions,
/// step `stride`) and returns the windows as lateral slices of a `p × t × r`
/// tensor. With `max_patches = Some(k)` and more than `k` windows, a seeded
/// uniform subsample of `k` windows is kept in scan order.
pub fn extract_training_patches(
    img: &GrayImage,
    p: usize,
    r: usize,
    stride: usize,
    max_patches: Option<usize>,
    seed: u64,
) -> Result<Tensor3> {
    if p == 0 || r == 0 || p > img.height() || r > img.width() {
        return Err(Error::invalid(format!(
            "{p}x{r} patches do not fit a {}x{} image",
            img.height(),
            img.width()
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let mut corners: Vec<(usize, usize)> = (0..=img.height() - p)
        .step_by(stride)
        .flat_map(|row| {
            (0..=img.width() - r)
                .step_by(stride)
                .map(move |col| (row, col))
        })
        .collect();
    if let Some(limit) = max_patches {
        if corners.len() > limit {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut keep = sample(&mut rng, corners.len(), limit).into_vec();
            keep.sort_unstable();
            corners = keep.into_iter().map(|i| corners[i]).collect();
        }
    }
    Ok(Tensor3::from_fn(p, corners.len(), r, |i, j, k| {
        let (row, col) = corners[j];
        img.get(row + i, col + k)
    }))
}

/// Splits the image into its `q` non-overlapping patches, a `p × q × r` tensor.
pub fn partition_image(img: &GrayImage, geom: &PatchGeometry) -> Result<Tensor3> {
    if (img.height(), img.width()) != (geom.height, geom.width) {
        return Err(Error::invalid(format!(
            "image is {}x{}, geometry expects {}x{}",
            img.height(),
            img.width(),
            geom.height,
            geom.width
        )));
    }
    let perm = PermutationMap::new(geom);
    let data = perm.apply_adjoint(img.as_slice())?;
    Tensor3::from_vec(geom.p, geom.q(), geom.r, data)
}

/// Inverse of [`partition_image`].
pub fn assemble_image(x: &Tensor3, geom: &PatchGeometry) -> Result<GrayImage> {
    if x.dims() != (geom.p, geom.q(), geom.r) {
        return Err(Error::invalid(format!(
            "patch tensor has dims {:?}, geometry expects {:?}",
            x.dims(),
            (geom.p, geom.q(), geom.r)
        )));
    }
    let perm = PermutationMap::new(geom);
    GrayImage::from_vec(geom.height, geom.width, perm.apply(x.as_slice())?)
}

/// Finite differences across patch boundaries: one row per pair of
/// neighboring pixels on opposite sides of a boundary, `+1` on the
/// later pixel and `−1` on the earlier one (image vec order).
///
/// Rows for vertical boundaries (between block columns) come first, then
/// horizontal ones; there are `M·(N/r − 1) + N·(M/p − 1)` rows.
pub fn boundary_diff_operator(geom: &PatchGeometry) -> SparseSystemMatrix {
    let (m, n) = (geom.height, geom.width);
    let mut rows =
        Vec::with_capacity(m * (geom.blocks_across() - 1) + n * (geom.blocks_down() - 1));
    for v in 1..geom.blocks_across() {
        let col = v * geom.r;
        for row in 0..m {
            rows.push(vec![((col - 1) * m + row, -1.0), (col * m + row, 1.0)]);
        }
    }
    for u in 1..geom.blocks_down() {
        let row = u * geom.p;
        for col in 0..n {
            rows.push(vec![(col * m + row - 1, -1.0), (col * m + row, 1.0)]);
        }
    }
    SparseSystemMatrix::from_rows(m * n, rows).expect("boundary pairs are distinct and in range")
}

/// Boundary penalty `ψ(z) = ½‖Lz‖² / (M(M/p − 1) + N(N/r − 1))`; zero when
/// the image is a single patch.
pub fn psi(z: &[f64], geom: &PatchGeometry, l_op: &SparseSystemMatrix) -> Result<f64> {
    if z.len() != geom.num_pixels() {
        return Err(Error::invalid(format!(
            "image vector of length {} for a {}x{} geometry",
            z.len(),
            geom.height,
            geom.width
        )));
    }
    let den = geom.boundary_denominator();
    if den == 0 {
        return Ok(0.0);
    }
    let lz = l_op.matvec(z)?;
    Ok(0.5 * lz.iter().map(|v| v * v).sum::<f64>() / den as f64)
}
