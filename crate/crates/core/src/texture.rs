//! Synthetic periodic textures standing in for photographic training and
//! test images.
//!
//! A texture is a seeded sum of cosine gratings on a periodic lattice, passed
//! through a soft contrast curve so it is not band-limited to a handful of
//! frequencies. Two crops of the same texture at different offsets share
//! statistics without sharing pixels, which is what a training/test split
//! needs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::image::GrayImage;

/// Parameters of a synthetic texture crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureSpec {
    pub height: usize,
    pub width: usize,
    /// Selects the texture (its gratings).
    pub seed: u64,
    /// Lattice period in pixels along both axes.
    #[serde(default = "default_period")]
    pub period: usize,
    #[serde(default)]
    pub row_offset: usize,
    #[serde(default)]
    pub col_offset: usize,
}

fn default_period() -> usize {
    16
}

struct Grating {
    fy: f64,
    fx: f64,
    phase: f64,
    amplitude: f64,
}

impl TextureSpec {
    pub fn render(&self) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let period = self.period.max(2) as f64;
        let max_freq = (self.period / 4).max(1) as i64;
        let gratings: Vec<Grating> = (0..4)
            .map(|g| {
                let (mut a, mut b) = (0, 0);
                while a == 0 && b == 0 {
                    a = rng.random_range(-max_freq..=max_freq);
                    b = rng.random_range(0..=max_freq);
                }
                Grating {
                    fy: 2.0 * PI * a as f64 / period,
                    fx: 2.0 * PI * b as f64 / period,
                    phase: rng.random_range(0.0..2.0 * PI),
                    amplitude: 1.0 / (1.0 + g as f64),
                }
            })
            .collect();
        let total: f64 = gratings.iter().map(|g| g.amplitude).sum();
        GrayImage::from_fn(self.height, self.width, |row, col| {
            let y = (row + self.row_offset) as f64;
            let x = (col + self.col_offset) as f64;
            let s: f64 = gratings
                .iter()
                .map(|g| g.amplitude * (g.fy * y + g.fx * x + g.phase).cos())
                .sum::<f64>()
                / total;
            // s ∈ [−1, 1]; the tanh curve sharpens edges and stays inside (0, 1)
            0.5 + 0.45 * (2.0 * s).tanh() / 2f64.tanh()
        })
    }
}
