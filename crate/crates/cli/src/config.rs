//! Run configuration: one JSON document drives every stage.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tpc_core::dict::DictLearnConfig;
use tpc_core::recon::ReconConfig;
use tpc_core::texture::TextureSpec;
use tpc_core::GrayImage;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub patches: PatchesConfig,
    pub learn: DictLearnConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub tomo: TomoConfig,
    pub recon: ReconConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchesConfig {
    pub p: usize,
    pub r: usize,
    pub stride: usize,
    #[serde(default)]
    pub max_patches: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lambdas: vec![0.01, 0.1, 1.0, 10.0],
        }
    }
}

/// Acquisition settings; the grid size is taken from the exact image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoConfig {
    pub num_angles: usize,
    pub rays_per_angle: usize,
    #[serde(default)]
    pub angle_start: f64,
    #[serde(default = "default_angle_end")]
    pub angle_end: f64,
    pub noise_level: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_angle_end() -> f64 {
    180.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Tikhonov parameters tried by the baseline; the best is reported.
    #[serde(default = "default_tikhonov_lambdas")]
    pub tikhonov_lambdas: Vec<f64>,
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_mae_max_iter")]
    pub mae_max_iter: usize,
    #[serde(default = "default_mae_tol")]
    pub mae_tol: f64,
    /// Threshold for the compressibility percentage.
    #[serde(default = "default_compressibility_threshold")]
    pub compressibility_threshold: f64,
    /// Wall-clock times make reports differ between reruns, so they are
    /// written only on request.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            tikhonov_lambdas: default_tikhonov_lambdas(),
            cg_max_iter: default_cg_max_iter(),
            cg_tol: default_cg_tol(),
            mae_max_iter: default_mae_max_iter(),
            mae_tol: default_mae_tol(),
            compressibility_threshold: default_compressibility_threshold(),
            record_wall_time: false,
        }
    }
}

fn default_tikhonov_lambdas() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 100.0]
}
fn default_cg_max_iter() -> usize {
    500
}
fn default_cg_tol() -> f64 {
    1e-8
}
fn default_mae_max_iter() -> usize {
    5000
}
fn default_mae_tol() -> f64 {
    1e-10
}
fn default_compressibility_threshold() -> f64 {
    tpc_core::metrics::COMPRESSIBILITY_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub train_image: ImageSource,
    pub exact_image: ImageSource,
    pub workdir: PathBuf,
}

/// An image file (PGM or PNG) or a synthetic texture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageSource {
    File(PathBuf),
    Synthetic { synthetic: TextureSpec },
}

impl ImageSource {
    pub fn load(&self) -> CliResult<GrayImage> {
        match self {
            ImageSource::File(path) => GrayImage::load(path).map_err(|e| {
                CliError::Config(format!("cannot load image {}: {e}", path.display()))
            }),
            ImageSource::Synthetic { synthetic } => {
                if synthetic.height == 0 || synthetic.width == 0 {
                    return Err(CliError::Config("synthetic image must be non-empty".into()));
                }
                Ok(synthetic.render())
            }
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let ImageSource::File(path) = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

impl RunConfig {
    /// Reads the config, applies `key=value` overrides (dotted keys; values
    /// parsed as JSON, falling back to a plain string), resolves relative
    /// paths against the config file's directory and validates.
    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, overrides, base)
    }

    pub fn from_json(text: &str, overrides: &[String], base: &Path) -> CliResult<Self> {
        let mut doc: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.paths.train_image.resolve(base);
        cfg.paths.exact_image.resolve(base);
        if cfg.paths.workdir.is_relative() {
            cfg.paths.workdir = base.join(&cfg.paths.workdir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need the images themselves.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let pc = &self.patches;
        if pc.p == 0 || pc.r == 0 {
            return bad("patches.p and patches.r must be at least 1".into());
        }
        if pc.stride == 0 {
            return bad("patches.stride must be at least 1".into());
        }
        if pc.max_patches == Some(0) {
            return bad("patches.max_patches must be at least 1 when given".into());
        }
        self.learn
            .validate()
            .map_err(|e| CliError::Config(format!("learn: {e}")))?;
        if self.sweep.lambdas.len() < 2 {
            return bad("sweep.lambdas needs at least two values".into());
        }
        if self.sweep.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return bad("sweep.lambdas must be non-negative".into());
        }
        let t = &self.tomo;
        if t.num_angles == 0 || t.rays_per_angle == 0 {
            return bad("tomo.num_angles and tomo.rays_per_angle must be at least 1".into());
        }
        if !(t.angle_end > t.angle_start) {
            return bad("tomo.angle_end must exceed tomo.angle_start".into());
        }
        if !(t.noise_level >= 0.0) {
            return bad(format!(
                "tomo.noise_level must be non-negative, got {}",
                t.noise_level
            ));
        }
        self.recon
            .validate()
            .map_err(|e| CliError::Config(format!("recon: {e}")))?;
        let ev = &self.evaluate;
        if ev.tikhonov_lambdas.is_empty() || ev.tikhonov_lambdas.iter().any(|l| !(*l > 0.0)) {
            return bad(
                "evaluate.tikhonov_lambdas must be a non-empty list of positive values".into(),
            );
        }
        if !(ev.cg_tol > 0.0) || !(ev.mae_tol > 0.0) {
            return bad("evaluate tolerances must be positive".into());
        }
        Ok(())
    }

    /// Checks that the patch size tiles an image of the given size.
    pub fn check_tiling(&self, height: usize, width: usize) -> CliResult<()> {
        let (p, r) = (self.patches.p, self.patches.r);
        if !height.is_multiple_of(p) {
            return Err(CliError::Config(format!(
                "patch height p = {p} does not divide the image height {height}"
            )));
        }
        if !width.is_multiple_of(r) {
            return Err(CliError::Config(format!(
                "patch width r = {r} does not divide the image width {width}"
            )));
        }
        Ok(())
    }
}

fn apply_override(doc: &mut Value, item: &str) -> CliResult<()> {
    let (key, raw) = item.split_once('=').ok_or_else(|| {
        CliError::Config(format!("override `{item}` is not of the form key=value"))
    })?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (idx, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("override key `{key}` walks into a non-object"))
        })?;
        if idx + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Config(format!("empty override key in `{item}`")))
}
