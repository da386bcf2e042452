//! The pipeline stages. Each reads its inputs from the config and the
//! workdir and writes its outputs (plus a manifest) into one subdirectory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tpc_core::dict::{
    lambda_sweep, learn_dictionary, mean_approx_error, DictLearnConfig, DictLearnResult,
};
use tpc_core::metrics::{compressibility, density, relative_error, ssim, MetricsReport};
use tpc_core::patch::{extract_training_patches, partition_image, PatchGeometry};
use tpc_core::recon::{reconstruct, ReconConfig, ReconProblem};
use tpc_core::tensor::io::{load_tns, save_tns};
use tpc_core::tomo::{
    build_parallel_matrix, forward_project, tikhonov_solve, ParallelGeometry, Sinogram,
};
use tpc_core::{GrayImage, SparseSystemMatrix, Tensor3};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Subdirectories of the workdir, one per stage.
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workdir { root: root.into() }
    }

    pub fn patches(&self) -> PathBuf {
        self.root.join("patches")
    }

    pub fn dict(&self) -> PathBuf {
        self.root.join("dict")
    }

    pub fn sino(&self) -> PathBuf {
        self.root.join("sino")
    }

    pub fn recon(&self) -> PathBuf {
        self.root.join("recon")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn load_stage_tensor(path: &Path) -> CliResult<Tensor3> {
    if !path.exists() {
        return Err(CliError::MissingStage(format!(
            "{} not found",
            path.display()
        )));
    }
    Ok(load_tns(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchManifest {
    pub t: usize,
    pub p: usize,
    pub r: usize,
    pub stride: usize,
    pub max_patches: Option<usize>,
    pub seed: u64,
}

/// Extracts training patches into `patches/Y.tns`.
pub fn cmd_extract(cfg: &RunConfig) -> CliResult<PatchManifest> {
    let img = cfg.paths.train_image.load()?;
    let pc = &cfg.patches;
    let y = extract_training_patches(&img, pc.p, pc.r, pc.stride, pc.max_patches, pc.seed)
        .map_err(|e| CliError::Config(format!("patches: {e}")))?;
    let wd = Workdir::new(&cfg.paths.workdir);
    ensure_dir(&wd.patches())?;
    save_tns(wd.patches().join("Y.tns"), &y)?;
    let manifest = PatchManifest {
        t: y.dims().1,
        p: pc.p,
        r: pc.r,
        stride: pc.stride,
        max_patches: pc.max_patches,
        seed: pc.seed,
    };
    write_json(&wd.patches().join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictManifest {
    pub lambda: f64,
    pub s: usize,
    pub iterations: usize,
    pub converged: bool,
    /// True when every learned coefficient is zero.
    pub h_all_zero: bool,
    pub residual_fro: f64,
    pub h_sum: f64,
}

fn load_patches(wd: &Workdir) -> CliResult<Tensor3> {
    load_stage_tensor(&wd.patches().join("Y.tns"))
}

fn save_dictionary(
    wd: &Workdir,
    y: &Tensor3,
    cfg: &DictLearnConfig,
    run: &DictLearnResult,
) -> CliResult<DictManifest> {
    let dir = wd.dict();
    ensure_dir(&dir)?;
    save_tns(dir.join("D.tns"), run.dictionary())?;
    save_tns(dir.join("H.tns"), run.coefficients())?;
    let mut hist = csv::Writer::from_path(dir.join("history.csv"))?;
    hist.write_record(["iter", "kkt_d", "kkt_h", "kkt_u", "kkt_v", "objective"])?;
    for (idx, (kkt, obj)) in run
        .kkt_history
        .iter()
        .zip(&run.objective_history)
        .enumerate()
    {
        let mut row = vec![(idx + 1).to_string()];
        row.extend(
            kkt.iter()
                .chain(std::iter::once(obj))
                .map(|v| format!("{v:e}")),
        );
        hist.write_record(&row)?;
    }
    hist.flush()?;
    let fit = tpc_core::tensor::tprod(run.dictionary(), run.coefficients())?;
    let manifest = DictManifest {
        lambda: cfg.lambda,
        s: cfg.s,
        iterations: run.iterations,
        converged: run.converged,
        h_all_zero: run.coefficients().as_slice().iter().all(|&v| v == 0.0),
        residual_fro: (&fit - y).fro_norm(),
        h_sum: run.coefficients().sum_norm(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Learns a dictionary at `learn.lambda` into `dict/`.
pub fn cmd_learn(cfg: &RunConfig) -> CliResult<DictManifest> {
    let wd = Workdir::new(&cfg.paths.workdir);
    let y = load_patches(&wd)?;
    let run = learn_dictionary(&y, &cfg.learn)?;
    save_dictionary(&wd, &y, &cfg.learn, &run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub residual_fro: f64,
    pub h_sum: f64,
    pub criterion: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Learns one dictionary per `sweep.lambdas` entry, writes
/// `reports/sweep.csv` and stores the selected dictionary in `dict/`.
pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<(Vec<SweepRow>, f64)> {
    let wd = Workdir::new(&cfg.paths.workdir);
    let y = load_patches(&wd)?;
    let report = lambda_sweep(&y, &cfg.learn, &cfg.sweep.lambdas)?;
    let rows: Vec<SweepRow> = report
        .points
        .iter()
        .map(|p| SweepRow {
            lambda: p.lambda,
            residual_fro: p.residual_fro,
            h_sum: p.h_sum,
            criterion: p.criterion(),
            converged: p.converged,
            iterations: p.iterations,
        })
        .collect();
    ensure_dir(&wd.reports())?;
    let mut w = csv::Writer::from_path(wd.reports().join("sweep.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let selected = report.selected_lambda();
    let learn = DictLearnConfig {
        lambda: selected,
        ..cfg.learn.clone()
    };
    save_dictionary(&wd, &y, &learn, &report.selected_run)?;
    Ok((rows, selected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinoManifest {
    pub m: usize,
    pub grid_size: usize,
    pub num_angles: usize,
    pub rays_per_angle: usize,
    pub noise_level: f64,
    pub realized_noise_level: f64,
    pub seed: u64,
}

fn geometry(cfg: &RunConfig, exact: &GrayImage) -> CliResult<ParallelGeometry> {
    if exact.height() != exact.width() {
        return Err(CliError::Config(format!(
            "the tomography simulator needs a square image, got {}x{}",
            exact.height(),
            exact.width()
        )));
    }
    let t = &cfg.tomo;
    Ok(ParallelGeometry {
        grid_size: exact.height(),
        num_angles: t.num_angles,
        rays_per_angle: t.rays_per_angle,
        angle_start: t.angle_start,
        angle_end: t.angle_end,
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projects the exact image and writes clean and noisy sinograms to `sino/`.
pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<SinoManifest> {
    let exact = cfg.paths.exact_image.load()?;
    let geom = geometry(cfg, &exact)?;
    let a = build_parallel_matrix(&geom)?;
    let clean = forward_project(&a, exact.as_slice())?;
    let noisy = Sinogram::simulate(
        &a,
        &geom,
        exact.as_slice(),
        cfg.tomo.noise_level,
        cfg.tomo.seed,
    )?;
    let clean = Sinogram {
        values: clean,
        noise_level: 0.0,
        ..noisy.clone()
    };

    let wd = Workdir::new(&cfg.paths.workdir);
    let dir = wd.sino();
    ensure_dir(&dir)?;
    clean.write_raw(BufWriter::new(File::create(dir.join("clean.raw"))?))?;
    noisy.write_raw(BufWriter::new(File::create(dir.join("noisy.raw"))?))?;
    clean.write_csv(BufWriter::new(File::create(dir.join("clean.csv"))?))?;
    noisy.write_csv(BufWriter::new(File::create(dir.join("noisy.csv"))?))?;
    a.write_matrix_market(BufWriter::new(File::create(dir.join("A.mtx"))?))?;

    let err: Vec<f64> = noisy
        .values
        .iter()
        .zip(&clean.values)
        .map(|(n, c)| n - c)
        .collect();
    let clean_norm = norm2(&clean.values);
    let manifest = SinoManifest {
        m: a.nrows(),
        grid_size: geom.grid_size,
        num_angles: geom.num_angles,
        rays_per_angle: geom.rays_per_angle,
        noise_level: cfg.tomo.noise_level,
        realized_noise_level: if clean_norm > 0.0 {
            norm2(&err) / clean_norm
        } else {
            0.0
        },
        seed: cfg.tomo.seed,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

struct ReconInputs {
    exact: GrayImage,
    a: SparseSystemMatrix,
    b: Vec<f64>,
    d: Tensor3,
    patch_geom: PatchGeometry,
}

fn recon_inputs(cfg: &RunConfig, wd: &Workdir) -> CliResult<ReconInputs> {
    let exact = cfg.paths.exact_image.load()?;
    cfg.check_tiling(exact.height(), exact.width())?;
    let geom = geometry(cfg, &exact)?;
    let raw_path = wd.sino().join("noisy.raw");
    let raw = fs::read(&raw_path)
        .map_err(|_| CliError::MissingStage(format!("{} not found", raw_path.display())))?;
    let b = Sinogram::read_raw(&raw)?;
    if b.len() != geom.num_rays() {
        return Err(CliError::MissingStage(format!(
            "sinogram has {} values but the configured geometry has {} rays; rerun simulate",
            b.len(),
            geom.num_rays()
        )));
    }
    let d = load_stage_tensor(&wd.dict().join("D.tns"))?;
    let patch_geom = PatchGeometry::for_image(&exact, cfg.patches.p, cfg.patches.r)?;
    Ok(ReconInputs {
        a: build_parallel_matrix(&geom)?,
        exact,
        b,
        d,
        patch_geom,
    })
}

fn run_recon(
    cfg: &RunConfig,
    wd: &Workdir,
    inputs: &ReconInputs,
    recon: &ReconConfig,
) -> CliResult<MetricsReport> {
    let problem = ReconProblem::new(
        inputs.a.clone(),
        inputs.b.clone(),
        inputs.d.clone(),
        inputs.patch_geom,
    )?;
    let start = Instant::now();
    let out = reconstruct(&problem, recon)?;
    let elapsed = start.elapsed().as_secs_f64();
    let prior = out.diagnostics.prior;
    let tag = format!("nu{}", recon.nu);

    let dir = wd.recon();
    ensure_dir(&dir)?;
    out.image.save_pgm(dir.join(format!("x_{tag}.pgm")))?;
    save_tns(dir.join(format!("C_{tag}.tns")), &out.coeffs)?;
    out.diagnostics.write_csv(BufWriter::new(File::create(
        dir.join(format!("diagnostics_{tag}.csv")),
    )?))?;
    write_json(
        &dir.join(format!("manifest_{tag}.json")),
        &serde_json::json!({
            "prior": prior.name(),
            "nu": recon.nu,
            "mu": recon.mu,
            "delta": recon.delta,
            "converged": out.diagnostics.converged,
            "iterations": out.diagnostics.iterations,
            "restarts": out.diagnostics.restarts,
        }),
    )?;

    let threshold = cfg.evaluate.compressibility_threshold;
    Ok(MetricsReport {
        method: format!("tensor-{}", prior.name()),
        iterations: out.diagnostics.iterations,
        density_percent: density(&out.coeffs),
        compressibility_percent: compressibility(&out.coeffs, threshold),
        re: relative_error(out.image.as_slice(), inputs.exact.as_slice())?,
        ssim: ssim(&out.image, &inputs.exact)?,
        wall_time_seconds: if cfg.evaluate.record_wall_time {
            elapsed
        } else {
            0.0
        },
    })
}

fn write_metrics(path: &Path, rows: &[MetricsReport]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reconstructs with the configured prior; writes the image, coefficients
/// and diagnostics to `recon/` and one metrics row to `reports/`.
pub fn cmd_reconstruct(cfg: &RunConfig) -> CliResult<MetricsReport> {
    let wd = Workdir::new(&cfg.paths.workdir);
    let inputs = recon_inputs(cfg, &wd)?;
    let report = run_recon(cfg, &wd, &inputs, &cfg.recon)?;
    ensure_dir(&wd.reports())?;
    write_metrics(
        &wd.reports().join(format!("metrics_nu{}.csv", cfg.recon.nu)),
        std::slice::from_ref(&report),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeSummary {
    pub mae: f64,
    pub q: usize,
    pub s: usize,
}

/// Mean approximation error of the dictionary on the exact image's
/// patches: `reports/mae.json` and the per-patch `reports/mae_patches.csv`.
pub fn cmd_mae(cfg: &RunConfig) -> CliResult<MaeSummary> {
    let wd = Workdir::new(&cfg.paths.workdir);
    let exact = cfg.paths.exact_image.load()?;
    cfg.check_tiling(exact.height(), exact.width())?;
    let d = load_stage_tensor(&wd.dict().join("D.tns"))?;
    let geom = PatchGeometry::for_image(&exact, cfg.patches.p, cfg.patches.r)?;
    let x = partition_image(&exact, &geom)?;
    let rep = mean_approx_error(&d, &x, cfg.evaluate.mae_max_iter, cfg.evaluate.mae_tol)?;
    ensure_dir(&wd.reports())?;
    let mut w = csv::Writer::from_path(wd.reports().join("mae_patches.csv"))?;
    w.write_record(["patch", "error_fro"])?;
    for (j, e) in rep.per_patch.iter().enumerate() {
        w.write_record([j.to_string(), format!("{e:e}")])?;
    }
    w.flush()?;
    let summary = MaeSummary {
        mae: rep.mae,
        q: geom.q(),
        s: d.dims().1,
    };
    write_json(&wd.reports().join("mae.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TikhonovRow {
    pub lambda: f64,
    pub re: f64,
    pub ssim: f64,
    pub iterations: usize,
}

/// Tikhonov baseline over `evaluate.tikhonov_lambdas` plus reconstructions
/// with both priors; writes `reports/tikhonov.csv` and the comparison
/// table `reports/table.csv` (best Tikhonov row first).
pub fn cmd_evaluate(cfg: &RunConfig) -> CliResult<Vec<MetricsReport>> {
    let wd = Workdir::new(&cfg.paths.workdir);
    let inputs = recon_inputs(cfg, &wd)?;
    let ev = &cfg.evaluate;
    let mut grid = Vec::new();
    let mut best: Option<(MetricsReport, GrayImage)> = None;
    for &lambda in &ev.tikhonov_lambdas {
        let start = Instant::now();
        let sol = tikhonov_solve(&inputs.a, &inputs.b, lambda, ev.cg_max_iter, ev.cg_tol)?;
        let elapsed = start.elapsed().as_secs_f64();
        let img = GrayImage::from_vec(inputs.exact.height(), inputs.exact.width(), sol.x)?;
        let row = MetricsReport {
            method: format!("tikhonov(lambda={lambda})"),
            iterations: sol.iterations,
            density_percent: 100.0,
            compressibility_percent: 100.0,
            re: relative_error(img.as_slice(), inputs.exact.as_slice())?,
            ssim: ssim(&img, &inputs.exact)?,
            wall_time_seconds: if ev.record_wall_time { elapsed } else { 0.0 },
        };
        grid.push(TikhonovRow {
            lambda,
            re: row.re,
            ssim: row.ssim,
            iterations: row.iterations,
        });
        if best.as_ref().is_none_or(|(b, _)| row.re < b.re) {
            best = Some((row, img));
        }
    }
    ensure_dir(&wd.reports())?;
    let mut w = csv::Writer::from_path(wd.reports().join("tikhonov.csv"))?;
    for row in &grid {
        w.serialize(row)?;
    }
    w.flush()?;
    let (best_row, best_img) = best.expect("validated non-empty grid");
    ensure_dir(&wd.recon())?;
    best_img.save_pgm(wd.recon().join("x_tikhonov.pgm"))?;

    let mut table = vec![best_row];
    for nu in [1u8, 2] {
        let recon = ReconConfig {
            nu,
            ..cfg.recon.clone()
        };
        table.push(run_recon(cfg, &wd, &inputs, &recon)?);
    }
    write_metrics(&wd.reports().join("table.csv"), &table)?;
    Ok(table)
}

/// Prints a table row per line to `out`.
pub fn print_table<W: Write>(mut out: W, rows: &[MetricsReport]) -> CliResult<()> {
    writeln!(
        out,
        "{:<28} {:>6} {:>9} {:>9} {:>8} {:>7}",
        "method", "itr", "density%", "compr%", "RE%", "SSIM"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:<28} {:>6} {:>9.2} {:>9.2} {:>8.2} {:>7.4}",
            r.method,
            r.iterations,
            r.density_percent,
            r.compressibility_percent,
            100.0 * r.re,
            r.ssim
        )?;
    }
    Ok(())
}
