//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use tpc_core::dict::{
    lambda_sweep, learn_dictionary_observed, project_onto_dictionary_set, DictLearnConfig,
    DictLearnState,
};
use tpc_core::metrics::{compressibility, relative_error, COMPRESSIBILITY_THRESHOLD};
use tpc_core::patch::{extract_training_patches, PatchGeometry};
use tpc_core::recon::{
    dykstra_prox, prox_nonneg_l1, prox_nuclear, reconstruct, BoundaryScaling, ReconConfig,
    ReconProblem,
};
use tpc_core::tensor::{circ, fold, tprod, unfold};
use tpc_core::texture::TextureSpec;
use tpc_core::tomo::{
    add_relative_gaussian_noise, build_parallel_matrix, tikhonov_solve, ParallelGeometry, Sinogram,
};
use tpc_core::Tensor3;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_s as f64,
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn c1_tprod_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (l, m, p, n) = (
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        );
        let b = random_tensor(&mut rng, l, m, n, -1.0, 1.0);
        let c = random_tensor(&mut rng, m, p, n, -1.0, 1.0);
        let fast = tprod(&b, &c).map_err(|e| e.to_string())?;
        let explicit = fold(&(circ(&b) * unfold(&c)), n).map_err(|e| e.to_string())?;
        worst = worst
            .max(rel_fro(&fast, &explicit))
            .max(rel_fro(&fast, &tprod_by_definition(&b, &c)));
    }
    check(worst <= 1e-12, format!("max relative error {worst:e}"))?;
    within(start.elapsed(), 5)?;
    Ok(format!("max relative error {worst:.1e} over 200 pairs"))
}

fn c2_patch_expansion() -> Outcome {
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (p, s, q, r) = (
            rng.random_range(1..=6),
            rng.random_range(1..=6),
            rng.random_range(1..=5),
            rng.random_range(1..=7),
        );
        let d = random_tensor(&mut rng, p, s, r, 0.0, 1.0);
        let h = random_tensor(&mut rng, s, q, r, -1.0, 1.0);
        let y = tprod(&d, &h).map_err(|e| e.to_string())?;
        for j in 0..q {
            let mut expanded = DMatrix::<f64>::zeros(p, r);
            for i in 0..s {
                let di = DMatrix::from_fn(p, r, |a, k| d.get(a, i, k));
                // t-transposed tube: index k ↦ (r − k) mod r
                let tube: Vec<f64> = (0..r).map(|k| h.get(i, j, (r - k) % r)).collect();
                expanded += di * circulant(&tube);
            }
            let yj = DMatrix::from_fn(p, r, |a, k| y.get(a, j, k));
            let err = (&expanded - &yj).norm() / yj.norm().max(1e-300);
            worst = worst.max(err);
        }
    }
    check(worst <= 1e-12, format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.1e} over 50 instances"))
}

/// `Y = D_true * H_true` with `p = 4, s = 6, t = 50, r = 4`, `H_true` 20% dense.
fn planted_fixture(seed: u64) -> (Tensor3, DictLearnConfig) {
    let mut rng = rng(seed);
    let (p, s, t, r) = (4, 6, 50, 4);
    let d_raw = random_tensor(&mut rng, p, s, r, 0.0, 1.0);
    let d_true = project_onto_dictionary_set(&d_raw, 1000, 1e-14).tensor;
    let h_true = Tensor3::from_fn(s, t, r, |_, _, _| {
        if rng.random_bool(0.2) {
            rng.random_range(0.0..1.0)
        } else {
            0.0
        }
    });
    let y = tprod(&d_true, &h_true).unwrap();
    let mut cfg = DictLearnConfig::new(s, 0.01);
    cfg.rho = 1.0;
    cfg.eps = 1e-4;
    cfg.max_iter = 2000;
    cfg.seed = seed;
    (y, cfg)
}

fn set_d_violation(d: &Tensor3) -> f64 {
    let (p, s, r) = d.dims();
    let radius = ((p * r) as f64).sqrt();
    let neg = (-d.min_value()).max(0.0);
    let over = (0..s)
        .map(|j| d.lateral_norm(j) - radius)
        .fold(0.0, f64::max);
    neg.max(over)
}

struct PlantedRun {
    y: Tensor3,
    result: tpc_core::dict::DictLearnResult,
    worst_violation: f64,
    elapsed: Duration,
}

fn run_planted() -> Result<PlantedRun, String> {
    let (y, cfg) = planted_fixture(0);
    let start = Instant::now();
    let mut worst_violation: f64 = 0.0;
    let result = learn_dictionary_observed(&y, &cfg, |st| {
        worst_violation = worst_violation
            .max(set_d_violation(&st.d))
            .max((-st.h.min_value()).max(0.0));
    })
    .map_err(|e| e.to_string())?;
    Ok(PlantedRun {
        y,
        result,
        worst_violation,
        elapsed: start.elapsed(),
    })
}

fn c3_planted_recovery(run: &PlantedRun) -> Outcome {
    let res = &run.result;
    let fit = tprod(res.dictionary(), res.coefficients()).map_err(|e| e.to_string())?;
    let rel = (&fit - &run.y).fro_norm() / run.y.fro_norm();
    check(
        res.converged,
        format!("not converged after {} iterations", res.iterations),
    )?;
    check(rel <= 0.25, format!("relative residual {rel:e}"))?;
    check(
        run.worst_violation <= 1e-9,
        format!("feasibility violated by {:e}", run.worst_violation),
    )?;
    within(run.elapsed, 60)?;
    Ok(format!(
        "converged in {} iterations, relative residual {rel:.2e}, {:.1}s",
        res.iterations,
        run.elapsed.as_secs_f64()
    ))
}

fn c4_kkt(run: &PlantedRun) -> Outcome {
    let st = &run.result.state;
    check(run.result.converged, "no converged state to inspect".into())?;
    let mut misfit = tprod_by_definition(&st.d, &st.h);
    misfit.axpy(-1.0, &run.y);
    let dual_h = tprod_by_definition(&ttranspose_by_definition(&st.d), &misfit);
    let dual_d = tprod_by_definition(&misfit, &ttranspose_by_definition(&st.h));
    let rel = |num: f64, den: f64| num / den.max(1.0);
    let residuals = [
        rel((&st.d - &st.u).max_norm(), st.d.max_norm()),
        rel((&st.h - &st.v).max_norm(), st.h.max_norm()),
        rel(
            (&st.lambda_bar - &dual_h).max_norm(),
            st.lambda_bar.max_norm(),
        ),
        rel((&st.lambda - &dual_d).max_norm(), st.lambda.max_norm()),
    ];
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    check(worst <= 1e-4, format!("residuals {residuals:?}"))?;
    Ok(format!("largest residual {worst:.2e} (ε = 1e-4)"))
}

fn c5_prox() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(5);
    let (mut worst_l1, mut worst_nuc, mut worst_cert): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..100 {
        let x = random_matrix(&mut rng, 4, 3, -2.0, 2.0);
        let tau = rng.random_range(0.0..1.5);

        let out = prox_nonneg_l1(&x, tau);
        for (o, v) in out.iter().zip(x.iter()) {
            worst_l1 = worst_l1.max((o - scalar_prox_by_grid(*v, tau, 1e-4)).abs());
        }

        let out = prox_nuclear(&x, tau).map_err(|e| e.to_string())?;
        worst_nuc = worst_nuc.max((&out - nuclear_prox_by_eigen(&x, tau)).norm());
        // optimality: G = (X − U)/τ must satisfy ‖G‖₂ ≤ 1 and ⟨G, U⟩ = ‖U‖_*
        if tau > 1e-3 {
            let g = (&x - &out) / tau;
            let cert = (spectral_norm(&g) - 1.0)
                .max(0.0)
                .max((g.dot(&out) - nuclear_norm(&out)).abs());
            worst_cert = worst_cert.max(cert);
        }
    }
    let mut worst_dyk: f64 = 0.0;
    for _ in 0..20 {
        let z = random_matrix(&mut rng, 4, 2, -1.0, 2.0);
        let tau = 0.5;
        let out = dykstra_prox(&z, tau, 1e-12, 100_000).map_err(|e| e.to_string())?;
        let oracle = composite_prox_by_subgradient(&z, tau, 200_000);
        worst_dyk = worst_dyk.max((&out.x - oracle).norm());
    }
    let worst = worst_l1.max(worst_nuc).max(worst_cert).max(worst_dyk);
    check(
        worst <= 1e-3,
        format!("one-sided {worst_l1:e}, nuclear {worst_nuc:e}, certificate {worst_cert:e}, composite {worst_dyk:e}"),
    )?;
    within(start.elapsed(), 30)?;
    Ok(format!(
        "one-sided {worst_l1:.1e}, nuclear {worst_nuc:.1e} (certificate {worst_cert:.1e}), composite {worst_dyk:.1e}"
    ))
}

fn c6_gradient() -> Outcome {
    let mut rng = rng(6);
    let (size, p, r, s) = (16, 4, 4, 6);
    let geom = PatchGeometry::new(p, r, size, size).map_err(|e| e.to_string())?;
    let a =
        build_parallel_matrix(&ParallelGeometry::new(size, 10, 23)).map_err(|e| e.to_string())?;
    let b: Vec<f64> = (0..a.nrows()).map(|_| rng.random_range(0.0..5.0)).collect();
    let d = random_tensor(&mut rng, p, s, r, 0.0, 1.0);
    let problem = ReconProblem::new(a, b, d, geom).map_err(|e| e.to_string())?;
    let smooth = problem.smooth(0.7, BoundaryScaling::Stacked);
    let (s_, q, r_) = problem.coeff_dims();
    let c = random_tensor(&mut rng, s_, q, r_, 0.0, 1.0);
    let grad = smooth.gradient(&c).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (i, j, k) = (
            rng.random_range(0..s_),
            rng.random_range(0..q),
            rng.random_range(0..r_),
        );
        let mut plus = c.clone();
        plus.set(i, j, k, c.get(i, j, k) + h);
        let mut minus = c.clone();
        minus.set(i, j, k, c.get(i, j, k) - h);
        let fd = (smooth.value(&plus).unwrap() - smooth.value(&minus).unwrap()) / (2.0 * h);
        let g = grad.get(i, j, k);
        worst = worst.max((fd - g).abs() / g.abs().max(1e-8));
    }
    check(worst <= 1e-5, format!("max relative error {worst:e}"))?;
    Ok(format!(
        "max relative error {worst:.1e} over 20 coordinates"
    ))
}

fn c7_projector() -> Outcome {
    let geom = ParallelGeometry::new(16, 10, 23);
    let a = build_parallel_matrix(&geom).map_err(|e| e.to_string())?;
    let sums = a.row_sums();
    let offsets = geom.ray_offsets();
    let mut worst_chord: f64 = 0.0;
    for (ai, theta) in geom.angles().into_iter().enumerate() {
        for (ri, &off) in offsets.iter().enumerate() {
            let oracle = sampled_chord(16, theta, off, 100_000);
            worst_chord = worst_chord.max((sums[ai * geom.rays_per_angle + ri] - oracle).abs());
        }
    }
    let mut rng = rng(7);
    let mut worst_adj: f64 = 0.0;
    for _ in 0..10 {
        let x: Vec<f64> = (0..a.ncols())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let y: Vec<f64> = (0..a.nrows())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let lhs: f64 = a
            .matvec(&x)
            .unwrap()
            .iter()
            .zip(&y)
            .map(|(u, v)| u * v)
            .sum();
        let rhs: f64 = x
            .iter()
            .zip(a.matvec_transpose(&y).unwrap())
            .map(|(u, v)| u * v)
            .sum();
        worst_adj = worst_adj.max((lhs - rhs).abs());
    }
    check(worst_chord <= 1e-3, format!("chord error {worst_chord:e}"))?;
    check(worst_adj <= 1e-10, format!("adjoint error {worst_adj:e}"))?;
    Ok(format!(
        "chord error {worst_chord:.1e}, adjoint error {worst_adj:.1e}"
    ))
}

struct EndToEnd {
    lambda: f64,
    re: [f64; 2],
    compress: [f64; 2],
    tikhonov_re: f64,
    images: [Vec<f64>; 2],
}

fn run_end_to_end() -> Result<EndToEnd, String> {
    let texture = |row_offset, col_offset| TextureSpec {
        height: 64,
        width: 64,
        seed: 7,
        period: 16,
        row_offset,
        col_offset,
    };
    let train = texture(0, 0).render();
    let exact = texture(5, 11).render();
    let e = |err: tpc_core::Error| err.to_string();

    let y = extract_training_patches(&train, 8, 8, 1, Some(48), 1).map_err(e)?;
    let base = DictLearnConfig {
        max_iter: 1000,
        ..DictLearnConfig::new(32, 0.1)
    };
    let lambdas = [0.01, 0.0316, 0.1, 0.316, 1.0, 3.16, 10.0];
    let sweep = lambda_sweep(&y, &base, &lambdas).map_err(e)?;

    let geom = ParallelGeometry::new(64, 20, 95);
    let a = build_parallel_matrix(&geom).map_err(e)?;
    let sino = Sinogram::simulate(&a, &geom, exact.as_slice(), 0.01, 3).map_err(e)?;

    let mut tikhonov_re = f64::INFINITY;
    for k in -6..=4 {
        let lam = 10f64.powf(k as f64 / 2.0);
        let sol = tikhonov_solve(&a, &sino.values, lam, 500, 1e-8).map_err(e)?;
        tikhonov_re = tikhonov_re.min(relative_error(&sol.x, exact.as_slice()).map_err(e)?);
    }

    let pg = PatchGeometry::new(8, 8, 64, 64).map_err(e)?;
    let problem = ReconProblem::new(
        a,
        sino.values.clone(),
        sweep.selected_run.dictionary().clone(),
        pg,
    )
    .map_err(e)?;
    let mut re = [0.0; 2];
    let mut compress = [0.0; 2];
    let mut images = [Vec::new(), Vec::new()];
    for (slot, nu) in [1u8, 2].into_iter().enumerate() {
        let cfg = ReconConfig {
            max_iter: 4000,
            ..ReconConfig::new(0.01, 0.01, nu)
        };
        let out = reconstruct(&problem, &cfg).map_err(e)?;
        re[slot] = relative_error(out.image.as_slice(), exact.as_slice()).map_err(e)?;
        compress[slot] = compressibility(&out.coeffs, COMPRESSIBILITY_THRESHOLD);
        images[slot] = out.image.as_slice().to_vec();
    }
    Ok(EndToEnd {
        lambda: sweep.selected_lambda(),
        re,
        compress,
        tikhonov_re,
        images,
    })
}

fn c8_end_to_end() -> Outcome {
    let start = Instant::now();
    let first = run_end_to_end()?;
    let second = run_end_to_end()?;
    let elapsed = start.elapsed();
    check(
        first.re.iter().all(|&r| r <= 0.35),
        format!("RE {:?} above 0.35", first.re),
    )?;
    check(
        first.re.iter().all(|&r| r < first.tikhonov_re),
        format!(
            "RE {:?} not below Tikhonov {:.4}",
            first.re, first.tikhonov_re
        ),
    )?;
    check(
        first.compress[0] <= first.compress[1],
        format!("compressibility {:?} not ordered", first.compress),
    )?;
    check(
        first.images == second.images && first.lambda == second.lambda,
        "reruns differ".into(),
    )?;
    within(elapsed, 600)?;
    Ok(format!(
        "lambda {} RE nu1 {:.4} nu2 {:.4} Tikhonov {:.4} compress {:.2}/{:.2} ({:.0} s for two runs)",
        first.lambda,
        first.re[0],
        first.re[1],
        first.tikhonov_re,
        first.compress[0],
        first.compress[1],
        elapsed.as_secs_f64()
    ))
}

fn c9_noise() -> Outcome {
    let geom = ParallelGeometry::new(32, 12, 45);
    let a = build_parallel_matrix(&geom).map_err(|e| e.to_string())?;
    let x = TextureSpec {
        height: 32,
        width: 32,
        seed: 3,
        period: 16,
        row_offset: 0,
        col_offset: 0,
    }
    .render();
    let b = a.matvec(x.as_slice()).map_err(|e| e.to_string())?;
    let norm = |v: &[f64]| v.iter().map(|u| u * u).sum::<f64>().sqrt();
    let mut details = Vec::new();
    for level in [0.01, 0.05] {
        let noisy = add_relative_gaussian_noise(&b, level, 9).map_err(|e| e.to_string())?;
        let e: Vec<f64> = noisy.iter().zip(&b).map(|(n, c)| n - c).collect();
        let realized = norm(&e) / norm(&b);
        check(
            (realized - level).abs() <= 1e-12,
            format!("level {level}: realized {realized:e}"),
        )?;
        details.push(format!("{level} → {:.1e} off", (realized - level).abs()));
    }
    Ok(details.join(", "))
}

fn c10_rank_one_tube() -> Outcome {
    let mut rng = rng(10);
    let (p, s, t) = (6, 8, 30);
    let y = random_tensor(&mut rng, p, t, 1, 0.0, 1.0);
    let mut cfg = DictLearnConfig::new(s, 0.1);
    cfg.max_iter = 60;
    cfg.eps = 1e-300;
    let init = DictLearnState::initial(&y, &cfg).map_err(|e| e.to_string())?;
    let mut reference = MatrixAdmm {
        d: as_matrix(&init.d),
        h: as_matrix(&init.h),
        u: as_matrix(&init.u),
        v: as_matrix(&init.v),
        lambda: as_matrix(&init.lambda),
        lambda_bar: as_matrix(&init.lambda_bar),
    };
    let y_mat = as_matrix(&y);
    let mut worst: f64 = 0.0;
    learn_dictionary_observed(&y, &cfg, |st| {
        reference.step(&y_mat, cfg.lambda, cfg.rho);
        for (tensor, matrix) in [
            (&st.d, &reference.d),
            (&st.h, &reference.h),
            (&st.u, &reference.u),
            (&st.v, &reference.v),
            (&st.lambda, &reference.lambda),
            (&st.lambda_bar, &reference.lambda_bar),
        ] {
            worst = worst.max((as_matrix(tensor) - matrix).amax());
        }
    })
    .map_err(|e| e.to_string())?;
    check(worst <= 1e-10, format!("max deviation {worst:e}"))?;
    Ok(format!(
        "max deviation {worst:.1e} over {} iterations",
        cfg.max_iter
    ))
}

fn main() -> ExitCode {
    let planted = run_planted();
    let criteria: Vec<Criterion> = vec![
        ("1 t-product oracle equivalence", Box::new(c1_tprod_oracle)),
        ("2 patch expansion identity", Box::new(c2_patch_expansion)),
        (
            "3 planted factorization recovery",
            Box::new(|| {
                planted
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(c3_planted_recovery)
            }),
        ),
        (
            "4 KKT residuals at convergence",
            Box::new(|| planted.as_ref().map_err(Clone::clone).and_then(c4_kkt)),
        ),
        ("5 prox operators", Box::new(c5_prox)),
        ("6 gradient check", Box::new(c6_gradient)),
        ("7 projector validity", Box::new(c7_projector)),
        ("8 end-to-end desk-scale CT", Box::new(c8_end_to_end)),
        ("9 noise contract", Box::new(c9_noise)),
        ("10 r = 1 degeneracy", Box::new(c10_rank_one_tube)),
    ];
    let mut failures = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
