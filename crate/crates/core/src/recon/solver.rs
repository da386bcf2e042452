//! Accelerated proximal gradient over the coefficient tensor.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::problem::{BoundaryScaling, ReconProblem};
use super::prox::{dykstra_prox, prox_nonneg_l1_tensor, stacked_to_tensor, tensor_to_stacked};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::patch::assemble_image;
use crate::tensor::{tprod, Tensor3};

/// Coefficient prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prior {
    /// `‖C‖_sum / q`
    Sparse,
    /// `(‖C‖_sum + ‖C‖_*) / q` on the stacked `sq × r` matrix
    SparseLowRank,
}

impl Prior {
    pub fn from_nu(nu: u8) -> Result<Self> {
        match nu {
            1 => Ok(Prior::Sparse),
            2 => Ok(Prior::SparseLowRank),
            other => Err(Error::invalid(format!(
                "prior selector ν must be 1 or 2, got {other}"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Prior::Sparse => "sum",
            Prior::SparseLowRank => "sum+nuclear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    /// Prior weight; the threshold used in the prox is `τ = μ/q`.
    pub mu: f64,
    /// Boundary smoothness weight.
    pub delta: f64,
    /// Prior selector, 1 or 2.
    pub nu: u8,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::rel_change_tol")]
    pub rel_change_tol: f64,
    #[serde(default = "defaults::dykstra_tol")]
    pub dykstra_tol: f64,
    #[serde(default = "defaults::dykstra_max_iter")]
    pub dykstra_max_iter: usize,
    /// Initial step; `None` uses the inverse of a power-method estimate of
    /// the gradient's Lipschitz constant.
    #[serde(default)]
    pub initial_step: Option<f64>,
    #[serde(default = "defaults::shrink")]
    pub shrink: f64,
    #[serde(default = "defaults::power_iterations")]
    pub power_iterations: usize,
    #[serde(default)]
    pub boundary_scaling: BoundaryScaling,
}

mod defaults {
    pub fn max_iter() -> usize {
        3000
    }
    pub fn rel_change_tol() -> f64 {
        1e-7
    }
    pub fn dykstra_tol() -> f64 {
        1e-3
    }
    pub fn dykstra_max_iter() -> usize {
        200
    }
    pub fn shrink() -> f64 {
        0.5
    }
    pub fn power_iterations() -> usize {
        10
    }
}

impl ReconConfig {
    pub fn new(mu: f64, delta: f64, nu: u8) -> Self {
        ReconConfig {
            mu,
            delta,
            nu,
            max_iter: defaults::max_iter(),
            rel_change_tol: defaults::rel_change_tol(),
            dykstra_tol: defaults::dykstra_tol(),
            dykstra_max_iter: defaults::dykstra_max_iter(),
            initial_step: None,
            shrink: defaults::shrink(),
            power_iterations: defaults::power_iterations(),
            boundary_scaling: BoundaryScaling::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        Prior::from_nu(self.nu)?;
        if !(self.mu >= 0.0) || !(self.delta >= 0.0) {
            return Err(Error::invalid("μ and δ must be non-negative"));
        }
        if !(self.rel_change_tol > 0.0) || !(self.dykstra_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid(format!(
                "shrink factor must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if let Some(step) = self.initial_step {
            if !(step > 0.0) {
                return Err(Error::invalid(format!(
                    "initial step must be positive, got {step}"
                )));
            }
        }
        Ok(())
    }

    pub fn prior(&self) -> Result<Prior> {
        Prior::from_nu(self.nu)
    }

    /// `τ = μ/q`.
    pub fn tau(&self, q: usize) -> f64 {
        self.mu / q as f64
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub step: f64,
    pub rel_change: f64,
}

#[derive(Debug, Clone)]
pub struct ReconDiagnostics {
    pub prior: Prior,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub history: Vec<IterationRecord>,
}

impl ReconDiagnostics {
    /// CSV with header `iter,objective,step,rel_change`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,objective,step,rel_change")?;
        for rec in &self.history {
            writeln!(
                w,
                "{},{:e},{:e},{:e}",
                rec.iter, rec.objective, rec.step, rec.rel_change
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReconOutput {
    pub image: GrayImage,
    pub coeffs: Tensor3,
    pub diagnostics: ReconDiagnostics,
}

/// Applies the prox of `step·τ·g` for the chosen prior.
pub fn prox_step(
    c: &Tensor3,
    tau: f64,
    prior: Prior,
    step: f64,
    cfg: &ReconConfig,
) -> Result<Tensor3> {
    let threshold = step * tau;
    match prior {
        Prior::Sparse => Ok(prox_nonneg_l1_tensor(c, threshold)),
        Prior::SparseLowRank => {
            let stacked = tensor_to_stacked(c);
            let out = dykstra_prox(&stacked, threshold, cfg.dykstra_tol, cfg.dykstra_max_iter)?;
            stacked_to_tensor(&out.x, c.dims().0)
        }
    }
}

/// The prior `g(C)` without the `τ` factor, for `C ≥ 0`.
pub fn prior_value(c: &Tensor3, prior: Prior) -> f64 {
    let sum = c.sum_norm();
    match prior {
        Prior::Sparse => sum,
        Prior::SparseLowRank => sum + tensor_to_stacked(c).singular_values().sum(),
    }
}

/// Minimizes `f(C) + τ·g(C)` over `C ≥ 0` from `C = 0`.
///
/// Each iteration takes a prox-gradient step from the extrapolated point,
/// halving the step (by `cfg.shrink`) until the quadratic upper bound on the
/// smooth part holds. If the full objective increases, momentum is reset and
/// the step is retried from the last accepted iterate.
pub fn reconstruct(problem: &ReconProblem, cfg: &ReconConfig) -> Result<ReconOutput> {
    cfg.validate()?;
    let prior = cfg.prior()?;
    let smooth = problem.smooth(cfg.delta, cfg.boundary_scaling);
    let (s, q, r) = problem.coeff_dims();
    let tau = cfg.tau(q);

    let mut step = match cfg.initial_step {
        Some(step) => step,
        None => {
            let lip = smooth.lipschitz_estimate(cfg.power_iterations)?;
            if lip > 0.0 {
                1.0 / lip
            } else {
                1.0
            }
        }
    };

    let mut x = Tensor3::zeros(s, q, r);
    let mut f_x = smooth.value(&x)?;
    let mut obj_x = f_x;
    let mut y = x.clone();
    let mut theta = 1.0_f64;
    let mut momentum = false;
    let mut history = Vec::new();
    let mut restarts = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let (f_y, grad) = if momentum {
            smooth.value_and_gradient(&y)?
        } else {
            (f_x, smooth.gradient(&x)?)
        };
        let base = if momentum { &y } else { &x };

        let (x_new, f_new) = loop {
            let mut trial = base.clone();
            trial.axpy(-step, &grad);
            let cand = prox_step(&trial, tau, prior, step, cfg)?;
            let f_cand = smooth.value(&cand)?;
            let diff = &cand - base;
            let bound = f_y + grad.dot(&diff) + diff.dot(&diff) / (2.0 * step);
            if f_cand <= bound + 1e-12 * f_y.abs().max(1e-300) || step < 1e-300 {
                break (cand, f_cand);
            }
            step *= cfg.shrink;
        };
        let obj_new = f_new + tau * prior_value(&x_new, prior);

        if momentum && obj_new > obj_x {
            momentum = false;
            theta = 1.0;
            restarts += 1;
            continue;
        }

        let change = (&x_new - &x).fro_norm();
        let rel_change = change / x.fro_norm().max(1.0);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        y = &x_new + &(&(&x_new - &x) * beta);
        momentum = beta > 0.0;
        theta = theta_next;
        x = x_new;
        f_x = f_new;
        obj_x = obj_new;
        history.push(IterationRecord {
            iter: iterations,
            objective: obj_x,
            step,
            rel_change,
        });
        if rel_change < cfg.rel_change_tol {
            converged = true;
            break;
        }
    }

    let patches = tprod(problem.dictionary(), &x)?;
    let image = assemble_image(&patches, problem.geometry())?;
    Ok(ReconOutput {
        image,
        coeffs: x,
        diagnostics: ReconDiagnostics {
            prior,
            converged,
            iterations,
            restarts,
            history,
        },
    })
}
