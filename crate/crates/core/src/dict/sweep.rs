//! Trade-off sweep for the sparsity weight λ.

use super::admm::{learn_dictionary, DictLearnConfig, DictLearnResult};
use crate::error::{Error, Result};
use crate::tensor::{tprod, Tensor3};

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub lambda: f64,
    /// `‖Y − D*H‖_F`
    pub residual_fro: f64,
    /// `‖H‖_sum`
    pub h_sum: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SweepPoint {
    /// Selection criterion `‖H‖²_sum + ‖Y − D*H‖²_F`.
    pub fn criterion(&self) -> f64 {
        self.h_sum * self.h_sum + self.residual_fro * self.residual_fro
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    /// Sorted by λ ascending.
    pub points: Vec<SweepPoint>,
    pub selected: usize,
    /// The learning run for the selected λ.
    pub selected_run: DictLearnResult,
}

impl SweepReport {
    pub fn selected_lambda(&self) -> f64 {
        self.points[self.selected].lambda
    }
}

/// Learns one dictionary per λ (concurrently; each run is independent and
/// seeded by `base.seed`) and selects the λ minimizing
/// `‖H‖²_sum + ‖Y − D*H‖²_F`. Ties go to the smaller λ.
pub fn lambda_sweep(y: &Tensor3, base: &DictLearnConfig, lambdas: &[f64]) -> Result<SweepReport> {
    if lambdas.len() < 2 {
        return Err(Error::invalid("a λ sweep needs at least two values"));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::invalid(format!("λ must be non-negative, got {bad}")));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);

    let runs: Vec<Result<DictLearnResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sorted
            .iter()
            .map(|&lambda| {
                let cfg = DictLearnConfig {
                    lambda,
                    ..base.clone()
                };
                scope.spawn(move || learn_dictionary(y, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("λ sweep worker panicked"))
            .collect()
    });

    let mut points = Vec::with_capacity(sorted.len());
    let mut results = Vec::with_capacity(sorted.len());
    for (&lambda, run) in sorted.iter().zip(runs) {
        let run = run?;
        let fit = tprod(run.dictionary(), run.coefficients())?;
        points.push(SweepPoint {
            lambda,
            residual_fro: (&fit - y).fro_norm(),
            h_sum: run.coefficients().sum_norm(),
            converged: run.converged,
            iterations: run.iterations,
        });
        results.push(run);
    }
    let selected = points
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.criterion()
                .total_cmp(&b.1.criterion())
                .then(a.0.cmp(&b.0))
        })
        .map(|(i, _)| i)
        .expect("at least two points");
    let selected_run = results.swap_remove(selected);
    Ok(SweepReport {
        points,
        selected,
        selected_run,
    })
}
