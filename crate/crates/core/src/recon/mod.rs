//! Dictionary-regularized reconstruction: the image is `Π vec(D*C)` for a
//! non-negative coefficient tensor `C` found by proximal gradient.

mod problem;
mod prox;
mod solver;

pub use problem::{BoundaryScaling, ReconProblem, Residuals, SmoothObjective};
pub use prox::{
    dykstra_prox, prox_nonneg_l1, prox_nonneg_l1_tensor, prox_nuclear, stacked_to_tensor,
    tensor_to_stacked, DykstraProx,
};
pub use solver::{
    prior_value, prox_step, reconstruct, IterationRecord, Prior, ReconConfig, ReconDiagnostics,
    ReconOutput,
};
