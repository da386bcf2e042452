//! Tensor dictionary learning: the feasible-set projection, the ADMM solver,
//! non-negative coding against a fixed dictionary, and the λ sweep.

mod admm;
mod nnls;
mod projection;
mod sweep;

pub use admm::{
    admm_step, admm_step_with_projection, kkt_from_parts, kkt_residuals, learn_dictionary,
    learn_dictionary_observed, objective, soft_threshold, DictLearnConfig, DictLearnResult,
    DictLearnState,
};
pub use nnls::{mean_approx_error, nnls_lateral, nnls_tpatch, MaeReport, NnlsSolution};
pub use projection::{project_onto_dictionary_set, Projection};
pub use sweep::{lambda_sweep, SweepPoint, SweepReport};
