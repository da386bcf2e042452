//! Tensor dictionary learning under the t-product and dictionary-regularized
//! tomographic reconstruction.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dict;
pub mod error;
pub mod image;
pub mod metrics;
pub mod patch;
pub mod recon;
pub mod sparse;
pub mod tensor;
pub mod texture;
pub mod tomo;

pub use error::{Error, Result};
pub use image::GrayImage;
pub use patch::{PatchGeometry, PermutationMap};
pub use sparse::SparseSystemMatrix;
pub use tensor::{FourierTensor3, Tensor3, TubeFiber};
