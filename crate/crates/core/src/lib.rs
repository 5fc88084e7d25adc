//! Seeded segmentation and image matting as energy minimization.
//!
//! The crate builds the random-walker and closed-form matting energies over
//! an image grid, evaluates them for arbitrary candidate solutions, computes
//! their exact minimizers with a preconditioned conjugate-gradient solver,
//! and provides the seed generation, metrics and timing tools around them.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod field;
pub mod image;
pub mod matting_energy;
pub mod numeric;
pub mod rng;
pub mod seg_energy;
pub mod solver;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
pub use field::{AlphaMatte, ProbabilityField, SeedMap};
pub use image::Image;
pub use rng::Rng;
pub use sparse::CsrMatrix;
pub use tensor::Tensor;
