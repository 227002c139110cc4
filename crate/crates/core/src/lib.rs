//! Sparse sensor selection under the A-optimality criterion.
//!
//! * [`model`]: measurement model, least-squares estimation, `tr((CᵀC)⁻¹)`.
//! * [`prox`]: block soft/hard and top-`p` group thresholding.
//! * [`admm`]: ADMM on the sparsity-promoting decoder problem with polishing.
//! * [`greedy`]: greedy A-optimal baseline.
//! * [`relax`]: barrier-smoothed convex relaxation solved by Newton's method.
//! * [`data`]: random problems, snapshot I/O, POD reduction, cross-validation
//!   and reconstruction scoring.

pub mod admm;
pub mod data;
pub mod error;
pub mod greedy;
mod linalg;
pub mod model;
pub mod prox;
pub mod relax;

pub use error::{Result, SskError};
pub use model::{CandidateMatrix, GainMatrix, MeasurementMatrix, SensorSelection};
