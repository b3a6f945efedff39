//! Neural-network verification competition harness.
//!
//! The crate is split along the pipeline a competition run goes through:
//!
//! - [`spec`]: VNNLIB parsing, disjunctive normalization and point evaluation.
//! - [`network`]: ONNX loading for feedforward networks and exact evaluation.
//! - [`verifier`]: the built-in baseline participant (bound propagation with
//!   input splitting, a sampling/PGD falsifier) and counterexample validation.
//! - [`scoring`]: overhead correction, adjudication, instance points, time
//!   bonuses, benchmark percentages and report rendering.
//! - [`harness`]: manifests, tool adapters run under timeouts, overhead runs,
//!   radius calibration and the configuration file.

pub mod harness;
pub mod network;
pub mod scoring;
pub mod spec;
pub mod status;
pub mod verifier;

mod error;
mod numfmt;

pub use error::Error;
pub use numfmt::format_g17;
pub use status::Status;

pub type Result<T, E = Error> = std::result::Result<T, E>;
