//! Tools for certifying the restricted isometry property of random sensing
//! matrices and for probing how hard that certification is on average.
//!
//! * [`sampling`]: sparse Rademacher spikes, null and planted spiked Wishart matrices.
//! * [`rip`]: restricted Gram deviations, `B_s(X)` by enumeration, exact RIP decision.
//! * [`certifier`]: the lazy certifier and the asymmetric certification wrapper.
//! * [`ldlr`]: the degree-`D` likelihood-ratio norm of the spiked Wishart model.
//! * [`bounds`]: closed-form concentration and failure-probability bounds.
//! * [`harness`]: planted-vs-null experiments, witness checks, tradeoff sweeps.

pub mod bounds;
pub mod certifier;
pub mod cli;
pub mod combin;
pub mod eigen;
pub mod error;
pub mod harness;
pub mod ldlr;
pub mod matrix;
pub mod numeric;
pub mod rip;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use matrix::{ModelTag, Scale, SensingMatrix};
