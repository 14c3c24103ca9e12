//! Sparse signal recovery from compressive measurements that pass through a
//! finite-bit, saturating uniform quantizer.

pub mod analysis;
pub mod calibration;
pub mod constrained;
pub mod error;
pub mod harness;
pub mod instance;
pub mod lasso_inf;
pub mod linalg;
pub mod partition;
pub mod prox;
pub mod quantizer;
mod refine;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
