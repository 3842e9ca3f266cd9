//! Prediction risk estimation for linear quantile regression.

// `!(x > tol)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cv;
pub mod dataset;
pub mod dgp;
pub mod error;
pub mod harness;
pub mod model;
pub mod num;
pub mod optimism;
pub mod oracle;
pub mod qr;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use model::ModelSpec;
pub use qr::{fit, Estimator, QuantileFit, SolverOptions};
