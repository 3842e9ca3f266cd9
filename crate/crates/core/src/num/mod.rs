//! Deterministic numerical primitives shared by every other module.

pub mod linalg;
pub mod normal;
pub mod rng;
pub mod stats;
pub mod student_t;

pub use linalg::{eig_extremes, solve_spd, trace_solve, Cholesky, Matrix};
pub use normal::{normal_cdf, normal_inv_cdf, normal_pdf};
pub use rng::{Purpose, RngStream};
pub use stats::RunningStats;
pub use student_t::{sample_student_t, StudentT};
