//! Unsupervised neural eigensolver for boundary-conditioned 1-D eigenvalue
//! problems, with a classical finite-difference oracle for verification.

pub mod config;
pub mod dualgrad;
pub mod error;
pub mod losses;
pub mod network;
pub mod objective;
pub mod oracle;
pub mod parallel;
pub mod problems;
pub mod trainer;

pub use error::{Error, Result};
