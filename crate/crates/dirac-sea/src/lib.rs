//! Momentum-space variational principle for vacuum Dirac-sea configurations.

pub mod action;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod solve;
pub mod special;
pub mod variation;

pub use error::{Error, Result};
