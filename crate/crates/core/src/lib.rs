//! Information-theoretic generalization bounds for finite and Gaussian
//! learning problems.

pub mod bounds;
pub mod cli;
pub mod cgf;
pub mod error;
pub mod gaussian;
pub mod info;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod supersample;

pub use error::{Error, Result};
