pub mod cli;
pub mod config;
pub mod corrector;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod spectral;
pub mod study;

pub use error::{Error, Result};
