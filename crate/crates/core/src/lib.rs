//! Additive kernel ridge regression and its baselines.

pub mod cli;
pub mod design;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kernels;
pub mod model_selection;
pub mod simulation;
pub mod theory;

pub use error::{Error, Result};
