//! Individualized treatment rules from observational data with a binary instrument when the
//! treatment effect is only partially identified.

pub mod bounds;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod nuisance;
pub mod risk;
pub mod rng;
pub mod rulefile;
pub mod simlab;
pub mod transform;
pub mod wsvm;

pub use error::{Error, Result};
