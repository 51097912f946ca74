pub mod baselines;
pub mod bench;
pub mod boosters;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimation;
pub mod hedgemower;
pub mod model;
pub mod optimize;
pub mod predictor;
pub mod slack;
pub mod trees;

pub use error::{Error, Result};
