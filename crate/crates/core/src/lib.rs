pub mod activations;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corruptions;
pub mod data;
pub mod dct;
pub mod decision_map;
pub mod error;
pub mod eval;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod network;
pub mod optim;
pub mod plot;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
