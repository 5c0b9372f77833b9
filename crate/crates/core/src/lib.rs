pub mod baselines;
pub mod checks;
pub mod engine;
pub mod error;
pub mod game;
pub mod model;
pub mod oracles;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
