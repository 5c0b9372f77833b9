//! Reference methods: Elo and multidimensional Elo ratings for reconstructing
//! symmetric two-player win-probability games, and a fully connected
//! equilibrium solver for one fixed game shape.

mod flat;
mod ratings;

pub use flat::{fit_flat_mlp_ne, flat_hidden_width, FlatMlp, FlatOutcome};
pub use ratings::*;

#[cfg(test)]
mod tests;
