use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Action embeddings of one game: `players[p][i]` is the `dim`-vector of action `i` of player `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionEmbeddings {
    pub dim: usize,
    pub players: Vec<Vec<Vec<f64>>>,
}

impl ActionEmbeddings {
    pub fn new(dim: usize, players: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for (p, rows) in players.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != dim {
                    return Err(Error::shape(
                        "embeddings",
                        format!(
                            "player {p} action {i} has {} values, expected {dim}",
                            row.len()
                        ),
                    ));
                }
            }
        }
        Ok(ActionEmbeddings { dim, players })
    }

    pub fn zeros(actions: &[usize], dim: usize) -> Self {
        ActionEmbeddings {
            dim,
            players: actions.iter().map(|&t| vec![vec![0.0; dim]; t]).collect(),
        }
    }

    /// `(actions per player, dim)`.
    pub fn shape(&self) -> (Vec<usize>, usize) {
        (self.players.iter().map(Vec::len).collect(), self.dim)
    }

    /// Action vectors in player-major order.
    pub fn rows(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.players.iter().flatten()
    }
}
