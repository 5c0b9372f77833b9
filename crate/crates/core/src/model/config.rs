use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Encoder hyperparameters: width `dim`, block count `blocks`, action-to-action
/// layers per block `action_layers`, and attention `heads`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub blocks: usize,
    pub action_layers: usize,
    pub heads: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 32,
            blocks: 4,
            action_layers: 1,
            heads: 8,
        }
    }
}

impl ModelConfig {
    pub fn new(dim: usize, blocks: usize, action_layers: usize, heads: usize) -> Result<Self> {
        let c = ModelConfig {
            dim,
            blocks,
            action_layers,
            heads,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if self.blocks == 0 {
            return Err(Error::invalid("blocks", "must be at least 1"));
        }
        if self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(Error::invalid(
                "heads",
                format!("{} heads must divide width {}", self.heads, self.dim),
            ));
        }
        Ok(())
    }
}

/// Which decoder a model carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Per-player marginal action distributions trained toward equilibrium.
    Ne,
    /// Per-joint-action maximal deviation gain.
    Devgain,
    /// Payoff reconstruction for every joint action and player.
    Recon,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Ne, Task::Devgain, Task::Recon];

    pub fn name(self) -> &'static str {
        match self {
            Task::Ne => "ne",
            Task::Devgain => "devgain",
            Task::Recon => "recon",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid("task", format!("unknown task `{s}`")))
    }
}
