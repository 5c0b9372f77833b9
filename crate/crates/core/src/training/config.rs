use serde::{Deserialize, Serialize};

use crate::engine::Precision;
use crate::error::{Error, Result};
use crate::game::{sample_disc_game, sample_invariant_game, sample_mask, Game};
use crate::model::{ModelConfig, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Standard-normal payoffs, equilibrium-invariant normalized.
    Invariant,
    /// Two-player DISC win-probability games.
    Disc,
}

/// Distribution of training and evaluation games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub sampler: Sampler,
    pub num_players: usize,
    pub actions: Vec<usize>,
    /// Latent dimension of DISC games.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_dim: Option<usize>,
    #[serde(default = "one")]
    pub p_observe: f64,
}

fn one() -> f64 {
    1.0
}

impl GameSpec {
    pub fn invariant(actions: Vec<usize>) -> Self {
        GameSpec {
            sampler: Sampler::Invariant,
            num_players: actions.len(),
            actions,
            latent_dim: None,
            p_observe: 1.0,
        }
    }

    pub fn disc(num_actions: usize, latent_dim: usize, p_observe: f64) -> Self {
        GameSpec {
            sampler: Sampler::Disc,
            num_players: 2,
            actions: vec![num_actions, num_actions],
            latent_dim: Some(latent_dim),
            p_observe,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_players < 2 || self.actions.len() != self.num_players {
            return Err(Error::invalid(
                "actions",
                format!(
                    "{} players with action counts {:?}",
                    self.num_players, self.actions
                ),
            ));
        }
        if self.actions.iter().any(|&t| t < 2) {
            return Err(Error::invalid(
                "actions",
                "every player needs at least 2 actions",
            ));
        }
        if !(0.0..=1.0).contains(&self.p_observe) {
            return Err(Error::invalid(
                "p_observe",
                format!("{} not in [0, 1]", self.p_observe),
            ));
        }
        match self.sampler {
            Sampler::Invariant if self.latent_dim.is_some() => Err(Error::invalid(
                "latent_dim",
                "only used by the disc sampler",
            )),
            Sampler::Disc if self.num_players != 2 || self.actions[0] != self.actions[1] => {
                Err(Error::invalid(
                    "actions",
                    "disc games have two players with equal action counts",
                ))
            }
            Sampler::Disc if self.latent_dim.unwrap_or(0) == 0 => Err(Error::invalid(
                "latent_dim",
                "disc games need a positive latent dimension",
            )),
            _ => Ok(()),
        }
    }

    /// The complete game for `seed`, carrying an observation mask when `p_observe < 1`.
    pub fn sample(&self, seed: u64) -> Result<Game> {
        let game = match self.sampler {
            Sampler::Invariant => sample_invariant_game(seed, &self.actions)?,
            Sampler::Disc => {
                sample_disc_game(seed, self.actions[0], self.latent_dim.unwrap_or(0))?.0
            }
        };
        if self.p_observe < 1.0 {
            game.with_mask(Some(sample_mask(seed, &self.actions, self.p_observe)?))
        } else {
            Ok(game)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub game: GameSpec,
    pub model: ModelConfig,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub eval_every: usize,
    #[serde(default = "default_precision")]
    pub precision: Precision,
    #[serde(default = "default_eval_games")]
    pub eval_games: usize,
    /// Record elapsed seconds in the metrics; off keeps output byte-reproducible.
    #[serde(default)]
    pub wall_clock: bool,
    /// Global gradient-norm clipping threshold; `null` disables clipping.
    #[serde(default = "default_max_grad_norm")]
    pub max_grad_norm: Option<f64>,
}

fn default_precision() -> Precision {
    Precision::F32
}

fn default_eval_games() -> usize {
    256
}

fn default_max_grad_norm() -> Option<f64> {
    Some(DEFAULT_MAX_GRAD_NORM)
}

/// Clipping keeps the non-smooth equilibrium loss from oscillating late in training.
pub const DEFAULT_MAX_GRAD_NORM: f64 = 1.0;

impl TrainConfig {
    /// Equilibrium training on `actions`-shaped invariant games with the defaults.
    pub fn new(task: Task, game: GameSpec, model: ModelConfig) -> Self {
        TrainConfig {
            task,
            game,
            model,
            steps: 5000,
            batch_size: 64,
            learning_rate: 3e-4,
            seed: 0,
            eval_every: 500,
            precision: Precision::F32,
            eval_games: 256,
            wall_clock: false,
            max_grad_norm: default_max_grad_norm(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.game.validate()?;
        for (field, v) in [
            ("steps", self.steps),
            ("batch_size", self.batch_size),
            ("eval_every", self.eval_every),
            ("eval_games", self.eval_games),
        ] {
            if v == 0 {
                return Err(Error::invalid(field, "must be positive"));
            }
        }
        if let Some(max) = self.max_grad_norm {
            if !(max.is_finite() && max > 0.0) {
                return Err(Error::invalid("max_grad_norm", format!("{max}")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(
                "learning_rate",
                format!("{}", self.learning_rate),
            ));
        }
        if matches!(self.task, Task::Ne | Task::Devgain) && self.game.p_observe < 1.0 {
            return Err(Error::invalid(
                "p_observe",
                format!("task {} needs fully observed games", self.task),
            ));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: TrainConfig =
            serde_json::from_str(s).map_err(|e| Error::invalid("config", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
