//! Task losses, the training loop over freshly sampled games, and evaluation.
//!
//! Seeds: from the root seed `s`, training games of step `t` use
//! `derive_seed(derive_seed(s, 1), t * batch_size + i)`, held-out games use
//! `derive_seed(derive_seed(s, 2), i)`, and parameters are initialized from
//! `derive_seed(s, 3)`.

mod config;
mod loss;

pub use config::{GameSpec, Sampler, TrainConfig};
pub use loss::{
    devgain_loss, loss, loss_and_gradient, loss_graph, model_input, ne_loss, recon_loss,
};

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{Adam, AdamConfig, Precision, Real, StepOutcome};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::model::{Model, Task};
use crate::oracles::{masked_mse, max_deviation_gains, ne_gap};
use crate::rng::derive_seed;

const TRAIN_GAMES: u64 = 1;
const HELDOUT_GAMES: u64 = 2;
const INIT: u64 = 3;
const EVAL_CHUNK: usize = 64;

pub fn train_game_seed(seed: u64, batch_size: usize, step: usize, index: usize) -> u64 {
    derive_seed(
        derive_seed(seed, TRAIN_GAMES),
        (step * batch_size + index) as u64,
    )
}

pub fn heldout_game_seed(seed: u64, index: usize) -> u64 {
    derive_seed(derive_seed(seed, HELDOUT_GAMES), index as u64)
}

pub fn init_seed(seed: u64) -> u64 {
    derive_seed(seed, INIT)
}

/// The fixed evaluation set of a run.
pub fn heldout_games(config: &TrainConfig) -> Result<Vec<Game>> {
    (0..config.eval_games)
        .map(|i| config.game.sample(heldout_game_seed(config.seed, i)))
        .collect()
}

/// One row of the metrics stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub step: usize,
    /// Mean batch loss since the previous row.
    pub train_loss: f64,
    /// Held-out NE gap, deviation-gain MSE, or unobserved-entry MSE.
    pub eval_metric: f64,
    pub seconds: f64,
}

pub const METRICS_HEADER: &str = "step,train_loss,eval_metric,seconds";

pub fn write_metrics_csv(w: &mut impl Write, rows: &[Metrics]) -> Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in rows {
        writeln!(
            w,
            "{},{},{},{}",
            m.step, m.train_loss, m.eval_metric, m.seconds
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model<f64>,
    pub metrics: Vec<Metrics>,
    /// Batch loss of every step.
    pub losses: Vec<f64>,
    /// Steps whose gradient was non-finite and therefore not applied.
    pub skipped_steps: usize,
}

pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(config, &mut |_| {})
}

/// Trains and calls `progress` with each metrics row as it is produced.
pub fn train_with_progress(
    config: &TrainConfig,
    progress: &mut dyn FnMut(&Metrics),
) -> Result<TrainOutcome> {
    config.validate()?;
    match config.precision {
        Precision::F32 => run::<f32>(config, progress),
        Precision::F64 => run::<f64>(config, progress),
    }
}

fn run<F: Real>(config: &TrainConfig, progress: &mut dyn FnMut(&Metrics)) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut model = Model::<F>::new(config.model, config.task, init_seed(config.seed))?;
    let heldout = heldout_games(config)?;
    let mut adam = Adam::<F>::new(
        model.num_parameters(),
        AdamConfig {
            learning_rate: config.learning_rate,
            max_grad_norm: config.max_grad_norm,
            ..AdamConfig::default()
        },
    );
    let mut params = model.flat_params();
    let mut losses = Vec::with_capacity(config.steps);
    let mut metrics = Vec::new();
    let mut skipped = 0;
    let mut window = 0.0;
    let mut window_len = 0;
    for step in 0..config.steps {
        let games = (0..config.batch_size)
            .map(|i| {
                let raw =
                    config
                        .game
                        .sample(train_game_seed(config.seed, config.batch_size, step, i))?;
                model_input(config.task, &raw)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Game> = games.iter().collect();
        let (value, grads) = loss_and_gradient(&model, &refs)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                seed: train_game_seed(config.seed, config.batch_size, step, 0),
            });
        }
        if let StepOutcome::Skipped { .. } = adam.step(&mut params, &grads)? {
            skipped += 1;
        }
        model.set_flat_params(&params)?;
        losses.push(value);
        window += value;
        window_len += 1;
        let done = step + 1;
        if done % config.eval_every == 0 || done == config.steps {
            let row = Metrics {
                step: done,
                train_loss: window / window_len as f64,
                eval_metric: evaluate(&model, &heldout)?,
                seconds: if config.wall_clock {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            };
            progress(&row);
            metrics.push(row);
            window = 0.0;
            window_len = 0;
        }
    }
    Ok(TrainOutcome {
        model: model.cast(),
        metrics,
        losses,
        skipped_steps: skipped,
    })
}

/// Task metric of `model` averaged over raw `games`.
///
/// Games are preprocessed exactly as in training. Reconstruction reports the
/// squared error on unobserved entries (all entries if nothing is masked).
pub fn evaluate<F: Real>(model: &Model<F>, games: &[Game]) -> Result<f64> {
    if games.is_empty() {
        return Err(Error::EmptySelection("no evaluation games"));
    }
    let task = model.task();
    let inputs = games
        .iter()
        .map(|g| model_input(task, g))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for chunk in inputs.chunks(EVAL_CHUNK) {
        let refs: Vec<&Game> = chunk.iter().collect();
        let outputs = model.predict(&refs)?;
        for (game, out) in chunk.iter().zip(outputs) {
            total += game_metric(task, game, &out)?;
        }
    }
    Ok(total / games.len() as f64)
}

fn game_metric(task: Task, game: &Game, out: &[f64]) -> Result<f64> {
    match task {
        Task::Ne => Ok(ne_gap(game, &crate::model::split_marginals(game.actions(), out))?.ne_gap),
        Task::Devgain => {
            let target = max_deviation_gains(game)?;
            masked_mse(out, &target, &vec![true; target.len()])
        }
        Task::Recon => {
            let nj = game.num_joint();
            let hidden: Vec<bool> = (0..game.payoffs().len())
                .map(|i| !game.is_observed(i % nj))
                .collect();
            let select = if hidden.contains(&true) {
                hidden
            } else {
                vec![true; hidden.len()]
            };
            masked_mse(out, game.payoffs(), &select)
        }
    }
}
