use std::rc::Rc;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::{Adam, AdamConfig, Csr, Graph, NeGapGame, Real, Tensor, Var};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::model::split_marginals;
use crate::model::Task;
use crate::oracles::{ne_gap, MixedProfile};
use crate::rng;
use crate::training::{
    heldout_games, init_seed, model_input, train_game_seed, Metrics, TrainConfig,
};

/// Fully connected equilibrium baseline for one fixed game shape:
/// flattened payoffs, two GELU hidden layers, per-player softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatMlp {
    pub actions: Vec<usize>,
    pub hidden: usize,
    /// Weights `[in, out]` and biases `[1, out]` of the three layers, in order.
    pub params: Vec<Tensor<f64>>,
}

fn layer_sizes(actions: &[usize], hidden: usize) -> [(usize, usize); 3] {
    let input = actions.len() * actions.iter().product::<usize>();
    let output = actions.iter().sum();
    [(input, hidden), (hidden, hidden), (hidden, output)]
}

fn count(actions: &[usize], hidden: usize) -> usize {
    layer_sizes(actions, hidden)
        .iter()
        .map(|(i, o)| i * o + o)
        .sum()
}

/// Smallest hidden width whose parameter count reaches `min_params`.
pub fn flat_hidden_width(actions: &[usize], min_params: usize) -> usize {
    let mut h = 1;
    while count(actions, h) < min_params {
        h += 1;
    }
    h
}

impl FlatMlp {
    pub fn new(actions: &[usize], hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 || actions.len() < 2 {
            return Err(Error::invalid(
                "hidden",
                "need a positive width and at least two players",
            ));
        }
        let mut r = rng::stream(seed, rng::streams::PARAM_INIT);
        let mut params = Vec::new();
        for (i, o) in layer_sizes(actions, hidden) {
            let normal = Normal::new(0.0, (1.0 / i as f64).sqrt()).expect("valid std");
            params.push(Tensor::from_vec(
                i,
                o,
                (0..i * o).map(|_| normal.sample(&mut r)).collect(),
            ));
            params.push(Tensor::zeros(1, o));
        }
        Ok(FlatMlp {
            actions: actions.to_vec(),
            hidden,
            params,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    fn check(&self, game: &Game) -> Result<()> {
        if game.actions() != self.actions.as_slice() {
            return Err(Error::shape(
                "game",
                format!(
                    "flat baseline is fixed to shape {:?}, got {:?}",
                    self.actions,
                    game.actions()
                ),
            ));
        }
        if !game.is_complete() {
            return Err(Error::MaskedGame);
        }
        Ok(())
    }

    fn forward<F: Real>(&self, g: &mut Graph<F>, vars: &[Var], games: &[&Game]) -> Result<Var> {
        let width = games[0].payoffs().len();
        let mut data = Vec::with_capacity(games.len() * width);
        for game in games {
            self.check(game)?;
            data.extend_from_slice(game.payoffs());
        }
        let x = g.constant(Tensor::from_f64(games.len(), width, &data));
        let h = g.affine(x, vars[0], vars[1]);
        let h = g.gelu(h);
        let h = g.affine(h, vars[2], vars[3]);
        let h = g.gelu(h);
        let logits = g.affine(h, vars[4], vars[5]);
        let total: usize = self.actions.iter().sum();
        let col = g.reshape(logits, games.len() * total, 1);
        let mut groups = Vec::new();
        for b in 0..games.len() {
            let mut at = b * total;
            for &t in &self.actions {
                groups.push((at..at + t).collect());
                at += t;
            }
        }
        Ok(g.segment_softmax(col, Rc::new(Csr::from_groups(groups))))
    }

    pub fn solve(&self, games: &[&Game]) -> Result<Vec<MixedProfile>> {
        if games.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::<f64>::new();
        let vars: Vec<Var> = self.params.iter().map(|t| g.constant(t.clone())).collect();
        let out = self.forward(&mut g, &vars, games)?;
        let total: usize = self.actions.iter().sum();
        Ok(g.value(out)
            .data()
            .chunks(total)
            .map(|c| split_marginals(&self.actions, c))
            .collect())
    }
    /// Mean held-out NE gap over raw `games`, normalized as in training.
    pub fn evaluate(&self, games: &[Game]) -> Result<f64> {
        if games.is_empty() {
            return Err(Error::EmptySelection("no evaluation games"));
        }
        let inputs = games
            .iter()
            .map(|g| model_input(Task::Ne, g))
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        for chunk in inputs.chunks(64) {
            let refs: Vec<&Game> = chunk.iter().collect();
            for (game, profile) in chunk.iter().zip(self.solve(&refs)?) {
                total += ne_gap(game, &profile)?.ne_gap;
            }
        }
        Ok(total / games.len() as f64)
    }

    fn loss_and_gradient(&self, games: &[&Game]) -> Result<(f64, Vec<f64>)> {
        let mut g = Graph::<f64>::new();
        let vars: Vec<Var> = self.params.iter().map(|t| g.param(t.clone())).collect();
        let sigma = self.forward(&mut g, &vars, games)?;
        let total: usize = self.actions.iter().sum();
        let ne_games = games
            .iter()
            .enumerate()
            .map(|(b, game)| NeGapGame {
                action_offset: b * total,
                actions: self.actions.clone(),
                payoffs: game.payoffs().to_vec(),
            })
            .collect();
        let gaps = g.ne_gap(sigma, Rc::new(ne_games));
        let sum = g.sum_all(gaps);
        let loss = g.scale(sum, 1.0 / games.len() as f64);
        let mut grads = g.backward(loss);
        let mut flat = Vec::with_capacity(self.num_parameters());
        for (v, t) in vars.iter().zip(&self.params) {
            match grads.take(*v) {
                Some(gr) => flat.extend_from_slice(gr.data()),
                None => flat.extend(std::iter::repeat_n(0.0, t.len())),
            }
        }
        Ok((g.value(loss).item(), flat))
    }

    fn set_flat(&mut self, flat: &[f64]) {
        let mut at = 0;
        for t in &mut self.params {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
    }

    pub fn save(&self, path: &std::path::Path, seed: u64) -> Result<()> {
        let file = FlatCheckpoint {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            model: self.clone(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::Checkpoint(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<(u64, FlatMlp)> {
        let text = std::fs::read_to_string(path)?;
        let file: FlatCheckpoint =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let expected = layer_sizes(&file.model.actions, file.model.hidden);
        let shapes: Vec<[usize; 2]> = expected
            .iter()
            .flat_map(|&(i, o)| [[i, o], [1, o]])
            .collect();
        if file.model.params.iter().map(Tensor::shape).ne(shapes) {
            return Err(Error::Checkpoint(
                "tensor shapes do not match the declared layout".into(),
            ));
        }
        Ok((file.seed, file.model))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatCheckpoint {
    tool_version: String,
    seed: u64,
    model: FlatMlp,
}

/// Result of [`fit_flat_mlp_ne`].
#[derive(Clone, Debug)]
pub struct FlatOutcome {
    pub model: FlatMlp,
    pub metrics: Vec<Metrics>,
}

/// Trains the flat baseline on the same game stream, seeds and optimizer as
/// the transformer run described by `config`, with at least `min_params`
/// parameters.
pub fn fit_flat_mlp_ne(config: &TrainConfig, min_params: usize) -> Result<FlatOutcome> {
    config.validate()?;
    if config.task != Task::Ne {
        return Err(Error::TaskMismatch {
            expected: Task::Ne.to_string(),
            found: config.task.to_string(),
        });
    }
    let actions = config.game.actions.clone();
    let mut model = FlatMlp::new(
        &actions,
        flat_hidden_width(&actions, min_params),
        init_seed(config.seed),
    )?;
    let heldout = heldout_games(config)?;
    let mut adam = Adam::<f64>::new(
        model.num_parameters(),
        AdamConfig {
            learning_rate: config.learning_rate,
            max_grad_norm: config.max_grad_norm,
            ..AdamConfig::default()
        },
    );
    let mut params: Vec<f64> = model
        .params
        .iter()
        .flat_map(|t| t.data().to_vec())
        .collect();
    let mut metrics = Vec::new();
    let (mut window, mut window_len) = (0.0, 0);
    for step in 0..config.steps {
        let games = (0..config.batch_size)
            .map(|i| {
                model_input(
                    Task::Ne,
                    &config.game.sample(train_game_seed(
                        config.seed,
                        config.batch_size,
                        step,
                        i,
                    ))?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Game> = games.iter().collect();
        let (value, grads) = model.loss_and_gradient(&refs)?;
        adam.step(&mut params, &grads)?;
        model.set_flat(&params);
        window += value;
        window_len += 1;
        let done = step + 1;
        if done % config.eval_every == 0 || done == config.steps {
            metrics.push(Metrics {
                step: done,
                train_loss: window / window_len as f64,
                eval_metric: model.evaluate(&heldout)?,
                seconds: 0.0,
            });
            window = 0.0;
            window_len = 0;
        }
    }
    Ok(FlatOutcome { model, metrics })
}
