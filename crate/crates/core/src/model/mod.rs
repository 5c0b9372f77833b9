//! The equivariant encoder and its three task decoders.
//!
//! Each block runs three sublayers over the action embeddings of a game:
//! self-attention among the players' tokens of every joint action (producing
//! one *play* per action and joint action), cross-attention from each action
//! to all of its plays, and `action_layers` rounds of self-attention over all
//! actions of the game. Nothing in the network is indexed by player or action
//! identity, so relabeling players or actions relabels the outputs the same way.

mod checkpoint;
mod config;
mod embeddings;
mod forward;
mod layout;
mod params;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, CHECKPOINT_VERSION};
pub use config::{ModelConfig, Task};
pub use embeddings::ActionEmbeddings;
pub use layout::{Batch, Slot};
pub use params::{Architecture, Init, ParamSpec};

use rand_distr::{Distribution, Normal};

use crate::engine::{Graph, Real, Tensor, Var};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::oracles::MixedProfile;
use crate::rng;
use forward::Net;

/// Standard deviation of the default weight initialization.
pub const INIT_STD: f64 = 0.02;

/// All-zero starting embeddings for `game`.
pub fn init_embeddings(game: &Game, config: &ModelConfig) -> ActionEmbeddings {
    ActionEmbeddings::zeros(game.actions(), config.dim)
}

/// Encoder plus one task decoder, with parameters of element type `F`.
#[derive(Clone, Debug)]
pub struct Model<F: Real = f32> {
    config: ModelConfig,
    task: Task,
    arch: Architecture,
    params: Vec<Tensor<F>>,
}

impl<F: Real> Model<F> {
    /// Weights drawn from `N(0, INIT_STD^2)`, biases and offsets zero, scales one.
    pub fn new(config: ModelConfig, task: Task, seed: u64) -> Result<Self> {
        Model::with_init_std(config, task, seed, INIT_STD)
    }

    pub fn with_init_std(config: ModelConfig, task: Task, seed: u64, std: f64) -> Result<Self> {
        config.validate()?;
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::invalid("init_std", format!("{std}")));
        }
        let arch = Architecture::new(&config, task);
        let mut r = rng::stream(seed, rng::streams::PARAM_INIT);
        let normal =
            Normal::new(0.0, std).map_err(|e| Error::invalid("init_std", e.to_string()))?;
        let params = arch
            .specs
            .iter()
            .map(|s| {
                let n = s.shape[0] * s.shape[1];
                let data: Vec<F> = match s.init {
                    Init::Normal => (0..n).map(|_| F::of(normal.sample(&mut r))).collect(),
                    Init::Zeros => vec![F::zero(); n],
                    Init::Ones => vec![F::one(); n],
                };
                Tensor::from_vec(s.shape[0], s.shape[1], data)
            })
            .collect();
        Ok(Model {
            config,
            task,
            arch,
            params,
        })
    }

    /// Every tensor perturbed: weights, biases and offsets from `N(0, std^2)`,
    /// norm scales from `1 + N(0, std^2)`. Used to probe properties that must
    /// hold for arbitrary parameters.
    pub fn random(config: ModelConfig, task: Task, seed: u64, std: f64) -> Result<Self> {
        let mut m = Model::with_init_std(config, task, seed, std)?;
        let mut r = rng::stream(rng::derive_seed(seed, 1), rng::streams::PARAM_INIT);
        let normal =
            Normal::new(0.0, std).map_err(|e| Error::invalid("init_std", e.to_string()))?;
        for (spec, t) in m.arch.specs.iter().zip(&mut m.params) {
            if spec.init != Init::Normal {
                for x in t.data_mut() {
                    *x += F::of(normal.sample(&mut r));
                }
            }
        }
        Ok(m)
    }

    /// Rebuilds a model from named tensors; names and shapes must match the architecture exactly.
    pub fn from_named(
        config: ModelConfig,
        task: Task,
        named: Vec<(String, Tensor<F>)>,
    ) -> Result<Self> {
        config.validate()?;
        let arch = Architecture::new(&config, task);
        if named.len() != arch.specs.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                arch.specs.len(),
                named.len()
            )));
        }
        let mut params = Vec::with_capacity(named.len());
        for (spec, (name, t)) in arch.specs.iter().zip(named) {
            if spec.name != name || spec.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` {:?} does not match `{}` {:?}",
                    t.shape(),
                    spec.name,
                    spec.shape
                )));
            }
            if let Some(i) = t.data().iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    field: "parameters",
                    index: i,
                });
            }
            params.push(t);
        }
        Ok(Model {
            config,
            task,
            arch,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.arch.specs
    }

    pub fn params(&self) -> &[Tensor<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.arch.num_parameters()
    }

    pub fn flat_params(&self) -> Vec<F> {
        self.params
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[F]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::shape(
                "parameters",
                format!(
                    "expected {} values, got {}",
                    self.num_parameters(),
                    flat.len()
                ),
            ));
        }
        let mut at = 0;
        for t in &mut self.params {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            config: self.config,
            task: self.task,
            arch: self.arch.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    /// Places every parameter on `g`, as differentiable leaves when `trainable`.
    pub fn bind(&self, g: &mut Graph<F>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|t| {
                if trainable {
                    g.param(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect()
    }

    fn net<'a>(&'a self, vars: &'a [Var]) -> Net<'a> {
        Net {
            arch: &self.arch,
            heads: self.config.heads,
            vars,
        }
    }

    /// Zero embeddings for every action in the batch, `[actions, dim]`.
    pub fn initial_embeddings(&self, g: &mut Graph<F>, batch: &Batch) -> Var {
        g.constant(Tensor::zeros(batch.num_actions, self.config.dim))
    }

    /// Runs all blocks from zero embeddings; returns `[actions, dim]`.
    pub fn encode_graph(&self, g: &mut Graph<F>, vars: &[Var], batch: &Batch) -> Result<Var> {
        let emb = self.initial_embeddings(g, batch);
        self.net(vars).encode(g, batch, emb, &self.arch.blocks)
    }

    /// Task output column for the batch; see [`Model::predict`] for layouts.
    pub fn decode_graph(
        &self,
        g: &mut Graph<F>,
        vars: &[Var],
        batch: &Batch,
        emb: Var,
    ) -> Result<Var> {
        self.net(vars).decode(g, batch, emb)
    }

    fn expect_task(&self, task: Task) -> Result<()> {
        if self.task != task {
            return Err(Error::TaskMismatch {
                expected: task.name().into(),
                found: self.task.name().into(),
            });
        }
        Ok(())
    }

    fn check_embeddings(&self, emb: &ActionEmbeddings) -> Result<()> {
        if emb.dim != self.config.dim {
            return Err(Error::shape(
                "embeddings",
                format!("width {} vs model width {}", emb.dim, self.config.dim),
            ));
        }
        if let Some(i) = emb.rows().flatten().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                field: "embeddings",
                index: i,
            });
        }
        Ok(())
    }

    fn embeddings_var(&self, g: &mut Graph<F>, embs: &[&ActionEmbeddings]) -> Var {
        let data: Vec<f64> = embs
            .iter()
            .flat_map(|e| e.rows().flatten().copied())
            .collect();
        g.constant(Tensor::from_f64(
            data.len() / self.config.dim.max(1),
            self.config.dim,
            &data,
        ))
    }

    fn split_embeddings(&self, batch: &Batch, t: &Tensor<F>) -> Vec<ActionEmbeddings> {
        batch
            .slots
            .iter()
            .map(|s| {
                let players = s
                    .actions
                    .iter()
                    .zip(&s.player_rows)
                    .map(|(&n, &r)| {
                        (r..r + n)
                            .map(|i| t.row(i).iter().map(|x| x.f64()).collect())
                            .collect()
                    })
                    .collect();
                ActionEmbeddings {
                    dim: self.config.dim,
                    players,
                }
            })
            .collect()
    }

    pub fn encode_batch(&self, games: &[&Game]) -> Result<Vec<ActionEmbeddings>> {
        let batch = Batch::new(games)?;
        self.encode_layout(&batch)
    }

    fn encode_layout(&self, batch: &Batch) -> Result<Vec<ActionEmbeddings>> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let emb = self.encode_graph(&mut g, &vars, batch)?;
        Ok(self.split_embeddings(batch, g.value(emb)))
    }

    pub fn encode(&self, game: &Game) -> Result<ActionEmbeddings> {
        Ok(self.encode_batch(&[game])?.remove(0))
    }

    /// Encodes with the joint actions visited in `order` inside the encoder.
    pub fn encode_with_enumeration(
        &self,
        game: &Game,
        order: &[usize],
    ) -> Result<ActionEmbeddings> {
        let batch = Batch::with_enumeration(&[game], &[order.to_vec()])?;
        Ok(self.encode_layout(&batch)?.remove(0))
    }

    /// Applies block `k` alone to the given embeddings.
    pub fn encode_block(
        &self,
        k: usize,
        emb: &ActionEmbeddings,
        game: &Game,
    ) -> Result<ActionEmbeddings> {
        let block = self.arch.blocks.get(k).ok_or_else(|| {
            Error::invalid(
                "block",
                format!("{k} out of range 0..{}", self.config.blocks),
            )
        })?;
        self.check_embeddings(emb)?;
        if emb.shape().0 != game.actions() {
            return Err(Error::shape(
                "embeddings",
                format!("{:?} vs game actions {:?}", emb.shape().0, game.actions()),
            ));
        }
        let batch = Batch::new(&[game])?;
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let e = self.embeddings_var(&mut g, &[emb]);
        let out = self.net(&vars).block(&mut g, block, &batch, e)?;
        Ok(self.split_embeddings(&batch, g.value(out)).remove(0))
    }

    fn decode_embeddings(&self, emb: &ActionEmbeddings) -> Result<Vec<f64>> {
        self.check_embeddings(emb)?;
        let actions = emb.shape().0;
        let shape_only = Game::new(
            actions.clone(),
            vec![0.0; actions.len() * actions.iter().product::<usize>()],
            None,
        )?;
        let batch = Batch::new(&[&shape_only])?;
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let e = self.embeddings_var(&mut g, &[emb]);
        let out = self.decode_graph(&mut g, &vars, &batch, e)?;
        Ok(self.unpack(&batch, g.value(out)).remove(0))
    }

    pub fn decode_ne_marginals(&self, emb: &ActionEmbeddings) -> Result<MixedProfile> {
        self.expect_task(Task::Ne)?;
        let flat = self.decode_embeddings(emb)?;
        Ok(split_marginals(&emb.shape().0, &flat))
    }

    /// One scalar per joint action, row-major over the joint-action shape.
    pub fn decode_joint_scalar(&self, emb: &ActionEmbeddings) -> Result<Vec<f64>> {
        self.expect_task(Task::Devgain)?;
        self.decode_embeddings(emb)
    }

    /// Estimated payoffs in the same layout as [`Game::payoffs`].
    pub fn decode_payoffs(&self, emb: &ActionEmbeddings) -> Result<Vec<f64>> {
        self.expect_task(Task::Recon)?;
        self.decode_embeddings(emb)
    }

    /// Per-game task outputs from a decoded column: player-major marginals,
    /// joint scalars, or player-major payoffs.
    pub fn unpack(&self, batch: &Batch, out: &Tensor<F>) -> Vec<Vec<f64>> {
        let col = out.data();
        batch
            .slots
            .iter()
            .map(|s| match self.task {
                Task::Ne => col[s.action_offset..s.action_offset + s.total_actions()]
                    .iter()
                    .map(|x| x.f64())
                    .collect(),
                Task::Devgain => col[s.joint_offset..s.joint_offset + s.num_joint]
                    .iter()
                    .map(|x| x.f64())
                    .collect(),
                Task::Recon => {
                    let n = s.num_players();
                    let mut v = vec![0.0; n * s.num_joint];
                    for j in 0..s.num_joint {
                        for p in 0..n {
                            v[p * s.num_joint + j] = col[s.token_offset + j * n + p].f64();
                        }
                    }
                    v
                }
            })
            .collect()
    }

    /// End-to-end forward pass: encode and decode each game.
    pub fn predict(&self, games: &[&Game]) -> Result<Vec<Vec<f64>>> {
        let batch = Batch::new(games)?;
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let emb = self.encode_graph(&mut g, &vars, &batch)?;
        let out = self.decode_graph(&mut g, &vars, &batch, emb)?;
        Ok(self.unpack(&batch, g.value(out)))
    }

    /// Embeddings and task outputs from one forward pass.
    pub fn encode_and_predict(&self, games: &[&Game]) -> Result<Vec<(ActionEmbeddings, Vec<f64>)>> {
        let batch = Batch::new(games)?;
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let emb = self.encode_graph(&mut g, &vars, &batch)?;
        let out = self.decode_graph(&mut g, &vars, &batch, emb)?;
        let embs = self.split_embeddings(&batch, g.value(emb));
        Ok(embs
            .into_iter()
            .zip(self.unpack(&batch, g.value(out)))
            .collect())
    }

    /// Equilibrium profile estimates for NE models.
    pub fn solve(&self, games: &[&Game]) -> Result<Vec<MixedProfile>> {
        self.expect_task(Task::Ne)?;
        Ok(self
            .predict(games)?
            .iter()
            .zip(games)
            .map(|(flat, g)| split_marginals(g.actions(), flat))
            .collect())
    }
}

/// Splits player-major marginals into a profile.
pub fn split_marginals(actions: &[usize], flat: &[f64]) -> MixedProfile {
    let mut at = 0;
    let probs = actions
        .iter()
        .map(|&t| {
            let p = flat[at..at + t].to_vec();
            at += t;
            p
        })
        .collect();
    MixedProfile { probs }
}
