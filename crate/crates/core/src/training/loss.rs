use std::rc::Rc;

use crate::engine::{Graph, NeGapGame, Real, Var};
use crate::error::{Error, Result};
use crate::game::{invariant_normalize, Game};
use crate::model::{Batch, Model, Task};
use crate::oracles::max_deviation_gains;

/// The game as presented to a model trained on `task`: equilibrium and
/// deviation-gain models see normalized games, reconstruction models raw ones.
pub fn model_input(task: Task, game: &Game) -> Result<Game> {
    match task {
        Task::Ne | Task::Devgain => invariant_normalize(game),
        Task::Recon => Ok(game.clone()),
    }
}

/// Mean task loss over `games` on graph `g`, as a `[1, 1]` variable.
pub fn loss_graph<F: Real>(
    model: &Model<F>,
    g: &mut Graph<F>,
    vars: &[Var],
    games: &[&Game],
) -> Result<Var> {
    let task = model.task();
    if task != Task::Recon {
        if let Some(i) = games.iter().position(|g| !g.is_complete()) {
            return Err(Error::invalid(
                "games",
                format!("game {i} is masked; task {task} needs complete games"),
            ));
        }
    }
    let batch = Batch::new(games)?;
    let emb = model.encode_graph(g, vars, &batch)?;
    let out = model.decode_graph(g, vars, &batch, emb)?;
    let inv_b = 1.0 / games.len() as f64;
    match task {
        Task::Ne => {
            let ne_games = batch
                .slots
                .iter()
                .zip(games)
                .map(|(s, game)| NeGapGame {
                    action_offset: s.action_offset,
                    actions: s.actions.clone(),
                    payoffs: game.payoffs().to_vec(),
                })
                .collect();
            let gaps = g.ne_gap(out, Rc::new(ne_games));
            let total = g.sum_all(gaps);
            Ok(g.scale(total, F::of(inv_b)))
        }
        Task::Devgain => {
            let mut target = Vec::with_capacity(batch.num_joint);
            let mut weights = Vec::with_capacity(batch.num_joint);
            for game in games {
                let w = F::of(inv_b / game.num_joint() as f64);
                target.extend(max_deviation_gains(game)?.into_iter().map(F::of));
                weights.extend(std::iter::repeat_n(w, game.num_joint()));
            }
            Ok(g.squared_error(out, Rc::new(target), Rc::new(weights)))
        }
        Task::Recon => {
            let mut target = Vec::new();
            let mut weights = Vec::new();
            for game in games {
                let (n, nj) = (game.num_players(), game.num_joint());
                let w = F::of(inv_b / (n * nj) as f64);
                for j in 0..nj {
                    for p in 0..n {
                        target.push(F::of(game.payoff(p, j)));
                    }
                }
                weights.extend(std::iter::repeat_n(w, n * nj));
            }
            if let Some(i) = target.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    field: "payoffs",
                    index: i,
                });
            }
            Ok(g.squared_error(out, Rc::new(target), Rc::new(weights)))
        }
    }
}

/// Mean loss over `games` and its gradient with respect to the flat parameters.
pub fn loss_and_gradient<F: Real>(model: &Model<F>, games: &[&Game]) -> Result<(f64, Vec<F>)> {
    let mut g = Graph::new();
    let vars = model.bind(&mut g, true);
    let loss = loss_graph(model, &mut g, &vars, games)?;
    let value = g.value(loss).item().f64();
    let mut grads = g.backward(loss);
    let mut flat = Vec::with_capacity(model.num_parameters());
    for (v, p) in vars.iter().zip(model.params()) {
        match grads.take(*v) {
            Some(t) => flat.extend_from_slice(t.data()),
            None => flat.extend(std::iter::repeat_n(F::zero(), p.len())),
        }
    }
    Ok((value, flat))
}

/// Mean task loss over `games` without gradients.
pub fn loss<F: Real>(model: &Model<F>, games: &[&Game]) -> Result<f64> {
    let mut g = Graph::new();
    let vars = model.bind(&mut g, false);
    let l = loss_graph(model, &mut g, &vars, games)?;
    Ok(g.value(l).item().f64())
}

fn single<F: Real>(model: &Model<F>, task: Task, game: &Game) -> Result<f64> {
    if model.task() != task {
        return Err(Error::TaskMismatch {
            expected: task.name().into(),
            found: model.task().name().into(),
        });
    }
    loss(model, &[game])
}

/// `max_p delta_p` of the model's profile on a complete game.
pub fn ne_loss<F: Real>(model: &Model<F>, game: &Game) -> Result<f64> {
    if !game.is_complete() {
        return Err(Error::MaskedGame);
    }
    single(model, Task::Ne, game)
}

/// Mean squared error of predicted maximal deviation gains over all joint actions.
pub fn devgain_loss<F: Real>(model: &Model<F>, game: &Game) -> Result<f64> {
    if !game.is_complete() {
        return Err(Error::MaskedGame);
    }
    single(model, Task::Devgain, game)
}

/// Mean squared payoff error over every player and joint action, observed or not.
pub fn recon_loss<F: Real>(model: &Model<F>, game: &Game) -> Result<f64> {
    single(model, Task::Recon, game)
}
