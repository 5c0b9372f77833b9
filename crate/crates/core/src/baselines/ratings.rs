use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::rng::{self, streams};

/// Convergence tolerance on the largest gradient coordinate.
pub const FIT_TOL: f64 = 1e-9;
const MAX_ELO_ITERS: usize = 200_000;
const MELO_ITERS: usize = 20_000;
const MELO_LR: f64 = 0.02;
/// L2 weight on cycle vectors.
pub const MELO_L2: f64 = 1e-4;
pub const DEFAULT_MELO_COMPONENTS: usize = 3;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Observed off-diagonal pairs `(i, j, P_ij)` of a two-player win-probability game.
fn observations(game: &Game, mask: &[bool]) -> Result<(usize, Vec<(usize, usize, f64)>)> {
    if game.num_players() != 2 || game.num_actions(0) != game.num_actions(1) {
        return Err(Error::invalid(
            "game",
            "rating models need a two-player game with equal action counts",
        ));
    }
    let t = game.num_actions(0);
    if mask.len() != t * t {
        return Err(Error::shape(
            "mask",
            format!("expected {} entries, got {}", t * t, mask.len()),
        ));
    }
    let mut obs = Vec::new();
    for i in 0..t {
        for j in 0..t {
            let idx = i * t + j;
            if mask[idx] && i != j {
                let p = game.payoff(0, idx);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(
                        "payoffs",
                        format!("win probability {p} at ({i}, {j}) outside [0, 1]"),
                    ));
                }
                obs.push((i, j, p));
            }
        }
    }
    if obs.is_empty() {
        return Err(Error::EmptySelection("no observed off-diagonal entries"));
    }
    Ok((t, obs))
}

fn center(r: &mut [f64]) {
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    r.iter_mut().for_each(|x| *x -= mean);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloRatings {
    pub ratings: Vec<f64>,
}

impl EloRatings {
    pub fn predict(&self, i: usize, j: usize) -> Result<f64> {
        predict_elo(self, i, j)
    }
}

/// `logistic(r_i - r_j)`.
pub fn predict_elo(r: &EloRatings, i: usize, j: usize) -> Result<f64> {
    let t = r.ratings.len();
    if i >= t || j >= t {
        return Err(Error::invalid(
            "action",
            format!("({i}, {j}) out of range 0..{t}"),
        ));
    }
    Ok(sigmoid(r.ratings[i] - r.ratings[j]))
}

/// Soft-label log-likelihood of observed entries under Elo ratings.
pub fn elo_log_likelihood(game: &Game, mask: &[bool], r: &EloRatings) -> Result<f64> {
    let (_, obs) = observations(game, mask)?;
    Ok(obs
        .iter()
        .map(|&(i, j, p)| {
            let x = r.ratings[i] - r.ratings[j];
            // p log s(x) + (1 - p) log s(-x), written stably.
            -(p * softplus(-x) + (1.0 - p) * softplus(x))
        })
        .sum())
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Full-batch gradient ascent on the observed log-likelihood.
///
/// The step is `1 / L` with `L` a bound on the Hessian norm, so the
/// likelihood never decreases. Returns the ratings and the likelihood trace.
pub fn fit_elo_traced(game: &Game, mask: &[bool]) -> Result<(EloRatings, Vec<f64>)> {
    let (t, obs) = observations(game, mask)?;
    let mut degree = vec![0.0; t];
    for &(i, j, _) in &obs {
        degree[i] += 1.0;
        degree[j] += 1.0;
    }
    let lipschitz = degree.iter().copied().fold(0.0, f64::max) / 2.0;
    let step = 1.0 / lipschitz;
    let mut r = vec![0.0; t];
    let mut grad = vec![0.0; t];
    let mut trace = Vec::new();
    for _ in 0..MAX_ELO_ITERS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &(i, j, p) in &obs {
            let resid = p - sigmoid(r[i] - r[j]);
            grad[i] += resid;
            grad[j] -= resid;
        }
        if grad.iter().all(|g| g.abs() < FIT_TOL) {
            break;
        }
        r.iter_mut().zip(&grad).for_each(|(x, g)| *x += step * g);
        if trace.len() < 10_000 {
            trace.push(elo_log_likelihood(
                game,
                mask,
                &EloRatings { ratings: r.clone() },
            )?);
        }
    }
    center(&mut r);
    Ok((EloRatings { ratings: r }, trace))
}

/// Maximum-likelihood Elo ratings for the observed entries, mean-centered.
pub fn fit_elo(game: &Game, mask: &[bool]) -> Result<EloRatings> {
    Ok(fit_elo_traced(game, mask)?.0)
}

/// Elo ratings plus `k` cycle planes: row `i` of `cycles` is `c_i` of length `2k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MEloRatings {
    pub ratings: Vec<f64>,
    pub cycles: Vec<Vec<f64>>,
}

impl MEloRatings {
    pub fn components(&self) -> usize {
        self.cycles.first().map_or(0, |c| c.len() / 2)
    }

    pub fn predict(&self, i: usize, j: usize) -> Result<f64> {
        predict_melo(self, i, j)
    }
}

/// `c_i^T Omega c_j` with `Omega` pairing columns `(2l, 2l + 1)` antisymmetrically.
fn cycle_term(ci: &[f64], cj: &[f64]) -> f64 {
    ci.chunks_exact(2)
        .zip(cj.chunks_exact(2))
        .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
        .sum()
}

/// `logistic(r_i - r_j + c_i^T Omega c_j)`.
pub fn predict_melo(m: &MEloRatings, i: usize, j: usize) -> Result<f64> {
    let t = m.ratings.len();
    if i >= t || j >= t {
        return Err(Error::invalid(
            "action",
            format!("({i}, {j}) out of range 0..{t}"),
        ));
    }
    Ok(sigmoid(
        m.ratings[i] - m.ratings[j] + cycle_term(&m.cycles[i], &m.cycles[j]),
    ))
}

/// Full-batch Adam on mean observed log-loss plus `MELO_L2 * |c|^2`.
///
/// Cycle vectors start from seeded `N(0, 0.1^2)` noise since zero is a
/// stationary point of the cycle terms.
pub fn fit_melo(game: &Game, mask: &[bool], k: usize, seed: u64) -> Result<MEloRatings> {
    let (t, obs) = observations(game, mask)?;
    let width = 2 * k;
    let mut r = rng::stream(seed, streams::BASELINE);
    let normal = Normal::new(0.0, 0.1).expect("valid std");
    // Flat layout: ratings then cycle rows.
    let mut x: Vec<f64> = vec![0.0; t];
    x.extend((0..t * width).map(|_| normal.sample(&mut r)));
    let mut adam = Adam::<f64>::new(
        x.len(),
        AdamConfig {
            learning_rate: MELO_LR,
            ..AdamConfig::default()
        },
    );
    let n = obs.len() as f64;
    let mut grad = vec![0.0; x.len()];
    for _ in 0..MELO_ITERS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &(i, j, p) in &obs {
            let (ci, cj) = (
                &x[t + i * width..t + (i + 1) * width],
                &x[t + j * width..t + (j + 1) * width],
            );
            let resid = (sigmoid(x[i] - x[j] + cycle_term(ci, cj)) - p) / n;
            grad[i] += resid;
            grad[j] -= resid;
            for l in 0..k {
                let (a0, a1, b0, b1) = (ci[2 * l], ci[2 * l + 1], cj[2 * l], cj[2 * l + 1]);
                grad[t + i * width + 2 * l] += resid * b1;
                grad[t + i * width + 2 * l + 1] -= resid * b0;
                grad[t + j * width + 2 * l] -= resid * a1;
                grad[t + j * width + 2 * l + 1] += resid * a0;
            }
        }
        for i in t..x.len() {
            grad[i] += 2.0 * MELO_L2 * x[i];
        }
        if grad.iter().all(|g| g.abs() < FIT_TOL) {
            break;
        }
        adam.step(&mut x, &grad)?;
    }
    let mut ratings = x[..t].to_vec();
    center(&mut ratings);
    let cycles = (0..t)
        .map(|i| x[t + i * width..t + (i + 1) * width].to_vec())
        .collect();
    Ok(MEloRatings { ratings, cycles })
}

/// Squared error of `predict` against player-one payoffs over entries where `select` holds.
pub fn prediction_mse(
    game: &Game,
    select: &[bool],
    predict: impl Fn(usize, usize) -> Result<f64>,
) -> Result<f64> {
    let t = game.num_actions(0);
    let mut pred = Vec::with_capacity(t * t);
    for i in 0..t {
        for j in 0..t {
            pred.push(predict(i, j)?);
        }
    }
    crate::oracles::masked_mse(&pred, game.player_payoffs(0), select)
}
