//! Property suites shared by the `check` command and the test suite.

use rand::Rng;

use crate::engine::{grad_check, Real};
use crate::error::Result;
use crate::game::{sample_invariant_game, sample_mask, Game, Isomorphism};
use crate::model::{split_marginals, Model, ModelConfig, Task};
use crate::rng::{self, derive_seed, streams};
use crate::training::loss_and_gradient;

const CASES_PER_BATCH: usize = 32;

/// Largest deviation seen by a suite, against its tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteReport {
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// Equivariance tolerance for a floating-point width.
pub fn equivariance_tolerance<F: Real>() -> f64 {
    if F::BITS == 32 {
        1e-4
    } else {
        1e-9
    }
}

/// A random game with 2 or 3 players and 2 to 5 actions each, masked about a
/// third of the time, plus a random isomorphism of it.
pub fn random_case(seed: u64) -> Result<(Game, Isomorphism)> {
    let mut r = rng::stream(seed, streams::ISOMORPHISM);
    let n = r.random_range(2..=3);
    let actions: Vec<usize> = (0..n).map(|_| r.random_range(2..=5)).collect();
    let mut game = sample_invariant_game(seed, &actions)?;
    if r.random_bool(1.0 / 3.0) {
        let p = r.random_range(0.2..0.9);
        game = game.with_mask(Some(sample_mask(seed, &actions, p)?))?;
    }
    let iso = Isomorphism::random(&actions, &mut r);
    Ok((game, iso))
}

/// Task output of `model` carried through `iso`.
fn map_output(task: Task, game: &Game, iso: &Isomorphism, out: &[f64]) -> Result<Vec<f64>> {
    match task {
        Task::Ne => Ok(iso
            .apply_per_action(&split_marginals(game.actions(), out).probs)?
            .concat()),
        Task::Devgain => iso.apply_joint(game.actions(), out),
        Task::Recon => iso.apply_payoffs(game.actions(), out),
    }
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `max |f(iso(G)) - iso(f(G))|` over embeddings and task outputs of every case.
pub fn equivariance_error<F: Real>(model: &Model<F>, cases: &[(Game, Isomorphism)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for chunk in cases.chunks(CASES_PER_BATCH) {
        let images = chunk
            .iter()
            .map(|(g, iso)| iso.apply(g))
            .collect::<Result<Vec<_>>>()?;
        let games: Vec<&Game> = chunk.iter().map(|(g, _)| g).chain(&images).collect();
        let outputs = model.encode_and_predict(&games)?;
        let (base, moved) = outputs.split_at(chunk.len());
        for (((game, iso), (emb, out)), (emb_img, out_img)) in chunk.iter().zip(base).zip(moved) {
            let mapped = iso.apply_per_action(&emb.players)?;
            for (a, b) in mapped
                .iter()
                .flatten()
                .zip(emb_img.players.iter().flatten())
            {
                worst = worst.max(max_abs(a, b));
            }
            worst = worst.max(max_abs(&map_output(model.task(), game, iso, out)?, out_img));
        }
    }
    Ok(worst)
}

/// Equivariance of every given model on `count` random cases drawn from `seed`.
pub fn equivariance_suite<F: Real>(
    models: &[Model<F>],
    count: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let cases = (0..count)
        .map(|i| random_case(derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut max_error = 0.0f64;
    for model in models {
        max_error = max_error.max(equivariance_error(model, &cases)?);
    }
    Ok(SuiteReport {
        cases: count * models.len(),
        max_error,
        tolerance: equivariance_tolerance::<F>(),
    })
}

/// One randomly perturbed model per task, so that biases, offsets and scales
/// are exercised away from their initial values.
pub fn random_models<F: Real>(config: ModelConfig, seed: u64) -> Result<Vec<Model<F>>> {
    Task::ALL
        .iter()
        .map(|&task| Model::<F>::random(config, task, derive_seed(seed, task as u64), 0.3))
        .collect()
}

/// Model width used by the gradient suite.
pub fn gradient_config() -> ModelConfig {
    ModelConfig {
        dim: 8,
        blocks: 1,
        action_layers: 1,
        heads: 2,
    }
}

/// Finite-difference step of the gradient suite.
pub const GRADIENT_STEP: f64 = 1e-5;

/// Gradient comparison for one (task, game, parameters) case.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCase {
    pub task: Task,
    pub masked: bool,
    pub seed: u64,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Largest `|analytic|` among coordinates whose relative error exceeds `1e-4`.
    pub largest_violating_gradient: f64,
    /// `(analytic, numeric)` per coordinate.
    pub pairs: Vec<(f64, f64)>,
}

/// Central-difference checks of all three losses at 64-bit on 2x2 games.
///
/// For each seed, every task is checked on a complete game and reconstruction
/// additionally on a half-observed one, with parameters from
/// [`Model::random`] at scale 0.3.
pub fn gradient_suite(seeds: std::ops::Range<u64>) -> Result<Vec<GradientCase>> {
    let mut cases = Vec::new();
    for seed in seeds {
        let game = sample_invariant_game(seed, &[2, 2])?;
        let masked = game.with_mask(Some(vec![true, false, false, true]))?;
        for (task, g) in [
            (Task::Ne, &game),
            (Task::Devgain, &game),
            (Task::Recon, &game),
            (Task::Recon, &masked),
        ] {
            let model = Model::<f64>::random(gradient_config(), task, seed, 0.3)?;
            let f = |x: &[f64]| {
                let mut m = model.clone();
                m.set_flat_params(x).expect("same length");
                loss_and_gradient(&m, &[g]).expect("valid game")
            };
            let report = grad_check(&f, &model.flat_params(), GRADIENT_STEP);
            let largest_violating_gradient = report
                .violations(1e-4)
                .iter()
                .map(|&i| report.pairs[i].0.abs())
                .fold(0.0, f64::max);
            cases.push(GradientCase {
                task,
                masked: !g.is_complete(),
                seed,
                max_rel_error: report.max_rel_error,
                max_abs_error: report.max_abs_error,
                largest_violating_gradient,
                pairs: report.pairs,
            });
        }
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_cases_cover_shapes() {
        let shapes: Vec<usize> = (0..50)
            .map(|s| random_case(s).unwrap().0.num_players())
            .collect();
        assert!(shapes.contains(&2) && shapes.contains(&3));
        assert!((0..50).any(|s| !random_case(s).unwrap().0.is_complete()));
    }

    #[test]
    fn small_suite_passes_at_both_widths() {
        let config = ModelConfig::new(8, 2, 1, 2).unwrap();
        assert!(
            equivariance_suite(&random_models::<f64>(config, 1).unwrap(), 20, 0)
                .unwrap()
                .passed()
        );
        assert!(
            equivariance_suite(&random_models::<f32>(config, 1).unwrap(), 20, 0)
                .unwrap()
                .passed()
        );
    }

    #[test]
    fn broken_output_is_detected() {
        let config = ModelConfig::new(8, 1, 1, 2).unwrap();
        let model = Model::<f64>::random(config, Task::Recon, 0, 0.3).unwrap();
        let (game, _) = random_case(3).unwrap();
        // A non-identity relabeling applied only to the input must be caught.
        let mut iso = Isomorphism::identity(game.actions());
        iso.action_perms[0].swap(0, 1);
        let image = iso.apply(&game).unwrap();
        let a = model.encode_and_predict(&[&game]).unwrap();
        let b = model.encode_and_predict(&[&image]).unwrap();
        assert!(max_abs(&a[0].1, &b[0].1) > 1e-6);
        assert!(equivariance_error(&model, &[(game, iso)]).unwrap() < 1e-9);
    }
}
