use super::*;
use crate::game::{sample_disc_game, Game};
use crate::model::{ModelConfig, Task};
use crate::training::{GameSpec, TrainConfig};

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn win_game(p: &[Vec<f64>]) -> Game {
    let t = p.len();
    let g1: Vec<f64> = p.iter().flatten().copied().collect();
    let g2: Vec<f64> = (0..t * t).map(|k| 1.0 - g1[(k % t) * t + k / t]).collect();
    Game::from_player_payoffs(vec![t, t], &[g1, g2]).unwrap()
}

fn rps() -> Game {
    let beats = [[0.5, 1.0, 0.0], [0.0, 0.5, 1.0], [1.0, 0.0, 0.5]];
    win_game(&beats.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

fn transitive(r: &[f64]) -> Game {
    win_game(
        &r.iter()
            .map(|ri| r.iter().map(|rj| logistic(ri - rj)).collect())
            .collect::<Vec<_>>(),
    )
}

fn all(t: usize) -> Vec<bool> {
    vec![true; t * t]
}

#[test]
fn even_game_gives_equal_ratings() {
    let game = win_game(&vec![vec![0.5; 4]; 4]);
    let r = fit_elo(&game, &all(4)).unwrap();
    assert!(r.ratings.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn transitive_ratings_are_recovered() {
    let truth = [1.2, -0.3, 0.5, -1.4, 0.0];
    let game = transitive(&truth);
    let r = fit_elo(&game, &all(5)).unwrap();
    let mse = prediction_mse(&game, &all(5), |i, j| r.predict(i, j)).unwrap();
    assert!(mse < 1e-3, "mse {mse}");
    assert!(r.ratings.iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn elo_on_cycles_predicts_even_odds() {
    let game = rps();
    let r = fit_elo(&game, &all(3)).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((r.predict(i, j).unwrap() - 0.5).abs() < 1e-9);
        }
    }
    let elo = prediction_mse(&game, &all(3), |i, j| r.predict(i, j)).unwrap();
    let constant = prediction_mse(&game, &all(3), |_, _| Ok(0.5)).unwrap();
    assert!((elo - constant).abs() < 1e-12);
}

/// Soft-label log-loss in excess of the label entropy (KL divergence).
fn excess_log_loss(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a > 0.0 { a * (a / b).ln() } else { 0.0 };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

#[test]
fn melo_fits_cycles() {
    let game = rps();
    let m = fit_melo(&game, &all(3), 1, 0).unwrap();
    let losses: Vec<f64> = (0..9)
        .filter(|k| k / 3 != k % 3)
        .map(|k| excess_log_loss(game.payoff(0, k), m.predict(k / 3, k % 3).unwrap()))
        .collect();
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    assert!(mean < 0.01, "per-entry loss {mean}");
}

#[test]
fn melo_beats_elo_on_masked_cycles() {
    // Five-action cyclic game: i beats i+1 and i+2 (mod 5).
    let t = 5;
    let p: Vec<Vec<f64>> = (0..t)
        .map(|i| {
            (0..t)
                .map(|j| {
                    if i == j {
                        0.5
                    } else if (j + t - i) % t <= 2 {
                        0.9
                    } else {
                        0.1
                    }
                })
                .collect()
        })
        .collect();
    let game = win_game(&p);
    let mut mask = all(t);
    for &(i, j) in &[(0, 1), (2, 3), (4, 1)] {
        mask[i * t + j] = false;
    }
    let hidden: Vec<bool> = mask.iter().map(|b| !b).collect();
    let elo = fit_elo(&game, &mask).unwrap();
    let melo = fit_melo(&game, &mask, DEFAULT_MELO_COMPONENTS, 3).unwrap();
    let e = prediction_mse(&game, &hidden, |i, j| elo.predict(i, j)).unwrap();
    let m = prediction_mse(&game, &hidden, |i, j| melo.predict(i, j)).unwrap();
    assert!(m < e, "melo {m} elo {e}");
}

#[test]
fn melo_without_cycles_matches_elo() {
    let game = transitive(&[0.7, -0.2, 0.4, -0.9]);
    let mut mask = all(4);
    mask[1] = false;
    let elo = fit_elo(&game, &mask).unwrap();
    let melo = fit_melo(&game, &mask, 0, 0).unwrap();
    assert_eq!(melo.components(), 0);
    for (a, b) in elo.ratings.iter().zip(&melo.ratings) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn melo_is_deterministic() {
    let (game, _) = sample_disc_game(11, 6, 1).unwrap();
    let a = fit_melo(&game, &all(6), 2, 5).unwrap();
    let b = fit_melo(&game, &all(6), 2, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn predictions_are_antisymmetric() {
    let (game, _) = sample_disc_game(4, 6, 2).unwrap();
    let elo = fit_elo(&game, &all(6)).unwrap();
    let melo = fit_melo(&game, &all(6), 3, 1).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            assert!((elo.predict(i, j).unwrap() + elo.predict(j, i).unwrap() - 1.0).abs() < 1e-12);
            assert!(
                (melo.predict(i, j).unwrap() + melo.predict(j, i).unwrap() - 1.0).abs() < 1e-12
            );
        }
    }
    assert!(elo.predict(6, 0).is_err());
    let flat = MEloRatings {
        ratings: vec![0.0; 2],
        cycles: vec![vec![0.0; 2]; 2],
    };
    assert_eq!(flat.predict(0, 1).unwrap(), 0.5);
}

#[test]
fn elo_likelihood_never_decreases() {
    let (game, _) = sample_disc_game(9, 8, 1).unwrap();
    let (_, trace) = fit_elo_traced(&game, &all(8)).unwrap();
    assert!(trace.len() > 1);
    for w in trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn transitive_games_agree_between_models() {
    let game = transitive(&[0.3, -1.0, 0.8, 0.1, -0.4]);
    let elo = fit_elo(&game, &all(5)).unwrap();
    let melo = fit_melo(&game, &all(5), 3, 2).unwrap();
    let e = prediction_mse(&game, &all(5), |i, j| elo.predict(i, j)).unwrap();
    let m = prediction_mse(&game, &all(5), |i, j| melo.predict(i, j)).unwrap();
    assert!((e - m).abs() < 1e-3);
}

#[test]
fn empty_observations_are_rejected() {
    let game = rps();
    let mut mask = vec![false; 9];
    mask[0] = true;
    assert!(matches!(
        fit_elo(&game, &mask),
        Err(crate::Error::EmptySelection(_))
    ));
    assert!(fit_melo(&game, &[false; 9], 1, 0).is_err());
}

fn flat_config() -> TrainConfig {
    let mut config = TrainConfig::new(
        Task::Ne,
        GameSpec::invariant(vec![2, 3]),
        ModelConfig::new(8, 1, 1, 2).unwrap(),
    );
    config.steps = 4;
    config.batch_size = 4;
    config.eval_every = 2;
    config.eval_games = 8;
    config
}

#[test]
fn flat_baseline_outputs_profiles_and_is_shape_bound() {
    let config = flat_config();
    let out = fit_flat_mlp_ne(&config, 500).unwrap();
    assert!(out.model.num_parameters() >= 500);
    assert_eq!(out.metrics.len(), 2);
    let game = config.game.sample(1).unwrap();
    let profile = &out.model.solve(&[&game]).unwrap()[0];
    profile.validate().unwrap();
    assert_eq!(profile.probs[1].len(), 3);
    let other = GameSpec::invariant(vec![3, 3]).sample(1).unwrap();
    assert!(matches!(
        out.model.solve(&[&other]),
        Err(crate::Error::Shape { .. })
    ));
}

#[test]
fn flat_checkpoint_round_trips() {
    let model = FlatMlp::new(&[2, 2], 5, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.json");
    model.save(&path, 9).unwrap();
    let (seed, back) = FlatMlp::load(&path).unwrap();
    assert_eq!(seed, 9);
    assert_eq!(back, model);
}

#[test]
fn flat_width_reaches_budget() {
    let h = flat_hidden_width(&[4, 4], 157_824);
    let m = FlatMlp::new(&[4, 4], h, 0).unwrap();
    assert!(m.num_parameters() >= 157_824);
    assert!(FlatMlp::new(&[4, 4], h - 1, 0).unwrap().num_parameters() < 157_824);
}
