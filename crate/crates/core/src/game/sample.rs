use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{invariant_normalize, Game};
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Latent vectors of a DISC game, one row per action.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscLatents {
    pub dim: usize,
    /// Row-major `[T, Z]`.
    pub u: Vec<f64>,
    /// Row-major `[T, Z]`.
    pub v: Vec<f64>,
}

impl DiscLatents {
    pub fn num_actions(&self) -> usize {
        self.u.len() / self.dim
    }

    /// Win probability of action `i` against action `j`.
    pub fn win_probability(&self, i: usize, j: usize) -> f64 {
        let z = self.dim;
        let (ui, vi) = (&self.u[i * z..(i + 1) * z], &self.v[i * z..(i + 1) * z]);
        let (uj, vj) = (&self.u[j * z..(j + 1) * z], &self.v[j * z..(j + 1) * z]);
        let x: f64 = (0..z).map(|k| ui[k] * vj[k] - uj[k] * vi[k]).sum();
        1.0 / (1.0 + (-x).exp())
    }

    /// Two-player game with `G_1 = P` and `G_2 = 1 - P`.
    pub fn to_game(&self) -> Game {
        let t = self.num_actions();
        let mut p1 = vec![0.5; t * t];
        for i in 0..t {
            for j in (i + 1)..t {
                let pij = self.win_probability(i, j);
                p1[i * t + j] = pij;
                p1[j * t + i] = 1.0 - pij;
            }
        }
        let p2: Vec<f64> = p1.iter().map(|x| 1.0 - x).collect();
        Game::from_parts_unchecked(vec![t, t], [p1, p2].concat(), None)
    }
}

/// Standard-normal payoffs mapped through [`invariant_normalize`].
pub fn sample_invariant_game(seed: u64, actions: &[usize]) -> Result<Game> {
    if actions.len() < 2 {
        return Err(Error::invalid("num_players", "need at least 2 players"));
    }
    if actions.iter().any(|&t| t < 2) {
        return Err(Error::invalid(
            "actions_per_player",
            "every player needs at least 2 actions",
        ));
    }
    let mut r = rng::stream(seed, streams::PAYOFFS);
    let len = actions.len() * actions.iter().product::<usize>();
    let payoffs = (0..len).map(|_| StandardNormal.sample(&mut r)).collect();
    invariant_normalize(&Game::from_parts_unchecked(actions.to_vec(), payoffs, None))
}

/// DISC game with `Z`-dimensional latents.
///
/// Each latent matrix is standard normal noise plus one shared shift drawn
/// from `U(-1, 1)`, independently for `u` and `v`.
pub fn sample_disc_game(seed: u64, num_actions: usize, dim: usize) -> Result<(Game, DiscLatents)> {
    if num_actions < 2 {
        return Err(Error::invalid("T", "need at least 2 actions"));
    }
    if dim < 1 {
        return Err(Error::invalid("Z", "latent dimension must be positive"));
    }
    let mut r = rng::stream(seed, streams::DISC_LATENTS);
    let shift = Uniform::new(-1.0, 1.0).expect("valid range");
    let draw = |r: &mut rand_chacha::ChaCha20Rng| -> Vec<f64> {
        let s: f64 = shift.sample(r);
        (0..num_actions * dim)
            .map(|_| StandardNormal.sample(r))
            .map(|n: f64| n + s)
            .collect()
    };
    let u = draw(&mut r);
    let v = draw(&mut r);
    let latents = DiscLatents { dim, u, v };
    Ok((latents.to_game(), latents))
}

/// I.i.d. Bernoulli(`p_observe`) observation mask over a joint-action shape.
pub fn sample_mask(seed: u64, shape: &[usize], p_observe: f64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&p_observe) {
        return Err(Error::invalid(
            "p_observe",
            format!("{p_observe} not in [0, 1]"),
        ));
    }
    let mut r = rng::stream(seed, streams::MASK);
    let n: usize = shape.iter().product();
    Ok((0..n).map(|_| r.random::<f64>() < p_observe).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_sampler_is_deterministic() {
        assert_eq!(
            sample_invariant_game(9, &[3, 3]).unwrap(),
            sample_invariant_game(9, &[3, 3]).unwrap()
        );
        assert_ne!(
            sample_invariant_game(9, &[3, 3]).unwrap(),
            sample_invariant_game(10, &[3, 3]).unwrap()
        );
    }

    #[test]
    fn invariant_sampler_rejects_degenerate_sizes() {
        assert!(sample_invariant_game(0, &[3]).is_err());
        assert!(sample_invariant_game(0, &[3, 1]).is_err());
    }

    #[test]
    fn invariant_sampler_has_zero_own_action_means() {
        let g = sample_invariant_game(4, &[4, 4]).unwrap();
        for b in 0..4 {
            let m0: f64 = (0..4).map(|a| g.payoff(0, a * 4 + b)).sum();
            let m1: f64 = (0..4).map(|a| g.payoff(1, b * 4 + a)).sum();
            assert!(m0.abs() < 1e-6 && m1.abs() < 1e-6);
        }
    }

    #[test]
    fn invariant_sampler_entries_are_centered() {
        // CLT: each entry has unit-order variance; 1000 samples give sd ~0.03.
        let n = 1000;
        let mut sums = [0.0; 2 * 9];
        for seed in 0..n {
            let g = sample_invariant_game(seed, &[3, 3]).unwrap();
            g.validate().unwrap();
            for (s, x) in sums.iter_mut().zip(g.payoffs()) {
                *s += x;
            }
        }
        assert!(sums.iter().all(|s| (s / n as f64).abs() < 0.15));
    }

    #[test]
    fn disc_probabilities_are_antisymmetric() {
        for seed in 0..10 {
            let (g, _) = sample_disc_game(seed, 8, 3).unwrap();
            g.validate().unwrap();
            for i in 0..8 {
                assert_eq!(g.payoff(0, i * 8 + i), 0.5);
                for j in 0..8 {
                    assert!((g.payoff(0, i * 8 + j) + g.payoff(0, j * 8 + i) - 1.0).abs() < 1e-12);
                    assert!((g.payoff(0, i * 8 + j) + g.payoff(1, i * 8 + j) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn disc_with_equal_latents_is_flat() {
        let latents = DiscLatents {
            dim: 1,
            u: vec![0.3, -1.2, 2.0],
            v: vec![0.3, -1.2, 2.0],
        };
        assert!(latents
            .to_game()
            .player_payoffs(0)
            .iter()
            .all(|&p| p == 0.5));
    }

    #[test]
    fn disc_shift_is_shared_per_matrix() {
        let (_, l) = sample_disc_game(3, 4000, 1).unwrap();
        // Shared shift moves the mean away from zero by a single draw; noise averages out.
        let mean_u: f64 = l.u.iter().sum::<f64>() / l.u.len() as f64;
        let mean_v: f64 = l.v.iter().sum::<f64>() / l.v.len() as f64;
        let var_u: f64 = l.u.iter().map(|x| (x - mean_u).powi(2)).sum::<f64>() / l.u.len() as f64;
        assert!(mean_u.abs() < 1.1 && mean_v.abs() < 1.1);
        assert!((var_u - 1.0).abs() < 0.1);
    }

    #[test]
    fn mask_extremes_and_rate() {
        assert!(sample_mask(1, &[4, 4], 1.0).unwrap().iter().all(|&b| b));
        assert!(sample_mask(1, &[4, 4], 0.0).unwrap().iter().all(|&b| !b));
        let m = sample_mask(2, &[64, 64], 0.5).unwrap();
        let frac = m.iter().filter(|&&b| b).count() as f64 / m.len() as f64;
        assert!((0.45..=0.55).contains(&frac));
        assert_eq!(m, sample_mask(2, &[64, 64], 0.5).unwrap());
        assert!(sample_mask(1, &[2], 1.5).is_err());
        assert!(sample_mask(1, &[2], -0.1).is_err());
    }
}
