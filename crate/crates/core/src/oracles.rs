//! Exact game-theoretic quantities: expected payoffs, deviation gains, NE gap,
//! pure equilibria, and a few distances used for evaluation.
//!
//! Everything here enumerates joint actions explicitly in `f64`. These
//! functions serve as ground truth for the differentiable losses in
//! [`crate::training`], so they share no code with them.

use crate::error::{Error, Result};
use crate::game::{for_each_joint, Game, JointAction, MAX_JOINT_ACTIONS};
use crate::model::ActionEmbeddings;

/// Default tolerance for exactness checks.
pub const EXACT_TOL: f64 = 1e-9;
/// Default tolerance for pure-NE enumeration on sampled games.
pub const PURE_NE_TOL: f64 = 1e-6;

/// Factorized mixed strategy: one distribution per player.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedProfile {
    pub probs: Vec<Vec<f64>>,
}

impl MixedProfile {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let profile = MixedProfile { probs };
        profile.validate()?;
        Ok(profile)
    }

    pub fn uniform(actions: &[usize]) -> Self {
        MixedProfile {
            probs: actions.iter().map(|&t| vec![1.0 / t as f64; t]).collect(),
        }
    }

    /// Point mass on a joint action.
    pub fn pure(actions: &[usize], a: &JointAction) -> Self {
        let probs = actions
            .iter()
            .zip(a.indices())
            .map(|(&t, &ap)| (0..t).map(|i| if i == ap { 1.0 } else { 0.0 }).collect())
            .collect();
        MixedProfile { probs }
    }

    pub fn validate(&self) -> Result<()> {
        for (p, sigma) in self.probs.iter().enumerate() {
            if sigma.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::invalid(
                    "profile",
                    format!("player {p} has a negative or non-finite probability"),
                ));
            }
            let total: f64 = sigma.iter().sum();
            if (total - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(
                    "profile",
                    format!("player {p} probabilities sum to {total}"),
                ));
            }
        }
        Ok(())
    }

    fn check_against(&self, game: &Game) -> Result<()> {
        let lens: Vec<usize> = self.probs.iter().map(Vec::len).collect();
        if lens != game.actions() {
            return Err(Error::shape(
                "profile",
                format!("profile shape {lens:?} vs game {:?}", game.actions()),
            ));
        }
        self.validate()
    }
}

/// Per-player deviation incentives and their maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub per_player_gaps: Vec<f64>,
    pub ne_gap: f64,
}

fn check_player(game: &Game, player: usize) -> Result<()> {
    if player >= game.num_players() {
        return Err(Error::invalid(
            "player",
            format!("{player} out of range 0..{}", game.num_players()),
        ));
    }
    Ok(())
}

/// `E_{a ~ sigma}[G_p(a)]`.
pub fn expected_payoff(game: &Game, profile: &MixedProfile, player: usize) -> Result<f64> {
    game.ensure_complete()?;
    check_player(game, player)?;
    profile.check_against(game)?;
    let payoffs = game.player_payoffs(player);
    let mut total = 0.0;
    for_each_joint(game.actions(), |j, a| {
        let weight: f64 = a
            .iter()
            .enumerate()
            .map(|(q, &aq)| profile.probs[q][aq])
            .product();
        total += weight * payoffs[j];
    });
    Ok(total)
}

/// `max_{a'_p} E_{a ~ sigma}[G_p(a'_p, a_-p) - G_p(a)]`, never negative.
pub fn deviation_gain_mixed(game: &Game, profile: &MixedProfile, player: usize) -> Result<f64> {
    let current = expected_payoff(game, profile, player)?;
    let mut best = f64::NEG_INFINITY;
    for alt in 0..game.num_actions(player) {
        let mut deviated = profile.clone();
        deviated.probs[player] = (0..game.num_actions(player))
            .map(|i| if i == alt { 1.0 } else { 0.0 })
            .collect();
        best = best.max(expected_payoff(game, &deviated, player)?);
    }
    Ok((best - current).max(0.0))
}

pub fn ne_gap(game: &Game, profile: &MixedProfile) -> Result<GapReport> {
    let per_player_gaps = (0..game.num_players())
        .map(|p| deviation_gain_mixed(game, profile, p))
        .collect::<Result<Vec<_>>>()?;
    let ne_gap = per_player_gaps.iter().copied().fold(0.0, f64::max);
    Ok(GapReport {
        per_player_gaps,
        ne_gap,
    })
}

/// Best gain available to `player` by changing only its own action in `a`.
pub fn deviation_gain_pure(game: &Game, a: &JointAction, player: usize) -> Result<f64> {
    game.ensure_complete()?;
    check_player(game, player)?;
    let j = game.joint_index(a)?;
    let stride = game.strides()[player];
    let base = j - a.indices()[player] * stride;
    let current = game.payoff(player, j);
    let best = (0..game.num_actions(player))
        .map(|alt| game.payoff(player, base + alt * stride))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best - current)
}

/// Maximum over players of [`deviation_gain_pure`]; zero exactly at pure equilibria.
pub fn max_deviation_gain(game: &Game, a: &JointAction) -> Result<f64> {
    (0..game.num_players()).try_fold(0.0f64, |acc, p| {
        Ok(acc.max(deviation_gain_pure(game, a, p)?))
    })
}

/// Maximum deviation gain of every joint action, in row-major order.
pub fn max_deviation_gains(game: &Game) -> Result<Vec<f64>> {
    game.ensure_complete()?;
    (0..game.num_joint())
        .map(|j| max_deviation_gain(game, &game.joint_action(j)))
        .collect()
}

/// All joint actions whose maximum deviation gain is at most `tol`, lexicographically.
pub fn enumerate_pure_ne(game: &Game, tol: f64) -> Result<Vec<JointAction>> {
    let n = game.num_joint();
    if n > MAX_JOINT_ACTIONS {
        return Err(Error::TooLarge {
            joint_actions: n,
            limit: MAX_JOINT_ACTIONS,
        });
    }
    let gains = max_deviation_gains(game)?;
    Ok(gains
        .iter()
        .enumerate()
        .filter(|(_, &g)| g <= tol)
        .map(|(j, _)| game.joint_action(j))
        .collect())
}

/// Euclidean distance between two embedding sets of the same shape.
pub fn embedding_distance(e1: &ActionEmbeddings, e2: &ActionEmbeddings) -> Result<f64> {
    if e1.shape() != e2.shape() {
        return Err(Error::shape(
            "embeddings",
            format!("{:?} vs {:?}", e1.shape(), e2.shape()),
        ));
    }
    let sq: f64 = e1
        .rows()
        .zip(e2.rows())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
        .sum();
    Ok(sq.sqrt())
}

/// Distance from `target` to its nearest neighbour among `others`.
pub fn nearest_embedding_distance(
    target: &ActionEmbeddings,
    others: &[ActionEmbeddings],
) -> Result<f64> {
    others.iter().try_fold(f64::INFINITY, |acc, e| {
        Ok(acc.min(embedding_distance(target, e)?))
    })
}

/// Mean squared error over the entries selected by `mask`.
pub fn masked_mse(pred: &[f64], target: &[f64], mask: &[bool]) -> Result<f64> {
    if pred.len() != target.len() || pred.len() != mask.len() {
        return Err(Error::shape(
            "masked_mse",
            format!(
                "pred {}, target {}, mask {}",
                pred.len(),
                target.len(),
                mask.len()
            ),
        ));
    }
    let (sum, count) = pred
        .iter()
        .zip(target)
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), ((p, t), _)| {
            (s + (p - t) * (p - t), c + 1)
        });
    if count == 0 {
        return Err(Error::EmptySelection("mask selects no entries"));
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_named_game, sample_invariant_game, Isomorphism, NamedFamily};
    use crate::rng;
    use rand::Rng;

    fn coord() -> Game {
        build_named_game(NamedFamily::Coordination)
    }

    fn random_profile<R: Rng>(actions: &[usize], r: &mut R) -> MixedProfile {
        let probs = actions
            .iter()
            .map(|&t| {
                let w: Vec<f64> = (0..t).map(|_| r.random::<f64>() + 1e-3).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|x| x / s).collect()
            })
            .collect();
        MixedProfile::new(probs).unwrap()
    }

    #[test]
    fn expected_payoff_examples() {
        let mp = build_named_game(NamedFamily::MatchingPennies);
        let u = MixedProfile::uniform(&[2, 2]);
        assert_eq!(expected_payoff(&mp, &u, 0).unwrap(), 0.0);
        assert_eq!(expected_payoff(&mp, &u, 1).unwrap(), 0.0);
        let pure = MixedProfile::pure(&[2, 2], &JointAction(vec![0, 0]));
        assert_eq!(expected_payoff(&coord(), &pure, 0).unwrap(), 1.0);
        let g = sample_invariant_game(3, &[2, 3, 4]).unwrap();
        let a = JointAction(vec![1, 2, 3]);
        let j = g.joint_index(&a).unwrap();
        for p in 0..3 {
            let v = expected_payoff(&g, &MixedProfile::pure(g.actions(), &a), p).unwrap();
            assert_eq!(v, g.payoff(p, j));
        }
    }

    #[test]
    fn deviation_gain_examples() {
        let mp = build_named_game(NamedFamily::MatchingPennies);
        assert_eq!(
            deviation_gain_mixed(&mp, &MixedProfile::uniform(&[2, 2]), 0).unwrap(),
            0.0
        );
        let off = MixedProfile::pure(&[2, 2], &JointAction(vec![0, 1]));
        assert_eq!(deviation_gain_mixed(&coord(), &off, 0).unwrap(), 1.0);
        assert_eq!(deviation_gain_mixed(&coord(), &off, 1).unwrap(), 1.0);
    }

    #[test]
    fn ne_gap_examples() {
        // Enumerated: uniform play gives each player 0.5 and each deviation also 0.5.
        let r = ne_gap(&coord(), &MixedProfile::uniform(&[2, 2])).unwrap();
        assert_eq!(r.ne_gap, 0.0);
        let r = ne_gap(
            &coord(),
            &MixedProfile::pure(&[2, 2], &JointAction(vec![0, 0])),
        )
        .unwrap();
        assert_eq!(r.ne_gap, 0.0);
        let r = ne_gap(
            &build_named_game(NamedFamily::MatchingPennies),
            &MixedProfile::uniform(&[2, 2]),
        )
        .unwrap();
        assert_eq!(r.ne_gap, 0.0);
        // Player 0 at (0.75, 0.25) vs uniform: payoff 0.5, best 0.5 -> 0; player 1 best 0.75 vs 0.5.
        let p = MixedProfile::new(vec![vec![0.75, 0.25], vec![0.5, 0.5]]).unwrap();
        let r = ne_gap(&coord(), &p).unwrap();
        assert!((r.per_player_gaps[0] - 0.0).abs() < 1e-15);
        assert!((r.per_player_gaps[1] - 0.25).abs() < 1e-15);
        assert_eq!(r.ne_gap, 0.25);
    }

    #[test]
    fn pure_gain_examples() {
        assert_eq!(
            deviation_gain_pure(&coord(), &JointAction(vec![0, 0]), 0).unwrap(),
            0.0
        );
        assert_eq!(
            deviation_gain_pure(&coord(), &JointAction(vec![0, 0]), 1).unwrap(),
            0.0
        );
        assert_eq!(
            deviation_gain_pure(&coord(), &JointAction(vec![0, 1]), 0).unwrap(),
            1.0
        );
        assert_eq!(
            max_deviation_gain(&coord(), &JointAction(vec![0, 1])).unwrap(),
            1.0
        );
        assert!(deviation_gain_pure(&coord(), &JointAction(vec![0, 2]), 0).is_err());
        assert_eq!(
            max_deviation_gains(&coord()).unwrap(),
            vec![0.0, 1.0, 1.0, 0.0]
        );
        let mp = build_named_game(NamedFamily::MatchingPennies);
        assert!(max_deviation_gains(&mp).unwrap().iter().all(|&g| g > 0.0));
    }

    #[test]
    fn pure_ne_enumeration() {
        let ja = |v: &[usize]| JointAction(v.to_vec());
        assert_eq!(
            enumerate_pure_ne(&coord(), 0.0).unwrap(),
            vec![ja(&[0, 0]), ja(&[1, 1])]
        );
        let anti = build_named_game(NamedFamily::AntiCoordination);
        assert_eq!(
            enumerate_pure_ne(&anti, 0.0).unwrap(),
            vec![ja(&[0, 1]), ja(&[1, 0])]
        );
        for f in [NamedFamily::MatchingPennies, NamedFamily::AntiCycle] {
            assert!(enumerate_pure_ne(&build_named_game(f), 0.0)
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn pure_ne_iff_zero_gain_exhaustive() {
        for seed in 0..30 {
            let actions = [2 + (seed % 3) as usize, 2 + (seed % 2) as usize, 4];
            let mut g = sample_invariant_game(seed, &actions).unwrap();
            if seed % 2 == 0 {
                // Rounded payoffs create ties and exact equilibria.
                let p: Vec<f64> = g.payoffs().iter().map(|x| x.round()).collect();
                g = Game::new(actions.to_vec(), p, None).unwrap();
            }
            let ne = enumerate_pure_ne(&g, 0.0).unwrap();
            for j in 0..g.num_joint() {
                let a = g.joint_action(j);
                assert_eq!(max_deviation_gain(&g, &a).unwrap() == 0.0, ne.contains(&a));
            }
        }
    }

    #[test]
    fn point_mass_gain_equals_pure_gain() {
        let mut r = rng::stream(5, 0);
        for seed in 0..20 {
            let g = sample_invariant_game(seed, &[3, 2, 3]).unwrap();
            let a = JointAction(vec![
                r.random_range(0..3),
                r.random_range(0..2),
                r.random_range(0..3),
            ]);
            for p in 0..3 {
                let mixed =
                    deviation_gain_mixed(&g, &MixedProfile::pure(g.actions(), &a), p).unwrap();
                let pure = deviation_gain_pure(&g, &a, p).unwrap();
                assert!((mixed - pure).abs() < EXACT_TOL);
            }
        }
    }

    #[test]
    fn ne_gap_is_isomorphism_invariant_and_nonnegative() {
        let mut r = rng::stream(6, 0);
        for seed in 0..50 {
            let g = sample_invariant_game(seed, &[2, 3, 4]).unwrap();
            let sigma = random_profile(g.actions(), &mut r);
            let iso = Isomorphism::random(g.actions(), &mut r);
            let image = MixedProfile::new(iso.apply_per_action(&sigma.probs).unwrap()).unwrap();
            let a = ne_gap(&g, &sigma).unwrap();
            let b = ne_gap(&iso.apply(&g).unwrap(), &image).unwrap();
            assert!((a.ne_gap - b.ne_gap).abs() < EXACT_TOL);
            assert!(a.per_player_gaps.iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn best_response_sets_survive_normalization() {
        let mut r = rng::stream(8, 0);
        for seed in 0..30 {
            let raw: Vec<f64> = (0..2 * 12).map(|_| r.random_range(-3.0..3.0)).collect();
            let g = Game::new(vec![3, 4], raw, None).unwrap();
            let h = crate::game::invariant_normalize(&g).unwrap();
            let sigma = random_profile(g.actions(), &mut r);
            for p in 0..2 {
                let br = |game: &Game| {
                    let vals: Vec<f64> = (0..game.num_actions(p))
                        .map(|alt| {
                            let mut d = sigma.clone();
                            d.probs[p] = (0..game.num_actions(p))
                                .map(|i| (i == alt) as u8 as f64)
                                .collect();
                            expected_payoff(game, &d, p).unwrap()
                        })
                        .collect();
                    let best = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    vals.iter().map(|&v| best - v < 1e-9).collect::<Vec<_>>()
                };
                assert_eq!(br(&g), br(&h), "seed {seed}");
            }
            let _ = seed;
        }
    }

    #[test]
    fn profile_validation() {
        assert!(MixedProfile::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(MixedProfile::new(vec![vec![1.5, -0.5]]).is_err());
        let g = coord();
        let bad = MixedProfile::uniform(&[3, 2]);
        assert!(expected_payoff(&g, &bad, 0).is_err());
        assert!(expected_payoff(&g, &MixedProfile::uniform(&[2, 2]), 2).is_err());
        let masked = g.with_mask(Some(vec![true, false, true, true])).unwrap();
        assert_eq!(
            ne_gap(&masked, &MixedProfile::uniform(&[2, 2])).unwrap_err(),
            Error::MaskedGame
        );
    }

    #[test]
    fn embedding_distance_examples() {
        let e1 = ActionEmbeddings::new(
            3,
            vec![
                vec![vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0]],
                vec![vec![-1.0, 0.0, 4.0]],
            ],
        )
        .unwrap();
        assert_eq!(embedding_distance(&e1, &e1).unwrap(), 0.0);
        let mut e2 = e1.clone();
        e2.players
            .iter_mut()
            .flatten()
            .flatten()
            .for_each(|x| *x += 1.0);
        assert!((embedding_distance(&e1, &e2).unwrap() - 9f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            embedding_distance(&e1, &e2).unwrap(),
            embedding_distance(&e2, &e1).unwrap()
        );
        let e3 = ActionEmbeddings::zeros(&[2, 2], 3);
        assert!(embedding_distance(&e1, &e3).is_err());
        assert_eq!(
            nearest_embedding_distance(&e1, &[e2.clone(), e1.clone()]).unwrap(),
            0.0
        );
    }

    #[test]
    fn masked_mse_examples() {
        let t = [0.2, 0.4, 0.6, 0.8];
        assert_eq!(masked_mse(&t, &t, &[true; 4]).unwrap(), 0.0);
        assert_eq!(
            masked_mse(&t, &t, &[false; 4]).unwrap_err(),
            Error::EmptySelection("mask selects no entries")
        );
        let p: Vec<f64> = t.iter().map(|x| x + 0.1).collect();
        assert!((masked_mse(&p, &t, &[true, false, true, false]).unwrap() - 0.01).abs() < 1e-12);
        assert!(masked_mse(&p, &t, &[true; 3]).is_err());
    }
}
