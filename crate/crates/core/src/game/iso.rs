use rand::seq::SliceRandom;
use rand::Rng;

use super::{for_each_joint, strides, Game};
use crate::error::{Error, Result};

/// A strong isomorphism: a player relabeling plus one action relabeling per player.
///
/// Conventions: original player `p` becomes player `player_perm[p]` of the
/// transformed game, and its action `i` becomes action `action_perms[p][i]`.
/// Action permutations are applied first, the player permutation last, so
/// `G'[player_perm[p]](b) = G[p](a)` where `b[player_perm[q]] = action_perms[q][a[q]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Isomorphism {
    pub player_perm: Vec<usize>,
    pub action_perms: Vec<Vec<usize>>,
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &x in p {
        if x >= p.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

impl Isomorphism {
    pub fn identity(actions: &[usize]) -> Self {
        Isomorphism {
            player_perm: (0..actions.len()).collect(),
            action_perms: actions.iter().map(|&t| (0..t).collect()).collect(),
        }
    }

    /// Uniformly random isomorphism for a game with the given action counts.
    pub fn random<R: Rng + ?Sized>(actions: &[usize], rng: &mut R) -> Self {
        let mut player_perm: Vec<usize> = (0..actions.len()).collect();
        player_perm.shuffle(rng);
        let action_perms = actions
            .iter()
            .map(|&t| {
                let mut p: Vec<usize> = (0..t).collect();
                p.shuffle(rng);
                p
            })
            .collect();
        Isomorphism {
            player_perm,
            action_perms,
        }
    }

    /// Checks bijectivity and consistency with a game of the given action counts.
    pub fn check(&self, actions: &[usize]) -> Result<()> {
        if self.player_perm.len() != actions.len() || !is_permutation(&self.player_perm) {
            return Err(Error::shape(
                "player_perm",
                format!("not a permutation of 0..{}", actions.len()),
            ));
        }
        if self.action_perms.len() != actions.len() {
            return Err(Error::shape(
                "action_perms",
                format!("expected {} permutations", actions.len()),
            ));
        }
        for (p, (perm, &t)) in self.action_perms.iter().zip(actions).enumerate() {
            if perm.len() != t || !is_permutation(perm) {
                return Err(Error::shape(
                    "action_perms",
                    format!("entry {p} is not a permutation of 0..{t}"),
                ));
            }
        }
        Ok(())
    }

    /// Action counts of the transformed game.
    pub fn target_actions(&self, actions: &[usize]) -> Vec<usize> {
        let mut out = vec![0; actions.len()];
        for (p, &t) in actions.iter().enumerate() {
            out[self.player_perm[p]] = t;
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let player_perm = invert(&self.player_perm);
        let mut action_perms = vec![Vec::new(); self.action_perms.len()];
        for (p, perm) in self.action_perms.iter().enumerate() {
            action_perms[self.player_perm[p]] = invert(perm);
        }
        Isomorphism {
            player_perm,
            action_perms,
        }
    }

    /// The isomorphism equal to applying `self` and then `next`.
    pub fn then(&self, next: &Isomorphism) -> Self {
        let n = self.player_perm.len();
        let player_perm = (0..n)
            .map(|p| next.player_perm[self.player_perm[p]])
            .collect();
        let action_perms = (0..n)
            .map(|p| {
                let mid = self.player_perm[p];
                self.action_perms[p]
                    .iter()
                    .map(|&i| next.action_perms[mid][i])
                    .collect()
            })
            .collect();
        Isomorphism {
            player_perm,
            action_perms,
        }
    }

    /// Maps `(player, action)` of the source game to its image.
    pub fn map_action(&self, player: usize, action: usize) -> (usize, usize) {
        (self.player_perm[player], self.action_perms[player][action])
    }

    /// Table from source joint index to target joint index.
    pub fn joint_map(&self, actions: &[usize]) -> Vec<usize> {
        let target = self.target_actions(actions);
        let tstr = strides(&target);
        let mut map = vec![0; actions.iter().product()];
        for_each_joint(actions, |j, a| {
            map[j] = a
                .iter()
                .enumerate()
                .map(|(q, &aq)| self.action_perms[q][aq] * tstr[self.player_perm[q]])
                .sum();
        });
        map
    }

    /// Permutes a per-joint-action tensor (mask, decoded scalars).
    pub fn apply_joint<T: Clone>(&self, actions: &[usize], values: &[T]) -> Result<Vec<T>> {
        self.check(actions)?;
        let map = self.joint_map(actions);
        if values.len() != map.len() {
            return Err(Error::shape(
                "values",
                format!("expected {} entries, got {}", map.len(), values.len()),
            ));
        }
        let mut out = values.to_vec();
        for (j, v) in values.iter().enumerate() {
            out[map[j]] = v.clone();
        }
        Ok(out)
    }

    /// Permutes a payoff-shaped tensor `[N, T_1, ..., T_N]`.
    pub fn apply_payoffs(&self, actions: &[usize], payoffs: &[f64]) -> Result<Vec<f64>> {
        self.check(actions)?;
        let map = self.joint_map(actions);
        let nj = map.len();
        if payoffs.len() != nj * actions.len() {
            return Err(Error::shape(
                "payoffs",
                format!(
                    "expected {} entries, got {}",
                    nj * actions.len(),
                    payoffs.len()
                ),
            ));
        }
        let mut out = vec![0.0; payoffs.len()];
        for p in 0..actions.len() {
            let tp = self.player_perm[p];
            for j in 0..nj {
                out[tp * nj + map[j]] = payoffs[p * nj + j];
            }
        }
        Ok(out)
    }

    /// Permutes per-player, per-action rows (embeddings, marginals).
    pub fn apply_per_action<T: Clone>(&self, per_player: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let actions: Vec<usize> = per_player.iter().map(Vec::len).collect();
        self.check(&actions)?;
        let mut out: Vec<Vec<T>> = vec![Vec::new(); per_player.len()];
        for (p, rows) in per_player.iter().enumerate() {
            let mut permuted = rows.clone();
            for (i, row) in rows.iter().enumerate() {
                permuted[self.action_perms[p][i]] = row.clone();
            }
            out[self.player_perm[p]] = permuted;
        }
        Ok(out)
    }

    /// Applies the isomorphism to a game (payoffs and mask).
    pub fn apply(&self, game: &Game) -> Result<Game> {
        let payoffs = self.apply_payoffs(game.actions(), game.payoffs())?;
        let mask = game
            .mask()
            .map(|m| self.apply_joint(game.actions(), m))
            .transpose()?;
        Ok(Game::from_parts_unchecked(
            self.target_actions(game.actions()),
            payoffs,
            mask,
        ))
    }

    /// True iff the game maps onto itself within `tol`.
    pub fn is_automorphism(&self, game: &Game, tol: f64) -> Result<bool> {
        let image = self.apply(game)?;
        if image.actions() != game.actions() {
            return Ok(false);
        }
        if image.mask() != game.mask() && !(image.is_complete() && game.is_complete()) {
            return Ok(false);
        }
        let diff = image
            .payoffs()
            .iter()
            .zip(game.payoffs())
            .enumerate()
            .filter(|(i, _)| game.is_observed(i % game.num_joint()))
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(diff <= tol)
    }
}
