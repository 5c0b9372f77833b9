//! Normal-form games as dense payoff tensors.
//!
//! Payoffs are stored row-major with the player as the leading axis, so the
//! payoff to player `p` at joint action `j` (itself a row-major index over the
//! action axes) lives at `p * num_joint + j`.

mod iso;
mod json;
mod named;
mod normalize;
mod sample;

pub use iso::Isomorphism;
pub use json::{GameFile, Provenance};
pub use named::{build_named_game, NamedFamily};
pub use normalize::invariant_normalize;
pub use sample::{sample_disc_game, sample_invariant_game, sample_mask, DiscLatents};

use crate::error::{Error, Result};

/// Upper bound on joint actions accepted by exhaustive routines.
pub const MAX_JOINT_ACTIONS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    actions: Vec<usize>,
    payoffs: Vec<f64>,
    mask: Option<Vec<bool>>,
}

/// One action index per player.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl Game {
    /// Builds and validates a game. `payoffs` has length `N * prod(actions)`.
    pub fn new(actions: Vec<usize>, payoffs: Vec<f64>, mask: Option<Vec<bool>>) -> Result<Self> {
        let game = Game {
            actions,
            payoffs,
            mask,
        };
        game.validate()?;
        Ok(game)
    }

    /// Builds a fully observed game from one payoff slice per player.
    pub fn from_player_payoffs(actions: Vec<usize>, per_player: &[Vec<f64>]) -> Result<Self> {
        let payoffs = per_player.iter().flatten().copied().collect();
        Game::new(actions, payoffs, None)
    }

    pub(crate) fn from_parts_unchecked(
        actions: Vec<usize>,
        payoffs: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Self {
        Game {
            actions,
            payoffs,
            mask,
        }
    }

    /// Checks every structural invariant; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.actions.len() < 2 {
            return Err(Error::shape(
                "num_players",
                format!("need at least 2 players, got {}", self.actions.len()),
            ));
        }
        if let Some(p) = self.actions.iter().position(|&t| t == 0) {
            return Err(Error::shape(
                "actions_per_player",
                format!("player {p} has no actions"),
            ));
        }
        let joint = self
            .actions
            .iter()
            .try_fold(1usize, |acc, &t| acc.checked_mul(t))
            .ok_or_else(|| Error::shape("actions_per_player", "joint action count overflows"))?;
        let expected = joint * self.actions.len();
        if self.payoffs.len() != expected {
            return Err(Error::shape(
                "payoffs",
                format!(
                    "expected {} values for shape {:?}, got {}",
                    expected,
                    self.payoff_shape(),
                    self.payoffs.len()
                ),
            ));
        }
        if let Some(mask) = &self.mask {
            if mask.len() != joint {
                return Err(Error::shape(
                    "mask",
                    format!("expected {joint} entries, got {}", mask.len()),
                ));
            }
        }
        for p in 0..self.num_players() {
            for j in 0..joint {
                if self.is_observed(j) && !self.payoffs[p * joint + j].is_finite() {
                    return Err(Error::NonFinite {
                        field: "payoffs",
                        index: p * joint + j,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn num_players(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.actions[player]
    }

    pub fn total_actions(&self) -> usize {
        self.actions.iter().sum()
    }

    pub fn num_joint(&self) -> usize {
        self.actions.iter().product()
    }

    /// `[N, T_1, ..., T_N]`.
    pub fn payoff_shape(&self) -> Vec<usize> {
        std::iter::once(self.num_players())
            .chain(self.actions.iter().copied())
            .collect()
    }

    pub fn payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn player_payoffs(&self, player: usize) -> &[f64] {
        let n = self.num_joint();
        &self.payoffs[player * n..(player + 1) * n]
    }

    pub fn payoff(&self, player: usize, joint: usize) -> f64 {
        self.payoffs[player * self.num_joint() + joint]
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.as_ref().is_none_or(|m| m.iter().all(|&b| b))
    }

    pub fn is_observed(&self, joint: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[joint])
    }

    /// Returns a copy carrying `mask`.
    pub fn with_mask(&self, mask: Option<Vec<bool>>) -> Result<Game> {
        Game::new(self.actions.clone(), self.payoffs.clone(), mask)
    }

    /// Row-major strides over the action axes.
    pub fn strides(&self) -> Vec<usize> {
        strides(&self.actions)
    }

    pub fn joint_index(&self, a: &JointAction) -> Result<usize> {
        if a.0.len() != self.num_players() {
            return Err(Error::shape(
                "joint_action",
                format!("expected {} indices, got {}", self.num_players(), a.0.len()),
            ));
        }
        let mut idx = 0;
        for (p, (&ap, &t)) in a.0.iter().zip(&self.actions).enumerate() {
            if ap >= t {
                return Err(Error::invalid(
                    "joint_action",
                    format!("player {p} action {ap} out of range 0..{t}"),
                ));
            }
            idx = idx * t + ap;
        }
        Ok(idx)
    }

    pub fn joint_action(&self, joint: usize) -> JointAction {
        JointAction(unravel(joint, &self.actions))
    }

    pub(crate) fn ensure_complete(&self) -> Result<()> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(Error::MaskedGame)
        }
    }

    /// Largest absolute payoff difference against a same-shaped game.
    pub fn max_abs_diff(&self, other: &Game) -> Result<f64> {
        if self.actions != other.actions {
            return Err(Error::shape(
                "actions_per_player",
                format!("{:?} vs {:?}", self.actions, other.actions),
            ));
        }
        Ok(self
            .payoffs
            .iter()
            .zip(&other.payoffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

pub(crate) fn unravel(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = idx % dims[i];
        idx /= dims[i];
    }
    out
}

/// Calls `f(joint_index, indices)` for every joint action in row-major order.
pub(crate) fn for_each_joint(dims: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = dims.iter().product();
    let mut idx = vec![0usize; dims.len()];
    for j in 0..total {
        f(j, &idx);
        for axis in (0..dims.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < dims[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_game_validates() {
        let g = Game::new(vec![3, 3], vec![0.5; 18], None).unwrap();
        assert_eq!(g.payoff_shape(), vec![2, 3, 3]);
    }

    #[test]
    fn payoff_shape_mismatch_is_rejected() {
        let err = Game::new(vec![3, 3], vec![0.0; 12], None).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Shape {
                    field: "payoffs",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn observed_nan_is_rejected() {
        let mut p = vec![0.0; 8];
        p[5] = f64::NAN;
        let err = Game::new(vec![2, 2], p.clone(), None).unwrap_err();
        assert_eq!(
            err,
            Error::NonFinite {
                field: "payoffs",
                index: 5
            }
        );
        // Unobserved NaN is fine: entry 5 is player 1, joint 1.
        Game::new(vec![2, 2], p, Some(vec![true, false, true, true])).unwrap();
    }

    #[test]
    fn mask_shape_mismatch_is_rejected() {
        let err = Game::new(vec![2, 2], vec![0.0; 8], Some(vec![true; 3])).unwrap_err();
        assert!(matches!(err, Error::Shape { field: "mask", .. }));
    }

    #[test]
    fn single_player_and_empty_action_sets_rejected() {
        assert!(matches!(
            Game::new(vec![3], vec![0.0; 3], None),
            Err(Error::Shape {
                field: "num_players",
                ..
            })
        ));
        assert!(matches!(
            Game::new(vec![2, 0], vec![], None),
            Err(Error::Shape {
                field: "actions_per_player",
                ..
            })
        ));
    }

    #[test]
    fn joint_index_round_trips() {
        let g = Game::new(vec![2, 3, 4], vec![0.0; 72], None).unwrap();
        for j in 0..24 {
            assert_eq!(g.joint_index(&g.joint_action(j)).unwrap(), j);
        }
        assert!(g.joint_index(&JointAction(vec![0, 3, 0])).is_err());
        let mut seen = Vec::new();
        for_each_joint(&[2, 3, 4], |j, a| {
            assert_eq!(unravel(j, &[2, 3, 4]), a);
            seen.push(j);
        });
        assert_eq!(seen, (0..24).collect::<Vec<_>>());
    }
}
