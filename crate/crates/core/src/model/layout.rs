use std::rc::Rc;

use crate::engine::{Csr, KeySets};
use crate::error::{Error, Result};
use crate::game::{for_each_joint, unravel, Game, MAX_JOINT_ACTIONS};

/// Where one game lives inside a [`Batch`].
#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub actions: Vec<usize>,
    /// First action row of each player.
    pub player_rows: Vec<usize>,
    pub action_offset: usize,
    pub joint_offset: usize,
    pub num_joint: usize,
    /// First row of this game's (joint action, player) decoder tokens.
    pub token_offset: usize,
}

impl Slot {
    pub fn num_players(&self) -> usize {
        self.actions.len()
    }

    pub fn total_actions(&self) -> usize {
        self.actions.iter().sum()
    }
}

/// Row bookkeeping for running many games through one graph.
///
/// Action tokens of all games are stacked player-major; play tokens are
/// stacked as (game, joint action, player) in the enumeration order chosen at
/// construction. Decoder layouts always use the natural joint order.
#[derive(Clone, Debug)]
pub struct Batch {
    pub slots: Vec<Slot>,
    pub num_actions: usize,
    pub num_joint: usize,
    pub(crate) play_actions: Vec<usize>,
    pub(crate) play_payoffs: Vec<f64>,
    pub(crate) play_keys: Rc<KeySets>,
    pub(crate) action_play_keys: Rc<KeySets>,
    pub(crate) action_keys: Rc<KeySets>,
    pub(crate) player_groups: Rc<Csr>,
    pub(crate) joint_groups: Rc<Csr>,
    pub(crate) joint_tokens: Vec<usize>,
    pub(crate) joint_token_keys: Rc<KeySets>,
}

impl Batch {
    pub fn new(games: &[&Game]) -> Result<Self> {
        Batch::build(games, None)
    }

    /// Like [`Batch::new`] but enumerates each game's joint actions in the
    /// given order inside the encoder.
    pub fn with_enumeration(games: &[&Game], orders: &[Vec<usize>]) -> Result<Self> {
        if orders.len() != games.len() {
            return Err(Error::shape(
                "orders",
                format!("{} orders for {} games", orders.len(), games.len()),
            ));
        }
        for (g, order) in games.iter().zip(orders) {
            let mut seen = vec![false; g.num_joint()];
            for &j in order {
                if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::shape(
                        "orders",
                        "not a permutation of the joint actions",
                    ));
                }
            }
            if order.len() != seen.len() {
                return Err(Error::shape(
                    "orders",
                    "not a permutation of the joint actions",
                ));
            }
        }
        Batch::build(games, Some(orders))
    }

    fn build(games: &[&Game], orders: Option<&[Vec<usize>]>) -> Result<Self> {
        if games.is_empty() {
            return Err(Error::EmptySelection("batch has no games"));
        }
        let mut slots = Vec::with_capacity(games.len());
        let (mut na, mut nj, mut nt) = (0, 0, 0);
        for g in games {
            g.validate()?;
            if g.num_joint() > MAX_JOINT_ACTIONS {
                return Err(Error::TooLarge {
                    joint_actions: g.num_joint(),
                    limit: MAX_JOINT_ACTIONS,
                });
            }
            let mut player_rows = Vec::with_capacity(g.num_players());
            let mut r = na;
            for &t in g.actions() {
                player_rows.push(r);
                r += t;
            }
            slots.push(Slot {
                actions: g.actions().to_vec(),
                player_rows,
                action_offset: na,
                joint_offset: nj,
                num_joint: g.num_joint(),
                token_offset: nt,
            });
            na = r;
            nj += g.num_joint();
            nt += g.num_joint() * g.num_players();
        }

        // Encoder plays.
        let mut play_actions = Vec::new();
        let mut play_payoffs = Vec::new();
        let mut play_valid = Vec::new();
        let mut play_groups = Vec::new();
        let mut plays_of_action: Vec<Vec<usize>> = vec![Vec::new(); na];
        for (b, (g, slot)) in games.iter().zip(&slots).enumerate() {
            let n = g.num_players();
            let natural: Vec<usize>;
            let order = match orders {
                Some(o) => &o[b],
                None => {
                    natural = (0..g.num_joint()).collect();
                    &natural
                }
            };
            for &j in order {
                let a = unravel(j, g.actions());
                let observed = g.is_observed(j);
                let base = play_actions.len();
                play_groups.push((base..base + n).collect::<Vec<_>>());
                for p in 0..n {
                    let row = slot.player_rows[p] + a[p];
                    plays_of_action[row].push(base + p);
                    play_actions.push(row);
                    play_payoffs.push(if observed { g.payoff(p, j) } else { 0.0 });
                    play_valid.push(observed);
                }
            }
        }
        let np = play_actions.len();
        let play_keys = KeySets::grouped(&play_groups, np, play_valid.clone())?;
        let mut offsets = vec![0];
        let mut keys = Vec::with_capacity(np);
        for list in &plays_of_action {
            keys.extend_from_slice(list);
            offsets.push(keys.len());
        }
        let action_play_keys = KeySets::new(offsets, keys, vec![true; na], play_valid)?;
        let action_groups: Vec<Vec<usize>> = slots
            .iter()
            .map(|s| (s.action_offset..s.action_offset + s.total_actions()).collect())
            .collect();
        let action_keys = KeySets::grouped(&action_groups, na, vec![true; na])?;

        // Decoders.
        let player_groups = Csr::from_groups(slots.iter().flat_map(|s| {
            s.actions
                .iter()
                .zip(&s.player_rows)
                .map(|(&t, &r)| (r..r + t).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        }));
        let mut joint_groups = Vec::with_capacity(nj);
        let mut joint_tokens = Vec::new();
        let mut token_groups = Vec::new();
        for slot in &slots {
            for_each_joint(&slot.actions, |_, a| {
                let rows: Vec<usize> = a
                    .iter()
                    .zip(&slot.player_rows)
                    .map(|(&ap, &r)| r + ap)
                    .collect();
                let base = joint_tokens.len();
                token_groups.push((base..base + rows.len()).collect::<Vec<_>>());
                joint_tokens.extend_from_slice(&rows);
                joint_groups.push(rows);
            });
        }
        let nt = joint_tokens.len();
        let joint_token_keys = KeySets::grouped(&token_groups, nt, vec![true; nt])?;

        Ok(Batch {
            slots,
            num_actions: na,
            num_joint: nj,
            play_actions,
            play_payoffs,
            play_keys: Rc::new(play_keys),
            action_play_keys: Rc::new(action_play_keys),
            action_keys: Rc::new(action_keys),
            player_groups: Rc::new(player_groups),
            joint_groups: Rc::new(Csr::from_groups(joint_groups)),
            joint_tokens,
            joint_token_keys: Rc::new(joint_token_keys),
        })
    }

    pub fn num_games(&self) -> usize {
        self.slots.len()
    }

    pub fn num_plays(&self) -> usize {
        self.play_actions.len()
    }
}
