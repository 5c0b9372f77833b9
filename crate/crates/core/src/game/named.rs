use std::str::FromStr;

use super::Game;
use crate::error::Error;

/// Hand-coded 2x2 games.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedFamily {
    Coordination,
    AntiCoordination,
    /// Zero-sum cycle: player 1 wins (+1) on the diagonal.
    MatchingPennies,
    /// Mirror image of matching pennies: player 1 wins off the diagonal.
    AntiCycle,
}

impl NamedFamily {
    pub const ALL: [NamedFamily; 4] = [
        NamedFamily::Coordination,
        NamedFamily::AntiCoordination,
        NamedFamily::MatchingPennies,
        NamedFamily::AntiCycle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedFamily::Coordination => "coordination",
            NamedFamily::AntiCoordination => "anti_coordination",
            NamedFamily::MatchingPennies => "matching_pennies",
            NamedFamily::AntiCycle => "anti_cycle",
        }
    }
}

impl FromStr for NamedFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        NamedFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

pub fn build_named_game(family: NamedFamily) -> Game {
    let (p1, p2): ([f64; 4], [f64; 4]) = match family {
        NamedFamily::Coordination => ([1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 1.0]),
        NamedFamily::AntiCoordination => ([0.0, 1.0, 1.0, 0.0], [0.0, 1.0, 1.0, 0.0]),
        NamedFamily::MatchingPennies => ([1.0, -1.0, -1.0, 1.0], [-1.0, 1.0, 1.0, -1.0]),
        NamedFamily::AntiCycle => ([-1.0, 1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]),
    };
    Game::from_parts_unchecked(vec![2, 2], [p1, p2].concat(), None)
}
