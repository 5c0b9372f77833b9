use serde::{Deserialize, Serialize};

use super::Game;
use crate::error::{Error, Result};

/// Optional provenance block written by the command-line tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
}

/// On-disk game record. Payoffs and mask are flattened row-major, player axis first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub num_players: usize,
    pub actions_per_player: Vec<usize>,
    pub payoffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl GameFile {
    /// Unobserved payoffs that are not finite are written as `0.0`.
    pub fn from_game(game: &Game, provenance: Option<Provenance>) -> Self {
        let nj = game.num_joint();
        let payoffs = game
            .payoffs()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if x.is_finite() || game.is_observed(i % nj) {
                    x
                } else {
                    0.0
                }
            })
            .collect();
        GameFile {
            num_players: game.num_players(),
            actions_per_player: game.actions().to_vec(),
            payoffs,
            mask: game.mask().map(<[bool]>::to_vec),
            provenance,
        }
    }

    pub fn into_game(self) -> Result<Game> {
        if self.num_players != self.actions_per_player.len() {
            return Err(Error::shape(
                "num_players",
                format!(
                    "{} players but {} action counts",
                    self.num_players,
                    self.actions_per_player.len()
                ),
            ));
        }
        Game::new(self.actions_per_player, self.payoffs, self.mask)
    }
}

impl Game {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GameFile::from_game(self, None)).expect("game serializes")
    }

    pub fn from_json(text: &str) -> Result<Game> {
        let file: GameFile =
            serde_json::from_str(text).map_err(|e| Error::invalid("game_json", e.to_string()))?;
        file.into_game()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{sample_invariant_game, sample_mask};
    use proptest::prelude::*;

    #[test]
    fn field_names_are_exact() {
        let g = Game::new(
            vec![2, 2],
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            None,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["actions_per_player", "num_players", "payoffs"]);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"num_players":2,"actions_per_player":[1,1],"payoffs":[0,0],"extra":1}"#;
        assert!(Game::from_json(text).is_err());
    }

    #[test]
    fn num_players_must_agree() {
        let text = r#"{"num_players":3,"actions_per_player":[1,1],"payoffs":[0,0]}"#;
        assert!(matches!(
            Game::from_json(text),
            Err(Error::Shape {
                field: "num_players",
                ..
            })
        ));
    }

    proptest! {
        #[test]
        fn json_round_trip(seed in 0u64..1000, t0 in 2usize..4, t1 in 2usize..4, p in 0.0f64..1.0) {
            let g = sample_invariant_game(seed, &[t0, t1]).unwrap();
            let g = g.with_mask(Some(sample_mask(seed, &[t0, t1], p).unwrap())).unwrap();
            prop_assert_eq!(Game::from_json(&g.to_json()).unwrap(), g);
        }
    }
}
