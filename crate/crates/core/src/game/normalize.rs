use super::Game;
use crate::error::Result;

const DEGENERATE_NORM: f64 = 1e-12;

/// Maps a game into the equilibrium-invariant subspace.
///
/// Per player, payoffs are de-meaned over the player's own action axis (other
/// players' actions held fixed), then rescaled to Frobenius norm
/// `sqrt(prod_q T_q)`. A player whose de-meaned slice has norm below `1e-12`
/// gets an all-zero slice.
pub fn invariant_normalize(game: &Game) -> Result<Game> {
    game.ensure_complete()?;
    let n = game.num_players();
    let nj = game.num_joint();
    let strides = game.strides();
    let target = (nj as f64).sqrt();
    let mut out = vec![0.0; game.payoffs().len()];
    for p in 0..n {
        let tp = game.num_actions(p);
        let stride = strides[p];
        let src = game.player_payoffs(p);
        let dst = &mut out[p * nj..(p + 1) * nj];
        // Each column along axis p starts where the axis-p index is zero.
        for base in 0..nj {
            if !(base / stride).is_multiple_of(tp) {
                continue;
            }
            let mean = (0..tp).map(|i| src[base + i * stride]).sum::<f64>() / tp as f64;
            for i in 0..tp {
                dst[base + i * stride] = src[base + i * stride] - mean;
            }
        }
        let norm = dst.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < DEGENERATE_NORM {
            dst.iter_mut().for_each(|x| *x = 0.0);
        } else {
            let scale = target / norm;
            dst.iter_mut().for_each(|x| *x *= scale);
        }
    }
    Ok(Game::from_parts_unchecked(
        game.actions().to_vec(),
        out,
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::game::{sample_invariant_game, sample_mask};
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_game(seed: u64, actions: &[usize]) -> Game {
        let mut r = rng::stream(seed, 99);
        let len = actions.len() * actions.iter().product::<usize>();
        let payoffs = (0..len).map(|_| StandardNormal.sample(&mut r)).collect();
        Game::new(actions.to_vec(), payoffs, None).unwrap()
    }

    #[test]
    fn constant_game_normalizes_to_zero() {
        let g = Game::new(vec![3, 3], vec![2.5; 18], None).unwrap();
        let z = invariant_normalize(&g).unwrap();
        assert!(z.payoffs().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn slices_have_target_norm_and_zero_own_mean() {
        for (seed, actions) in [(1u64, vec![4, 4]), (2, vec![3, 3, 3]), (3, vec![2, 5, 3])] {
            let g = invariant_normalize(&gaussian_game(seed, &actions)).unwrap();
            let nj = g.num_joint();
            let strides = g.strides();
            for p in 0..g.num_players() {
                let s = g.player_payoffs(p);
                let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - (nj as f64).sqrt()).abs() < 1e-6);
                for base in (0..nj).filter(|b| (b / strides[p]).is_multiple_of(actions[p])) {
                    let m: f64 = (0..actions[p]).map(|i| s[base + i * strides[p]]).sum();
                    assert!(m.abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn idempotent() {
        for seed in 0..20 {
            let once = invariant_normalize(&gaussian_game(seed, &[3, 4])).unwrap();
            let twice = invariant_normalize(&once).unwrap();
            assert!(once.max_abs_diff(&twice).unwrap() < 1e-6);
        }
    }

    #[test]
    fn preserves_unique_best_responses() {
        for seed in 0..50 {
            let g = gaussian_game(seed, &[3, 4, 2]);
            let h = invariant_normalize(&g).unwrap();
            let strides = g.strides();
            for p in 0..3 {
                let t = g.num_actions(p);
                for base in (0..g.num_joint()).filter(|b| (b / strides[p]).is_multiple_of(t)) {
                    let arg = |game: &Game| {
                        (0..t)
                            .max_by(|&a, &b| {
                                game.payoff(p, base + a * strides[p])
                                    .total_cmp(&game.payoff(p, base + b * strides[p]))
                            })
                            .unwrap()
                    };
                    assert_eq!(arg(&g), arg(&h));
                }
            }
        }
    }

    #[test]
    fn masked_game_rejected() {
        let g = sample_invariant_game(1, &[2, 2]).unwrap();
        let g = g
            .with_mask(Some(sample_mask(1, &[2, 2], 0.0).unwrap()))
            .unwrap();
        assert_eq!(invariant_normalize(&g).unwrap_err(), Error::MaskedGame);
    }
}
