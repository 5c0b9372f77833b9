use nfgt::baselines::{fit_elo, fit_melo};
use nfgt::checks::{equivariance_error, random_case};
use nfgt::game::{invariant_normalize, sample_disc_game, sample_invariant_game, Game, Isomorphism};
use nfgt::model::{Model, ModelConfig, Task};
use nfgt::oracles::{deviation_gain_mixed, deviation_gain_pure, ne_gap, MixedProfile};
use nfgt::rng::{stream, streams};
use proptest::prelude::*;
use rand::Rng;

fn random_profile(actions: &[usize], seed: u64) -> MixedProfile {
    let mut r = stream(seed, streams::BASELINE);
    let probs = actions
        .iter()
        .map(|&t| {
            let w: Vec<f64> = (0..t).map(|_| r.random_range(0.0..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect();
    MixedProfile::new(probs).unwrap()
}

fn shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..5, 2..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn model_is_equivariant(seed in 0u64..10_000, task in 0usize..3) {
        let config = ModelConfig::new(8, 2, 1, 2).unwrap();
        let model = Model::<f64>::random(config, Task::ALL[task], seed, 0.3).unwrap();
        let case = random_case(seed).unwrap();
        prop_assert!(equivariance_error(&model, &[case]).unwrap() < 1e-9);
    }

    #[test]
    fn isomorphism_inverse_restores_game(seed in 0u64..10_000, actions in shape()) {
        let game = sample_invariant_game(seed, &actions).unwrap();
        let iso = Isomorphism::random(&actions, &mut stream(seed, streams::ISOMORPHISM));
        let back = iso.inverse().apply(&iso.apply(&game).unwrap()).unwrap();
        prop_assert_eq!(back, game);
    }

    #[test]
    fn ne_gap_is_isomorphism_invariant(seed in 0u64..10_000, actions in shape()) {
        let game = sample_invariant_game(seed, &actions).unwrap();
        let profile = random_profile(&actions, seed);
        let iso = Isomorphism::random(&actions, &mut stream(seed, streams::ISOMORPHISM));
        let image = iso.apply(&game).unwrap();
        let moved = MixedProfile::new(iso.apply_per_action(&profile.probs).unwrap()).unwrap();
        let a = ne_gap(&game, &profile).unwrap().ne_gap;
        let b = ne_gap(&image, &moved).unwrap().ne_gap;
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn normalization_is_idempotent_and_keeps_gaps_proportional(seed in 0u64..10_000, actions in shape(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let game = sample_invariant_game(seed, &actions).unwrap();
        let moved = Game::new(actions.clone(), game.payoffs().iter().map(|x| scale * x + shift).collect(), None).unwrap();
        let normalized = invariant_normalize(&moved).unwrap();
        prop_assert!(normalized.max_abs_diff(&game).unwrap() < 1e-9);
        prop_assert!(invariant_normalize(&normalized).unwrap().max_abs_diff(&normalized).unwrap() < 1e-12);
        let profile = random_profile(&actions, seed);
        let a = ne_gap(&moved, &profile).unwrap().ne_gap;
        let b = ne_gap(&game, &profile).unwrap().ne_gap;
        prop_assert!((a - scale * b).abs() < 1e-8);
    }

    #[test]
    fn point_mass_gains_match_pure_gains(seed in 0u64..10_000, actions in shape(), pick in 0usize..1000) {
        let game = sample_invariant_game(seed, &actions).unwrap();
        let a = game.joint_action(pick % game.num_joint());
        let profile = MixedProfile::pure(&actions, &a);
        for p in 0..actions.len() {
            let mixed = deviation_gain_mixed(&game, &profile, p).unwrap();
            let pure = deviation_gain_pure(&game, &a, p).unwrap();
            prop_assert!((mixed - pure).abs() < 1e-9);
        }
    }

    #[test]
    fn rating_predictions_are_complementary(seed in 0u64..1000, t in 3usize..8) {
        let (game, _) = sample_disc_game(seed, t, 1).unwrap();
        let elo = fit_elo(&game, &vec![true; t * t]).unwrap();
        let melo = fit_melo(&game, &vec![true; t * t], 1, seed).unwrap();
        for i in 0..t {
            for j in 0..t {
                prop_assert!((elo.predict(i, j).unwrap() + elo.predict(j, i).unwrap() - 1.0).abs() < 1e-12);
                prop_assert!((melo.predict(i, j).unwrap() + melo.predict(j, i).unwrap() - 1.0).abs() < 1e-12);
            }
        }
        prop_assert!(elo.ratings.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn checkpoints_round_trip(seed in 0u64..1000, dim_heads in prop::sample::select(vec![(4usize, 1usize), (8, 2), (8, 4)]), blocks in 1usize..3, task in 0usize..3) {
        let config = ModelConfig::new(dim_heads.0, blocks, 1, dim_heads.1).unwrap();
        let model = Model::<f32>::random(config, Task::ALL[task], seed, 0.3).unwrap();
        let mut bytes = Vec::new();
        nfgt::model::write_checkpoint(&mut bytes, &model, seed).unwrap();
        let (header, back) = nfgt::model::read_checkpoint::<f32>(&mut bytes.as_slice()).unwrap();
        prop_assert_eq!(header.seed, seed);
        prop_assert_eq!(back.params(), model.params());
    }
}
