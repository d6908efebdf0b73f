use proptest::prelude::*;
use proptest::strategy::Strategy as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use marl_core::bonus::{BonusMode, BonusParams};
use marl_core::class::{default_epsilon_cover, StrategyClass};
use marl_core::data::{sample_dataset, DataDistribution, OfflineDataset};
use marl_core::empirical::{build_empirical, EmpiricalModel};
use marl_core::experiments::builtin;
use marl_core::game::{GameSpec, RewardKind, Shape, Strategy, ZeroSumView};
use marl_core::matrix_game::zero_sum_markov_nash;
use marl_core::sbmm::{run_sbmm, OptimizerConfig};
use marl_core::sbsm::{evaluate_optimistic, evaluate_pessimistic, solve_sbsm, surrogate};
use marl_core::value::gap;

fn shape_strategy() -> impl proptest::strategy::Strategy<Value = Shape> {
    (1usize..=3, 1usize..=3, 1usize..=3, 1usize..=3)
        .prop_map(|(h, s, a, b)| Shape::new(h, s, vec![a, b]).unwrap())
}

fn mixed(shape: &Shape, seed: u64) -> Strategy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Strategy::from_fn(shape, |_, _, j| {
        let w: Vec<f64> = (0..shape.actions[j]).map(|_| rng.gen::<f64>() + 0.01).collect();
        let t: f64 = w.iter().sum();
        w.iter().map(|x| x / t).collect()
    })
}

fn params(shape: &Shape, n: usize, mode: BonusMode) -> BonusParams {
    let log_cov = StrategyClass::full()
        .log_covering_number(shape, default_epsilon_cover(shape, n))
        .unwrap();
    BonusParams::multi_player(shape, n, 0.1, log_cov, mode).unwrap()
}

fn zero_sum(shape: &Shape, seed: u64) -> GameSpec {
    builtin::random_game(shape.clone(), seed, true, RewardKind::Bernoulli).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_nash_has_zero_gap(shape in shape_strategy(), seed in any::<u64>()) {
        let game = zero_sum(&shape, seed);
        let (ne, _) = zero_sum_markov_nash(ZeroSumView::new(&game).unwrap()).unwrap();
        let g = gap(&game, &ne).unwrap().gap;
        prop_assert!(g.abs() < 1e-9, "gap {}", g);
        let other = gap(&game, &mixed(&shape, seed)).unwrap().gap;
        prop_assert!(other >= -1e-12);
    }

    #[test]
    fn pessimistic_below_optimistic(shape in shape_strategy(), seed in any::<u64>(), n in 1usize..64) {
        let game = builtin::random_game(shape.clone(), seed, false, RewardKind::Bernoulli).unwrap();
        let model = build_empirical(&sample_dataset(&game, &DataDistribution::uniform(&shape), n, seed).unwrap(), &shape).unwrap();
        let pi = mixed(&shape, seed ^ 1);
        for mode in [BonusMode::StrategyWise, BonusMode::PointWise, BonusMode::Disabled] {
            let p = params(&shape, n, mode);
            for j in 0..2 {
                let lo = evaluate_pessimistic(&model, j, &pi, &p).unwrap();
                let hi = evaluate_optimistic(&model, j, &pi, &p).unwrap();
                for h in 0..shape.horizon {
                    for s in 0..shape.states {
                        prop_assert!(lo.v(h, s) <= hi.v(h, s) + 1e-12);
                        prop_assert!(lo.v(h, s) >= 0.0 && hi.v(h, s) <= (shape.horizon - h) as f64 + 1e-12);
                    }
                }
            }
            let (_, terms) = surrogate(&model, &pi, &p, 0).unwrap();
            for t in terms {
                prop_assert!(t.best_response_upper - t.value_lower >= -1e-9);
            }
        }
    }

    #[test]
    fn oracle_configuration_surrogate_is_gap(shape in shape_strategy(), seed in any::<u64>()) {
        let game = builtin::random_game(shape.clone(), seed, false, RewardKind::Bernoulli).unwrap();
        let model = EmpiricalModel::from_game(&game, 1);
        let p = params(&shape, 1, BonusMode::Disabled);
        let pi = mixed(&shape, seed);
        let (value, _) = surrogate(&model, &pi, &p, game.initial_state()).unwrap();
        prop_assert!((value - gap(&game, &pi).unwrap().gap).abs() < 1e-9);
    }

    #[test]
    fn sbmm_brackets_and_oracle_gap(shape in shape_strategy(), seed in any::<u64>(), n in 4usize..64) {
        let game = zero_sum(&shape, seed);
        let model = build_empirical(&sample_dataset(&game, &DataDistribution::uniform(&shape), n, seed).unwrap(), &shape).unwrap();
        let zs = BonusParams::zero_sum(&shape, n, 0.1, 1.0, BonusMode::StrategyWise).unwrap();
        let out = run_sbmm(&model, &StrategyClass::full(), &zs, &OptimizerConfig::default()).unwrap();
        for (lo, hi) in out.tables.lower_v.iter().zip(&out.tables.upper_v) {
            prop_assert!(lo <= &(hi + 1e-9), "lower {} above upper {}", lo, hi);
        }

        let eps = 0.01;
        let exact = EmpiricalModel::from_game(&game, 1);
        let off = zs.clone().with_mode(BonusMode::Disabled);
        let opt = OptimizerConfig { eps_opt: Some(eps), ..Default::default() };
        let out = run_sbmm(&exact, &StrategyClass::full(), &off, &opt).unwrap();
        let g = gap(&game, &out.strategy).unwrap().gap;
        prop_assert!(g <= 2.0 * shape.horizon as f64 * eps + 1e-9, "gap {}", g);
    }

    #[test]
    fn datasets_round_trip(shape in shape_strategy(), seed in any::<u64>(), n in 1usize..32) {
        let game = builtin::random_game(shape.clone(), seed, false, RewardKind::Bernoulli).unwrap();
        let dist = DataDistribution::uniform(&shape);
        let ds = sample_dataset(&game, &dist, n, seed).unwrap();
        prop_assert_eq!(&ds, &sample_dataset(&game, &dist, n, seed).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ndjson");
        ds.save(&path).unwrap();
        prop_assert_eq!(&OfflineDataset::load(&path, &shape).unwrap(), &ds);
        let gpath = dir.path().join("g.json");
        game.save(&gpath).unwrap();
        prop_assert_eq!(GameSpec::load(&gpath).unwrap().content_hash(), game.content_hash());
    }
}

#[test]
fn sbsm_oracle_configuration_picks_least_gap() {
    let shape = Shape::new(2, 2, vec![2, 2]).unwrap();
    let game = builtin::random_game(shape.clone(), 11, false, RewardKind::Bernoulli).unwrap();
    let members: Vec<Strategy> = (0..12).map(|i| mixed(&shape, 100 + i)).collect();
    let best = members
        .iter()
        .map(|m| gap(&game, m).unwrap().gap)
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    let class = StrategyClass::finite(members.clone());
    let model = EmpiricalModel::from_game(&game, 1);
    let report = solve_sbsm(&model, &class, &params(&shape, 1, BonusMode::Disabled), 1000, 0).unwrap();
    assert_eq!(report.strategy, members[best]);
    assert_eq!(report.sbsm.unwrap().member_index, best as u64);
}
