//! Surrogate-minimization solver for multi-player general-sum Markov games.
//!
//! Each class member is scored by `sum_j [V_bar^{*, pi_-j}_{1,j}(s_1) -
//! V_lower^pi_{1,j}(s_1)]`, built from pessimistic and optimistic policy
//! evaluation on the empirical model and an optimistic best-response DP; the
//! member with the smallest score is returned.

use rayon::prelude::*;

use crate::bonus::{stage_bonus, BonusParams};
use crate::class::StrategyClass;
use crate::empirical::EmpiricalModel;
use crate::error::{Error, Result};
use crate::game::{one_hot, Strategy};
use crate::report::{SbsmDiagnostics, SolveReport, SurrogateTerm};

/// Classes up to this size get their full surrogate table in the report.
pub const SURROGATE_TABLE_LIMIT: u64 = 10_000;

/// Clipped value table of one player, `[h * S + s]` with `h` in `0..=H`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTables {
    pub states: usize,
    pub values: Vec<f64>,
    /// Greedy action per `(h, s)` for best-response tables.
    pub policy: Option<Vec<usize>>,
}

impl EvalTables {
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.values[h * self.states + s]
    }
}

fn check(model: &EmpiricalModel, strategy: &Strategy, j: usize) -> Result<()> {
    strategy.check_shape(model.shape())?;
    if j >= model.shape().players {
        return Err(Error::Shape(format!("player {j} out of range")));
    }
    Ok(())
}

/// Policy evaluation with the bonus subtracted (`sign = -1`) or added together
/// with the out-of-data compensation (`sign = +1`).
fn evaluate_with_bonus(model: &EmpiricalModel, j: usize, strategy: &Strategy, params: &BonusParams, sign: f64) -> EvalTables {
    let shape = model.shape();
    let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
    let hf = hz as f64;
    let mut values = vec![0.0; (hz + 1) * ns];
    for h in (0..hz).rev() {
        let cap = (hz - h) as f64;
        for s in 0..ns {
            let next = &values[(h + 1) * ns..(h + 2) * ns];
            let counts = model.counts(h, s);
            let r = model.reward_hat(h, j, s);
            let w = strategy.joint_probs(h, s);
            let mut expected = 0.0;
            for joint in 0..jc {
                if w[joint] == 0.0 {
                    continue;
                }
                let mut q = r[joint] + model.expected_next(h, s, joint, next);
                if sign > 0.0 && counts[joint] == 0 {
                    q += hf;
                }
                expected += w[joint] * q;
            }
            let b = stage_bonus(params, counts, &strategy.dists_at(h, s));
            values[h * ns + s] = (expected + sign * b).clamp(0.0, cap);
        }
    }
    EvalTables {
        states: ns,
        values,
        policy: None,
    }
}

/// `V_lower^pi_{h,j}`: `clip(E_pi[r_hat + P_hat V_lower] - b_h(s, pi))`.
pub fn evaluate_pessimistic(model: &EmpiricalModel, j: usize, strategy: &Strategy, params: &BonusParams) -> Result<EvalTables> {
    check(model, strategy, j)?;
    Ok(evaluate_with_bonus(model, j, strategy, params, -1.0))
}

/// `V_bar^pi_{h,j}`: `clip(E_pi[r_hat + P_hat V_bar + H 1{not in K}] + b_h(s, pi))`.
pub fn evaluate_optimistic(model: &EmpiricalModel, j: usize, strategy: &Strategy, params: &BonusParams) -> Result<EvalTables> {
    check(model, strategy, j)?;
    Ok(evaluate_with_bonus(model, j, strategy, params, 1.0))
}

/// `V_bar^{*, pi_-j}_{h,j}`: optimistic DP where player `j` picks, per state,
/// the action maximizing the optimistic value plus the bonus of the point
/// mass on that action against `pi_-j`. Player `j`'s own entries of
/// `strategy` are ignored.
pub fn optimistic_best_response(model: &EmpiricalModel, j: usize, strategy: &Strategy, params: &BonusParams) -> Result<EvalTables> {
    check(model, strategy, j)?;
    let shape = model.shape();
    let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
    let nj = shape.actions[j];
    let strides = shape.strides();
    let hf = hz as f64;
    let mut values = vec![0.0; (hz + 1) * ns];
    let mut policy = vec![0; hz * ns];
    for h in (0..hz).rev() {
        let cap = (hz - h) as f64;
        for s in 0..ns {
            let next = &values[(h + 1) * ns..(h + 2) * ns];
            let counts = model.counts(h, s);
            let r = model.reward_hat(h, j, s);
            let others = strategy.others_probs(h, s, j);
            let mut per_action = vec![0.0; nj];
            for joint in 0..jc {
                if others[joint] == 0.0 {
                    continue;
                }
                let mut q = r[joint] + model.expected_next(h, s, joint, next);
                if counts[joint] == 0 {
                    q += hf;
                }
                per_action[shape.action_of(joint, j, &strides)] += others[joint] * q;
            }
            let mut best = (f64::NEG_INFINITY, 0);
            for (a, base) in per_action.iter().enumerate() {
                let e = one_hot(nj, a);
                let mut dists: Vec<&[f64]> = strategy.dists_at(h, s);
                dists[j] = &e;
                let v = base + stage_bonus(params, counts, &dists);
                if v > best.0 {
                    best = (v, a);
                }
            }
            values[h * ns + s] = best.0.clamp(0.0, cap);
            policy[h * ns + s] = best.1;
        }
    }
    Ok(EvalTables {
        states: ns,
        values,
        policy: Some(policy),
    })
}

/// The surrogate of `strategy` and its per-player terms at `initial_state`.
pub fn surrogate(
    model: &EmpiricalModel,
    strategy: &Strategy,
    params: &BonusParams,
    initial_state: usize,
) -> Result<(f64, Vec<SurrogateTerm>)> {
    let mut total = 0.0;
    let mut terms = Vec::with_capacity(model.shape().players);
    for j in 0..model.shape().players {
        let upper = optimistic_best_response(model, j, strategy, params)?.v(0, initial_state);
        let lower = evaluate_pessimistic(model, j, strategy, params)?.v(0, initial_state);
        total += upper - lower;
        terms.push(SurrogateTerm {
            best_response_upper: upper,
            value_lower: lower,
        });
    }
    Ok((total, terms))
}

/// Minimizes the surrogate over the enumerated class; ties go to the first
/// member in enumeration order.
pub fn solve_sbsm(
    model: &EmpiricalModel,
    class: &StrategyClass,
    params: &BonusParams,
    cap: u64,
    initial_state: usize,
) -> Result<SolveReport> {
    params.validate()?;
    let shape = model.shape();
    let count = class.checked_member_count(shape, cap)?;
    let scores: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| {
            let member = class.member(shape, i as u128)?;
            Ok(surrogate(model, &member, params, initial_state)?.0)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, v) in scores.iter().enumerate() {
        if *v < scores[best] {
            best = i;
        }
    }
    let strategy = class.member(shape, best as u128)?;
    let (value, terms) = surrogate(model, &strategy, params, initial_state)?;
    Ok(SolveReport {
        solver: "sbsm".into(),
        strategy,
        bonus: params.clone(),
        surrogate: value,
        sbmm: None,
        sbsm: Some(SbsmDiagnostics {
            class_size: count,
            member_index: best as u64,
            terms,
            surrogates: (count <= SURROGATE_TABLE_LIMIT).then_some(scores),
        }),
        exact: None,
        context: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bonus::BonusMode;
    use crate::data::{sample_dataset, DataDistribution, OfflineDataset, Transition};
    use crate::empirical::build_empirical;
    use crate::game::{GameSpec, RewardKind, Shape};
    use crate::value::{best_response, evaluate, gap};

    fn disabled(shape: &Shape, n: usize) -> BonusParams {
        BonusParams::multi_player(shape, n, 0.1, 1.0, BonusMode::Disabled).unwrap()
    }

    /// Deterministic game and a dataset with every (h, s, joint) exactly once,
    /// so the empirical model equals the true one.
    fn covered() -> (GameSpec, EmpiricalModel) {
        let shape = Shape::new(2, 2, vec![2, 2]).unwrap();
        let (hz, ns, jc) = (2, 2, 4);
        let mut p = Vec::new();
        for h in 0..hz {
            for s in 0..ns {
                for joint in 0..jc {
                    let next = (h + s + joint) % 2;
                    p.extend(if next == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
                }
            }
        }
        let mut r = Vec::new();
        for h in 0..hz {
            for j in 0..2 {
                for s in 0..ns {
                    for joint in 0..jc {
                        r.push(((h * 7 + j * 3 + s * 5 + joint) % 4) as f64 / 3.0);
                    }
                }
            }
        }
        let g = GameSpec::new(shape.clone(), p, r, 0, RewardKind::Deterministic).unwrap();
        let mut tuples = Vec::new();
        for h in 0..hz {
            for s in 0..ns {
                for joint in 0..jc {
                    tuples.push(Transition {
                        h,
                        s,
                        actions: shape.decode(joint),
                        rewards: (0..2).map(|j| g.reward(h, j, s, joint)).collect(),
                        s_next: g.transition(h, s, joint).iter().position(|x| *x == 1.0).unwrap(),
                    });
                }
            }
        }
        let ds = OfflineDataset {
            n: ns * jc,
            seed: 0,
            game_hash: g.content_hash(),
            tuples,
        };
        let model = build_empirical(&ds, &shape).unwrap();
        (g, model)
    }

    #[test]
    fn oracle_configuration_is_exact() {
        let (g, model) = covered();
        let p = disabled(g.shape(), model.n());
        let pi = Strategy::from_fn(g.shape(), |h, s, j| {
            let x = 0.2 + 0.1 * (h + 2 * s + 3 * j) as f64;
            vec![x, 1.0 - x]
        });
        let exact = evaluate(&g, &pi).unwrap();
        for j in 0..2 {
            let lo = evaluate_pessimistic(&model, j, &pi, &p).unwrap();
            let up = evaluate_optimistic(&model, j, &pi, &p).unwrap();
            let br = optimistic_best_response(&model, j, &pi, &p).unwrap();
            let true_br = best_response(&g, &pi, j).unwrap();
            for h in 0..2 {
                for s in 0..2 {
                    assert!((lo.v(h, s) - exact.v(h, s, j)).abs() < 1e-12);
                    assert!((up.v(h, s) - exact.v(h, s, j)).abs() < 1e-12);
                    assert!((br.v(h, s) - true_br.value(h, s)).abs() < 1e-12);
                }
            }
        }
        let (sur, _) = surrogate(&model, &pi, &p, 0).unwrap();
        assert!((sur - gap(&g, &pi).unwrap().gap).abs() < 1e-12);
    }

    #[test]
    fn no_data_extremes() {
        let shape = Shape::new(3, 2, vec![2, 3]).unwrap();
        let model = build_empirical(
            &OfflineDataset {
                n: 0,
                seed: 0,
                game_hash: String::new(),
                tuples: vec![],
            },
            &shape,
        )
        .unwrap();
        let p = BonusParams::multi_player(&shape, 1, 0.1, 2.0, BonusMode::StrategyWise).unwrap();
        let pi = Strategy::uniform(&shape);
        let lo = evaluate_pessimistic(&model, 0, &pi, &p).unwrap();
        let up = evaluate_optimistic(&model, 1, &pi, &p).unwrap();
        let br = optimistic_best_response(&model, 0, &pi, &p).unwrap();
        for h in 0..3 {
            for s in 0..2 {
                assert_eq!(lo.v(h, s), 0.0);
                assert_eq!(up.v(h, s), (3 - h) as f64);
            }
        }
        assert_eq!(br.v(0, 0), 3.0);
    }

    #[test]
    fn sandwich_ordering_on_random_data() {
        let (g, _) = covered();
        let ds = sample_dataset(&g, &DataDistribution::uniform(g.shape()), 30, 4).unwrap();
        let model = build_empirical(&ds, g.shape()).unwrap();
        let p = BonusParams::multi_player(g.shape(), 30, 0.1, 1.0, BonusMode::StrategyWise).unwrap();
        let plain = disabled(g.shape(), 30);
        let pi = Strategy::uniform(g.shape());
        for j in 0..2 {
            let lo = evaluate_pessimistic(&model, j, &pi, &p).unwrap();
            let lo_plain = evaluate_pessimistic(&model, j, &pi, &plain).unwrap();
            let up = evaluate_optimistic(&model, j, &pi, &p).unwrap();
            let br = optimistic_best_response(&model, j, &pi, &p).unwrap();
            for i in 0..lo.values.len() {
                assert!(lo.values[i] <= lo_plain.values[i] + 1e-12);
                assert!(up.values[i] >= lo.values[i]);
                assert!(br.values[i] >= up.values[i] - 1e-9);
            }
        }
    }

    #[test]
    fn sbsm_picks_minimal_exact_gap_in_oracle_configuration() {
        let (g, model) = covered();
        let p = disabled(g.shape(), model.n());
        let class = StrategyClass::deterministic();
        let report = solve_sbsm(&model, &class, &p, 1 << 20, 0).unwrap();
        let diag = report.sbsm.as_ref().unwrap();
        assert_eq!(diag.class_size, 256);
        let gaps: Vec<f64> = class
            .enumerate(g.shape(), 1 << 20)
            .unwrap()
            .map(|m| gap(&g, &m).unwrap().gap)
            .collect();
        let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((gap(&g, &report.strategy).unwrap().gap - min).abs() < 1e-12);
        assert!(matches!(
            solve_sbsm(&model, &StrategyClass::full(), &p, 10, 0),
            Err(Error::NotEnumerable(_))
        ));
    }
}
