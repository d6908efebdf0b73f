//! Count-based empirical Markov game built from an offline dataset.

use crate::data::OfflineDataset;
use crate::error::Result;
use crate::game::{GameSpec, Shape};

/// Counts, empirical rewards and transitions, and known joint-action sets.
///
/// Unseen `(h, s, joint)` cells have zero reward and an all-zero transition
/// row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    shape: Shape,
    n: usize,
    /// `[h][s][joint]`
    counts: Vec<u64>,
    /// `[h][j][s][joint]`
    reward_hat: Vec<f64>,
    /// `[h][s][joint][s']`
    p_hat: Vec<f64>,
}

impl EmpiricalModel {
    /// The true model with every joint action counted `count` times: mean
    /// rewards and transitions are exact and all actions are known.
    pub fn from_game(game: &GameSpec, count: u64) -> Self {
        let shape = game.shape().clone();
        let (hz, ns, m, jc) = (shape.horizon, shape.states, shape.players, shape.joint_count());
        let mut reward_hat = Vec::with_capacity(hz * m * ns * jc);
        let mut p_hat = Vec::with_capacity(hz * ns * jc * ns);
        for h in 0..hz {
            for j in 0..m {
                for s in 0..ns {
                    reward_hat.extend_from_slice(game.rewards(h, j, s));
                }
            }
            for s in 0..ns {
                for joint in 0..jc {
                    p_hat.extend_from_slice(game.transition(h, s, joint));
                }
            }
        }
        EmpiricalModel {
            shape,
            n: count as usize,
            counts: vec![count; hz * ns * jc],
            reward_hat,
            p_hat,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Tuples per timestep in the source dataset.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Counts of every joint action at `(h, s)`.
    pub fn counts(&self, h: usize, s: usize) -> &[u64] {
        let jc = self.shape.joint_count();
        let start = (h * self.shape.states + s) * jc;
        &self.counts[start..start + jc]
    }

    pub fn count(&self, h: usize, s: usize, joint: usize) -> u64 {
        self.counts(h, s)[joint]
    }

    /// Whether `joint` belongs to `K_h(s)`.
    pub fn known(&self, h: usize, s: usize, joint: usize) -> bool {
        self.count(h, s, joint) > 0
    }

    /// Empirical mean rewards of player `j` for every joint action at `(h, s)`.
    pub fn reward_hat(&self, h: usize, j: usize, s: usize) -> &[f64] {
        let jc = self.shape.joint_count();
        let start = ((h * self.shape.players + j) * self.shape.states + s) * jc;
        &self.reward_hat[start..start + jc]
    }

    pub fn p_hat(&self, h: usize, s: usize, joint: usize) -> &[f64] {
        let ns = self.shape.states;
        let start = ((h * ns + s) * self.shape.joint_count() + joint) * ns;
        &self.p_hat[start..start + ns]
    }

    /// `d_hat_h(s, joint) = n_h(s, joint) / n`.
    pub fn d_hat(&self, h: usize, s: usize, joint: usize) -> f64 {
        self.count(h, s, joint) as f64 / self.n as f64
    }

    /// `sum_{s'} P_hat(s' | s, joint) v[s']`.
    pub fn expected_next(&self, h: usize, s: usize, joint: usize, v: &[f64]) -> f64 {
        self.p_hat(h, s, joint).iter().zip(v).map(|(p, x)| p * x).sum()
    }
}

/// Maximum-likelihood estimates from the dataset's counts.
pub fn build_empirical(dataset: &OfflineDataset, shape: &Shape) -> Result<EmpiricalModel> {
    dataset.validate(shape)?;
    let (hz, ns, m, jc) = (shape.horizon, shape.states, shape.players, shape.joint_count());
    let mut counts = vec![0u64; hz * ns * jc];
    let mut reward_sum = vec![0.0; hz * m * ns * jc];
    let mut next_counts = vec![0u64; hz * ns * jc * ns];
    for t in &dataset.tuples {
        let joint = shape.encode(&t.actions);
        let cell = (t.h * ns + t.s) * jc + joint;
        counts[cell] += 1;
        next_counts[cell * ns + t.s_next] += 1;
        for (j, r) in t.rewards.iter().enumerate() {
            reward_sum[((t.h * m + j) * ns + t.s) * jc + joint] += r;
        }
    }
    let mut reward_hat = vec![0.0; reward_sum.len()];
    for h in 0..hz {
        for j in 0..m {
            for s in 0..ns {
                for joint in 0..jc {
                    let c = counts[(h * ns + s) * jc + joint];
                    if c > 0 {
                        let idx = ((h * m + j) * ns + s) * jc + joint;
                        reward_hat[idx] = reward_sum[idx] / c as f64;
                    }
                }
            }
        }
    }
    let mut p_hat = vec![0.0; next_counts.len()];
    for (cell, &c) in counts.iter().enumerate() {
        if c > 0 {
            for s2 in 0..ns {
                p_hat[cell * ns + s2] = next_counts[cell * ns + s2] as f64 / c as f64;
            }
        }
    }
    Ok(EmpiricalModel {
        shape: shape.clone(),
        n: dataset.n,
        counts,
        reward_hat,
        p_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_dataset, DataDistribution, Transition};
    use crate::game::RewardKind;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn tuple(h: usize, s: usize, a: Vec<usize>, r: Vec<f64>, s_next: usize) -> Transition {
        Transition {
            h,
            s,
            actions: a,
            rewards: r,
            s_next,
        }
    }

    #[test]
    fn exact_model_matches_game() {
        let shape = Shape::new(2, 2, vec![2, 1]).unwrap();
        let transitions = vec![0.5; 2 * 2 * 2 * 2];
        let rewards: Vec<f64> = (0..2 * 2 * 2 * 2).map(|i| i as f64 / 16.0).collect();
        let game = GameSpec::new(shape.clone(), transitions, rewards, 0, RewardKind::Bernoulli).unwrap();
        let model = EmpiricalModel::from_game(&game, 3);
        assert_eq!(model.n(), 3);
        for h in 0..2 {
            for s in 0..2 {
                assert_eq!(model.counts(h, s), &[3, 3]);
                for j in 0..2 {
                    assert_eq!(model.reward_hat(h, j, s), game.rewards(h, j, s));
                }
                assert_eq!(model.p_hat(h, s, 1), game.transition(h, s, 1));
            }
        }
    }

    #[test]
    fn single_sample_per_pair() {
        let shape = Shape::new(1, 2, vec![2]).unwrap();
        let ds = OfflineDataset {
            n: 4,
            seed: 0,
            game_hash: String::new(),
            tuples: vec![
                tuple(0, 0, vec![0], vec![1.0], 1),
                tuple(0, 0, vec![1], vec![0.0], 0),
                tuple(0, 1, vec![0], vec![1.0], 0),
                tuple(0, 1, vec![1], vec![1.0], 1),
            ],
        };
        let m = build_empirical(&ds, &shape).unwrap();
        assert_eq!(m.p_hat(0, 0, 0), &[0.0, 1.0]);
        assert_eq!(m.p_hat(0, 0, 1), &[1.0, 0.0]);
        assert_eq!(m.reward_hat(0, 0, 0), &[1.0, 0.0]);
        assert_eq!(m.d_hat(0, 1, 1), 0.25);
    }

    #[test]
    fn uncovered_state_follows_zero_convention() {
        let shape = Shape::new(1, 2, vec![2, 2]).unwrap();
        let ds = OfflineDataset {
            n: 2,
            seed: 0,
            game_hash: String::new(),
            tuples: vec![
                tuple(0, 0, vec![0, 1], vec![0.5, 0.5], 1),
                tuple(0, 0, vec![0, 1], vec![1.0, 0.0], 1),
            ],
        };
        let m = build_empirical(&ds, &shape).unwrap();
        assert_eq!(m.reward_hat(0, 0, 0)[1], 0.75);
        for joint in 0..4 {
            assert!(!m.known(0, 1, joint));
            assert_eq!(m.reward_hat(0, 1, 1)[joint], 0.0);
            assert!(m.p_hat(0, 1, joint).iter().all(|p| *p == 0.0));
        }
    }

    fn random_game(seed: u64) -> GameSpec {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape::new(2, 3, vec![2, 2]).unwrap();
        let mut p = Vec::new();
        for _ in 0..2 * 3 * 4 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() + 0.01).collect();
            let t: f64 = w.iter().sum();
            p.extend(w.iter().map(|x| x / t));
        }
        let r = (0..2 * 2 * 3 * 4).map(|_| rng.gen::<f64>()).collect();
        GameSpec::new(shape, p, r, 0, RewardKind::Bernoulli).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn counts_sum_to_n_and_rows_normalize(seed in 0u64..1000, n in 1usize..200) {
            let g = random_game(seed);
            let ds = sample_dataset(&g, &DataDistribution::uniform(g.shape()), n, seed).unwrap();
            let m = build_empirical(&ds, g.shape()).unwrap();
            for h in 0..2 {
                let total: u64 = (0..3).flat_map(|s| m.counts(h, s).to_vec()).sum();
                prop_assert_eq!(total, n as u64);
                let mass: f64 = (0..3).flat_map(|s| (0..4).map(move |a| (s, a))).map(|(s, a)| m.d_hat(h, s, a)).sum();
                prop_assert!((mass - 1.0).abs() < 1e-12);
                for s in 0..3 {
                    for a in 0..4 {
                        let row: f64 = m.p_hat(h, s, a).iter().sum();
                        if m.known(h, s, a) {
                            prop_assert!((row - 1.0).abs() < 1e-12);
                        } else {
                            prop_assert_eq!(row, 0.0);
                        }
                    }
                }
            }
        }

        #[test]
        fn counts_invariant_under_permutation(seed in 0u64..1000) {
            let g = random_game(seed);
            let mut ds = sample_dataset(&g, &DataDistribution::uniform(g.shape()), 50, seed).unwrap();
            let before = build_empirical(&ds, g.shape()).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            ds.tuples.shuffle(&mut rng);
            let after = build_empirical(&ds, g.shape()).unwrap();
            for h in 0..2 {
                for s in 0..3 {
                    prop_assert_eq!(before.counts(h, s), after.counts(h, s));
                }
            }
        }
    }
}
