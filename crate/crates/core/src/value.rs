//! Exact dynamic programming on the true model: policy evaluation, best
//! responses, the Nash gap, and occupancy measures.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{GameSpec, Strategy, ZeroSumView};

/// `V_{h,j}(s)` for `h` in `0..=H` (terminal row is zero) and optionally
/// `Q_{h,j}(s, joint)` for `h` in `0..H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    states: usize,
    players: usize,
    joint: usize,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    pub fn v(&self, h: usize, s: usize, j: usize) -> f64 {
        self.v[(h * self.states + s) * self.players + j]
    }

    pub fn q(&self, h: usize, s: usize, joint: usize, j: usize) -> f64 {
        self.q[((h * self.states + s) * self.joint + joint) * self.players + j]
    }
}

/// Exact values of `strategy` for every player by backward induction.
pub fn evaluate(game: &GameSpec, strategy: &Strategy) -> Result<ValueTable> {
    let shape = game.shape();
    strategy.check_shape(shape)?;
    let (hz, ns, m, jc) = (shape.horizon, shape.states, shape.players, shape.joint_count());
    let mut v = vec![0.0; (hz + 1) * ns * m];
    let mut q = vec![0.0; hz * ns * jc * m];
    for h in (0..hz).rev() {
        for s in 0..ns {
            let probs = strategy.joint_probs(h, s);
            for joint in 0..jc {
                let p = game.transition(h, s, joint);
                for j in 0..m {
                    let next: f64 = p
                        .iter()
                        .enumerate()
                        .map(|(s2, ps)| ps * v[((h + 1) * ns + s2) * m + j])
                        .sum();
                    let qv = game.reward(h, j, s, joint) + next;
                    q[((h * ns + s) * jc + joint) * m + j] = qv;
                    v[(h * ns + s) * m + j] += probs[joint] * qv;
                }
            }
        }
    }
    Ok(ValueTable {
        states: ns,
        players: m,
        joint: jc,
        v,
        q,
    })
}

/// A deterministic best response of one player and its value function.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub player: usize,
    /// Chosen action at `h * S + s`.
    pub policy: Vec<usize>,
    /// `V^{*,pi_{-j}}_{h,j}(s)` at `h * S + s`, with `h` in `0..=H`.
    pub values: Vec<f64>,
    states: usize,
}

impl BestResponse {
    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.values[h * self.states + s]
    }

    /// `strategy` with this player's component replaced by the response.
    pub fn apply_to(&self, strategy: &Strategy) -> Strategy {
        strategy.with_deterministic_player(self.player, &self.policy)
    }
}

/// Backward induction on the single-agent MDP obtained by fixing `pi_{-j}`.
/// `reward_player` selects whose reward is optimized; `maximize = false`
/// gives the minimizing response used by the zero-sum gap.
fn response_dp(
    game: &GameSpec,
    strategy: &Strategy,
    j: usize,
    reward_player: usize,
    maximize: bool,
) -> Result<BestResponse> {
    let shape = game.shape();
    strategy.check_shape(shape)?;
    if j >= shape.players {
        return Err(crate::Error::Shape(format!("player {j} out of range")));
    }
    let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
    let strides = shape.strides();
    let na = shape.actions[j];
    let mut values = vec![0.0; (hz + 1) * ns];
    let mut policy = vec![0; hz * ns];
    for h in (0..hz).rev() {
        for s in 0..ns {
            let weights = strategy.others_probs(h, s, j);
            let mut per_action = vec![0.0; na];
            for joint in 0..jc {
                let w = weights[joint];
                if w == 0.0 {
                    continue;
                }
                let p = game.transition(h, s, joint);
                let next: f64 = p.iter().enumerate().map(|(s2, ps)| ps * values[(h + 1) * ns + s2]).sum();
                per_action[shape.action_of(joint, j, &strides)] += w * (game.reward(h, reward_player, s, joint) + next);
            }
            let mut best = 0;
            for a in 1..na {
                let better = if maximize {
                    per_action[a] > per_action[best]
                } else {
                    per_action[a] < per_action[best]
                };
                if better {
                    best = a;
                }
            }
            policy[h * ns + s] = best;
            values[h * ns + s] = per_action[best];
        }
    }
    Ok(BestResponse {
        player: j,
        policy,
        values,
        states: ns,
    })
}

/// Best response of player `j` against `pi_{-j}`; argmax ties go to the
/// lowest action index.
pub fn best_response(game: &GameSpec, strategy: &Strategy, j: usize) -> Result<BestResponse> {
    response_dp(game, strategy, j, j, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `V^{*,pi_{-j}}_{1,j}(s_1)` per player.
    pub best_response: Vec<f64>,
    /// `V^pi_{1,j}(s_1)` per player.
    pub value: Vec<f64>,
    pub gap: f64,
}

/// `sum_j [V^{*,pi_{-j}}_{1,j}(s_1) - V^pi_{1,j}(s_1)]`.
pub fn gap(game: &GameSpec, strategy: &Strategy) -> Result<GapReport> {
    let values = evaluate(game, strategy)?;
    let s1 = game.initial_state();
    let m = game.shape().players;
    let mut best = Vec::with_capacity(m);
    let mut value = Vec::with_capacity(m);
    for j in 0..m {
        best.push(best_response(game, strategy, j)?.value(0, s1));
        value.push(values.v(0, s1, j));
    }
    let gap = best.iter().zip(&value).map(|(b, v)| b - v).sum();
    Ok(GapReport {
        best_response: best,
        value,
        gap,
    })
}

/// Zero-sum duality gap `V^{*,nu}_1(s_1) - V^{mu,*}_1(s_1)` on the shared reward.
pub fn zero_sum_gap(view: ZeroSumView<'_>, strategy: &Strategy) -> Result<f64> {
    let game = view.game();
    let s1 = game.initial_state();
    let upper = response_dp(game, strategy, 0, 0, true)?.value(0, s1);
    let lower = response_dp(game, strategy, 1, 0, false)?.value(0, s1);
    Ok(upper - lower)
}

/// State-joint-action visitation probabilities `d_h(s, joint)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub horizon: usize,
    pub states: usize,
    pub joint: usize,
    /// `[h][s][joint]`
    pub d: Vec<f64>,
}

impl Occupancy {
    pub fn get(&self, h: usize, s: usize, joint: usize) -> f64 {
        self.d[(h * self.states + s) * self.joint + joint]
    }

    /// All `(s, joint)` entries of timestep `h`.
    pub fn at(&self, h: usize) -> &[f64] {
        let len = self.states * self.joint;
        &self.d[h * len..(h + 1) * len]
    }
}

/// Forward recursion of the visitation measure from `s_1`.
pub fn occupancy(game: &GameSpec, strategy: &Strategy) -> Result<Occupancy> {
    let shape = game.shape();
    strategy.check_shape(shape)?;
    let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
    let mut d = vec![0.0; hz * ns * jc];
    let mut state_dist = vec![0.0; ns];
    state_dist[game.initial_state()] = 1.0;
    for h in 0..hz {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            if state_dist[s] == 0.0 {
                continue;
            }
            let probs = strategy.joint_probs(h, s);
            for joint in 0..jc {
                let mass = state_dist[s] * probs[joint];
                d[(h * ns + s) * jc + joint] = mass;
                if mass > 0.0 {
                    for (s2, p) in game.transition(h, s, joint).iter().enumerate() {
                        next[s2] += mass * p;
                    }
                }
            }
        }
        state_dist = next;
    }
    Ok(Occupancy {
        horizon: hz,
        states: ns,
        joint: jc,
        d,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::game::{RewardKind, Shape};

    pub(crate) fn matching_pennies() -> GameSpec {
        let shape = Shape::new(1, 1, vec![2, 2]).unwrap();
        let r1 = [1.0, 0.0, 0.0, 1.0];
        let rewards = r1.iter().copied().chain(r1.iter().map(|r| 1.0 - r)).collect();
        GameSpec::new(shape, vec![1.0; 4], rewards, 0, RewardKind::Deterministic).unwrap()
    }

    #[test]
    fn zero_reward_game_has_zero_value() {
        let shape = Shape::new(1, 1, vec![3, 2]).unwrap();
        let g = GameSpec::new(shape.clone(), vec![1.0; 6], vec![0.0; 12], 0, RewardKind::Bernoulli).unwrap();
        let v = evaluate(&g, &Strategy::uniform(&shape)).unwrap();
        assert_eq!(v.v(0, 0, 0), 0.0);
        assert_eq!(v.v(0, 0, 1), 0.0);
    }

    #[test]
    fn matching_pennies_uniform_value_is_half() {
        let g = matching_pennies();
        let v = evaluate(&g, &Strategy::uniform(g.shape())).unwrap();
        assert_eq!(v.v(0, 0, 0), 0.5);
        assert_eq!(v.q(0, 0, 3, 0), 1.0);
    }

    #[test]
    fn single_step_best_response_takes_argmax() {
        // Player 0 has one action; player 1's Q row is [0.2, 0.9].
        let shape = Shape::new(1, 1, vec![1, 2]).unwrap();
        let rewards = vec![0.0, 0.0, 0.2, 0.9];
        let g = GameSpec::new(shape.clone(), vec![1.0; 2], rewards, 0, RewardKind::Deterministic).unwrap();
        let br = best_response(&g, &Strategy::uniform(&shape), 1).unwrap();
        assert_eq!(br.policy, vec![1]);
        assert_eq!(br.value(0, 0), 0.9);
    }

    #[test]
    fn best_response_ties_break_low() {
        let g = matching_pennies();
        let br = best_response(&g, &Strategy::uniform(g.shape()), 0).unwrap();
        assert_eq!(br.policy, vec![0]);
        assert_eq!(br.value(0, 0), 0.5);
    }

    #[test]
    fn pennies_gap_values() {
        let g = matching_pennies();
        let uniform = Strategy::uniform(g.shape());
        assert_eq!(gap(&g, &uniform).unwrap().gap, 0.0);
        // mu = action 0, nu uniform: V^{*,nu} = 0.5, V^{mu,*} = min(1, 0) = 0.
        let pure = Strategy::from_fn(g.shape(), |_, _, j| if j == 0 { vec![1.0, 0.0] } else { vec![0.5, 0.5] });
        let report = gap(&g, &pure).unwrap();
        assert!((report.gap - 0.5).abs() < 1e-15);
        let zs = zero_sum_gap(ZeroSumView::new(&g).unwrap(), &pure).unwrap();
        assert!((zs - 0.5).abs() < 1e-15);
    }

    #[test]
    fn occupancy_single_step_is_product() {
        let g = matching_pennies();
        let pi = Strategy::from_fn(g.shape(), |_, _, j| if j == 0 { vec![0.3, 0.7] } else { vec![0.6, 0.4] });
        let d = occupancy(&g, &pi).unwrap();
        let expect = [0.18, 0.12, 0.42, 0.28];
        for (got, want) in d.at(0).iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_chain_puts_mass_on_forced_path() {
        // s -> s+1 mod 3 regardless of action; single player, two actions.
        let shape = Shape::new(3, 3, vec![2]).unwrap();
        let mut p = Vec::new();
        for _h in 0..3 {
            for s in 0..3 {
                for _a in 0..2 {
                    let mut row = vec![0.0; 3];
                    row[(s + 1) % 3] = 1.0;
                    p.extend(row);
                }
            }
        }
        let g = GameSpec::new(shape.clone(), p, vec![0.5; 18], 0, RewardKind::Deterministic).unwrap();
        let pi = Strategy::deterministic(&shape, |_, _, _| 1);
        let d = occupancy(&g, &pi).unwrap();
        for h in 0..3 {
            assert_eq!(d.get(h, h, 1), 1.0);
            assert_eq!(d.at(h).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn rejects_mismatched_strategy() {
        let g = matching_pennies();
        let other = Strategy::uniform(&Shape::new(2, 1, vec![2, 2]).unwrap());
        assert!(evaluate(&g, &other).is_err());
    }
}
