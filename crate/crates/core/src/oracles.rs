//! Brute-force references: trajectory enumeration, deterministic-policy
//! enumeration, grid search over small simplices, finite differences, and
//! Monte-Carlo occupancy estimates.
//!
//! Nothing here reuses the dynamic programs of [`crate::value`],
//! [`crate::coverage`], [`crate::sbmm`] or [`crate::sbsm`]; every routine
//! walks the model directly so it can serve as an independent check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bonus::{stage_bonus, BonusParams};
use crate::coverage::Coverage;
use crate::empirical::EmpiricalModel;
use crate::error::{Error, Result};
use crate::game::{GameSpec, Shape, Strategy};

/// Limits guarding the exponential enumerations.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleBudget {
    pub max_trajectories: u128,
    pub max_policies: u128,
    pub grid_step: f64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_trajectories: 10_000_000,
            max_policies: 1 << 20,
            grid_step: 1e-3,
        }
    }
}

fn checked_pow(base: u128, exp: usize) -> u128 {
    (0..exp).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX)
}

impl OracleBudget {
    fn allow_trajectories(&self, shape: &Shape) -> Result<()> {
        let per_step = (shape.states * shape.joint_count()) as u128;
        let needed = checked_pow(per_step, shape.horizon);
        if needed > self.max_trajectories {
            return Err(Error::Budget {
                what: "trajectory enumeration",
                needed,
                budget: self.max_trajectories,
            });
        }
        Ok(())
    }

    fn allow_policies(&self, shape: &Shape, j: usize) -> Result<u128> {
        let needed = checked_pow(shape.actions[j] as u128, shape.states * shape.horizon);
        if needed > self.max_policies {
            return Err(Error::Budget {
                what: "deterministic policy enumeration",
                needed,
                budget: self.max_policies,
            });
        }
        Ok(needed)
    }
}

fn decode_joint(shape: &Shape, mut joint: usize) -> Vec<usize> {
    let mut a = vec![0; shape.players];
    for j in (0..shape.players).rev() {
        a[j] = joint % shape.actions[j];
        joint /= shape.actions[j];
    }
    a
}

fn joint_prob(strategy: &Strategy, h: usize, s: usize, actions: &[usize]) -> f64 {
    actions.iter().enumerate().map(|(j, &a)| strategy.dist(h, s, j)[a]).product()
}

/// Expected total reward of every player from the initial state, summed over
/// all `(S * prod_j A_j)^H` trajectories.
pub fn enumerate_value(game: &GameSpec, strategy: &Strategy, budget: &OracleBudget) -> Result<Vec<f64>> {
    let shape = game.shape();
    strategy.check_shape(shape)?;
    budget.allow_trajectories(shape)?;
    let mut totals = vec![0.0; shape.players];
    let mut returns = vec![0.0; shape.players];
    walk(game, strategy, 0, game.initial_state(), 1.0, &mut returns, &mut totals);
    Ok(totals)
}

fn walk(game: &GameSpec, strategy: &Strategy, h: usize, s: usize, prob: f64, returns: &mut Vec<f64>, totals: &mut [f64]) {
    let shape = game.shape();
    if h == shape.horizon {
        for (t, r) in totals.iter_mut().zip(returns.iter()) {
            *t += prob * r;
        }
        return;
    }
    for joint in 0..shape.joint_count() {
        let actions = decode_joint(shape, joint);
        let pa = joint_prob(strategy, h, s, &actions);
        if pa == 0.0 {
            continue;
        }
        for j in 0..shape.players {
            returns[j] += game.reward(h, j, s, joint);
        }
        for (s2, &p) in game.transition(h, s, joint).iter().enumerate() {
            if p > 0.0 {
                walk(game, strategy, h + 1, s2, prob * pa * p, returns, totals);
            }
        }
        for j in 0..shape.players {
            returns[j] -= game.reward(h, j, s, joint);
        }
    }
}

/// Forward state distribution and accumulated expected reward of player `j`.
fn forward_value(game: &GameSpec, strategy: &Strategy, j: usize) -> f64 {
    let shape = game.shape();
    let mut dist = vec![0.0; shape.states];
    dist[game.initial_state()] = 1.0;
    let mut total = 0.0;
    for h in 0..shape.horizon {
        let mut next = vec![0.0; shape.states];
        for (s, &ps) in dist.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            for joint in 0..shape.joint_count() {
                let pa = joint_prob(strategy, h, s, &decode_joint(shape, joint));
                let w = ps * pa;
                if w == 0.0 {
                    continue;
                }
                total += w * game.reward(h, j, s, joint);
                for (s2, p) in game.transition(h, s, joint).iter().enumerate() {
                    next[s2] += w * p;
                }
            }
        }
        dist = next;
    }
    total
}

/// Forward occupancy `[h][s][joint]`.
fn forward_occupancy(game: &GameSpec, strategy: &Strategy) -> Vec<f64> {
    let shape = game.shape();
    let (ns, jc) = (shape.states, shape.joint_count());
    let mut occ = vec![0.0; shape.horizon * ns * jc];
    let mut dist = vec![0.0; ns];
    dist[game.initial_state()] = 1.0;
    for h in 0..shape.horizon {
        let mut next = vec![0.0; ns];
        for (s, &ps) in dist.iter().enumerate() {
            for joint in 0..jc {
                let w = ps * joint_prob(strategy, h, s, &decode_joint(shape, joint));
                occ[(h * ns + s) * jc + joint] = w;
                if w > 0.0 {
                    for (s2, p) in game.transition(h, s, joint).iter().enumerate() {
                        next[s2] += w * p;
                    }
                }
            }
        }
        dist = next;
    }
    occ
}

/// Deterministic policy number `index` of player `j`, action per `h * S + s`,
/// with the last slot varying fastest.
pub fn deterministic_policy(shape: &Shape, j: usize, mut index: u128) -> Vec<usize> {
    let slots = shape.states * shape.horizon;
    let a = shape.actions[j] as u128;
    let mut policy = vec![0; slots];
    for slot in (0..slots).rev() {
        policy[slot] = (index % a) as usize;
        index /= a;
    }
    policy
}

fn with_policy(strategy: &Strategy, shape: &Shape, j: usize, policy: &[usize]) -> Strategy {
    let mut out = strategy.clone();
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            let mut d = vec![0.0; shape.actions[j]];
            d[policy[h * shape.states + s]] = 1.0;
            out.set_dist(h, s, j, d);
        }
    }
    out
}

/// `max` over deterministic policies of player `j` of `score`, with the first
/// maximizer in enumeration order.
fn best_deterministic(
    shape: &Shape,
    j: usize,
    budget: &OracleBudget,
    mut score: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<(f64, Vec<usize>)> {
    let count = budget.allow_policies(shape, j)?;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for index in 0..count {
        let policy = deterministic_policy(shape, j, index);
        let v = score(&policy)?;
        if v > best.0 {
            best = (v, policy);
        }
    }
    Ok(best)
}

/// Best-response value of player `j` at the initial state by enumerating all
/// `A_j^(S H)` deterministic policies.
pub fn enumerate_best_response(game: &GameSpec, strategy: &Strategy, j: usize, budget: &OracleBudget) -> Result<(f64, Vec<usize>)> {
    let shape = game.shape();
    strategy.check_shape(shape)?;
    best_deterministic(shape, j, budget, |policy| {
        Ok(forward_value(game, &with_policy(strategy, shape, j, policy), j))
    })
}

/// Optimistic policy evaluation of player `j` on the empirical model, written
/// independently of the solver: backward pass with `+ H` outside the data and
/// `+ bonus`, clipped to `[0, H - h + 1]`.
fn optimistic_value(model: &EmpiricalModel, strategy: &Strategy, j: usize, params: &BonusParams, s1: usize) -> f64 {
    let shape = model.shape();
    let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
    let mut v = vec![0.0; ns];
    for h in (0..hz).rev() {
        let mut cur = vec![0.0; ns];
        for (s, slot) in cur.iter_mut().enumerate() {
            let counts = model.counts(h, s);
            let mut total = 0.0;
            for joint in 0..jc {
                let pa = joint_prob(strategy, h, s, &decode_joint(shape, joint));
                if pa == 0.0 {
                    continue;
                }
                let cont: f64 = model.p_hat(h, s, joint).iter().zip(&v).map(|(p, x)| p * x).sum();
                let missing = if counts[joint] == 0 { hz as f64 } else { 0.0 };
                total += pa * (model.reward_hat(h, j, s)[joint] + cont + missing);
            }
            let dists: Vec<&[f64]> = (0..shape.players).map(|k| strategy.dist(h, s, k)).collect();
            *slot = (total + stage_bonus(params, counts, &dists)).clamp(0.0, (hz - h) as f64);
        }
        v = cur;
    }
    v[s1]
}

/// `max` over deterministic `pi_j` of the optimistic value of
/// `(pi_j, pi_-j)` at the initial state.
pub fn enumerate_optimistic_best_response(
    model: &EmpiricalModel,
    strategy: &Strategy,
    j: usize,
    params: &BonusParams,
    s1: usize,
    budget: &OracleBudget,
) -> Result<(f64, Vec<usize>)> {
    let shape = model.shape();
    strategy.check_shape(shape)?;
    best_deterministic(shape, j, budget, |policy| {
        Ok(optimistic_value(model, &with_policy(strategy, shape, j, policy), j, params, s1))
    })
}

/// Unilateral coefficient by enumerating every deterministic deviation of
/// every player and forming occupancy ratios against `denom(h, s, joint)`.
pub fn enumerate_coefficient(
    game: &GameSpec,
    strategy: &Strategy,
    denom: impl Fn(usize, usize, usize) -> f64,
    budget: &OracleBudget,
) -> Result<Coverage> {
    let shape = game.shape();
    strategy.check_shape(shape)?;
    let (ns, jc) = (shape.states, shape.joint_count());
    let mut best = 0.0f64;
    for j in 0..shape.players {
        let count = budget.allow_policies(shape, j)?;
        for index in 0..count {
            let policy = deterministic_policy(shape, j, index);
            let occ = forward_occupancy(game, &with_policy(strategy, shape, j, &policy));
            for (cell, &num) in occ.iter().enumerate() {
                if num == 0.0 {
                    continue;
                }
                let (h, s, joint) = (cell / (ns * jc), (cell / jc) % ns, cell % jc);
                let d = denom(h, s, joint);
                if d == 0.0 {
                    return Ok(Coverage::Infinite);
                }
                best = best.max(num / d);
            }
        }
    }
    Ok(Coverage::Finite(best))
}

/// Best point of a regular grid on the `A`-simplex, `A <= 3`, under
/// `objective`; the first best point in grid order wins ties.
pub fn grid_maximin(objective: impl Fn(&[f64]) -> f64, actions: usize, grid_step: f64) -> Result<(Vec<f64>, f64)> {
    if actions == 0 || actions > 3 {
        return Err(Error::Shape(format!("grid search supports 1 to 3 actions, got {actions}")));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Invalid(format!("grid step must lie in (0, 1], got {grid_step}")));
    }
    let k = (1.0 / grid_step).round() as usize;
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut consider = |p: Vec<f64>| {
        let v = objective(&p);
        if v > best.1 {
            best = (p, v);
        }
    };
    match actions {
        1 => consider(vec![1.0]),
        2 => (0..=k).for_each(|i| {
            let x = i as f64 / k as f64;
            consider(vec![x, 1.0 - x]);
        }),
        _ => {
            for i in 0..=k {
                for j in 0..=k - i {
                    let (x, y) = (i as f64 / k as f64, j as f64 / k as f64);
                    consider(vec![x, y, ((k - i - j) as f64 / k as f64).max(0.0)]);
                }
            }
        }
    }
    Ok(best)
}

/// The pessimistic stage objective `min_b [sum_a mu(a) q(a, b) - b_h(mu,
/// e_b)]`, with the bonus evaluated by the general formula.
pub fn maximin_objective<'a>(
    q: &'a [f64],
    rows: usize,
    cols: usize,
    counts: &'a [u64],
    params: &'a BonusParams,
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |mu: &[f64]| {
        (0..cols)
            .map(|b| {
                let mut e = vec![0.0; cols];
                e[b] = 1.0;
                let lin: f64 = (0..rows).map(|a| mu[a] * q[a * cols + b]).sum();
                lin - stage_bonus(params, counts, &[mu, &e])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// The optimistic stage objective `max_a [sum_b nu(b) q(a, b) + b_h(e_a,
/// nu)]`, negated so that [`grid_maximin`] minimizes it.
pub fn negated_minimax_objective<'a>(
    q: &'a [f64],
    rows: usize,
    cols: usize,
    counts: &'a [u64],
    params: &'a BonusParams,
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |nu: &[f64]| {
        -(0..rows)
            .map(|a| {
                let mut e = vec![0.0; rows];
                e[a] = 1.0;
                let lin: f64 = (0..cols).map(|b| nu[b] * q[a * cols + b]).sum();
                lin + stage_bonus(params, counts, &[&e, nu])
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Central differences of `f` at `point`, one coordinate at a time.
pub fn finite_diff(f: impl Fn(&[f64]) -> f64, point: &[f64], step: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            x[i] = point[i] + step;
            let up = f(&x);
            x[i] = point[i] - step;
            let down = f(&x);
            x[i] = point[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Empirical `[h][s][joint]` visit frequencies over `rollouts` simulated
/// episodes.
pub fn monte_carlo_occupancy(game: &GameSpec, strategy: &Strategy, rollouts: usize, seed: u64) -> Result<Vec<f64>> {
    let shape = game.shape();
    strategy.check_shape(shape)?;
    let (ns, jc) = (shape.states, shape.joint_count());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freq = vec![0.0; shape.horizon * ns * jc];
    let draw = |probs: &[f64], rng: &mut ChaCha8Rng| {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    };
    for _ in 0..rollouts {
        let mut s = game.initial_state();
        for h in 0..shape.horizon {
            let mut joint = 0;
            for j in 0..shape.players {
                joint = joint * shape.actions[j] + draw(strategy.dist(h, s, j), &mut rng);
            }
            freq[(h * ns + s) * jc + joint] += 1.0;
            s = draw(game.transition(h, s, joint), &mut rng);
        }
    }
    freq.iter_mut().for_each(|f| *f /= rollouts as f64);
    Ok(freq)
}
