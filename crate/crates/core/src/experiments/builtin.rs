//! Built-in game generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{GameSpec, RewardKind, Shape};

use super::config::BuiltinGame;

/// Builds a builtin game. Zero-sum builtins store player 2's reward as one
/// minus player 1's.
pub fn build(
    kind: BuiltinGame,
    states: usize,
    horizon: usize,
    actions: Option<Vec<usize>>,
    seed: u64,
    reward_kind: RewardKind,
) -> Result<GameSpec> {
    let actions = actions.unwrap_or_else(|| vec![2, 2]);
    match kind {
        BuiltinGame::MatchingPennies => {
            if actions != [2, 2] {
                return Err(Error::Config("matching_pennies has two players with two actions".into()));
            }
            matching_pennies(states, horizon, reward_kind)
        }
        BuiltinGame::RandomZeroSum => {
            two_players(&actions, "random_zero_sum")?;
            random_game(Shape::new(horizon, states, actions)?, seed, true, reward_kind)
        }
        BuiltinGame::RandomGeneralSum => random_game(Shape::new(horizon, states, actions)?, seed, false, reward_kind),
        BuiltinGame::TurnBased => {
            two_players(&actions, "turn_based")?;
            turn_based(Shape::new(horizon, states, actions)?, seed, reward_kind)
        }
    }
}

fn two_players(actions: &[usize], name: &str) -> Result<()> {
    if actions.len() != 2 {
        return Err(Error::Config(format!("{name} needs exactly two players")));
    }
    Ok(())
}

/// Zero-sum rewards `r1` laid out `[h][s][joint]`, expanded to both players.
fn zero_sum_rewards(shape: &Shape, r1: &[f64]) -> Vec<f64> {
    let per_h = shape.states * shape.joint_count();
    let mut out = Vec::with_capacity(2 * r1.len());
    for h in 0..shape.horizon {
        let block = &r1[h * per_h..(h + 1) * per_h];
        out.extend_from_slice(block);
        out.extend(block.iter().map(|r| 1.0 - r));
    }
    out
}

/// Player 1 wins on matching actions; transitions are uniform over states.
pub fn matching_pennies(states: usize, horizon: usize, reward_kind: RewardKind) -> Result<GameSpec> {
    let shape = Shape::new(horizon, states, vec![2, 2])?;
    let transitions = vec![1.0 / states as f64; horizon * states * 4 * states];
    let r1: Vec<f64> = (0..horizon * states).flat_map(|_| [1.0, 0.0, 0.0, 1.0]).collect();
    let rewards = zero_sum_rewards(&shape, &r1);
    GameSpec::new(shape, transitions, rewards, 0, reward_kind)
}

/// A `Dirichlet(1, ..., 1)` draw via normalized exponentials.
fn dirichlet(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Uniform mean rewards and `Dirichlet(1)` transition rows.
pub fn random_game(shape: Shape, seed: u64, zero_sum: bool, reward_kind: RewardKind) -> Result<GameSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hz, ns, jc, m) = (shape.horizon, shape.states, shape.joint_count(), shape.players);
    let transitions: Vec<f64> = (0..hz * ns * jc).flat_map(|_| dirichlet(ns, &mut rng)).collect();
    let rewards = if zero_sum {
        let r1: Vec<f64> = (0..hz * ns * jc).map(|_| rng.gen()).collect();
        zero_sum_rewards(&shape, &r1)
    } else {
        (0..hz * m * ns * jc).map(|_| rng.gen()).collect()
    };
    GameSpec::new(shape, transitions, rewards, 0, reward_kind)
}

/// Zero-sum game where at `(h, s)` only player `(h + s) mod 2` influences
/// rewards and transitions; the other player's action is irrelevant there.
pub fn turn_based(shape: Shape, seed: u64, reward_kind: RewardKind) -> Result<GameSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
    let strides = shape.strides();
    let mut transitions = vec![0.0; hz * ns * jc * ns];
    let mut r1 = vec![0.0; hz * ns * jc];
    for h in 0..hz {
        for s in 0..ns {
            let controller = (h + s) % 2;
            let own = shape.actions[controller];
            let rows: Vec<Vec<f64>> = (0..own).map(|_| dirichlet(ns, &mut rng)).collect();
            let rewards: Vec<f64> = (0..own).map(|_| rng.gen()).collect();
            for joint in 0..jc {
                let a = shape.action_of(joint, controller, &strides);
                let cell = (h * ns + s) * jc + joint;
                transitions[cell * ns..(cell + 1) * ns].copy_from_slice(&rows[a]);
                r1[cell] = rewards[a];
            }
        }
    }
    let rewards = zero_sum_rewards(&shape, &r1);
    GameSpec::new(shape, transitions, rewards, 0, reward_kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pennies_layout() {
        let g = build(BuiltinGame::MatchingPennies, 1, 1, None, 0, RewardKind::Bernoulli).unwrap();
        assert_eq!(g.shape().actions, vec![2, 2]);
        assert_eq!(g.rewards(0, 0, 0), &[1.0, 0.0, 0.0, 1.0]);
        assert!(g.is_zero_sum());
        let big = matching_pennies(2, 2, RewardKind::Bernoulli).unwrap();
        assert_eq!(big.transition(1, 1, 3), &[0.5, 0.5]);
    }

    #[test]
    fn random_games_are_seeded() {
        let shape = Shape::new(2, 3, vec![2, 3]).unwrap();
        let a = random_game(shape.clone(), 7, true, RewardKind::Bernoulli).unwrap();
        let b = random_game(shape.clone(), 7, true, RewardKind::Bernoulli).unwrap();
        let c = random_game(shape.clone(), 8, true, RewardKind::Bernoulli).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
        assert!(a.is_zero_sum());
        let gs = random_game(shape, 7, false, RewardKind::Bernoulli).unwrap();
        assert!(!gs.is_zero_sum());
    }

    #[test]
    fn turn_based_ignores_the_idle_player() {
        let shape = Shape::new(2, 2, vec![3, 2]).unwrap();
        let g = turn_based(shape.clone(), 3, RewardKind::Bernoulli).unwrap();
        // (h, s) = (0, 0): player 0 controls, so player 1's action is irrelevant.
        for a in 0..3 {
            assert_eq!(g.transition(0, 0, shape.encode(&[a, 0])), g.transition(0, 0, shape.encode(&[a, 1])));
            assert_eq!(g.reward(0, 0, 0, shape.encode(&[a, 0])), g.reward(0, 0, 0, shape.encode(&[a, 1])));
        }
        // (h, s) = (0, 1): player 1 controls.
        for b in 0..2 {
            assert_eq!(g.reward(0, 0, 1, shape.encode(&[0, b])), g.reward(0, 0, 1, shape.encode(&[2, b])));
        }
        assert!(g.is_zero_sum());
    }
}
