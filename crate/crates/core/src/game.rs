//! Tabular Markov games, strategies, and the JSON game file format.
//!
//! Timesteps, states, players and actions are all 0-based in memory and on
//! disk. Joint actions are flattened row-major over `(a_1, ..., a_m)`, so the
//! last player's action varies fastest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub(crate) const PROB_TOL: f64 = 1e-12;

/// Dimensions of a game: players, horizon, states and per-player action counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub players: usize,
    pub horizon: usize,
    pub states: usize,
    pub actions: Vec<usize>,
}

impl Shape {
    pub fn new(horizon: usize, states: usize, actions: Vec<usize>) -> Result<Self> {
        if horizon == 0 || states == 0 || actions.is_empty() || actions.contains(&0) {
            return Err(Error::Shape(format!(
                "horizon {horizon}, states {states} and action counts {actions:?} must all be positive"
            )));
        }
        Ok(Shape {
            players: actions.len(),
            horizon,
            states,
            actions,
        })
    }

    /// Number of joint actions, the product of all action counts.
    pub fn joint_count(&self) -> usize {
        self.actions.iter().product()
    }

    /// Row-major strides of the joint-action index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.players];
        for j in (0..self.players.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * self.actions[j + 1];
        }
        strides
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.actions)
            .fold(0, |acc, (&a, &n)| acc * n + a)
    }

    pub fn decode(&self, mut joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.players];
        for j in (0..self.players).rev() {
            out[j] = joint % self.actions[j];
            joint /= self.actions[j];
        }
        out
    }

    /// Action of player `j` inside joint index `joint`.
    pub fn action_of(&self, joint: usize, j: usize, strides: &[usize]) -> usize {
        (joint / strides[j]) % self.actions[j]
    }

    /// Number of deterministic Markov policies for player `j`.
    pub fn deterministic_policy_count(&self, j: usize) -> u128 {
        (self.actions[j] as u128)
            .checked_pow((self.states * self.horizon) as u32)
            .unwrap_or(u128::MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Observed rewards are Bernoulli draws with the stored mean.
    #[default]
    Bernoulli,
    /// Observed rewards equal the stored mean.
    Deterministic,
}

/// A finite-horizon general-sum Markov game with a fixed initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    shape: Shape,
    /// `[h][s][joint][s']`
    transitions: Vec<f64>,
    /// `[h][j][s][joint]`
    rewards: Vec<f64>,
    initial_state: usize,
    reward_kind: RewardKind,
}

impl GameSpec {
    /// Builds a game from flat tensors laid out as `P[h][s][joint][s']` and
    /// `r[h][j][s][joint]`, validating every probability row and reward.
    pub fn new(
        shape: Shape,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial_state: usize,
        reward_kind: RewardKind,
    ) -> Result<Self> {
        let (h, s, m, jc) = (shape.horizon, shape.states, shape.players, shape.joint_count());
        if transitions.len() != h * s * jc * s {
            return Err(Error::Shape(format!(
                "transition tensor has {} entries, expected {}",
                transitions.len(),
                h * s * jc * s
            )));
        }
        if rewards.len() != h * m * s * jc {
            return Err(Error::Shape(format!(
                "reward tensor has {} entries, expected {}",
                rewards.len(),
                h * m * s * jc
            )));
        }
        if initial_state >= s {
            return Err(Error::Shape(format!("initial state {initial_state} out of range")));
        }
        for (row_idx, row) in transitions.chunks(s).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::Probability(format!(
                    "transition row {row_idx} is not a distribution (sum {sum})"
                )));
            }
        }
        if let Some(bad) = rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Invalid(format!("mean reward {bad} outside [0, 1]")));
        }
        Ok(GameSpec {
            shape,
            transitions,
            rewards,
            initial_state,
            reward_kind,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }

    pub fn set_reward_kind(&mut self, kind: RewardKind) {
        self.reward_kind = kind;
    }

    /// `P_h(. | s, joint)`
    pub fn transition(&self, h: usize, s: usize, joint: usize) -> &[f64] {
        let ns = self.shape.states;
        let start = ((h * ns + s) * self.shape.joint_count() + joint) * ns;
        &self.transitions[start..start + ns]
    }

    /// Mean rewards `r_{h,j}(s, .)` over joint actions.
    pub fn rewards(&self, h: usize, j: usize, s: usize) -> &[f64] {
        let jc = self.shape.joint_count();
        let start = ((h * self.shape.players + j) * self.shape.states + s) * jc;
        &self.rewards[start..start + jc]
    }

    pub fn reward(&self, h: usize, j: usize, s: usize, joint: usize) -> f64 {
        self.rewards(h, j, s)[joint]
    }

    /// True when `m = 2` and `r_2 = 1 - r_1` everywhere, i.e. the game is
    /// zero-sum up to the constant shift that keeps both rewards in `[0, 1]`.
    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum_violation().is_none()
    }

    fn zero_sum_violation(&self) -> Option<String> {
        if self.shape.players != 2 {
            return Some(format!("{} players", self.shape.players));
        }
        for h in 0..self.shape.horizon {
            for s in 0..self.shape.states {
                let r1 = self.rewards(h, 0, s);
                let r2 = self.rewards(h, 1, s);
                for (joint, (a, b)) in r1.iter().zip(r2).enumerate() {
                    if (a + b - 1.0).abs() > PROB_TOL {
                        return Some(format!(
                            "r1 + r2 = {} at h={h}, s={s}, joint={joint}",
                            a + b
                        ));
                    }
                }
            }
        }
        None
    }

    /// Stable content hash of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(&GameFile::from(self)).expect("game serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GameFile::from(self)).expect("game serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// On-disk layout of a game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub m: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: Vec<usize>,
    /// `P[h][s][joint][s']`
    #[serde(rename = "P")]
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    /// `r[h][j][s][joint]`
    pub r: Vec<Vec<Vec<Vec<f64>>>>,
    pub s1: usize,
    #[serde(default)]
    pub reward_kind: RewardKind,
}

impl From<&GameSpec> for GameFile {
    fn from(game: &GameSpec) -> Self {
        let sh = &game.shape;
        let jc = sh.joint_count();
        let transitions = (0..sh.horizon)
            .map(|h| {
                (0..sh.states)
                    .map(|s| (0..jc).map(|a| game.transition(h, s, a).to_vec()).collect())
                    .collect()
            })
            .collect();
        let r = (0..sh.horizon)
            .map(|h| {
                (0..sh.players)
                    .map(|j| (0..sh.states).map(|s| game.rewards(h, j, s).to_vec()).collect())
                    .collect()
            })
            .collect();
        GameFile {
            m: sh.players,
            horizon: sh.horizon,
            states: sh.states,
            actions: sh.actions.clone(),
            transitions,
            r,
            s1: game.initial_state,
            reward_kind: game.reward_kind,
        }
    }
}

impl TryFrom<GameFile> for GameSpec {
    type Error = Error;

    fn try_from(file: GameFile) -> Result<Self> {
        if file.m != file.actions.len() {
            return Err(Error::Shape(format!(
                "m = {} but {} action counts given",
                file.m,
                file.actions.len()
            )));
        }
        let shape = Shape::new(file.horizon, file.states, file.actions)?;
        let jc = shape.joint_count();
        let nested_len_ok = file.transitions.len() == shape.horizon
            && file.transitions.iter().all(|by_s| {
                by_s.len() == shape.states
                    && by_s
                        .iter()
                        .all(|by_a| by_a.len() == jc && by_a.iter().all(|row| row.len() == shape.states))
            })
            && file.r.len() == shape.horizon
            && file.r.iter().all(|by_j| {
                by_j.len() == shape.players
                    && by_j.iter().all(|by_s| by_s.len() == shape.states && by_s.iter().all(|row| row.len() == jc))
            });
        if !nested_len_ok {
            return Err(Error::Shape("nested tensor lengths do not match m, H, S, A".into()));
        }
        let transitions = file.transitions.into_iter().flatten().flatten().flatten().collect();
        let rewards = file.r.into_iter().flatten().flatten().flatten().collect();
        GameSpec::new(shape, transitions, rewards, file.s1, file.reward_kind)
    }
}

/// Two-player zero-sum reading of a [`GameSpec`]: player 0 (`mu`) maximizes
/// the stored reward `r_{h,1}`, player 1 (`nu`) minimizes it.
#[derive(Debug, Clone, Copy)]
pub struct ZeroSumView<'a> {
    game: &'a GameSpec,
}

impl<'a> ZeroSumView<'a> {
    pub fn new(game: &'a GameSpec) -> Result<Self> {
        match game.zero_sum_violation() {
            None => Ok(ZeroSumView { game }),
            Some(why) => Err(Error::NotZeroSum(why)),
        }
    }

    pub fn game(&self) -> &'a GameSpec {
        self.game
    }

    pub fn max_actions(&self) -> usize {
        self.game.shape.actions[0]
    }

    pub fn min_actions(&self) -> usize {
        self.game.shape.actions[1]
    }

    /// Shared reward `r_h(s, a, b)`.
    pub fn reward(&self, h: usize, s: usize, a: usize, b: usize) -> f64 {
        self.game.reward(h, 0, s, a * self.min_actions() + b)
    }
}

/// A Markov strategy profile: one distribution per `(h, s, player)` slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrategyFile", into = "StrategyFile")]
pub struct Strategy {
    horizon: usize,
    states: usize,
    actions: Vec<usize>,
    dists: Vec<Vec<f64>>,
}

impl Strategy {
    pub fn uniform(shape: &Shape) -> Self {
        Self::from_fn(shape, |_, _, j| vec![1.0 / shape.actions[j] as f64; shape.actions[j]])
    }

    /// Builds a profile slot by slot from `f(h, s, j)`. Panics on a malformed
    /// slot; use [`Strategy::from_nested`] for untrusted input.
    pub fn from_fn(shape: &Shape, mut f: impl FnMut(usize, usize, usize) -> Vec<f64>) -> Self {
        let mut dists = Vec::with_capacity(shape.horizon * shape.states * shape.players);
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for j in 0..shape.players {
                    let d = f(h, s, j);
                    assert_eq!(d.len(), shape.actions[j], "slot ({h},{s},{j}) has wrong length");
                    dists.push(d);
                }
            }
        }
        Strategy {
            horizon: shape.horizon,
            states: shape.states,
            actions: shape.actions.clone(),
            dists,
        }
    }

    /// Every player plays the action `choice(h, s, j)` with probability one.
    pub fn deterministic(shape: &Shape, mut choice: impl FnMut(usize, usize, usize) -> usize) -> Self {
        Self::from_fn(shape, |h, s, j| one_hot(shape.actions[j], choice(h, s, j)))
    }

    pub fn from_nested(nested: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        StrategyFile { probs: nested }.try_into()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn players(&self) -> usize {
        self.actions.len()
    }

    fn slot(&self, h: usize, s: usize, j: usize) -> usize {
        (h * self.states + s) * self.actions.len() + j
    }

    /// `pi_{h,j}(. | s)`
    pub fn dist(&self, h: usize, s: usize, j: usize) -> &[f64] {
        &self.dists[self.slot(h, s, j)]
    }

    pub fn set_dist(&mut self, h: usize, s: usize, j: usize, dist: Vec<f64>) {
        assert_eq!(dist.len(), self.actions[j]);
        let idx = self.slot(h, s, j);
        self.dists[idx] = dist;
    }

    /// Distributions of every player at `(h, s)`.
    pub fn dists_at(&self, h: usize, s: usize) -> Vec<&[f64]> {
        (0..self.players()).map(|j| self.dist(h, s, j)).collect()
    }

    /// Product distribution over joint actions at `(h, s)`, row-major.
    pub fn joint_probs(&self, h: usize, s: usize) -> Vec<f64> {
        let mut out = vec![1.0];
        for j in 0..self.players() {
            let d = self.dist(h, s, j);
            out = out.iter().flat_map(|p| d.iter().map(move |q| p * q)).collect();
        }
        out
    }

    /// Product distribution of all players except `j`, as a weight per joint
    /// action (player `j`'s coordinate is ignored).
    pub fn others_probs(&self, h: usize, s: usize, j: usize) -> Vec<f64> {
        let mut out = vec![1.0];
        for k in 0..self.players() {
            let n = self.actions[k];
            if k == j {
                out = out.iter().flat_map(|&p| std::iter::repeat_n(p, n)).collect();
            } else {
                let d = self.dist(h, s, k);
                out = out.iter().flat_map(|p| d.iter().map(move |q| p * q)).collect();
            }
        }
        out
    }

    pub fn check_shape(&self, shape: &Shape) -> Result<()> {
        if self.horizon != shape.horizon || self.states != shape.states || self.actions != shape.actions {
            return Err(Error::Shape(format!(
                "strategy is (H={}, S={}, A={:?}) but game is (H={}, S={}, A={:?})",
                self.horizon, self.states, self.actions, shape.horizon, shape.states, shape.actions
            )));
        }
        Ok(())
    }

    /// Replaces player `j`'s whole strategy with the one in `other`.
    pub fn with_player(&self, j: usize, other: &Strategy) -> Strategy {
        let mut out = self.clone();
        for h in 0..self.horizon {
            for s in 0..self.states {
                out.set_dist(h, s, j, other.dist(h, s, j).to_vec());
            }
        }
        out
    }

    /// Player `j` plays `policy[h * S + s]` deterministically; others unchanged.
    pub fn with_deterministic_player(&self, j: usize, policy: &[usize]) -> Strategy {
        let mut out = self.clone();
        for h in 0..self.horizon {
            for s in 0..self.states {
                out.set_dist(h, s, j, one_hot(self.actions[j], policy[h * self.states + s]));
            }
        }
        out
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.horizon)
            .map(|h| {
                (0..self.states)
                    .map(|s| (0..self.players()).map(|j| self.dist(h, s, j).to_vec()).collect())
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub(crate) fn check_distribution(d: &[f64], tol: f64) -> bool {
    d.iter().all(|p| p.is_finite() && *p >= 0.0) && (d.iter().sum::<f64>() - 1.0).abs() <= tol
}

/// Serialized form of a [`Strategy`]: `probs[h][s][j][a]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyFile {
    pub probs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<Strategy> for StrategyFile {
    fn from(s: Strategy) -> Self {
        StrategyFile { probs: s.to_nested() }
    }
}

impl TryFrom<StrategyFile> for Strategy {
    type Error = Error;

    fn try_from(file: StrategyFile) -> Result<Self> {
        let horizon = file.probs.len();
        let states = file.probs.first().map_or(0, |v| v.len());
        let actions: Vec<usize> = file
            .probs
            .first()
            .and_then(|v| v.first())
            .map(|v| v.iter().map(|d| d.len()).collect())
            .unwrap_or_default();
        if horizon == 0 || states == 0 || actions.is_empty() {
            return Err(Error::Shape("empty strategy".into()));
        }
        let mut dists = Vec::new();
        for (h, by_s) in file.probs.into_iter().enumerate() {
            if by_s.len() != states {
                return Err(Error::Shape(format!("timestep {h} has {} states", by_s.len())));
            }
            for (s, by_j) in by_s.into_iter().enumerate() {
                if by_j.len() != actions.len() {
                    return Err(Error::Shape(format!("slot ({h},{s}) has {} players", by_j.len())));
                }
                for (j, d) in by_j.into_iter().enumerate() {
                    if d.len() != actions[j] || !check_distribution(&d, PROB_TOL) {
                        return Err(Error::Probability(format!("slot ({h},{s},{j}) is not a distribution")));
                    }
                    dists.push(d);
                }
            }
        }
        Ok(Strategy {
            horizon,
            states,
            actions,
            dists,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pennies() -> GameSpec {
        let shape = Shape::new(1, 1, vec![2, 2]).unwrap();
        let r1 = [1.0, 0.0, 0.0, 1.0];
        let rewards = r1.iter().copied().chain(r1.iter().map(|r| 1.0 - r)).collect();
        GameSpec::new(shape, vec![1.0; 4], rewards, 0, RewardKind::Deterministic).unwrap()
    }

    #[test]
    fn joint_index_is_row_major() {
        let shape = Shape::new(1, 1, vec![2, 3, 4]).unwrap();
        assert_eq!(shape.joint_count(), 24);
        assert_eq!(shape.strides(), vec![12, 4, 1]);
        assert_eq!(shape.encode(&[1, 2, 3]), 12 + 8 + 3);
        for joint in 0..24 {
            assert_eq!(shape.encode(&shape.decode(joint)), joint);
        }
    }

    #[test]
    fn rejects_bad_transition_rows() {
        let shape = Shape::new(1, 2, vec![1]).unwrap();
        let err = GameSpec::new(shape, vec![0.5, 0.6, 1.0, 0.0], vec![0.0; 2], 0, RewardKind::Bernoulli);
        assert!(matches!(err, Err(Error::Probability(_))));
    }

    #[test]
    fn rejects_rewards_outside_unit_interval() {
        let shape = Shape::new(1, 1, vec![1]).unwrap();
        let err = GameSpec::new(shape, vec![1.0], vec![1.5], 0, RewardKind::Bernoulli);
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn game_file_round_trip_preserves_hash() {
        let g = pennies();
        let back = GameSpec::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.content_hash(), g.content_hash());
    }

    #[test]
    fn zero_sum_view_requires_constant_sum_rewards() {
        let g = pennies();
        let view = ZeroSumView::new(&g).unwrap();
        assert_eq!(view.reward(0, 0, 1, 1), 1.0);
        let shape = Shape::new(1, 1, vec![2, 2]).unwrap();
        let general = GameSpec::new(shape, vec![1.0; 4], vec![0.3; 8], 0, RewardKind::Bernoulli).unwrap();
        assert!(matches!(ZeroSumView::new(&general), Err(Error::NotZeroSum(_))));
    }

    #[test]
    fn joint_and_others_probs() {
        let shape = Shape::new(1, 1, vec![2, 3]).unwrap();
        let pi = Strategy::from_fn(&shape, |_, _, j| if j == 0 { vec![0.25, 0.75] } else { vec![0.5, 0.5, 0.0] });
        let joint = pi.joint_probs(0, 0);
        assert_eq!(joint, vec![0.125, 0.125, 0.0, 0.375, 0.375, 0.0]);
        let others = pi.others_probs(0, 0, 0);
        assert_eq!(others, vec![0.5, 0.5, 0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn strategy_serde_validates() {
        let shape = Shape::new(2, 1, vec![2]).unwrap();
        let pi = Strategy::uniform(&shape);
        let text = serde_json::to_string(&pi).unwrap();
        assert_eq!(serde_json::from_str::<Strategy>(&text).unwrap(), pi);
        let bad = r#"{"probs":[[[[0.5,0.6]]]]}"#;
        assert!(serde_json::from_str::<Strategy>(bad).is_err());
    }
}
