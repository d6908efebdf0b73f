//! Unilateral coverage coefficients of a strategy against a data distribution.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{warmup_threshold, DataDistribution};
use crate::empirical::EmpiricalModel;
use crate::error::{Error, Result};
use crate::game::{GameSpec, Strategy};

/// A coverage coefficient, which is infinite when some deviation reaches a
/// state-action pair the data never covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    Finite(f64),
    Infinite,
}

impl Coverage {
    pub fn is_finite(&self) -> bool {
        matches!(self, Coverage::Finite(_))
    }

    /// `f64::INFINITY` for the infinite case.
    pub fn as_f64(&self) -> f64 {
        match self {
            Coverage::Finite(c) => *c,
            Coverage::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coverage::Finite(c) => write!(f, "{c}"),
            Coverage::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub empirical: Coverage,
    pub population: Coverage,
    pub p_min: f64,
    pub warmup_n: u64,
}

/// `R[h * S + s]`: the largest probability with which player `j`, deviating
/// alone from `strategy`, can be in state `s` at timestep `h`.
pub fn max_reach(game: &GameSpec, strategy: &Strategy, j: usize) -> Result<Vec<f64>> {
    let shape = game.shape();
    strategy.check_shape(shape)?;
    let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
    let strides = shape.strides();
    // others[t][x][joint]: probability of the non-deviating coordinates.
    let others: Vec<Vec<Vec<f64>>> = (0..hz)
        .map(|t| (0..ns).map(|x| strategy.others_probs(t, x, j)).collect())
        .collect();
    let mut reach = vec![0.0; hz * ns];
    for h in 0..hz {
        for target in 0..ns {
            let mut g = vec![0.0; ns];
            g[target] = 1.0;
            for t in (0..h).rev() {
                let mut next = vec![0.0; ns];
                for (x, slot) in next.iter_mut().enumerate() {
                    let mut per_action = vec![0.0; shape.actions[j]];
                    for joint in 0..jc {
                        let w = others[t][x][joint];
                        if w == 0.0 {
                            continue;
                        }
                        let cont: f64 = game.transition(t, x, joint).iter().zip(&g).map(|(p, v)| p * v).sum();
                        per_action[shape.action_of(joint, j, &strides)] += w * cont;
                    }
                    *slot = per_action.into_iter().fold(0.0, f64::max);
                }
                g = next;
            }
            reach[h * ns + target] = g[game.initial_state()];
        }
    }
    Ok(reach)
}

fn unilateral_coefficient(
    game: &GameSpec,
    strategy: &Strategy,
    denom: impl Fn(usize, usize, usize) -> f64,
) -> Result<Coverage> {
    let shape = game.shape();
    let (hz, ns, jc) = (shape.horizon, shape.states, shape.joint_count());
    let mut best = 0.0f64;
    for j in 0..shape.players {
        let reach = max_reach(game, strategy, j)?;
        for h in 0..hz {
            for s in 0..ns {
                let r = reach[h * ns + s];
                if r == 0.0 {
                    continue;
                }
                let others = strategy.others_probs(h, s, j);
                for (joint, w) in others.iter().enumerate().take(jc) {
                    let num = r * w;
                    if num == 0.0 {
                        continue;
                    }
                    let d = denom(h, s, joint);
                    if d == 0.0 {
                        return Ok(Coverage::Infinite);
                    }
                    best = best.max(num / d);
                }
            }
        }
    }
    Ok(Coverage::Finite(best))
}

/// `C(pi)`: worst ratio of a unilateral deviation's occupancy to `d_h`.
pub fn population_coefficient(dist: &DataDistribution, game: &GameSpec, strategy: &Strategy) -> Result<Coverage> {
    dist.check_shape(game.shape())?;
    unilateral_coefficient(game, strategy, |h, s, joint| dist.get(h, s, joint))
}

/// `C_hat(pi)`: the same ratio against the empirical distribution of the data.
pub fn empirical_coefficient(model: &EmpiricalModel, game: &GameSpec, strategy: &Strategy) -> Result<Coverage> {
    if model.shape() != game.shape() {
        return Err(Error::Shape("empirical model does not match the game".into()));
    }
    unilateral_coefficient(game, strategy, |h, s, joint| model.d_hat(h, s, joint))
}

pub fn coverage_report(
    game: &GameSpec,
    dist: &DataDistribution,
    model: &EmpiricalModel,
    strategy: &Strategy,
    delta: f64,
) -> Result<CoverageReport> {
    let p_min = dist.p_min();
    Ok(CoverageReport {
        empirical: empirical_coefficient(model, game, strategy)?,
        population: population_coefficient(dist, game, strategy)?,
        p_min,
        warmup_n: warmup_threshold(game.shape(), p_min, delta),
    })
}
