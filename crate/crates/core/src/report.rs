//! Solver output: the strategy plus diagnostics, serialized as JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bonus::BonusParams;
use crate::error::Result;
use crate::game::Strategy;
use crate::value::GapReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Finite slot solved by enumeration, or a one-action simplex.
    Exact,
    /// The upper bound came within `eps_opt` of the returned value.
    Certified,
    /// The averaged iterate stopped improving over a window.
    Stalled,
    /// Reached the iteration cap.
    MaxIters,
}

/// Outcome of one per-state optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub iterations: u64,
    /// Objective at the returned strategy, before clipping.
    pub value: f64,
    /// Proven bound on the optimal objective (an upper bound for maximin).
    pub bound: f64,
    pub stop: StopReason,
}

impl Certificate {
    /// `|bound - value|`, the certified suboptimality.
    pub fn gap(&self) -> f64 {
        (self.bound - self.value).abs()
    }
}

/// Resolved PGD settings echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerEcho {
    pub eps_opt: f64,
    pub max_iters: u64,
    pub lipschitz: f64,
    pub step: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub h: usize,
    pub s: usize,
    /// Maximin over the max player's slot.
    pub lower: Certificate,
    /// Minimax over the min player's slot (reported as a minimization).
    pub upper: Certificate,
    /// Min player's best response at the max player's solution.
    pub lower_response: usize,
    /// Max player's best response at the min player's solution.
    pub upper_response: usize,
    /// Bonus at the output pair `(mu_lower, nu_upper)`.
    pub bonus: f64,
    /// Uncertainty functional at the output pair.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmmDiagnostics {
    pub optimizer: OptimizerEcho,
    /// Clipped pessimistic values `[h][s]`.
    pub lower_values: Vec<Vec<f64>>,
    /// Clipped optimistic values `[h][s]`.
    pub upper_values: Vec<Vec<f64>>,
    pub stages: Vec<StageReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTerm {
    /// Optimistic best-response value of player `j` at the initial state.
    pub best_response_upper: f64,
    /// Pessimistic value of player `j` at the initial state.
    pub value_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbsmDiagnostics {
    pub class_size: u64,
    pub member_index: u64,
    pub terms: Vec<SurrogateTerm>,
    /// Surrogate of every member in enumeration order, for classes of at most
    /// [`crate::sbsm::SURROGATE_TABLE_LIMIT`] members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub strategy: Strategy,
    pub bonus: BonusParams,
    /// `V_bar_1(s_1) - V_lower_1(s_1)` for SBMM; the minimized surrogate for SBSM.
    pub surrogate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbmm: Option<SbmmDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sbsm: Option<SbsmDiagnostics>,
    /// Exact evaluation on the true game, when it is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<GapReport>,
    /// Free-form provenance: game hash, dataset seed, and similar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<serde_json::Value>,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
