//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bonus::BonusMode;
use crate::class::{StrategyClass, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::game::RewardKind;
use crate::sbmm::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Sbmm,
    Sbsm,
    SbmmPointwise,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Sbmm => "sbmm",
            SolverKind::Sbsm => "sbsm",
            SolverKind::SbmmPointwise => "sbmm_pointwise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinGame {
    MatchingPennies,
    RandomZeroSum,
    RandomGeneralSum,
    TurnBased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameSource {
    Builtin {
        builtin: BuiltinGame,
        #[serde(default = "one")]
        states: usize,
        #[serde(default = "one")]
        horizon: usize,
        /// Per-player action counts; defaults to two players with two actions.
        #[serde(default)]
        actions: Option<Vec<usize>>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        reward_kind: RewardKind,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Uniform,
    /// `probs[h][s][joint]`.
    Explicit { probs: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonusOverrides {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub mode: BonusMode,
    /// Replaces the derived `iota`.
    #[serde(default)]
    pub iota: Option<f64>,
    /// Replaces the computed log covering number.
    #[serde(default)]
    pub log_cov: Option<f64>,
}

fn default_delta() -> f64 {
    0.1
}

impl Default for BonusOverrides {
    fn default() -> Self {
        BonusOverrides {
            delta: default_delta(),
            mode: BonusMode::default(),
            iota: None,
            log_cov: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassSource {
    Inline(StrategyClass),
    File { path: PathBuf },
}

impl Default for ClassSource {
    fn default() -> Self {
        ClassSource::Inline(StrategyClass::full())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameSource,
    #[serde(default = "default_data")]
    pub data: DataSpec,
    pub n: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub bonus: BonusOverrides,
    #[serde(default)]
    pub class: ClassSource,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
    /// Output directory.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Fill the `runtime_ms` column with wall-clock times. Off by default so
    /// sweep tables are reproducible byte for byte.
    #[serde(default)]
    pub record_runtime: bool,
}

fn default_data() -> DataSpec {
    DataSpec::Uniform
}

fn default_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Sbmm]
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Environment variable holding a comma-separated seed list that replaces the
/// configured seeds.
pub const SEED_ENV: &str = "MARL_SEED";

impl ExperimentConfig {
    /// Parses `path`, resolves relative paths against its directory, applies
    /// the seed override, and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        if let Ok(seeds) = std::env::var(SEED_ENV) {
            cfg.seeds = parse_seed_list(&seeds)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GameSource::File { path } = &mut self.game {
            join(path);
        }
        if let ClassSource::File { path } = &mut self.class {
            join(path);
        }
        join(&mut self.output);
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::Config("n values must be a nonempty list of positive integers".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("solvers must be nonempty".into()));
        }
        if !(self.bonus.delta > 0.0 && self.bonus.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.bonus.delta)));
        }
        if let GameSource::File { path } = &self.game {
            if !path.exists() {
                return Err(Error::Config(format!("game file {} does not exist", path.display())));
            }
        }
        if let ClassSource::File { path } = &self.class {
            if !path.exists() {
                return Err(Error::Config(format!("class file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn load_class(&self) -> Result<StrategyClass> {
        match &self.class {
            ClassSource::Inline(c) => Ok(c.clone()),
            ClassSource::File { path } => {
                StrategyClass::load(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}

pub fn parse_seed_list(text: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = text
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("{SEED_ENV}: {e}")))?;
    if seeds.is_empty() {
        return Err(Error::Config(format!("{SEED_ENV} is empty")));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"game": {"builtin": "matching_pennies"}, "n": [16], "seeds": [1, 2]}"#).unwrap();
        assert_eq!(cfg.solvers, vec![SolverKind::Sbmm]);
        assert_eq!(cfg.bonus.delta, 0.1);
        assert_eq!(cfg.data, DataSpec::Uniform);
        assert_eq!(cfg.class, ClassSource::Inline(StrategyClass::full()));
        assert!(matches!(
            cfg.game,
            GameSource::Builtin {
                builtin: BuiltinGame::MatchingPennies,
                states: 1,
                horizon: 1,
                ..
            }
        ));
        cfg.validate().unwrap();
    }

    #[test]
    fn class_and_file_sources() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"game": {"path": "g.json"}, "n": [4], "seeds": [0],
                "class": {"kind": "deterministic"}, "solvers": ["sbsm", "sbmm_pointwise"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.class, ClassSource::Inline(StrategyClass::deterministic()));
        assert!(matches!(cfg.game, GameSource::File { .. }));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("3, 4,5").unwrap(), vec![3, 4, 5]);
        assert!(parse_seed_list("x").is_err());
    }
}
