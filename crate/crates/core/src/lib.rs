//! Offline multi-agent reinforcement learning on tabular Markov games.
//!
//! The crate provides exact model-based evaluation ([`value`]), offline
//! datasets and empirical models ([`data`], [`empirical`], [`coverage`]),
//! strategy classes with covering numbers ([`class`]), strategy-wise
//! concentration bonuses ([`bonus`]), the maximin solver for two-player
//! zero-sum games ([`sbmm`]), the surrogate-minimization solver for
//! multi-player general-sum games ([`sbsm`]), brute-force references
//! ([`oracles`]) and the experiment harness behind the `marl` binary
//! ([`experiments`]).

pub mod error;
pub mod game;
pub mod matrix_game;
pub mod value;
pub mod data;
pub mod empirical;
pub mod coverage;
pub mod class;
pub mod bonus;
pub mod simplex;
pub mod report;
pub mod sbmm;
pub mod sbsm;
pub mod oracles;
pub mod experiments;

pub use error::{Error, Result};
pub use game::{GameSpec, RewardKind, Shape, Strategy, ZeroSumView};
