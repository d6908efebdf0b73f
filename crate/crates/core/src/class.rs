//! Strategy classes, their L1 covering numbers, projection, and enumeration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_distribution, one_hot, Shape, Strategy, PROB_TOL};

/// Default cap on the number of members `enumerate` will produce.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassKind {
    /// Every Markov strategy.
    Full,
    /// Every deterministic Markov strategy.
    Deterministic,
    /// An explicit list of joint strategies.
    Finite { members: Vec<Strategy> },
    /// Explicit finite subsets of each simplex, `slots[h][s][j]`.
    PerSlot { slots: Vec<Vec<Vec<Vec<Vec<f64>>>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyClass {
    #[serde(flatten)]
    pub kind: ClassKind,
    /// L1 radius of the cover; see [`default_epsilon_cover`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_cover: Option<f64>,
}

/// The feasible set of one `(h, s, j)` slot.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotSet {
    /// The whole simplex.
    Simplex,
    /// Finitely many distributions, deduplicated, in first-seen order.
    Points(Vec<Vec<f64>>),
}

/// `1 / (sum_j A_j * m * H^2 * n^2)`.
pub fn default_epsilon_cover(shape: &Shape, n: usize) -> f64 {
    let sum_a: usize = shape.actions.iter().sum();
    let h = shape.horizon as f64;
    1.0 / (sum_a as f64 * shape.players as f64 * h * h * (n as f64).powi(2))
}

/// Grid resolution `K` for which rounding to multiples of `1/K` stays within
/// `eps` in L1 on the `A`-simplex.
pub fn grid_resolution(actions: usize, eps: f64) -> f64 {
    (actions as f64 / eps).ceil()
}

/// Rounds `p` to the grid `{q : K q integer}` by largest remainders; every
/// coordinate moves by less than `1/K`, so the L1 error is below `A/K`.
pub fn round_to_grid(p: &[f64], k: f64) -> Vec<f64> {
    let scaled: Vec<f64> = p.iter().map(|x| x * k).collect();
    let mut units: Vec<f64> = scaled.iter().map(|x| x.floor()).collect();
    let missing = (k - units.iter().sum::<f64>()).round().max(0.0) as usize;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| (scaled[b] - units[b]).total_cmp(&(scaled[a] - units[a])).then(a.cmp(&b)));
    for &i in order.iter().take(missing) {
        units[i] += 1.0;
    }
    units.iter().map(|u| u / k).collect()
}

/// `log C(K + A - 1, A - 1)`, the number of grid points on the `A`-simplex.
fn log_grid_size(actions: usize, eps: f64) -> f64 {
    let k = grid_resolution(actions, eps);
    (1..actions).map(|i| ((k + i as f64) / i as f64).ln()).sum()
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Greedy L1 cover of `points` in list order: a point becomes a center unless
/// an earlier center is within `eps`.
pub fn greedy_cover(points: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !centers.iter().any(|c| l1(c, p) <= eps) {
            centers.push(p.clone());
        }
    }
    centers
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl StrategyClass {
    pub fn new(kind: ClassKind) -> Self {
        StrategyClass {
            kind,
            epsilon_cover: None,
        }
    }

    pub fn full() -> Self {
        Self::new(ClassKind::Full)
    }

    pub fn deterministic() -> Self {
        Self::new(ClassKind::Deterministic)
    }

    pub fn finite(members: Vec<Strategy>) -> Self {
        Self::new(ClassKind::Finite { members })
    }

    pub fn with_epsilon_cover(mut self, eps: f64) -> Self {
        self.epsilon_cover = Some(eps);
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn epsilon_cover_for(&self, shape: &Shape, n: usize) -> f64 {
        self.epsilon_cover.unwrap_or_else(|| default_epsilon_cover(shape, n))
    }

    /// Checks non-emptiness, member shapes, and slot distributions.
    pub fn validate(&self, shape: &Shape) -> Result<()> {
        match &self.kind {
            ClassKind::Full | ClassKind::Deterministic => Ok(()),
            ClassKind::Finite { members } => {
                if members.is_empty() {
                    return Err(Error::EmptyClass);
                }
                members.iter().try_for_each(|m| m.check_shape(shape))
            }
            ClassKind::PerSlot { slots } => {
                let ok = slots.len() == shape.horizon
                    && slots.iter().all(|by_s| {
                        by_s.len() == shape.states && by_s.iter().all(|by_j| by_j.len() == shape.players)
                    });
                if !ok {
                    return Err(Error::Shape("per-slot class does not match H, S, m".into()));
                }
                for by_s in slots {
                    for by_j in by_s {
                        for (j, dists) in by_j.iter().enumerate() {
                            if dists.is_empty() {
                                return Err(Error::EmptyClass);
                            }
                            for d in dists {
                                if d.len() != shape.actions[j] || !check_distribution(d, PROB_TOL) {
                                    return Err(Error::Probability("invalid per-slot distribution".into()));
                                }
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// The distributions allowed for player `j` at `(h, s)`.
    pub fn slot(&self, shape: &Shape, h: usize, s: usize, j: usize) -> SlotSet {
        let dedup = |list: Vec<Vec<f64>>| {
            let mut out: Vec<Vec<f64>> = Vec::new();
            for d in list {
                if !out.contains(&d) {
                    out.push(d);
                }
            }
            SlotSet::Points(out)
        };
        match &self.kind {
            ClassKind::Full => SlotSet::Simplex,
            ClassKind::Deterministic => SlotSet::Points((0..shape.actions[j]).map(|a| one_hot(shape.actions[j], a)).collect()),
            ClassKind::Finite { members } => dedup(members.iter().map(|m| m.dist(h, s, j).to_vec()).collect()),
            ClassKind::PerSlot { slots } => dedup(slots[h][s][j].clone()),
        }
    }

    /// The cover used for the covering number at one slot; `None` for the
    /// full class, whose cover is the implicit grid of [`round_to_grid`].
    pub fn slot_cover(&self, shape: &Shape, h: usize, s: usize, j: usize, eps: f64) -> Option<Vec<Vec<f64>>> {
        match self.slot(shape, h, s, j) {
            SlotSet::Simplex => None,
            SlotSet::Points(points) if matches!(self.kind, ClassKind::Deterministic) => Some(points),
            SlotSet::Points(points) => Some(greedy_cover(&points, eps)),
        }
    }

    /// `log N(Pi, eps)` with `N = sum_{h,s} prod_j |C(Pi_{h,j}(s), eps)|`.
    pub fn log_covering_number(&self, shape: &Shape, eps: f64) -> Result<f64> {
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::Invalid(format!("epsilon_cover must be positive, got {eps}")));
        }
        self.validate(shape)?;
        let mut per_slot = Vec::with_capacity(shape.horizon * shape.states);
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                let log_prod: f64 = (0..shape.players)
                    .map(|j| match self.slot_cover(shape, h, s, j, eps) {
                        None => log_grid_size(shape.actions[j], eps),
                        Some(cover) => (cover.len() as f64).ln(),
                    })
                    .sum();
                per_slot.push(log_prod);
            }
        }
        Ok(log_sum_exp(&per_slot))
    }

    /// Nearest allowed distribution per slot in L1, ties to the lowest index.
    pub fn project(&self, shape: &Shape, strategy: &Strategy) -> Result<Strategy> {
        strategy.check_shape(shape)?;
        self.validate(shape)?;
        if matches!(self.kind, ClassKind::Full) {
            return Ok(strategy.clone());
        }
        let mut out = strategy.clone();
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for j in 0..shape.players {
                    if let SlotSet::Points(points) = self.slot(shape, h, s, j) {
                        let current = strategy.dist(h, s, j);
                        let mut best = 0;
                        for (i, p) in points.iter().enumerate() {
                            if l1(p, current) < l1(&points[best], current) {
                                best = i;
                            }
                        }
                        out.set_dist(h, s, j, points[best].clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Number of joint strategies `enumerate` produces, saturating at
    /// `u128::MAX`.
    pub fn member_count(&self, shape: &Shape) -> Result<u128> {
        match &self.kind {
            ClassKind::Full => Err(Error::NotEnumerable("the full class is a continuum".into())),
            ClassKind::Finite { members } => Ok(members.len() as u128),
            ClassKind::Deterministic | ClassKind::PerSlot { .. } => Ok(self
                .radices(shape)
                .iter()
                .try_fold(1u128, |acc, r| acc.checked_mul(*r as u128))
                .unwrap_or(u128::MAX)),
        }
    }

    /// Slot sizes in lexicographic `(h, s, j)` order.
    fn radices(&self, shape: &Shape) -> Vec<usize> {
        let mut out = Vec::new();
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for j in 0..shape.players {
                    out.push(match self.slot(shape, h, s, j) {
                        SlotSet::Simplex => 0,
                        SlotSet::Points(p) => p.len(),
                    });
                }
            }
        }
        out
    }

    /// Member `index` of the enumeration order: list order for finite
    /// classes, otherwise a mixed-radix counter over `(h, s, j)` slots with
    /// the last slot varying fastest.
    pub fn member(&self, shape: &Shape, index: u128) -> Result<Strategy> {
        let count = self.member_count(shape)?;
        if index >= count {
            return Err(Error::Invalid(format!("member {index} out of range for a class of {count}")));
        }
        if let ClassKind::Finite { members } = &self.kind {
            return Ok(members[index as usize].clone());
        }
        let radices = self.radices(shape);
        let mut digits = vec![0usize; radices.len()];
        let mut rest = index;
        for (d, r) in digits.iter_mut().zip(&radices).rev() {
            *d = (rest % *r as u128) as usize;
            rest /= *r as u128;
        }
        let mut out = Strategy::uniform(shape);
        let mut k = 0;
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                for j in 0..shape.players {
                    if let SlotSet::Points(points) = self.slot(shape, h, s, j) {
                        out.set_dist(h, s, j, points[digits[k]].clone());
                    }
                    k += 1;
                }
            }
        }
        Ok(out)
    }

    /// Member count after checking it against `cap`.
    pub fn checked_member_count(&self, shape: &Shape, cap: u64) -> Result<u64> {
        self.validate(shape)?;
        let count = self.member_count(shape)?;
        if count > cap as u128 {
            return Err(Error::EnumerationCap { size: count, cap });
        }
        Ok(count as u64)
    }

    /// All members in enumeration order, refusing classes above `cap`.
    pub fn enumerate<'a>(&'a self, shape: &'a Shape, cap: u64) -> Result<impl Iterator<Item = Strategy> + 'a> {
        let count = self.checked_member_count(shape, cap)?;
        Ok((0..count).map(move |i| self.member(shape, i as u128).expect("index below member count")))
    }
}
