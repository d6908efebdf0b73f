//! Strategy-wise and point-wise concentration bonuses, their gradients, and
//! the uncertainty functional.
//!
//! Counts are given per joint action of one `(h, s)` stage, row-major over
//! the players' actions; a joint action is known (in `K_h(s)`) when its count
//! is positive. Distributions are passed one slice per player.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Shape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusMode {
    #[default]
    StrategyWise,
    PointWise,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonusParams {
    pub iota: f64,
    /// `log N(Pi, eps_cover)`.
    pub log_cov: f64,
    /// Tuples per timestep.
    pub n: usize,
    pub horizon: usize,
    /// Number of states; present only for the multi-player bonus, whose
    /// square-root term carries an extra factor `S`.
    pub states: Option<usize>,
    pub delta: f64,
    pub mode: BonusMode,
}

impl BonusParams {
    /// Two-player zero-sum parameters, `iota = 32 log(2 A B S H n / delta)`.
    pub fn zero_sum(shape: &Shape, n: usize, delta: f64, log_cov: f64, mode: BonusMode) -> Result<Self> {
        if shape.players != 2 {
            return Err(Error::Shape("zero-sum bonus needs two players".into()));
        }
        let count = 2.0 * shape.joint_count() as f64 * (shape.states * shape.horizon * n) as f64;
        Self::checked(32.0 * (count / delta).ln(), log_cov, n, shape.horizon, None, delta, mode)
    }

    /// Multi-player parameters, `iota = 32 log(16 prod_j A_j m S H n / delta)`.
    pub fn multi_player(shape: &Shape, n: usize, delta: f64, log_cov: f64, mode: BonusMode) -> Result<Self> {
        let count = 16.0 * shape.joint_count() as f64 * (shape.players * shape.states * shape.horizon * n) as f64;
        Self::checked(
            32.0 * (count / delta).ln(),
            log_cov,
            n,
            shape.horizon,
            Some(shape.states),
            delta,
            mode,
        )
    }

    fn checked(
        iota: f64,
        log_cov: f64,
        n: usize,
        horizon: usize,
        states: Option<usize>,
        delta: f64,
        mode: BonusMode,
    ) -> Result<Self> {
        let p = BonusParams {
            iota,
            log_cov,
            n,
            horizon,
            states,
            delta,
            mode,
        };
        p.validate()?;
        Ok(p)
    }

    /// Replaces the derived `iota`.
    pub fn with_iota(mut self, iota: f64) -> Result<Self> {
        self.iota = iota;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: BonusMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.horizon == 0 {
            return Err(Error::Invalid("bonus needs n >= 1 and H >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.mode != BonusMode::Disabled && !(self.iota > 0.0 && self.iota.is_finite()) {
            return Err(Error::Invalid(format!("iota must be positive, got {}", self.iota)));
        }
        if !(self.log_cov >= 0.0 && self.log_cov.is_finite()) {
            return Err(Error::Invalid(format!("log covering number must be finite and >= 0, got {}", self.log_cov)));
        }
        Ok(())
    }

    fn h(&self) -> f64 {
        self.horizon as f64
    }

    /// Quantity multiplying the weighted sum under the square root:
    /// `log N * iota`, times `S` for the multi-player bonus.
    pub fn sqrt_scale(&self) -> f64 {
        self.log_cov * self.iota * self.states.unwrap_or(1) as f64
    }

    /// The additive `sqrt(iota) / n` term.
    pub fn additive(&self) -> f64 {
        self.iota.sqrt() / self.n as f64
    }
}

/// Product weights `prod_j pi_j(a_j)` of every joint action.
fn joint_weights(dists: &[&[f64]]) -> Vec<f64> {
    let mut w = vec![1.0];
    for d in dists {
        w = w.iter().flat_map(|x| d.iter().map(move |p| x * p)).collect();
    }
    w
}

fn check_stage(counts: &[u64], dists: &[&[f64]]) {
    let jc: usize = dists.iter().map(|d| d.len()).product();
    assert_eq!(counts.len(), jc, "counts do not match the joint action space");
}

/// `sum_{joint in K} w(joint)^2 / n(joint)`.
fn weighted_square_sum(counts: &[u64], w: &[f64]) -> f64 {
    counts
        .iter()
        .zip(w)
        .filter(|(c, _)| **c > 0)
        .map(|(c, w)| w * w / *c as f64)
        .sum()
}

fn strategy_wise(params: &BonusParams, scale: f64, counts: &[u64], dists: &[&[f64]]) -> f64 {
    check_stage(counts, dists);
    let sum = weighted_square_sum(counts, &joint_weights(dists));
    params.h() * (sum * scale).sqrt() + params.additive()
}

/// `H sqrt(sum_K mu(a)^2 nu(b)^2 / n_h(s,a,b) * log N * iota) + sqrt(iota) / n`.
pub fn strategy_bonus_2p(params: &BonusParams, counts: &[u64], mu: &[f64], nu: &[f64]) -> f64 {
    strategy_wise(params, params.log_cov * params.iota, counts, &[mu, nu])
}

/// `H sum_K mu(a) nu(b) sqrt(iota / n_h(s,a,b))`.
pub fn point_bonus_2p(params: &BonusParams, counts: &[u64], mu: &[f64], nu: &[f64]) -> f64 {
    point_wise(params, counts, &[mu, nu])
}

fn point_wise(params: &BonusParams, counts: &[u64], dists: &[&[f64]]) -> f64 {
    check_stage(counts, dists);
    let w = joint_weights(dists);
    let sum: f64 = counts
        .iter()
        .zip(&w)
        .filter(|(c, _)| **c > 0)
        .map(|(c, w)| w * (params.iota / *c as f64).sqrt())
        .sum();
    params.h() * sum
}

/// `H sqrt(sum_K prod_j pi_j(a_j)^2 / n_h(s,a) * S log N iota) + sqrt(iota) / n`.
pub fn strategy_bonus_mp(params: &BonusParams, counts: &[u64], dists: &[&[f64]]) -> Result<f64> {
    let states = params
        .states
        .ok_or_else(|| Error::Invalid("multi-player bonus needs the number of states".into()))?;
    Ok(strategy_wise(params, params.log_cov * params.iota * states as f64, counts, dists))
}

/// The bonus selected by `params.mode`; the strategy-wise variant includes
/// the factor `S` exactly when `params.states` is set.
pub fn stage_bonus(params: &BonusParams, counts: &[u64], dists: &[&[f64]]) -> f64 {
    match params.mode {
        BonusMode::StrategyWise => strategy_wise(params, params.sqrt_scale(), counts, dists),
        BonusMode::PointWise => point_wise(params, counts, dists),
        BonusMode::Disabled => 0.0,
    }
}

/// Gradient of [`stage_bonus`] with respect to player `j`'s distribution.
///
/// For the strategy-wise bonus the derivative of `sqrt(sum)` at coordinate
/// `a` is `sum_{joint: a_j = a} c(joint) pi_j(a) prod_{k != j} pi_k(a_k)^2 /
/// sqrt(sum)`, with `0/0 = 0` where the sum vanishes.
pub fn bonus_gradient(params: &BonusParams, counts: &[u64], dists: &[&[f64]], j: usize) -> Vec<f64> {
    check_stage(counts, dists);
    let nj = dists[j].len();
    let mut grad = vec![0.0; nj];
    if params.mode == BonusMode::Disabled {
        return grad;
    }
    let w = joint_weights(dists);
    let stride: usize = dists[j + 1..].iter().map(|d| d.len()).product();
    let action = |joint: usize| (joint / stride) % nj;
    match params.mode {
        BonusMode::StrategyWise => {
            let sum = weighted_square_sum(counts, &w);
            if sum <= 0.0 {
                return grad;
            }
            let prefactor = params.h() * params.sqrt_scale().sqrt() / sum.sqrt();
            for (joint, (&c, &wt)) in counts.iter().zip(&w).enumerate() {
                let a = action(joint);
                if c > 0 && dists[j][a] != 0.0 {
                    // w^2 / pi_j(a) = pi_j(a) * prod_{k != j} pi_k^2.
                    grad[a] += prefactor * wt * wt / (dists[j][a] * c as f64);
                }
            }
        }
        BonusMode::PointWise => {
            // Linear in pi_j: coefficient is the others' mass times sqrt(iota / n).
            let ones = [1.0];
            let others: Vec<&[f64]> = dists
                .iter()
                .enumerate()
                .map(|(k, d)| if k == j { &ones[..] } else { *d })
                .collect();
            let others = joint_weights(&others);
            for (joint, &c) in counts.iter().enumerate() {
                if c > 0 {
                    let other_joint = (joint / (stride * nj)) * stride + joint % stride;
                    grad[action(joint)] += params.h() * others[other_joint] * (params.iota / c as f64).sqrt();
                }
            }
        }
        BonusMode::Disabled => unreachable!(),
    }
    grad
}

/// Lipschitz constant used to size projected-gradient steps.
///
/// Strategy-wise: `H + H sqrt(scale)`, since every count is at least one and
/// the gradient of the square-root term has norm at most one. Point-wise:
/// `H + H sqrt(iota)`. Disabled: `H`.
pub fn lipschitz_constant(params: &BonusParams) -> f64 {
    let h = params.h();
    match params.mode {
        BonusMode::StrategyWise => h + h * params.sqrt_scale().sqrt(),
        BonusMode::PointWise => h + h * params.iota.sqrt(),
        BonusMode::Disabled => h,
    }
}

/// Joint-strategy mass on joint actions outside `K_h(s)`.
pub fn missing_mass(counts: &[u64], dists: &[&[f64]]) -> f64 {
    check_stage(counts, dists);
    counts
        .iter()
        .zip(joint_weights(dists))
        .filter(|(c, _)| **c == 0)
        .map(|(_, w)| w)
        .sum()
}

/// `b_hat = 2 b + H * (mass outside K)`.
pub fn uncertainty(params: &BonusParams, counts: &[u64], dists: &[&[f64]]) -> f64 {
    2.0 * stage_bonus(params, counts, dists) + params.h() * missing_mass(counts, dists)
}

/// Two-player stage bonus with one player's distribution mixed and the
/// other's a point mass, precomputed for the solver's inner loops.
#[derive(Debug, Clone)]
pub struct ColumnBonus {
    mode: BonusMode,
    prefactor: f64,
    additive: f64,
    mixed_len: usize,
    /// `[pure][mixed]`: `1 / n` on known joint actions, else 0.
    inv_counts: Vec<f64>,
}

impl ColumnBonus {
    /// `counts` is the `rows x cols` stage; `mixed_player` is 0 when the row
    /// player mixes against pure columns, 1 for the reverse.
    pub fn new(params: &BonusParams, counts: &[u64], rows: usize, cols: usize, mixed_player: usize) -> Self {
        assert_eq!(counts.len(), rows * cols);
        let (mixed_len, pure_len) = if mixed_player == 0 { (rows, cols) } else { (cols, rows) };
        let mut inv_counts = vec![0.0; rows * cols];
        for p in 0..pure_len {
            for x in 0..mixed_len {
                let joint = if mixed_player == 0 { x * cols + p } else { p * cols + x };
                if counts[joint] > 0 {
                    inv_counts[p * mixed_len + x] = 1.0 / counts[joint] as f64;
                }
            }
        }
        let h = params.h();
        let (prefactor, additive) = match params.mode {
            BonusMode::StrategyWise => (h * params.sqrt_scale().sqrt(), params.additive()),
            BonusMode::PointWise => (h * params.iota.sqrt(), 0.0),
            BonusMode::Disabled => (0.0, 0.0),
        };
        ColumnBonus {
            mode: params.mode,
            prefactor,
            additive,
            mixed_len,
            inv_counts,
        }
    }

    fn weights(&self, pure: usize) -> &[f64] {
        &self.inv_counts[pure * self.mixed_len..(pure + 1) * self.mixed_len]
    }

    pub fn value(&self, pure: usize, x: &[f64]) -> f64 {
        let c = self.weights(pure);
        match self.mode {
            BonusMode::StrategyWise => {
                let sum: f64 = x.iter().zip(c).map(|(p, c)| c * p * p).sum();
                self.prefactor * sum.sqrt() + self.additive
            }
            BonusMode::PointWise => self.prefactor * x.iter().zip(c).map(|(p, c)| p * c.sqrt()).sum::<f64>(),
            BonusMode::Disabled => 0.0,
        }
    }

    /// Writes the gradient with respect to the mixed distribution into `out`.
    pub fn gradient(&self, pure: usize, x: &[f64], out: &mut [f64]) {
        let c = self.weights(pure);
        match self.mode {
            BonusMode::StrategyWise => {
                let sum: f64 = x.iter().zip(c).map(|(p, c)| c * p * p).sum();
                if sum <= 0.0 {
                    out.fill(0.0);
                } else {
                    let k = self.prefactor / sum.sqrt();
                    for ((o, p), c) in out.iter_mut().zip(x).zip(c) {
                        *o = k * c * p;
                    }
                }
            }
            BonusMode::PointWise => {
                for (o, c) in out.iter_mut().zip(c) {
                    *o = self.prefactor * c.sqrt();
                }
            }
            BonusMode::Disabled => out.fill(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::one_hot;
    use proptest::prelude::*;

    const HALF: &[f64] = &[0.5, 0.5];

    fn params(h: usize, log_cov: f64, iota: f64, n: usize) -> BonusParams {
        BonusParams {
            iota,
            log_cov,
            n,
            horizon: h,
            states: None,
            delta: 0.1,
            mode: BonusMode::StrategyWise,
        }
    }

    #[test]
    fn empty_known_set_leaves_additive_term() {
        let p = params(2, 3.0, 4.0, 10);
        let b = strategy_bonus_2p(&p, &[0; 4], &[0.5, 0.5], &[0.3, 0.7]);
        assert_eq!(b, 0.2);
        assert_eq!(point_bonus_2p(&p, &[0; 4], &[0.5, 0.5], &[0.3, 0.7]), 0.0);
        assert!(bonus_gradient(&p, &[0; 4], &[&[0.5, 0.5], &[0.3, 0.7]], 0).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn single_pair_point_masses() {
        let p = params(3, 2.0, 5.0, 16);
        let counts = [0, 16, 0, 0];
        let b = strategy_bonus_2p(&p, &counts, &[1.0, 0.0], &[0.0, 1.0]);
        let expected = 3.0 * (10.0f64 / 16.0).sqrt() + 5f64.sqrt() / 16.0;
        assert!((b - expected).abs() < 1e-12);
        let bp = point_bonus_2p(&p, &counts, &[1.0, 0.0], &[0.0, 1.0]);
        assert!((bp - 3.0 * (5.0f64 / 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn uniform_two_by_two_closed_form() {
        // log N * iota = 10 with iota = 2.
        let p = params(2, 5.0, 2.0, 4);
        let b = strategy_bonus_2p(&p, &[4; 4], &[0.5, 0.5], &[0.5, 0.5]);
        let first = 2.0 * (4.0 * (1.0 / 16.0) / 4.0 * 10.0f64).sqrt();
        assert!((first - 1.5811388300841898).abs() < 1e-12);
        assert!((b - first - 2f64.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn point_to_strategy_ratio_is_sqrt_ab() {
        // With log N = 1 the first terms differ exactly by sqrt(A B).
        let p = params(2, 1.0, 7.0, 4);
        let first = strategy_bonus_2p(&p, &[4; 4], &[0.5, 0.5], &[0.5, 0.5]) - p.additive();
        let point = point_bonus_2p(&p, &[4; 4], &[0.5, 0.5], &[0.5, 0.5]);
        assert!((point / first - 2.0).abs() < 1e-12);
    }

    #[test]
    fn multi_player_examples() {
        let mut p = params(1, 1.0, 8.0, 8);
        assert!(strategy_bonus_mp(&p, &[0; 8], &[HALF; 3]).is_err());
        p.states = Some(1);
        assert_eq!(strategy_bonus_mp(&p, &[0; 8], &[HALF; 3]).unwrap(), 8f64.sqrt() / 8.0);
        let b = strategy_bonus_mp(&p, &[8; 8], &[HALF; 3]).unwrap();
        assert!((b - (0.125f64.sqrt() + 8f64.sqrt() / 8.0)).abs() < 1e-12);

        let mut single = params(2, 0.5, 3.0, 9);
        single.states = Some(4);
        let b = strategy_bonus_mp(&single, &[9, 0], &[&[1.0, 0.0]]).unwrap();
        assert!((b - (2.0 * (4.0 * 0.5 * 3.0 / 9.0f64).sqrt() + 3f64.sqrt() / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn linear_one_by_one_gradient() {
        // f(nu) = H sqrt(scale / n) * nu(0) on the 1x1 stage.
        let p = params(2, 1.0, 9.0, 4);
        let g = bonus_gradient(&p, &[4], &[&[1.0], &[0.7]], 1);
        assert!((g[0] - 2.0 * (9.0f64 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        let mut p = params(2, 5.0, 2.0, 4);
        assert!((lipschitz_constant(&p) - 8.324555320336759).abs() < 1e-12);
        let t = (lipschitz_constant(&p).powi(2) / 0.01).ceil();
        assert_eq!(t, 6930.0);
        p.log_cov = 0.0;
        assert_eq!(lipschitz_constant(&p), 2.0);
        p.mode = BonusMode::Disabled;
        assert_eq!(lipschitz_constant(&p), 2.0);
    }

    #[test]
    fn uncertainty_examples() {
        let p = params(3, 2.0, 4.0, 10);
        let d: [&[f64]; 2] = [&[0.5, 0.5], &[0.5, 0.5]];
        assert_eq!(uncertainty(&p, &[5; 4], &d), 2.0 * stage_bonus(&p, &[5; 4], &d));
        assert!((uncertainty(&p, &[0; 4], &d) - (2.0 * 0.2 + 3.0)).abs() < 1e-12);
        assert_eq!(missing_mass(&[3, 0, 3, 0], &d), 0.5);
    }

    #[test]
    fn derived_iota() {
        let shape = Shape::new(2, 3, vec![2, 4]).unwrap();
        let p = BonusParams::zero_sum(&shape, 100, 0.1, 1.0, BonusMode::StrategyWise).unwrap();
        assert!((p.iota - 32.0 * (2.0 * 8.0 * 3.0 * 2.0 * 100.0 / 0.1f64).ln()).abs() < 1e-9);
        let q = BonusParams::multi_player(&shape, 100, 0.1, 1.0, BonusMode::StrategyWise).unwrap();
        assert!((q.iota - 32.0 * (16.0 * 8.0 * 2.0 * 3.0 * 2.0 * 100.0 / 0.1f64).ln()).abs() < 1e-9);
        assert_eq!(q.states, Some(3));
    }

    fn simplex(raw: Vec<f64>) -> Vec<f64> {
        let t: f64 = raw.iter().sum();
        raw.iter().map(|x| x / t).collect()
    }

    proptest! {
        #[test]
        fn column_bonus_matches_general_form(
            counts in prop::collection::vec(0u64..5, 6),
            raw in prop::collection::vec(0.01f64..1.0, 3),
            pure in 0usize..2,
            mode in prop_oneof![Just(BonusMode::StrategyWise), Just(BonusMode::PointWise), Just(BonusMode::Disabled)],
        ) {
            let p = params(3, 1.5, 6.0, 5).with_mode(mode);
            let mu = simplex(raw);
            let e = one_hot(2, pure);
            let cb = ColumnBonus::new(&p, &counts, 3, 2, 0);
            let direct = stage_bonus(&p, &counts, &[&mu, &e]);
            prop_assert!((cb.value(pure, &mu) - direct).abs() < 1e-12);
            let mut g = vec![0.0; 3];
            cb.gradient(pure, &mu, &mut g);
            let general = bonus_gradient(&p, &counts, &[&mu, &e], 0);
            for (a, b) in g.iter().zip(&general) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            // Minimizing player mixes over columns against a pure row.
            let nu = simplex(vec![mu[0], mu[1] + mu[2]]);
            let row = one_hot(3, pure);
            let cb = ColumnBonus::new(&p, &counts, 3, 2, 1);
            prop_assert!((cb.value(pure, &nu) - stage_bonus(&p, &counts, &[&row, &nu])).abs() < 1e-12);
        }

        #[test]
        fn more_data_never_increases_bonus(
            counts in prop::collection::vec(1u64..20, 4),
            idx in 0usize..4,
            a in 0.01f64..1.0,
            b in 0.01f64..1.0,
        ) {
            let p = params(2, 1.0, 3.0, 20);
            let mu = [a, 1.0 - a];
            let nu = [b, 1.0 - b];
            let mut more = counts.clone();
            more[idx] += 1;
            prop_assert!(strategy_bonus_2p(&p, &more, &mu, &nu) <= strategy_bonus_2p(&p, &counts, &mu, &nu) + 1e-15);
            prop_assert!(point_bonus_2p(&p, &more, &mu, &nu) <= point_bonus_2p(&p, &counts, &mu, &nu) + 1e-15);
        }
    }
}
