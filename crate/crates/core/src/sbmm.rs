//! Pessimistic maximin solver for two-player zero-sum Markov games.
//!
//! Backward induction over the empirical model: at every `(h, s)` the max
//! player solves `max_mu min_b [sum_a mu(a) Q_lower(a, b) - b_h(mu, e_b)]` and
//! the min player solves `min_nu max_a [sum_b nu(b) Q_upper(a, b) + b_h(e_a,
//! nu)]`, where `Q_upper` adds `H` on joint actions outside the data. The
//! output pairs the max player's pessimistic strategy with the min player's
//! optimistic one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonus::{lipschitz_constant, stage_bonus, uncertainty, BonusParams, ColumnBonus};
use crate::class::{SlotSet, StrategyClass};
use crate::empirical::EmpiricalModel;
use crate::error::{check_finite, Error, Result};
use crate::game::Strategy;
use crate::matrix_game::{solve_stage_nash_zero_sum, MAX_STAGE_ACTIONS};
use crate::report::{Certificate, OptimizerEcho, SbmmDiagnostics, SolveReport, StageReport, StopReason};
use crate::simplex::project_into;

pub use crate::simplex::project_simplex;

/// Projected subgradient settings; unset fields take their defaults from the
/// bonus parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Target suboptimality; defaults to `1 / sqrt(n)`.
    #[serde(default)]
    pub eps_opt: Option<f64>,
    /// Iteration cap; defaults to `ceil(L^2 / eps_opt^2)`.
    #[serde(default)]
    pub max_iters: Option<u64>,
    /// Echoed into reports. Iterations start at the uniform distribution, so
    /// the seed does not change results.
    #[serde(default)]
    pub seed: u64,
}

/// Fully resolved settings for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedOptimizer {
    pub eps_opt: f64,
    pub max_iters: u64,
    pub lipschitz: f64,
    /// Fixed step `sqrt(2) / (L sqrt(T))`.
    pub step: f64,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn resolve(&self, params: &BonusParams) -> Result<ResolvedOptimizer> {
        let eps_opt = self.eps_opt.unwrap_or(1.0 / (params.n as f64).sqrt());
        if !(eps_opt > 0.0 && eps_opt.is_finite()) {
            return Err(Error::Invalid(format!("eps_opt must be positive, got {eps_opt}")));
        }
        let lipschitz = lipschitz_constant(params);
        let max_iters = match self.max_iters {
            Some(0) => return Err(Error::Invalid("max_iters must be at least 1".into())),
            Some(t) => t,
            None => {
                let t = (lipschitz * lipschitz / (eps_opt * eps_opt)).ceil();
                if t >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    (t as u64).max(1)
                }
            }
        };
        Ok(ResolvedOptimizer {
            eps_opt,
            max_iters,
            lipschitz,
            step: std::f64::consts::SQRT_2 / (lipschitz * (max_iters as f64).sqrt()),
            seed: self.seed,
        })
    }
}

impl ResolvedOptimizer {
    pub fn echo(&self) -> OptimizerEcho {
        OptimizerEcho {
            eps_opt: self.eps_opt,
            max_iters: self.max_iters,
            lipschitz: self.lipschitz,
            step: self.step,
            seed: self.seed,
        }
    }
}

/// Solution of one stage problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    /// The optimizing player's distribution.
    pub strategy: Vec<f64>,
    /// The opponent's pure best response to it, lowest index on ties.
    pub response: usize,
    /// Objective at `strategy`, unclipped.
    pub value: f64,
    pub certificate: Certificate,
}

/// `max_x min_k f_k(x)` over a slot, with concave pieces
/// `f_k(x) = <lin_k, x> - bonus_k(x)`.
struct PiecewiseProblem {
    /// `[k][x]`
    lin: Vec<f64>,
    pieces: usize,
    dim: usize,
    bonus: ColumnBonus,
}

impl PiecewiseProblem {
    fn piece(&self, k: usize, x: &[f64]) -> f64 {
        let row = &self.lin[k * self.dim..(k + 1) * self.dim];
        row.iter().zip(x).map(|(l, p)| l * p).sum::<f64>() - self.bonus.value(k, x)
    }

    /// Minimum piece and its lowest minimizing index.
    fn evaluate(&self, x: &[f64]) -> (f64, usize) {
        let mut best = (self.piece(0, x), 0);
        for k in 1..self.pieces {
            let v = self.piece(k, x);
            if v < best.0 {
                best = (v, k);
            }
        }
        best
    }

    /// Supergradient of piece `k` at `x`.
    fn supergradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
        self.bonus.gradient(k, x, out);
        let row = &self.lin[k * self.dim..(k + 1) * self.dim];
        for (o, l) in out.iter_mut().zip(row) {
            *o = l - *o;
        }
    }

    /// Upper bound on `max_y min_k f_k(y)` from the tangent planes at `z`:
    /// each concave piece lies below its linearization, so the value of the
    /// linearized matrix game bounds the true optimum.
    fn upper_bound(&self, z: &[f64]) -> Result<f64> {
        let mut g = vec![0.0; self.dim];
        let mut m = vec![0.0; self.dim * self.pieces];
        for k in 0..self.pieces {
            self.supergradient(k, z, &mut g);
            let base = self.piece(k, z) - g.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            for (a, ga) in g.iter().enumerate() {
                m[a * self.pieces + k] = base + ga;
            }
        }
        Ok(solve_stage_nash_zero_sum(&m, self.dim, self.pieces)?.value)
    }
}

fn solve_piecewise(problem: &PiecewiseProblem, slot: &SlotSet, opt: &ResolvedOptimizer) -> Result<StageSolution> {
    let dim = problem.dim;
    let finish = |x: Vec<f64>, iterations: u64, bound: f64, stop: StopReason| {
        let (value, response) = problem.evaluate(&x);
        StageSolution {
            strategy: x,
            response,
            value,
            certificate: Certificate {
                iterations,
                value,
                bound,
                stop,
            },
        }
    };
    match slot {
        SlotSet::Points(points) => {
            if points.is_empty() {
                return Err(Error::EmptyClass);
            }
            let mut best = 0;
            let mut best_v = problem.evaluate(&points[0]).0;
            for (i, p) in points.iter().enumerate().skip(1) {
                let v = problem.evaluate(p).0;
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            Ok(finish(points[best].clone(), points.len() as u64, best_v, StopReason::Exact))
        }
        SlotSet::Simplex if dim == 1 => {
            let v = problem.evaluate(&[1.0]).0;
            Ok(finish(vec![1.0], 0, v, StopReason::Exact))
        }
        SlotSet::Simplex => pgd(problem, opt).map(|(x, iters, bound, stop)| finish(x, iters, bound, stop)),
    }
}

/// Projected subgradient ascent from the uniform distribution with a fixed
/// step and uniform iterate averaging. Candidates are the averaged iterate and
/// the best iterate seen; the run stops once the tangent-plane bound certifies
/// the best candidate to within `eps_opt`, when the averaged iterate improves
/// by less than `eps_opt / 10` over a window of `ceil(T / 10)` iterations, or
/// after `T` iterations.
fn pgd(problem: &PiecewiseProblem, opt: &ResolvedOptimizer) -> Result<(Vec<f64>, u64, f64, StopReason)> {
    let dim = problem.dim;
    let mut x = vec![1.0 / dim as f64; dim];
    let mut sum = vec![0.0; dim];
    let mut avg = x.clone();
    let mut g = vec![0.0; dim];
    let mut moved = vec![0.0; dim];
    let mut scratch = Vec::with_capacity(dim);

    let mut best_x = x.clone();
    let mut best_v = problem.evaluate(&x).0;
    let mut bound = problem.upper_bound(&x)?;
    if bound - best_v <= opt.eps_opt {
        return Ok((best_x, 0, bound, StopReason::Certified));
    }
    let window = opt.max_iters.div_ceil(10).max(1);
    let mut window_value = best_v;
    let mut next_check: u64 = 16;

    for t in 1..=opt.max_iters {
        let (v, k) = problem.evaluate(&x);
        if v > best_v {
            best_v = v;
            best_x.copy_from_slice(&x);
        }
        problem.supergradient(k, &x, &mut g);
        for ((m, xi), gi) in moved.iter_mut().zip(&x).zip(&g) {
            *m = xi + opt.step * gi;
        }
        project_into(&moved, &mut scratch, &mut x);
        for (s, xi) in sum.iter_mut().zip(&x) {
            *s += xi;
        }

        let at_window = t % window == 0;
        if t == next_check || at_window || t == opt.max_iters {
            for (a, s) in avg.iter_mut().zip(&sum) {
                *a = s / t as f64;
            }
            let avg_v = problem.evaluate(&avg).0;
            if avg_v > best_v {
                best_v = avg_v;
                best_x.copy_from_slice(&avg);
            }
            let (last_v, _) = problem.evaluate(&x);
            if last_v > best_v {
                best_v = last_v;
                best_x.copy_from_slice(&x);
            }
            if t == next_check {
                bound = bound.min(problem.upper_bound(&best_x)?);
                // Geometric spacing keeps certification cheap relative to
                // the iterations between checks.
                next_check = t + (t / 4).max(16);
            }
            if bound - best_v <= opt.eps_opt {
                return Ok((best_x, t, bound, StopReason::Certified));
            }
            if at_window {
                if avg_v - window_value < opt.eps_opt / 10.0 {
                    return Ok((best_x, t, bound, StopReason::Stalled));
                }
                window_value = avg_v;
            }
        }
    }
    Ok((best_x, opt.max_iters, bound, StopReason::MaxIters))
}

fn check_stage(q: &[f64], rows: usize, cols: usize, counts: &[u64]) -> Result<()> {
    if q.len() != rows * cols || counts.len() != rows * cols {
        return Err(Error::Shape("stage matrix does not match action counts".into()));
    }
    if rows > MAX_STAGE_ACTIONS || cols > MAX_STAGE_ACTIONS {
        return Err(Error::Shape(format!("stage solver supports at most {MAX_STAGE_ACTIONS} actions per player")));
    }
    check_finite(q, "stage Q values")
}

/// `max_{mu in slot} min_b [sum_a mu(a) q(a, b) - b_h(s, mu, e_b)]` for the
/// row-major `rows x cols` matrix `q_lower`.
pub fn maximin_stage(
    q_lower: &[f64],
    rows: usize,
    cols: usize,
    counts: &[u64],
    slot: &SlotSet,
    params: &BonusParams,
    opt: &ResolvedOptimizer,
) -> Result<StageSolution> {
    check_stage(q_lower, rows, cols, counts)?;
    let mut lin = vec![0.0; rows * cols];
    for a in 0..rows {
        for b in 0..cols {
            lin[b * rows + a] = q_lower[a * cols + b];
        }
    }
    let problem = PiecewiseProblem {
        lin,
        pieces: cols,
        dim: rows,
        bonus: ColumnBonus::new(params, counts, rows, cols, 0),
    };
    solve_piecewise(&problem, slot, opt)
}

/// `min_{nu in slot} max_a [sum_b nu(b) q(a, b) + b_h(s, e_a, nu)]`, solved
/// as the maximin of the negated objective. The returned value and bound are
/// for the minimization (the bound is a lower bound).
pub fn minimax_stage(
    q_upper: &[f64],
    rows: usize,
    cols: usize,
    counts: &[u64],
    slot: &SlotSet,
    params: &BonusParams,
    opt: &ResolvedOptimizer,
) -> Result<StageSolution> {
    check_stage(q_upper, rows, cols, counts)?;
    let problem = PiecewiseProblem {
        lin: q_upper.iter().map(|q| -q).collect(),
        pieces: rows,
        dim: cols,
        bonus: ColumnBonus::new(params, counts, rows, cols, 1),
    };
    let mut sol = solve_piecewise(&problem, slot, opt)?;
    sol.value = -sol.value;
    sol.certificate.value = -sol.certificate.value;
    sol.certificate.bound = -sol.certificate.bound;
    Ok(sol)
}

/// Value tables of one SBMM run; `[h * S + s]` indexing, `h` in `0..=H`.
#[derive(Debug, Clone, PartialEq)]
pub struct PessimisticTables {
    pub states: usize,
    pub lower_v: Vec<f64>,
    pub upper_v: Vec<f64>,
    /// `[h][s][joint]`
    pub lower_q: Vec<f64>,
    pub upper_q: Vec<f64>,
    /// Min player's best response to the max player's pessimistic strategy.
    pub nu_lower: Vec<usize>,
    /// Max player's best response to the min player's optimistic strategy.
    pub mu_upper: Vec<usize>,
}

/// Full SBMM output before packaging into a report.
#[derive(Debug, Clone)]
pub struct SbmmOutput {
    /// `(mu_lower, nu_upper)`.
    pub strategy: Strategy,
    pub tables: PessimisticTables,
    pub stages: Vec<StageReport>,
    pub optimizer: ResolvedOptimizer,
}

/// Runs the backward induction and returns the raw tables.
pub fn run_sbmm(
    model: &EmpiricalModel,
    class: &StrategyClass,
    params: &BonusParams,
    opt: &OptimizerConfig,
) -> Result<SbmmOutput> {
    let shape = model.shape();
    if shape.players != 2 {
        return Err(Error::Shape(format!("SBMM needs two players, got {}", shape.players)));
    }
    class.validate(shape)?;
    params.validate()?;
    let opt = opt.resolve(params)?;
    let (hz, ns) = (shape.horizon, shape.states);
    let (na, nb) = (shape.actions[0], shape.actions[1]);
    let jc = na * nb;
    let hf = hz as f64;

    let mut lower_v = vec![0.0; (hz + 1) * ns];
    let mut upper_v = vec![0.0; (hz + 1) * ns];
    let mut lower_q = vec![0.0; hz * ns * jc];
    let mut upper_q = vec![0.0; hz * ns * jc];
    let mut nu_lower = vec![0; hz * ns];
    let mut mu_upper = vec![0; hz * ns];
    let mut strategy = Strategy::uniform(shape);
    let mut stages = Vec::with_capacity(hz * ns);

    for h in (0..hz).rev() {
        let cap = (hz - h) as f64;
        let next_lower = &lower_v[(h + 1) * ns..(h + 2) * ns];
        let next_upper = &upper_v[(h + 1) * ns..(h + 2) * ns];
        let solved: Vec<Result<_>> = (0..ns)
            .into_par_iter()
            .map(|s| {
                let counts = model.counts(h, s);
                let r = model.reward_hat(h, 0, s);
                let mut ql = vec![0.0; jc];
                let mut qu = vec![0.0; jc];
                for joint in 0..jc {
                    let known = counts[joint] > 0;
                    ql[joint] = r[joint] + model.expected_next(h, s, joint, next_lower);
                    qu[joint] = r[joint] + model.expected_next(h, s, joint, next_upper) + if known { 0.0 } else { hf };
                }
                let lo = maximin_stage(&ql, na, nb, counts, &class.slot(shape, h, s, 0), params, &opt)?;
                let up = minimax_stage(&qu, na, nb, counts, &class.slot(shape, h, s, 1), params, &opt)?;
                Ok((ql, qu, lo, up))
            })
            .collect();
        let mut row_reports = Vec::with_capacity(ns);
        for (s, res) in solved.into_iter().enumerate() {
            let (ql, qu, lo, up) = res?;
            let idx = h * ns + s;
            lower_v[idx] = lo.value.clamp(0.0, cap);
            upper_v[idx] = up.value.clamp(0.0, cap);
            lower_q[idx * jc..(idx + 1) * jc].copy_from_slice(&ql);
            upper_q[idx * jc..(idx + 1) * jc].copy_from_slice(&qu);
            nu_lower[idx] = lo.response;
            mu_upper[idx] = up.response;
            let counts = model.counts(h, s);
            let pair: [&[f64]; 2] = [&lo.strategy, &up.strategy];
            row_reports.push(StageReport {
                h,
                s,
                lower: lo.certificate.clone(),
                upper: up.certificate.clone(),
                lower_response: lo.response,
                upper_response: up.response,
                bonus: stage_bonus(params, counts, &pair),
                uncertainty: uncertainty(params, counts, &pair),
            });
            strategy.set_dist(h, s, 0, lo.strategy);
            strategy.set_dist(h, s, 1, up.strategy);
        }
        stages.splice(0..0, row_reports);
    }
    Ok(SbmmOutput {
        strategy,
        tables: PessimisticTables {
            states: ns,
            lower_v,
            upper_v,
            lower_q,
            upper_q,
            nu_lower,
            mu_upper,
        },
        stages,
        optimizer: opt,
    })
}

/// Runs SBMM and packages the output as a report. The surrogate is the width
/// `V_upper_1(s_1) - V_lower_1(s_1)` at the initial state.
pub fn solve_sbmm(
    model: &EmpiricalModel,
    class: &StrategyClass,
    params: &BonusParams,
    opt: &OptimizerConfig,
    initial_state: usize,
) -> Result<SolveReport> {
    let out = run_sbmm(model, class, params, opt)?;
    let ns = out.tables.states;
    let hz = model.shape().horizon;
    let rows = |v: &[f64]| (0..hz).map(|h| v[h * ns..(h + 1) * ns].to_vec()).collect::<Vec<_>>();
    Ok(SolveReport {
        solver: "sbmm".into(),
        surrogate: out.tables.upper_v[initial_state] - out.tables.lower_v[initial_state],
        strategy: out.strategy,
        bonus: params.clone(),
        sbmm: Some(SbmmDiagnostics {
            optimizer: out.optimizer.echo(),
            lower_values: rows(&out.tables.lower_v),
            upper_values: rows(&out.tables.upper_v),
            stages: out.stages,
        }),
        sbsm: None,
        exact: None,
        context: None,
    })
}
