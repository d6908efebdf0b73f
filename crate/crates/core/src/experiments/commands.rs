//! The `generate`, `solve`, `sweep` and `verify` commands.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use crate::bonus::{BonusMode, BonusParams};
use crate::class::{SlotSet, StrategyClass};
use crate::coverage::{empirical_coefficient, population_coefficient, Coverage};
use crate::data::{sample_dataset, warmup_threshold, DataDistribution, OfflineDataset};
use crate::empirical::{build_empirical, EmpiricalModel};
use crate::error::Error;
use crate::game::{GameSpec, Strategy, ZeroSumView};
use crate::matrix_game::{zero_sum_markov_nash, MAX_STAGE_ACTIONS};
use crate::oracles::{self, OracleBudget};
use crate::report::SolveReport;
use crate::sbmm::{solve_sbmm, OptimizerConfig};
use crate::sbsm::{optimistic_best_response, solve_sbsm, surrogate};
use crate::value::{best_response, evaluate, gap};

use super::builtin;
use super::config::{DataSpec, ExperimentConfig, GameSource, SolverKind};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

pub const SWEEP_VERSION: u32 = 1;
pub const SWEEP_COLUMNS: &str = "solver,n,seed,gap,surrogate,C_hat,C_pop,runtime_ms";

/// A command failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(e: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    pub fn solver(e: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_SOLVER,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io(e: std::io::Error) -> CliError {
    CliError::config(format!("i/o error: {e}"))
}

pub fn build_game(cfg: &ExperimentConfig) -> CliResult<GameSpec> {
    match &cfg.game {
        GameSource::Builtin {
            builtin: kind,
            states,
            horizon,
            actions,
            seed,
            reward_kind,
        } => builtin::build(*kind, *states, *horizon, actions.clone(), *seed, *reward_kind).map_err(CliError::config),
        GameSource::File { path } => {
            GameSpec::load(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        }
    }
}

pub fn data_distribution(cfg: &ExperimentConfig, game: &GameSpec) -> CliResult<DataDistribution> {
    match &cfg.data {
        DataSpec::Uniform => Ok(DataDistribution::uniform(game.shape())),
        DataSpec::Explicit { probs } => DataDistribution::from_nested(game.shape(), probs.clone()).map_err(CliError::config),
    }
}

pub fn game_path(out: &Path) -> PathBuf {
    out.join("game.json")
}

pub fn dataset_path(out: &Path, n: usize, seed: u64) -> PathBuf {
    out.join(format!("data_n{n}_seed{seed}.ndjson"))
}

pub fn report_path(out: &Path, solver: SolverKind, n: usize, seed: u64) -> PathBuf {
    out.join(format!("report_{}_n{n}_seed{seed}.json", solver.name()))
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(CliError::config)
}

/// Writes the game and one dataset per `(n, seed)`; prints `p_min` and the
/// warm-up sample size.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &mut dyn Write) -> CliResult<()> {
    let game = build_game(cfg)?;
    let dist = data_distribution(cfg, &game)?;
    fs::create_dir_all(&cfg.output).map_err(io)?;
    game.save(&game_path(&cfg.output)).map_err(CliError::config)?;
    let p_min = dist.p_min();
    writeln!(out, "game {} hash {}", game_path(&cfg.output).display(), game.content_hash()).map_err(io)?;
    writeln!(
        out,
        "p_min {p_min} warmup_n {}",
        warmup_threshold(game.shape(), p_min, cfg.bonus.delta)
    )
    .map_err(io)?;
    for &n in &cfg.n {
        for &seed in &cfg.seeds {
            let ds = sample_dataset(&game, &dist, n, seed).map_err(CliError::config)?;
            let path = dataset_path(&cfg.output, n, seed);
            ds.save(&path).map_err(CliError::config)?;
            writeln!(out, "dataset {}", path.display()).map_err(io)?;
        }
    }
    Ok(())
}

/// Bonus parameters for `solver` at sample size `n`.
pub fn bonus_params(cfg: &ExperimentConfig, solver: SolverKind, game: &GameSpec, class: &StrategyClass, n: usize) -> crate::Result<BonusParams> {
    let shape = game.shape();
    let log_cov = match cfg.bonus.log_cov {
        Some(v) => v,
        None => class.log_covering_number(shape, class.epsilon_cover_for(shape, n))?,
    };
    let params = match solver {
        SolverKind::Sbmm => BonusParams::zero_sum(shape, n, cfg.bonus.delta, log_cov, cfg.bonus.mode)?,
        SolverKind::SbmmPointwise => BonusParams::zero_sum(shape, n, cfg.bonus.delta, log_cov, BonusMode::PointWise)?,
        SolverKind::Sbsm => BonusParams::multi_player(shape, n, cfg.bonus.delta, log_cov, cfg.bonus.mode)?,
    };
    match cfg.bonus.iota {
        Some(iota) => params.with_iota(iota),
        None => Ok(params),
    }
}

/// Runs one solver on one dataset and attaches the exact evaluation.
pub fn run_solver(
    cfg: &ExperimentConfig,
    solver: SolverKind,
    game: &GameSpec,
    class: &StrategyClass,
    model: &EmpiricalModel,
    seed: u64,
) -> crate::Result<SolveReport> {
    let n = model.n();
    let params = bonus_params(cfg, solver, game, class, n)?;
    let s1 = game.initial_state();
    let mut report = match solver {
        SolverKind::Sbmm | SolverKind::SbmmPointwise => {
            ZeroSumView::new(game)?;
            let opt = OptimizerConfig {
                seed,
                ..cfg.optimizer.clone()
            };
            solve_sbmm(model, class, &params, &opt, s1)?
        }
        SolverKind::Sbsm => solve_sbsm(model, class, &params, cfg.enumeration_cap, s1)?,
    };
    report.solver = solver.name().into();
    report.exact = Some(gap(game, &report.strategy)?);
    report.context = Some(json!({
        "game_hash": game.content_hash(),
        "n": n,
        "seed": seed,
    }));
    Ok(report)
}

/// Solves every `(solver, n, seed)` on datasets written by `generate`.
pub fn cmd_solve(cfg: &ExperimentConfig, workers: usize, out: &mut dyn Write) -> CliResult<()> {
    let gp = game_path(&cfg.output);
    if !gp.exists() {
        return Err(CliError::config(format!("{} not found; run generate first", gp.display())));
    }
    let game = GameSpec::load(&gp).map_err(CliError::config)?;
    let class = cfg.load_class().map_err(CliError::config)?;
    let mut jobs = Vec::new();
    for &solver in &cfg.solvers {
        for &n in &cfg.n {
            for &seed in &cfg.seeds {
                jobs.push((solver, n, seed));
            }
        }
    }
    let datasets: Vec<((usize, u64), OfflineDataset)> = cfg
        .n
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&seed| (n, seed)))
        .map(|(n, seed)| {
            let path = dataset_path(&cfg.output, n, seed);
            if !path.exists() {
                return Err(CliError::config(format!("{} not found; run generate first", path.display())));
            }
            let ds = OfflineDataset::load(&path, game.shape()).map_err(CliError::config)?;
            if ds.game_hash != game.content_hash() {
                return Err(CliError::config(format!("{} was generated for a different game", path.display())));
            }
            Ok(((n, seed), ds))
        })
        .collect::<CliResult<_>>()?;
    let reports: Vec<CliResult<(SolverKind, usize, u64, SolveReport)>> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(solver, n, seed)| {
                let ds = &datasets.iter().find(|(k, _)| *k == (n, seed)).expect("dataset loaded").1;
                let model = build_empirical(ds, game.shape()).map_err(CliError::solver)?;
                let report = run_solver(cfg, solver, &game, &class, &model, seed)
                    .map_err(|e| CliError::solver(format!("{} n={n} seed={seed}: {e}", solver.name())))?;
                Ok((solver, n, seed, report))
            })
            .collect()
    });
    for r in reports {
        let (solver, n, seed, report) = r?;
        let path = report_path(&cfg.output, solver, n, seed);
        report.save(&path).map_err(CliError::config)?;
        let gap = report.exact.as_ref().map(|g| g.gap).unwrap_or(f64::NAN);
        writeln!(out, "{} gap {gap} surrogate {}", path.display(), report.surrogate).map_err(io)?;
    }
    Ok(())
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub solver: SolverKind,
    pub n: usize,
    pub seed: u64,
    pub gap: f64,
    pub surrogate: f64,
    pub c_hat: Coverage,
    pub c_pop: Coverage,
    pub runtime_ms: u128,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let num = |x: f64| if self.error.is_some() { "nan".to_string() } else { x.to_string() };
        let cov = |c: &Coverage| if self.error.is_some() { "nan".to_string() } else { c.to_string() };
        format!(
            "{},{},{},{},{},{},{},{}",
            self.solver.name(),
            self.n,
            self.seed,
            num(self.gap),
            num(self.surrogate),
            cov(&self.c_hat),
            cov(&self.c_pop),
            self.runtime_ms
        )
    }
}

/// Strategy whose coverage is reported: the exact Nash equilibrium for
/// zero-sum games small enough for the stage solver, otherwise `None` (the
/// solver output is used instead).
pub fn reference_strategy(game: &GameSpec) -> Option<Strategy> {
    let view = ZeroSumView::new(game).ok()?;
    if view.max_actions() > MAX_STAGE_ACTIONS || view.min_actions() > MAX_STAGE_ACTIONS {
        return None;
    }
    zero_sum_markov_nash(view).ok().map(|(s, _)| s)
}

/// Runs every `(solver, n, seed)` cell in memory and returns rows sorted by
/// solver name, `n`, then seed.
pub fn sweep_rows(cfg: &ExperimentConfig, workers: usize) -> CliResult<Vec<SweepRow>> {
    let game = build_game(cfg)?;
    let dist = data_distribution(cfg, &game)?;
    let class = cfg.load_class().map_err(CliError::config)?;
    let reference = reference_strategy(&game);
    let mut jobs = Vec::new();
    for &solver in &cfg.solvers {
        for &n in &cfg.n {
            for &seed in &cfg.seeds {
                jobs.push((solver, n, seed));
            }
        }
    }
    jobs.sort_by(|a, b| (a.0.name(), a.1, a.2).cmp(&(b.0.name(), b.1, b.2)));
    let rows = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(solver, n, seed)| {
                let start = Instant::now();
                let cell = || -> crate::Result<SweepRow> {
                    let ds = sample_dataset(&game, &dist, n, seed)?;
                    let model = build_empirical(&ds, game.shape())?;
                    let report = run_solver(cfg, solver, &game, &class, &model, seed)?;
                    let probe = reference.as_ref().unwrap_or(&report.strategy);
                    Ok(SweepRow {
                        solver,
                        n,
                        seed,
                        gap: report.exact.as_ref().map(|g| g.gap).unwrap_or(f64::NAN),
                        surrogate: report.surrogate,
                        c_hat: empirical_coefficient(&model, &game, probe)?,
                        c_pop: population_coefficient(&dist, &game, probe)?,
                        runtime_ms: 0,
                        error: None,
                    })
                };
                let mut row = cell().unwrap_or_else(|e| SweepRow {
                    solver,
                    n,
                    seed,
                    gap: f64::NAN,
                    surrogate: f64::NAN,
                    c_hat: Coverage::Infinite,
                    c_pop: Coverage::Infinite,
                    runtime_ms: 0,
                    error: Some(e.to_string()),
                });
                if cfg.record_runtime {
                    row.runtime_ms = start.elapsed().as_millis();
                }
                row
            })
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

/// Writes `sweep.csv` (and `sweep_errors.csv` when cells fail) to the
/// output directory.
pub fn cmd_sweep(cfg: &ExperimentConfig, workers: usize, out: &mut dyn Write) -> CliResult<()> {
    let rows = sweep_rows(cfg, workers)?;
    fs::create_dir_all(&cfg.output).map_err(io)?;
    let mut csv = format!("# marl sweep version {SWEEP_VERSION}\n{SWEEP_COLUMNS}\n");
    let mut errors = String::new();
    for row in &rows {
        csv.push_str(&row.to_csv());
        csv.push('\n');
        if let Some(e) = &row.error {
            errors.push_str(&format!("{},{},{},{}\n", row.solver.name(), row.n, row.seed, e.replace('\n', " ")));
        }
    }
    let path = cfg.output.join("sweep.csv");
    fs::write(&path, csv).map_err(io)?;
    writeln!(out, "{} rows -> {}", rows.len(), path.display()).map_err(io)?;
    if !errors.is_empty() {
        let epath = cfg.output.join("sweep_errors.csv");
        fs::write(&epath, format!("solver,n,seed,error\n{errors}")).map_err(io)?;
        writeln!(out, "{} failed cells -> {}", errors.lines().count(), epath.display()).map_err(io)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

const VERIFY_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VERIFY_TOL * a.abs().max(b.abs()).max(1.0)
}

fn compare(name: &str, reported: f64, recomputed: f64) -> Check {
    Check {
        name: name.into(),
        status: if close(reported, recomputed) {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail: format!("reported {reported}, recomputed {recomputed}"),
    }
}

fn budgeted(name: &str, result: crate::Result<Check>) -> Check {
    match result {
        Ok(c) => c,
        Err(Error::Budget { what, needed, budget }) => Check {
            name: name.into(),
            status: CheckStatus::Skipped,
            detail: format!("{what} needs {needed}, budget {budget}"),
        },
        Err(e) => Check {
            name: name.into(),
            status: CheckStatus::Fail,
            detail: e.to_string(),
        },
    }
}

/// Replays the oracle checks a report admits. The dataset is regenerated from
/// the report's `n` and seed, which reproduces the solver's input exactly.
pub fn verify_report(cfg: &ExperimentConfig, report: &SolveReport, budget: &OracleBudget) -> CliResult<Vec<Check>> {
    let game = build_game(cfg)?;
    let dist = data_distribution(cfg, &game)?;
    let shape = game.shape();
    let s1 = game.initial_state();
    let ctx = report.context.as_ref().ok_or_else(|| CliError::config("report has no context"))?;
    let hash = ctx["game_hash"].as_str().unwrap_or_default();
    if hash != game.content_hash() {
        return Err(CliError::config("report was produced for a different game"));
    }
    let n = ctx["n"].as_u64().ok_or_else(|| CliError::config("report context lacks n"))? as usize;
    let seed = ctx["seed"].as_u64().ok_or_else(|| CliError::config("report context lacks seed"))?;
    report.strategy.check_shape(shape).map_err(CliError::config)?;

    let mut checks = Vec::new();
    let strategy = &report.strategy;
    let exact = gap(&game, strategy).map_err(CliError::solver)?;
    checks.push(match &report.exact {
        Some(g) => compare("exact_gap", g.gap, exact.gap),
        None => Check {
            name: "exact_gap".into(),
            status: CheckStatus::Skipped,
            detail: "report carries no exact gap".into(),
        },
    });

    let values = evaluate(&game, strategy).map_err(CliError::solver)?;
    checks.push(budgeted("value_enumeration", (|| {
        let enumerated = oracles::enumerate_value(&game, strategy, budget)?;
        let worst = (0..shape.players)
            .map(|j| (enumerated[j] - values.v(0, s1, j)).abs())
            .fold(0.0, f64::max);
        Ok(Check {
            name: "value_enumeration".into(),
            status: if worst <= 1e-12 { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: format!("max deviation {worst}"),
        })
    })()));
    checks.push(budgeted("best_response_enumeration", (|| {
        let mut worst = 0.0f64;
        for j in 0..shape.players {
            let (v, _) = oracles::enumerate_best_response(&game, strategy, j, budget)?;
            worst = worst.max((v - best_response(&game, strategy, j)?.value(0, s1)).abs());
        }
        Ok(Check {
            name: "best_response_enumeration".into(),
            status: if worst <= 1e-9 { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: format!("max deviation {worst}"),
        })
    })()));

    let ds = sample_dataset(&game, &dist, n, seed).map_err(CliError::solver)?;
    let model = build_empirical(&ds, shape).map_err(CliError::solver)?;
    let class = cfg.load_class().map_err(CliError::config)?;
    if let Some(diag) = &report.sbmm {
        checks.extend(verify_sbmm(report, diag, &model, &class, budget));
    }
    if report.sbsm.is_some() {
        checks.push(match surrogate(&model, strategy, &report.bonus, s1) {
            Ok((v, _)) => compare("surrogate", report.surrogate, v),
            Err(e) => Check {
                name: "surrogate".into(),
                status: CheckStatus::Fail,
                detail: e.to_string(),
            },
        });
        checks.push(budgeted("optimistic_best_response_enumeration", (|| {
            let mut worst = 0.0f64;
            for j in 0..shape.players {
                let dp = optimistic_best_response(&model, j, strategy, &report.bonus)?.v(0, s1);
                let (en, _) = oracles::enumerate_optimistic_best_response(&model, strategy, j, &report.bonus, s1, budget)?;
                worst = worst.max((dp - en).abs());
            }
            Ok(Check {
                name: "optimistic_best_response_enumeration".into(),
                status: if worst <= 1e-9 { CheckStatus::Pass } else { CheckStatus::Fail },
                detail: format!("max deviation {worst}"),
            })
        })()));
    }
    Ok(checks)
}

fn verify_sbmm(
    report: &SolveReport,
    diag: &crate::report::SbmmDiagnostics,
    model: &EmpiricalModel,
    class: &StrategyClass,
    budget: &OracleBudget,
) -> Vec<Check> {
    let shape = model.shape();
    let (hz, ns) = (shape.horizon, shape.states);
    let (na, nb) = (shape.actions[0], shape.actions[1]);
    let params = &report.bonus;
    let hf = hz as f64;
    let mut worst_stage = 0.0f64;
    let mut worst_clip = 0.0f64;
    let mut grid_shortfall = f64::NEG_INFINITY;
    let mut grid_checked = 0usize;
    let mut shape_ok = diag.lower_values.len() == hz && diag.upper_values.len() == hz && diag.stages.len() == hz * ns;
    if shape_ok {
        shape_ok = diag.lower_values.iter().chain(&diag.upper_values).all(|row| row.len() == ns);
    }
    if !shape_ok {
        return vec![Check {
            name: "stage_values".into(),
            status: CheckStatus::Fail,
            detail: "value tables do not match the game shape".into(),
        }];
    }
    let slack = diag.optimizer.eps_opt + 2.0 * diag.optimizer.lipschitz * budget.grid_step;
    for stage in &diag.stages {
        let (h, s) = (stage.h, stage.s);
        let zeros = vec![0.0; ns];
        let next_lower = if h + 1 < hz { &diag.lower_values[h + 1] } else { &zeros };
        let next_upper = if h + 1 < hz { &diag.upper_values[h + 1] } else { &zeros };
        let counts = model.counts(h, s);
        let r = model.reward_hat(h, 0, s);
        let mut ql = vec![0.0; na * nb];
        let mut qu = vec![0.0; na * nb];
        for joint in 0..na * nb {
            ql[joint] = r[joint] + model.expected_next(h, s, joint, next_lower);
            qu[joint] = r[joint] + model.expected_next(h, s, joint, next_upper) + if counts[joint] > 0 { 0.0 } else { hf };
        }
        let lower_obj = oracles::maximin_objective(&ql, na, nb, counts, params);
        let upper_obj = oracles::negated_minimax_objective(&qu, na, nb, counts, params);
        let mu = report.strategy.dist(h, s, 0);
        let nu = report.strategy.dist(h, s, 1);
        let lo = lower_obj(mu);
        let up = -upper_obj(nu);
        worst_stage = worst_stage.max((lo - stage.lower.value).abs()).max((up - stage.upper.value).abs());
        let cap = (hz - h) as f64;
        worst_clip = worst_clip
            .max((diag.lower_values[h][s] - stage.lower.value.clamp(0.0, cap)).abs())
            .max((diag.upper_values[h][s] - stage.upper.value.clamp(0.0, cap)).abs());
        if matches!(class.slot(shape, h, s, 0), SlotSet::Simplex) && na <= 3 {
            if let Ok((_, g)) = oracles::grid_maximin(&lower_obj, na, budget.grid_step) {
                grid_shortfall = grid_shortfall.max(g - lo - slack);
                grid_checked += 1;
            }
        }
        if matches!(class.slot(shape, h, s, 1), SlotSet::Simplex) && nb <= 3 {
            if let Ok((_, g)) = oracles::grid_maximin(&upper_obj, nb, budget.grid_step) {
                // g is the negated grid minimum.
                grid_shortfall = grid_shortfall.max(up - (-g) - slack);
                grid_checked += 1;
            }
        }
    }
    let status = |ok: bool| if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    let mut checks = vec![
        Check {
            name: "stage_values".into(),
            status: status(worst_stage <= VERIFY_TOL * hf.max(1.0) * 10.0),
            detail: format!("max deviation {worst_stage} over {} stages", diag.stages.len()),
        },
        Check {
            name: "clipped_values".into(),
            status: status(worst_clip <= VERIFY_TOL),
            detail: format!("max deviation {worst_clip}"),
        },
    ];
    checks.push(if grid_checked == 0 {
        Check {
            name: "grid_maximin".into(),
            status: CheckStatus::Skipped,
            detail: "no simplex slot with at most 3 actions".into(),
        }
    } else {
        Check {
            name: "grid_maximin".into(),
            status: status(grid_shortfall <= 0.0),
            detail: format!("{grid_checked} stage problems, worst excess over tolerance {grid_shortfall}"),
        }
    });
    checks
}

/// Verifies one report file and prints one line per check. Fails with
/// [`EXIT_VERIFY`] when any check fails.
pub fn cmd_verify(cfg: &ExperimentConfig, report_file: &Path, out: &mut dyn Write) -> CliResult<Vec<Check>> {
    let report = SolveReport::load(report_file).map_err(|e| CliError::config(format!("{}: {e}", report_file.display())))?;
    let checks = verify_report(cfg, &report, &OracleBudget::default())?;
    for c in &checks {
        writeln!(out, "{c}").map_err(io)?;
    }
    let failed = checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
    let skipped = checks.iter().filter(|c| c.status == CheckStatus::Skipped).count();
    writeln!(out, "{} checks, {failed} failed, {skipped} skipped", checks.len()).map_err(io)?;
    if failed > 0 {
        return Err(CliError {
            code: EXIT_VERIFY,
            message: format!("{failed} verification checks failed"),
        });
    }
    Ok(checks)
}
