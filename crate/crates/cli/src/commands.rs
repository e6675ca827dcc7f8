use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use seqstop::io::{boundary_csv, paths_csv, read_value_csv, value_csv, write_atomic};
use seqstop::regions::BoundaryCurve;
use seqstop::sde::{evaluate_stopping_rule, measure_change_value, simulate, BoxRule, MCEstimate, StopRule};
use seqstop::solver::{discretize_generator, solve_1d_st, solve_obstacle, ObstacleSolution};
use seqstop::suite::{common_checks, primary_boundary, solve_problem, verify_problem, SolvedProblem, DEFAULT_NODES_1D};
use seqstop::{build_grid, build_penalty, CheckReport, ModelParams, PenaltyPair, SolveReport, StoppingMask, ValueField};

use crate::config::{Estimator, ProblemDef, RuleKind, RunConfig};
use crate::custom::load_penalty;

/// Why a command did not succeed; maps onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Usage, configuration, input or I/O problems.
    Config(String),
    NonConvergence(String),
    /// Number of failed checks.
    Checks(usize),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::NonConvergence(_) => 2,
            Failure::Checks(n) => (2 + *n).min(255) as u8,
        }
    }
}

impl From<seqstop::Error> for Failure {
    fn from(e: seqstop::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Wall-clock data. The only non-reproducible field of any artifact.
#[derive(Debug, Serialize)]
pub struct RunInfo {
    pub started_unix_s: f64,
    pub wall_time_s: f64,
}

pub struct Clock {
    started: SystemTime,
    timer: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Self { started: SystemTime::now(), timer: Instant::now() }
    }

    pub fn info(&self) -> RunInfo {
        RunInfo {
            started_unix_s: self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
            wall_time_s: self.timer.elapsed().as_secs_f64(),
        }
    }
}

pub struct Ctx {
    pub quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Config(e.to_string()))?;
    text.push('\n');
    write(dir, name, text.as_bytes())
}

/// A solved problem of either flavour.
struct Solved {
    params: ModelParams,
    penalty: PenaltyPair,
    solution: ObstacleSolution,
    catalog: Option<SolvedProblem>,
}

impl Solved {
    fn report(&self) -> &SolveReport {
        &self.solution.report
    }

    fn axis_thresholds(&self) -> Vec<f64> {
        self.catalog.as_ref().map(|s| s.axis_thresholds()).unwrap_or_default()
    }

    fn boundary(&self) -> Result<Option<BoundaryCurve>, Failure> {
        Ok(match &self.catalog {
            Some(s) => primary_boundary(s)?,
            None => None,
        })
    }
}

fn solve_run(cfg: &RunConfig, check_assumption: bool) -> Result<Solved, Failure> {
    let mut opts = cfg.solver.clone();
    opts.check_assumption = check_assumption;
    match &cfg.problem {
        ProblemDef::Catalog { spec } => {
            let s = solve_problem(spec, cfg.nodes, &opts)?;
            Ok(Solved { params: spec.params.clone(), penalty: s.penalty.clone(), solution: s.solution.clone(), catalog: Some(s) })
        }
        ProblemDef::Custom { params, penalty_table } => {
            let penalty = load_penalty(penalty_table, params.n)?;
            let grid = build_grid(params.n, cfg.nodes)?;
            let gen = discretize_generator(params, &grid)?;
            let solution = solve_obstacle(&gen, &penalty, &opts)?;
            Ok(Solved { params: params.clone(), penalty, solution, catalog: None })
        }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    config: &'a RunConfig,
    report: &'a SolveReport,
    axis_thresholds: Vec<f64>,
    lambda_defaulted: bool,
    files: Vec<String>,
    run_info: RunInfo,
}

pub fn cmd_solve(cfg: &RunConfig, ctx: &Ctx) -> Result<(), Failure> {
    let clock = Clock::start();
    let solved = solve_run(cfg, true)?;
    let prov = cfg.provenance();
    let mut files = vec!["value.csv".to_string()];
    write(&cfg.out_dir, "value.csv", value_csv(&solved.solution.field, &solved.penalty, &solved.solution.mask, &prov)?.as_bytes())?;
    if let Some(b) = solved.boundary()? {
        write(&cfg.out_dir, "boundary.csv", boundary_csv(&b, &prov)?.as_bytes())?;
        files.push("boundary.csv".into());
    }
    let report = solved.report();
    let out = SolveOutput { config: cfg, report, axis_thresholds: solved.axis_thresholds(), lambda_defaulted: cfg.lambda_defaulted, files, run_info: clock.info() };
    write_json(&cfg.out_dir, "solve_report.json", &out)?;
    ctx.say(format!(
        "{}: residual {:.2e} after {} iterations, {}/{} stopping nodes -> {}",
        cfg.label,
        report.residual_norm,
        report.iterations,
        report.active_nodes,
        report.total_nodes,
        cfg.out_dir.display()
    ));
    if !report.converged {
        return Err(Failure::NonConvergence(format!("{}: residual {:.3e} above tol {:.1e}", cfg.label, report.residual_norm, report.tol)));
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    config: &'a RunConfig,
    label: &'a str,
    lambda_defaulted: bool,
    nodes: usize,
    solve: &'a SolveReport,
    axis_thresholds: Vec<f64>,
    checks: Vec<CheckReport>,
    failed: usize,
    run_info: RunInfo,
}

/// Returns the number of failed checks.
pub fn cmd_verify(cfg: &RunConfig, ctx: &Ctx) -> Result<usize, Failure> {
    let clock = Clock::start();
    let solved = solve_run(cfg, false)?;
    let mut checks = match &solved.catalog {
        Some(s) => verify_problem(s, &cfg.verify)?,
        None => common_checks(&solved.params, &solved.penalty, &solved.solution, &[], &cfg.verify)?,
    };
    checks.retain(|c| cfg.wants_check(&c.name));
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in checks.iter().filter(|c| !c.passed) {
        ctx.say(format!("{}: FAIL {} (worst {:.3e}, tol {:.1e}, {} violations)", cfg.label, c.name, c.worst_violation, c.tolerance, c.violations));
    }
    ctx.say(format!("{}: {} checks, {} failed", cfg.label, checks.len(), failed));
    let out = VerifyOutput {
        config: cfg,
        label: &cfg.label,
        lambda_defaulted: cfg.lambda_defaulted,
        nodes: cfg.nodes,
        solve: solved.report(),
        axis_thresholds: solved.axis_thresholds(),
        checks,
        failed,
        run_info: clock.info(),
    };
    write_json(&cfg.out_dir, "manifest.json", &out)?;
    Ok(failed)
}

#[derive(Serialize)]
struct PriorEstimate {
    prior: Vec<f64>,
    physical: Option<MCEstimate>,
    measure_change: Option<MCEstimate>,
    /// `physical − measure_change` when both ran.
    difference: Option<f64>,
    combined_std_error: Option<f64>,
    /// Value from the mask file, interpolated at the prior.
    solver_value: Option<f64>,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    config: &'a RunConfig,
    rule: RuleKind,
    estimates: Vec<PriorEstimate>,
    files: Vec<String>,
    run_info: RunInfo,
}

fn penalty_for(cfg: &RunConfig) -> Result<PenaltyPair, Failure> {
    Ok(match &cfg.problem {
        ProblemDef::Catalog { spec } => {
            let inner = match spec.st3_inner_cost() {
                Some(cost) => Some(solve_1d_st(spec.params.mu[0], cost, &build_grid(1, DEFAULT_NODES_1D)?)?),
                None => None,
            };
            build_penalty(spec, inner.as_ref())?
        }
        ProblemDef::Custom { params, penalty_table } => load_penalty(penalty_table, params.n)?,
    })
}

pub fn cmd_simulate(cfg: &RunConfig, ctx: &Ctx) -> Result<(), Failure> {
    let clock = Clock::start();
    let params = cfg.problem.params();
    let penalty = penalty_for(cfg)?;
    let (rule, values): (Box<dyn StopRule>, Option<ValueField>) = match cfg.simulate.rule {
        RuleKind::Immediate => (Box::new(|_: &[f64]| true), None),
        RuleKind::Box => {
            let [lo, hi] = cfg.simulate.r#box.expect("validated box");
            (Box::new(BoxRule { lo: vec![lo; params.n], hi: vec![hi; params.n] }), None)
        }
        RuleKind::Mask => {
            let path = cfg.simulate.mask.as_ref().ok_or_else(|| Failure::Config("simulate.mask is required for rule = \"mask\"".into()))?;
            let grid = build_grid(params.n, cfg.nodes)?;
            let (mask, values): (StoppingMask, _) = read_value_csv(path, Some(&grid)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            (Box::new(mask), values)
        }
    };
    let priors = cfg.simulate.priors.clone().unwrap_or_else(|| vec![params.prior.clone()]);
    let mut estimates = Vec::new();
    for prior in &priors {
        let p = params.with_prior(prior.clone());
        let physical = match cfg.simulate.estimator {
            Estimator::Physical | Estimator::Both => Some(evaluate_stopping_rule(&p, &penalty, rule.as_ref(), &cfg.sim)?),
            Estimator::MeasureChange => None,
        };
        let measure_change = match cfg.simulate.estimator {
            Estimator::MeasureChange | Estimator::Both => Some(measure_change_value(&p, &penalty, rule.as_ref(), &cfg.sim)?),
            Estimator::Physical => None,
        };
        let (difference, combined_std_error) = match (&physical, &measure_change) {
            (Some(a), Some(b)) => (Some(a.mean - b.mean), Some(a.std_error.hypot(b.std_error))),
            _ => (None, None),
        };
        let solver_value = values.as_ref().map(|f| f.evaluate_coords(prior)).transpose()?;
        for (name, e) in [("P", &physical), ("P~", &measure_change)] {
            if let Some(e) = e {
                ctx.say(format!(
                    "{} {name} at {prior:?}: {:.6} ± {:.6} (truncated {:.2}%){}",
                    cfg.label,
                    e.mean,
                    e.std_error,
                    100.0 * e.truncation_fraction,
                    if e.unreliable { " UNRELIABLE" } else { "" }
                ));
            }
        }
        estimates.push(PriorEstimate { prior: prior.clone(), physical, measure_change, difference, combined_std_error, solver_value });
    }
    let mut files = Vec::new();
    if cfg.simulate.record_paths > 0 {
        let mut sim = cfg.sim.clone();
        sim.n_paths = cfg.simulate.record_paths;
        let bundle = simulate(&params.with_prior(priors[0].clone()), &sim)?;
        write(&cfg.out_dir, "paths.csv", paths_csv(&bundle, &cfg.provenance())?.as_bytes())?;
        files.push("paths.csv".to_string());
    }
    write_json(&cfg.out_dir, "estimate.json", &SimulateOutput { config: cfg, rule: cfg.simulate.rule, estimates, files, run_info: clock.info() })?;
    Ok(())
}

#[derive(Serialize)]
struct ReportEntry {
    path: String,
    label: String,
    checks: usize,
    failed: usize,
    failed_checks: Vec<String>,
}

#[derive(Serialize)]
struct ReportOutput {
    manifests: Vec<ReportEntry>,
    total_checks: usize,
    total_failed: usize,
    run_info: RunInfo,
}

fn find_manifests(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), Failure> {
    if path.is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let entries = fs::read_dir(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut entries: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_manifests(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "manifest.json") {
            out.push(p);
        }
    }
    Ok(())
}

/// Merges verification manifests; returns the total number of failed checks.
pub fn cmd_report(inputs: &[PathBuf], out_dir: &Path, ctx: &Ctx) -> Result<usize, Failure> {
    let clock = Clock::start();
    let mut paths = Vec::new();
    for p in inputs {
        find_manifests(p, &mut paths)?;
    }
    if paths.is_empty() {
        return Err(Failure::Config("no manifest.json found in the given inputs".into()));
    }
    let mut manifests = Vec::new();
    for p in &paths {
        let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        let checks = v["checks"].as_array().ok_or_else(|| Failure::Config(format!("{} is not a verification manifest", p.display())))?;
        let failed_checks: Vec<String> = checks.iter().filter(|c| c["passed"] == false).filter_map(|c| c["name"].as_str().map(String::from)).collect();
        manifests.push(ReportEntry {
            path: p.display().to_string(),
            label: v["label"].as_str().unwrap_or("").to_string(),
            checks: checks.len(),
            failed: failed_checks.len(),
            failed_checks,
        });
    }
    let total_checks = manifests.iter().map(|m| m.checks).sum();
    let total_failed = manifests.iter().map(|m| m.failed).sum();
    for m in &manifests {
        ctx.say(format!("{:<16} {:>3} checks {:>3} failed", m.label, m.checks, m.failed));
    }
    write_json(out_dir, "report.json", &ReportOutput { manifests, total_checks, total_failed, run_info: clock.info() })?;
    Ok(total_failed)
}
