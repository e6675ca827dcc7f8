//! Run configuration: TOML file plus command-line overrides.
//!
//! | key | default |
//! |---|---|
//! | `problem.kind` | required: `ST1`…`QD3`, `ST_1D`, `QD_1D`, `catalog` or `custom` |
//! | `problem.mu` | required (scalar or per-axis list) |
//! | `problem.lambda` | `0` for testing kinds, `0.5` for detection kinds (flagged) |
//! | `problem.c` | required |
//! | `problem.gamma` | required for ST3; scalar or list |
//! | `problem.prior` | `0.5` per axis for testing, `0` for detection |
//! | `problem.penalty_table` | required for `custom` |
//! | `grid.nodes` | `201` in 2D, `401` in 1D |
//! | `solver.tol` | `1e-9` |
//! | `solver.max_sweeps` | `100000` |
//! | `solver.omega` | `2/(1 + sin πh)` |
//! | `sim.seed` | required |
//! | `sim.dt` | `1e-3` |
//! | `sim.horizon` | `50` for testing, `20` for detection |
//! | `sim.n_paths` | `10000` |
//! | `sim.scheme` | `direct-filter` |
//! | `verify.checks` | all |
//! | `verify.*_tol` | `1e-4`, `1e-3`, `1e-6`, `5e-3` |
//! | `simulate.mask` | required when `rule = "mask"` |
//! | `simulate.rule` | `mask` (`immediate`, `box`) |
//! | `simulate.estimator` | `physical` (`measure-change`, `both`) |
//! | `simulate.priors` | `problem.prior` |
//! | `simulate.record_paths` | `0` |
//! | `output.dir` | `out` |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use seqstop::sde::{Scheme, SimConfig, DEFAULT_DT, DETECTION_HORIZON, TESTING_HORIZON};
use seqstop::suite::{default_nodes, VerifyOptions, DEFAULT_QD_LAMBDA};
use seqstop::{ModelParams, ProblemKind, ProblemSpec, SolverOptions};

pub const DEFAULT_N_PATHS: usize = 10_000;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn per_axis(&self, n: usize, name: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            OneOrMany::One(v) => Ok(vec![*v; n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => err(format!("problem.{name} has {} entries, expected {n}", v.len())),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub problem: RawProblem,
    #[serde(default)]
    pub grid: RawGrid,
    #[serde(default)]
    pub solver: RawSolver,
    #[serde(default)]
    pub sim: RawSim,
    #[serde(default)]
    pub verify: RawVerify,
    #[serde(default)]
    pub simulate: RawSimulate,
    #[serde(default)]
    pub output: RawOutput,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProblem {
    pub kind: Option<String>,
    pub mu: Option<OneOrMany>,
    pub lambda: Option<OneOrMany>,
    pub c: Option<f64>,
    pub gamma: Option<OneOrMany>,
    pub prior: Option<OneOrMany>,
    pub penalty_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSim {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub n_paths: Option<usize>,
    pub scheme: Option<Scheme>,
    pub record_every: Option<usize>,
    pub weight_cap: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVerify {
    pub checks: Option<Vec<String>>,
    pub conc_tol: Option<f64>,
    pub lip_tol: Option<f64>,
    pub sym_tol: Option<f64>,
    pub product_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Mask,
    Immediate,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Physical,
    MeasureChange,
    Both,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulate {
    pub mask: Option<PathBuf>,
    pub rule: Option<RuleKind>,
    /// `[lo, hi]` for the box rule.
    pub r#box: Option<[f64; 2]>,
    pub estimator: Option<Estimator>,
    pub priors: Option<Vec<Vec<f64>>>,
    pub record_paths: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub nodes: Option<usize>,
}

/// The problem of one run: a catalog spec or a tabulated custom penalty.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProblemDef {
    Catalog { spec: ProblemSpec },
    Custom { params: ModelParams, penalty_table: PathBuf },
}

impl ProblemDef {
    pub fn params(&self) -> &ModelParams {
        match self {
            ProblemDef::Catalog { spec } => &spec.params,
            ProblemDef::Custom { params, .. } => params,
        }
    }

    pub fn is_testing(&self) -> bool {
        match self {
            ProblemDef::Catalog { spec } => spec.kind.is_testing(),
            ProblemDef::Custom { params, .. } => params.lambda.iter().all(|&l| l == 0.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSettings {
    pub rule: RuleKind,
    pub mask: Option<PathBuf>,
    pub r#box: Option<[f64; 2]>,
    pub estimator: Estimator,
    pub priors: Option<Vec<Vec<f64>>>,
    pub record_paths: usize,
}

/// One fully resolved run. Serialized into every artifact it produces.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub label: String,
    pub problem: ProblemDef,
    /// `lambda` was not given and took the detection default.
    pub lambda_defaulted: bool,
    pub nodes: usize,
    pub solver: SolverOptions,
    pub sim: SimConfig,
    pub verify: VerifyOptions,
    pub checks: Option<Vec<String>>,
    pub simulate: SimulateSettings,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Provenance text embedded in CSV comments.
    pub fn provenance(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn wants_check(&self, name: &str) -> bool {
        match &self.checks {
            None => true,
            Some(list) => list.iter().any(|c| c == "all" || name == c || name.starts_with(&format!("{c}-"))),
        }
    }
}

pub fn load(path: &Path, ov: &Overrides) -> Result<Vec<RunConfig>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, base, ov)
}

/// Resolves a config text; relative paths are taken against `base`.
pub fn parse(text: &str, base: &Path, ov: &Overrides) -> Result<Vec<RunConfig>, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
    resolve(raw, base, ov)
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        err(format!("{name} must be > 0, got {v}"))
    }
}

struct Item {
    label: String,
    problem: ProblemDef,
    lambda_defaulted: bool,
}

fn catalog_items(raw: &RawProblem) -> Result<Vec<Item>, ConfigError> {
    let kind = raw.kind.as_deref().ok_or_else(|| ConfigError("problem.kind is required".into()))?;
    if kind == "catalog" {
        // figure parameters for every catalog problem
        let mut out = Vec::new();
        for (kind, gamma) in [
            (ProblemKind::St1, None),
            (ProblemKind::St2, None),
            (ProblemKind::St3, Some(0.2)),
            (ProblemKind::St3, Some(0.5)),
            (ProblemKind::St3, Some(0.8)),
            (ProblemKind::Qd1, None),
            (ProblemKind::Qd2, None),
            (ProblemKind::Qd3, None),
        ] {
            let (lambda, c, prior) = if kind.is_testing() { (0.0, 0.2, 0.5) } else { (DEFAULT_QD_LAMBDA, 1.0, 0.0) };
            let spec = ProblemSpec::new(kind, ModelParams::new(vec![1.0; 2], vec![lambda; 2], c, vec![prior; 2]), gamma).map_err(|e| ConfigError(e.to_string()))?;
            out.push(Item { label: label(kind, gamma), problem: ProblemDef::Catalog { spec }, lambda_defaulted: kind.is_detection() });
        }
        return Ok(out);
    }
    let custom = kind == "custom";
    let n = if custom {
        match &raw.mu {
            Some(OneOrMany::Many(v)) => v.len(),
            _ => return err("problem.mu must list one entry per axis for a custom penalty"),
        }
    } else {
        let k: ProblemKind = kind.parse().map_err(|e: seqstop::Error| ConfigError(e.to_string()))?;
        if k.is_one_dimensional() {
            1
        } else {
            2
        }
    };
    let testing = if custom { raw.lambda.is_none() } else { kind.parse::<ProblemKind>().map(|k| k.is_testing()).unwrap_or(true) };
    let mu = raw.mu.as_ref().ok_or_else(|| ConfigError("problem.mu is required".into()))?.per_axis(n, "mu")?;
    let c = raw.c.ok_or_else(|| ConfigError("problem.c is required".into()))?;
    let (lambda, lambda_defaulted) = match &raw.lambda {
        Some(l) => (l.per_axis(n, "lambda")?, false),
        None if testing => (vec![0.0; n], false),
        None => (vec![DEFAULT_QD_LAMBDA; n], true),
    };
    let prior = match &raw.prior {
        Some(p) => p.per_axis(n, "prior")?,
        None => vec![if testing { 0.5 } else { 0.0 }; n],
    };
    let params = ModelParams::new(mu, lambda, c, prior);
    if custom {
        params.ensure_valid().map_err(|e| ConfigError(e.to_string()))?;
        let table = raw.penalty_table.clone().ok_or_else(|| ConfigError("problem.penalty_table is required for a custom penalty".into()))?;
        return Ok(vec![Item { label: "custom".into(), problem: ProblemDef::Custom { params, penalty_table: table }, lambda_defaulted }]);
    }
    let k: ProblemKind = kind.parse().expect("parsed above");
    let gammas: Vec<Option<f64>> = match (&raw.gamma, k) {
        (Some(g), ProblemKind::St3) => g.values().into_iter().map(Some).collect(),
        (None, ProblemKind::St3) => return err("problem.gamma is required for ST3"),
        (Some(_), _) => return err(format!("problem.gamma only applies to ST3, not {k}")),
        (None, _) => vec![None],
    };
    let many = gammas.len() > 1;
    gammas
        .into_iter()
        .map(|gamma| {
            let spec = ProblemSpec::new(k, params.clone(), gamma).map_err(|e| ConfigError(e.to_string()))?;
            let label = if many { label(k, gamma) } else { k.as_str().to_string() };
            Ok(Item { label, problem: ProblemDef::Catalog { spec }, lambda_defaulted })
        })
        .collect()
}

fn label(kind: ProblemKind, gamma: Option<f64>) -> String {
    match gamma {
        Some(g) => format!("{kind}-gamma-{g}"),
        None => kind.as_str().to_string(),
    }
}

fn resolve(raw: RawConfig, base: &Path, ov: &Overrides) -> Result<Vec<RunConfig>, ConfigError> {
    let mut raw = raw;
    if let Some(t) = &raw.problem.penalty_table {
        raw.problem.penalty_table = Some(base.join(t));
    }
    let items = catalog_items(&raw.problem)?;

    let seed = ov.seed.or(raw.sim.seed).ok_or_else(|| ConfigError("sim.seed is required (or pass --seed)".into()))?;
    let defaults = SolverOptions::default();
    let solver = SolverOptions {
        tol: positive("solver.tol", raw.solver.tol.unwrap_or(defaults.tol))?,
        max_sweeps: raw.solver.max_sweeps.unwrap_or(defaults.max_sweeps),
        omega: match raw.solver.omega {
            Some(w) if !(w > 0.0 && w < 2.0) => return err(format!("solver.omega must lie in (0,2), got {w}")),
            w => w,
        },
        ..defaults
    };
    if solver.max_sweeps == 0 {
        return err("solver.max_sweeps must be >= 1");
    }
    let vd = VerifyOptions::default();
    let verify = VerifyOptions {
        conc_tol: positive("verify.conc_tol", raw.verify.conc_tol.unwrap_or(vd.conc_tol))?,
        lip_tol: positive("verify.lip_tol", raw.verify.lip_tol.unwrap_or(vd.lip_tol))?,
        sym_tol: positive("verify.sym_tol", raw.verify.sym_tol.unwrap_or(vd.sym_tol))?,
        product_tol: positive("verify.product_tol", raw.verify.product_tol.unwrap_or(vd.product_tol))?,
    };
    let rule = raw.simulate.rule.unwrap_or(RuleKind::Mask);
    if rule == RuleKind::Box {
        match raw.simulate.r#box {
            Some([lo, hi]) if (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo < hi => {}
            other => return err(format!("simulate.box must be [lo, hi] with 0 ≤ lo < hi ≤ 1, got {other:?}")),
        }
    }
    let simulate = SimulateSettings {
        rule,
        mask: raw.simulate.mask.as_ref().map(|m| base.join(m)),
        r#box: raw.simulate.r#box,
        estimator: raw.simulate.estimator.unwrap_or(Estimator::Physical),
        priors: raw.simulate.priors.clone(),
        record_paths: raw.simulate.record_paths.unwrap_or(0),
    };
    let out_root = ov.out.clone().or(raw.output.dir.map(|d| base.join(d))).unwrap_or_else(|| PathBuf::from("out"));
    let many = items.len() > 1;

    items
        .into_iter()
        .map(|item| {
            let n = item.problem.params().n;
            let nodes = ov.nodes.or(raw.grid.nodes).unwrap_or(default_nodes(n));
            if nodes < 3 || nodes % 2 == 0 {
                return err(format!("grid.nodes must be odd and ≥ 3, got {nodes}"));
            }
            let horizon = raw.sim.horizon.unwrap_or(if item.problem.is_testing() { TESTING_HORIZON } else { DETECTION_HORIZON });
            let sim = SimConfig {
                dt: raw.sim.dt.unwrap_or(DEFAULT_DT),
                horizon,
                n_paths: raw.sim.n_paths.unwrap_or(DEFAULT_N_PATHS),
                seed,
                scheme: raw.sim.scheme.unwrap_or(Scheme::DirectFilter),
                record_every: raw.sim.record_every.unwrap_or(1),
                weight_cap: raw.sim.weight_cap.unwrap_or(1e6),
            };
            sim.validate().map_err(|e| ConfigError(e.to_string()))?;
            if let Some(priors) = &simulate.priors {
                if let Some(bad) = priors.iter().find(|p| p.len() != n || p.iter().any(|x| !(0.0..=1.0).contains(x))) {
                    return err(format!("simulate.priors entry {bad:?} is not a point of [0,1]^{n}"));
                }
            }
            let out_dir = if many { out_root.join(&item.label) } else { out_root.clone() };
            Ok(RunConfig {
                label: item.label,
                problem: item.problem,
                lambda_defaulted: item.lambda_defaulted,
                nodes,
                solver: solver.clone(),
                sim,
                verify: verify.clone(),
                checks: raw.verify.checks.clone(),
                simulate: simulate.clone(),
                out_dir,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runs(text: &str) -> Result<Vec<RunConfig>, ConfigError> {
        parse(text, Path::new("."), &Overrides::default())
    }

    #[test]
    fn minimal_st1() {
        let r = runs("[problem]\nkind = \"ST1\"\nmu = 1.0\nc = 0.2\n[sim]\nseed = 3\n").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].nodes, 201);
        assert_eq!(r[0].sim.horizon, 50.0);
        assert!(!r[0].lambda_defaulted);
        assert_eq!(r[0].problem.params().prior, vec![0.5, 0.5]);
    }

    #[test]
    fn qd_lambda_default_is_flagged() {
        let r = runs("[problem]\nkind = \"QD2\"\nmu = [1.0, 1.0]\nc = 1.0\n[sim]\nseed = 3\n").unwrap();
        assert!(r[0].lambda_defaulted);
        assert_eq!(r[0].problem.params().lambda, vec![0.5, 0.5]);
        assert_eq!(r[0].sim.horizon, 20.0);
    }

    #[test]
    fn st3_needs_gamma_and_expands_lists() {
        assert!(runs("[problem]\nkind = \"ST3\"\nmu = 1.0\nc = 0.2\n[sim]\nseed = 3\n").is_err());
        let r = runs("[problem]\nkind = \"ST3\"\nmu = 1.0\nc = 0.2\ngamma = [0.2, 0.8]\n[sim]\nseed = 3\n").unwrap();
        assert_eq!(r.len(), 2);
        assert!(r[1].out_dir.ends_with("ST3-gamma-0.8"));
    }

    #[test]
    fn seed_is_mandatory_unless_overridden() {
        let text = "[problem]\nkind = \"ST1\"\nmu = 1.0\nc = 0.2\n";
        assert!(runs(text).is_err());
        let ov = Overrides { seed: Some(9), ..Default::default() };
        assert_eq!(parse(text, Path::new("."), &ov).unwrap()[0].sim.seed, 9);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[problem]\nkind = \"ST9\"\nmu = 1.0\nc = 0.2\n[sim]\nseed = 1\n",
            "[problem]\nkind = \"ST1\"\nmu = 1.0\nc = 0.2\n[solver]\ntol = 0.0\n[sim]\nseed = 1\n",
            "[problem]\nkind = \"ST1\"\nmu = 1.0\nc = 0.2\n[grid]\nnodes = 100\n[sim]\nseed = 1\n",
            "[problem]\nkind = \"ST1\"\nmu = 1.0\nc = 0.2\nbogus = 1\n[sim]\nseed = 1\n",
            "[problem]\nkind = \"ST1\"\nmu = [1.0, 2.0, 3.0]\nc = 0.2\n[sim]\nseed = 1\n",
        ] {
            assert!(runs(text).is_err(), "{text}");
        }
    }

    #[test]
    fn catalog_expands_to_figure_runs() {
        let r = runs("[problem]\nkind = \"catalog\"\n[sim]\nseed = 1\n").unwrap();
        assert_eq!(r.len(), 8);
        assert!(r.iter().all(|c| c.nodes == 201));
    }

    #[test]
    fn check_filter_matches_prefixes() {
        let mut r = runs("[problem]\nkind = \"ST1\"\nmu = 1.0\nc = 0.2\n[sim]\nseed = 3\n[verify]\nchecks = [\"symmetry\", \"R1\"]\n").unwrap().remove(0);
        assert!(r.wants_check("symmetry-flip-0"));
        assert!(r.wants_check("R1-columns-anchored"));
        assert!(!r.wants_check("lipschitz"));
        r.checks = None;
        assert!(r.wants_check("lipschitz"));
    }
}
