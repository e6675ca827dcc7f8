//! Penalty pairs of the catalog problems: multi-dimensional sequential
//! testing (ST1–ST3), quickest detection (QD1–QD3) and the two
//! one-dimensional baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_assumption, ModelParams, PenaltyPair};

/// Sample density and tolerance of the assumption check run on every built
/// penalty pair.
pub const ASSUMPTION_SAMPLES: usize = 101;
pub const ASSUMPTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    /// Determine every drift; `g = Σ πᵢ∧(1−πᵢ)`.
    #[serde(rename = "ST1")]
    St1,
    /// Determine one drift of the tester's choice; `g = ⋀ πᵢ∧(1−πᵢ)`.
    #[serde(rename = "ST2")]
    St2,
    /// Two drifts with cost reduction `γ` for joint observation.
    #[serde(rename = "ST3")]
    St3,
    /// First change-point.
    #[serde(rename = "QD1")]
    Qd1,
    /// Last change-point.
    #[serde(rename = "QD2")]
    Qd2,
    /// Any one coordinate that has changed.
    #[serde(rename = "QD3")]
    Qd3,
    #[serde(rename = "ST_1D")]
    St1d,
    #[serde(rename = "QD_1D")]
    Qd1d,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 8] = [
        ProblemKind::St1,
        ProblemKind::St2,
        ProblemKind::St3,
        ProblemKind::Qd1,
        ProblemKind::Qd2,
        ProblemKind::Qd3,
        ProblemKind::St1d,
        ProblemKind::Qd1d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::St1 => "ST1",
            ProblemKind::St2 => "ST2",
            ProblemKind::St3 => "ST3",
            ProblemKind::Qd1 => "QD1",
            ProblemKind::Qd2 => "QD2",
            ProblemKind::Qd3 => "QD3",
            ProblemKind::St1d => "ST_1D",
            ProblemKind::Qd1d => "QD_1D",
        }
    }

    /// Sequential testing kinds (all rates zero).
    pub fn is_testing(self) -> bool {
        matches!(self, ProblemKind::St1 | ProblemKind::St2 | ProblemKind::St3 | ProblemKind::St1d)
    }

    pub fn is_detection(self) -> bool {
        !self.is_testing()
    }

    pub fn is_one_dimensional(self) -> bool {
        matches!(self, ProblemKind::St1d | ProblemKind::Qd1d)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown problem kind {s:?}")))
    }
}

/// A catalog problem: kind, model and (ST3 only) the cost reduction `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub params: ModelParams,
    pub gamma: Option<f64>,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, params: ModelParams, gamma: Option<f64>) -> Result<Self> {
        let spec = Self { kind, params, gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        p.ensure_valid()?;
        let bad = |msg: String| Err(Error::InvalidParams(format!("{}: {msg}", self.kind)));
        if self.kind.is_one_dimensional() && p.n != 1 {
            return bad(format!("requires n = 1, got {}", p.n));
        }
        if self.kind.is_testing() && p.lambda.iter().any(|&l| l != 0.0) {
            return bad("sequential testing requires lambda[i] = 0 for all i".into());
        }
        if self.kind.is_detection() && p.lambda.iter().any(|&l| !(l > 0.0)) {
            return bad("quickest detection requires lambda[i] > 0 for all i".into());
        }
        if self.kind == ProblemKind::St3 {
            if p.n != 2 {
                return bad(format!("requires n = 2, got {}", p.n));
            }
            if p.mu[0] != p.mu[1] {
                return bad("requires mu[0] = mu[1]".into());
            }
            match self.gamma {
                Some(g) if g > 0.0 && g < 1.0 => {}
                Some(g) => return bad(format!("gamma must lie in (0,1), got {g}")),
                None => return Err(Error::MissingInput("ST3 requires gamma".into())),
            }
        }
        Ok(())
    }

    /// Running cost of the embedded one-dimensional problem of ST3.
    pub fn st3_inner_cost(&self) -> Option<f64> {
        match (self.kind, self.gamma) {
            (ProblemKind::St3, Some(g)) => Some(self.params.c * (1.0 - g)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OneDKind {
    Testing,
    Detection,
}

/// Cost function of a one-dimensional problem, tabulated on nodes of `[0,1]`
/// and evaluated in between by piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDSolution {
    pub kind: OneDKind,
    pub mu: f64,
    pub lambda: f64,
    pub cost: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// `A*` for testing, `B*` for detection.
    pub threshold_low: f64,
    /// `1 − A*` for testing; unused for detection.
    pub threshold_high: Option<f64>,
    /// The continuation region was empty on the grid.
    pub degenerate: bool,
}

impl OneDSolution {
    /// Piecewise-linear interpolation of the node values; clamps to `[0,1]`.
    /// Testing solutions are read on `[0, ½]` only, which keeps them exactly
    /// flip-symmetric off the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let x = x.clamp(0.0, 1.0);
        let x = if self.kind == OneDKind::Testing { wedge(x) } else { x };
        let k = self.nodes.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let t = (x - x0) / (x1 - x0);
        (1.0 - t) * self.values[k] + t * self.values[k + 1]
    }

    /// Whether `x` lies in the continuation interval.
    pub fn continues_at(&self, x: f64) -> bool {
        match (self.kind, self.threshold_high) {
            (OneDKind::Testing, Some(hi)) => x > self.threshold_low && x < hi,
            _ => x < self.threshold_low,
        }
    }
}

#[inline]
fn wedge(x: f64) -> f64 {
    x.min(1.0 - x)
}

/// Builds `(g, h)` for a catalog problem and runs the assumption check on it.
/// ST3 needs the solution `u` of the one-dimensional testing problem with
/// running cost `c(1−γ)`.
pub fn build_penalty(spec: &ProblemSpec, one_d: Option<&OneDSolution>) -> Result<PenaltyPair> {
    spec.validate()?;
    let p = &spec.params;
    let n = p.n;
    let c = p.c;
    let ones = vec![1.0; n];
    let zeros = vec![0.0; n];
    let cs = vec![c; n];
    let pen = match spec.kind {
        ProblemKind::St1 | ProblemKind::St1d => {
            PenaltyPair::new(n, |x: &[f64]| x.iter().map(|&v| wedge(v)).sum(), move |_: &[f64]| c, ones, zeros, true)
        }
        ProblemKind::St2 => PenaltyPair::new(
            n,
            |x: &[f64]| x.iter().map(|&v| wedge(v)).fold(f64::INFINITY, f64::min),
            move |_: &[f64]| c,
            ones,
            zeros,
            true,
        ),
        ProblemKind::St3 => {
            let u = one_d.ok_or_else(|| Error::MissingInput("ST3 requires the one-dimensional solution u".into()))?;
            let inner = spec.st3_inner_cost().expect("validated ST3");
            if u.kind != OneDKind::Testing || u.mu != p.mu[0] || (u.cost - inner).abs() > 1e-12 * inner {
                return Err(Error::InvalidParams(format!(
                    "ST3 needs the testing solution with mu = {} and cost = {inner}, got {:?} with mu = {} and cost = {}",
                    p.mu[0], u.kind, u.mu, u.cost
                )));
            }
            let u = u.clone();
            PenaltyPair::new(
                2,
                move |x: &[f64]| (wedge(x[0]) + u.eval(x[1])).min(u.eval(x[0]) + wedge(x[1])),
                move |_: &[f64]| c,
                ones,
                zeros,
                true,
            )
        }
        ProblemKind::Qd1 => PenaltyPair::new(
            n,
            |x: &[f64]| x.iter().map(|&v| 1.0 - v).product(),
            move |x: &[f64]| c * (1.0 - x.iter().map(|&v| 1.0 - v).product::<f64>()),
            ones,
            cs,
            false,
        ),
        ProblemKind::Qd2 | ProblemKind::Qd1d => PenaltyPair::new(
            n,
            |x: &[f64]| 1.0 - x.iter().product::<f64>(),
            move |x: &[f64]| c * x.iter().product::<f64>(),
            ones,
            cs,
            false,
        ),
        ProblemKind::Qd3 => PenaltyPair::new(
            n,
            |x: &[f64]| x.iter().map(|&v| 1.0 - v).fold(f64::INFINITY, f64::min),
            move |x: &[f64]| c * x.iter().sum::<f64>(),
            ones,
            cs,
            false,
        ),
    };
    let report = check_assumption(p, &pen, ASSUMPTION_SAMPLES, ASSUMPTION_TOL)?;
    if !report.all_ok() {
        let worst: Vec<String> = report.worst_violations.iter().map(|w| format!("{} ({:.3e})", w.check, w.magnitude)).collect();
        return Err(Error::AssumptionViolated(format!("{}: {}", spec.kind, worst.join(", "))));
    }
    Ok(pen)
}

/// Affine coordinate map of `[0,1]ⁿ` leaving a penalty pair invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordMap {
    /// `πᵢ ↦ 1 − πᵢ`.
    Flip(usize),
    /// Exchange of two coordinates.
    Swap(usize, usize),
}

impl CoordMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        match *self {
            CoordMap::Flip(i) => y[i] = 1.0 - x[i],
            CoordMap::Swap(i, j) => y.swap(i, j),
        }
        y
    }

    /// Action on lattice positions of a grid that is symmetric under the map.
    pub fn apply_index(&self, multi: &[usize], shape: &[usize]) -> Vec<usize> {
        let mut y = multi.to_vec();
        match *self {
            CoordMap::Flip(i) => y[i] = shape[i] - 1 - multi[i],
            CoordMap::Swap(i, j) => y.swap(i, j),
        }
        y
    }
}

/// Symmetries of the problem data: flips of every axis for testing problems,
/// and swaps of axes whose signal strengths (and rates) agree.
pub fn penalty_symmetries(spec: &ProblemSpec) -> Vec<CoordMap> {
    let p = &spec.params;
    let mut maps = Vec::new();
    if spec.kind.is_testing() {
        maps.extend((0..p.n).map(CoordMap::Flip));
    }
    if !spec.kind.is_one_dimensional() {
        for i in 0..p.n {
            for j in i + 1..p.n {
                if p.mu[i] == p.mu[j] && p.lambda[i] == p.lambda[j] {
                    maps.push(CoordMap::Swap(i, j));
                }
            }
        }
    }
    maps
}
