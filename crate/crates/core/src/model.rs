//! The observation model, points of the unit hypercube and penalty pairs,
//! together with validation of the standing hypotheses on them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{worst_second_difference, worst_slope, Lattice};

/// Observation model: `n` independent hidden chains `Yⁱ` jumping `0 → 1` at
/// rate `lambda[i]`, observed through `dXⁱ = mu[i]·Yⁱ dt + dWⁱ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Time-cost scale.
    pub c: f64,
    /// Prior `P(Yⁱ₀ = 1)` per axis.
    pub prior: Vec<f64>,
}

impl ModelParams {
    pub fn new(mu: Vec<f64>, lambda: Vec<f64>, c: f64, prior: Vec<f64>) -> Self {
        Self { n: mu.len(), mu, lambda, c, prior }
    }

    /// Total jump intensity `Σ λᵢ`.
    pub fn total_rate(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// The one-axis model of coordinate `axis`.
    pub fn axis_params(&self, axis: usize) -> ModelParams {
        ModelParams::new(vec![self.mu[axis]], vec![self.lambda[axis]], self.c, vec![self.prior[axis]])
    }

    pub fn with_prior(&self, prior: Vec<f64>) -> ModelParams {
        ModelParams { prior, ..self.clone() }
    }

    /// Fails with the first violation of [`validate_params`].
    pub fn ensure_valid(&self) -> Result<()> {
        match validate_params(self).first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidParams(v.to_string())),
        }
    }
}

/// One broken rule of [`validate_params`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.rule)
    }
}

fn violation(field: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation { field: field.into(), rule: rule.into() }
}

/// Lists every violated invariant of `p`; empty when the model is valid.
pub fn validate_params(p: &ModelParams) -> Vec<Violation> {
    let mut out = Vec::new();
    if p.n < 1 {
        out.push(violation("n", "must be >= 1"));
    }
    for (name, len) in [("mu", p.mu.len()), ("lambda", p.lambda.len()), ("prior", p.prior.len())] {
        if len != p.n {
            out.push(violation(name, format!("has length {len}, expected {}", p.n)));
        }
    }
    for (i, &m) in p.mu.iter().enumerate() {
        if !(m > 0.0 && m.is_finite()) {
            out.push(violation(format!("mu[{i}]"), "must be > 0"));
        }
    }
    for (i, &l) in p.lambda.iter().enumerate() {
        if !(l >= 0.0 && l.is_finite()) {
            out.push(violation(format!("lambda[{i}]"), "must be >= 0"));
        }
    }
    if !(p.c > 0.0 && p.c.is_finite()) {
        out.push(violation("c", "must be > 0"));
    }
    for (i, &x) in p.prior.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            out.push(violation(format!("prior[{i}]"), "outside [0,1]"));
        }
    }
    out
}

/// A point of `[0,1]ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercubePoint(Vec<f64>);

impl HypercubePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::OutOfDomain(coords));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub type PenaltyFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Terminal penalty `g` and running penalty `h` on `[0,1]ⁿ`, with declared
/// per-axis Lipschitz bounds.
#[derive(Clone)]
pub struct PenaltyPair {
    pub dim: usize,
    pub g: PenaltyFn,
    pub h: PenaltyFn,
    /// Per-axis Lipschitz bound of `g` (the constant `C`).
    pub g_lipschitz: Vec<f64>,
    /// Per-axis Lipschitz bound of `h` (the constant `D`).
    pub h_lipschitz: Vec<f64>,
    pub h_is_constant: bool,
}

impl PenaltyPair {
    pub fn new(
        dim: usize,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g_lipschitz: Vec<f64>,
        h_lipschitz: Vec<f64>,
        h_is_constant: bool,
    ) -> Self {
        Self { dim, g: Arc::new(g), h: Arc::new(h), g_lipschitz, h_lipschitz, h_is_constant }
    }

    #[inline]
    pub fn g(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }

    #[inline]
    pub fn h(&self, x: &[f64]) -> f64 {
        (self.h)(x)
    }

    /// Per-axis Lipschitz bound `C + D/λᵢ` of the cost function (just `C`
    /// where `h` does not vary).
    pub fn value_lipschitz_bounds(&self, p: &ModelParams) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let d = self.h_lipschitz[i];
                if self.h_is_constant || d == 0.0 {
                    self.g_lipschitz[i]
                } else {
                    self.g_lipschitz[i] + d / p.lambda[i]
                }
            })
            .collect()
    }
}

impl fmt::Debug for PenaltyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PenaltyPair")
            .field("dim", &self.dim)
            .field("g_lipschitz", &self.g_lipschitz)
            .field("h_lipschitz", &self.h_lipschitz)
            .field("h_is_constant", &self.h_is_constant)
            .finish_non_exhaustive()
    }
}

/// Worst sampled offender of one assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub check: String,
    pub magnitude: f64,
    pub location: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub nonnegative_ok: bool,
    pub lipschitz_ok: bool,
    pub unilateral_concavity_ok: bool,
    pub h_constant_rule_ok: bool,
    pub worst_violations: Vec<WorstCase>,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.nonnegative_ok && self.lipschitz_ok && self.unilateral_concavity_ok && self.h_constant_rule_ok
    }
}

/// Samples `g` and `h` on the uniform lattice with `samples_per_axis` points
/// per axis and checks nonnegativity, the declared Lipschitz bounds, unilateral
/// concavity (nonpositive centered second differences) and that `h` is
/// constant whenever some rate vanishes.
pub fn check_assumption(p: &ModelParams, pen: &PenaltyPair, samples_per_axis: usize, tol: f64) -> Result<AssumptionReport> {
    if pen.dim != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: pen.dim });
    }
    if pen.g_lipschitz.len() != p.n || pen.h_lipschitz.len() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: pen.g_lipschitz.len().min(pen.h_lipschitz.len()) });
    }
    if samples_per_axis < 3 {
        return Err(Error::InvalidParams("samples_per_axis must be >= 3".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tol must be > 0".into()));
    }

    let lattice = Lattice::new(vec![samples_per_axis; p.n]);
    let axis: Vec<f64> = (0..samples_per_axis).map(|k| k as f64 / (samples_per_axis - 1) as f64).collect();
    let point = |idx: usize| -> Vec<f64> { (0..p.n).map(|a| axis[lattice.coord(idx, a)]).collect() };
    let mut gs = Vec::with_capacity(lattice.len());
    let mut hs = Vec::with_capacity(lattice.len());
    for idx in 0..lattice.len() {
        let x = point(idx);
        gs.push(pen.g(&x));
        hs.push(pen.h(&x));
    }

    let mut worst = Vec::new();
    let mut record = |check: &str, magnitude: f64, idx: usize| {
        worst.push(WorstCase { check: check.into(), magnitude, location: point(idx) });
    };

    let mut nonnegative_ok = true;
    for (name, vals) in [("g nonnegative", &gs), ("h nonnegative", &hs)] {
        let (idx, &min) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty lattice");
        if !(min >= -tol) {
            nonnegative_ok = false;
            record(name, -min, idx);
        }
    }

    let mut lipschitz_ok = true;
    let mut unilateral_concavity_ok = true;
    for a in 0..p.n {
        for (name, vals, bound) in [("g", &gs, pen.g_lipschitz[a]), ("h", &hs, pen.h_lipschitz[a])] {
            if let Some((slope, idx)) = worst_slope(vals, &lattice, a, &axis) {
                if !(slope <= bound + tol) {
                    lipschitz_ok = false;
                    record(&format!("{name} lipschitz axis {a}"), slope - bound, idx);
                }
            }
            if let Some((d2, idx)) = worst_second_difference(vals, &lattice, a) {
                if !(d2 <= tol) {
                    unilateral_concavity_ok = false;
                    record(&format!("{name} concavity axis {a}"), d2, idx);
                }
            }
        }
    }

    let mut h_constant_rule_ok = true;
    if p.lambda.iter().any(|&l| l == 0.0) {
        let (lo, hi) = hs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let spread = hi - lo;
        if !pen.h_is_constant || !(spread <= tol) {
            h_constant_rule_ok = false;
            let idx = hs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
            record("h constant when some lambda = 0", spread.max(if pen.h_is_constant { 0.0 } else { 1.0 }), idx);
        }
    }

    Ok(AssumptionReport { nonnegative_ok, lipschitz_ok, unilateral_concavity_ok, h_constant_rule_ok, worst_violations: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> ModelParams {
        ModelParams::new(vec![1.0, 1.0], vec![0.0, 0.0], 0.2, vec![0.3, 0.7])
    }

    #[test]
    fn figure_parameters_are_valid() {
        assert!(validate_params(&fig1()).is_empty());
    }

    #[test]
    fn zero_signal_strength_is_reported() {
        let p = ModelParams { mu: vec![0.0, 1.0], ..fig1() };
        let report = validate_params(&p);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].to_string(), "mu[0] must be > 0");
    }

    #[test]
    fn prior_outside_cube_is_reported() {
        let p = ModelParams { prior: vec![1.2, 0.5], ..fig1() };
        let report = validate_params(&p);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].to_string(), "prior[0] outside [0,1]");
    }

    #[test]
    fn validation_is_pure() {
        let p = ModelParams { mu: vec![-1.0, f64::NAN], c: 0.0, lambda: vec![-0.5, 0.1], ..fig1() };
        let a = validate_params(&p);
        assert_eq!(a, validate_params(&p));
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let p = ModelParams { lambda: vec![0.0], ..fig1() };
        assert_eq!(validate_params(&p)[0].field, "lambda");
    }

    #[test]
    fn hypercube_point_rejects_outside() {
        assert!(HypercubePoint::new(vec![0.0, 1.0]).is_ok());
        assert!(HypercubePoint::new(vec![0.5, 1.0001]).is_err());
        assert!(HypercubePoint::new(vec![]).is_err());
    }

    #[test]
    fn convex_penalty_fails_concavity() {
        let pen = PenaltyPair::new(2, |x| x[0] * x[0], |_| 0.2, vec![2.0, 0.0], vec![0.0, 0.0], true);
        let r = check_assumption(&fig1(), &pen, 101, 1e-12).unwrap();
        assert!(!r.unilateral_concavity_ok);
        assert!(r.lipschitz_ok);
        let w = r.worst_violations.iter().find(|w| w.check.starts_with("g concavity")).unwrap();
        assert!(w.magnitude > 0.0);
    }

    #[test]
    fn non_constant_h_with_zero_rate_fails() {
        let pen = PenaltyPair::new(2, |_| 0.0, |x| x[0], vec![0.0, 0.0], vec![1.0, 0.0], false);
        let r = check_assumption(&fig1(), &pen, 11, 1e-12).unwrap();
        assert!(!r.h_constant_rule_ok);
        assert!(r.unilateral_concavity_ok);
    }

    #[test]
    fn understated_lipschitz_bound_fails() {
        let pen = PenaltyPair::new(2, |x| 3.0 * x[1], |_| 0.2, vec![0.0, 1.0], vec![0.0, 0.0], true);
        let r = check_assumption(&fig1(), &pen, 11, 1e-12).unwrap();
        assert!(!r.lipschitz_ok);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let pen = PenaltyPair::new(1, |_| 0.0, |_| 0.2, vec![0.0], vec![0.0], true);
        assert!(matches!(check_assumption(&fig1(), &pen, 11, 1e-12), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn value_bound_adds_running_cost_over_rate() {
        let p = ModelParams::new(vec![1.0, 1.0], vec![0.5, 0.25], 1.0, vec![0.0, 0.0]);
        let pen = PenaltyPair::new(2, |_| 0.0, |_| 0.0, vec![1.0, 1.0], vec![1.0, 1.0], false);
        assert_eq!(pen.value_lipschitz_bounds(&p), vec![3.0, 5.0]);
    }
}
