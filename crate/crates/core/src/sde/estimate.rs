use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnyStepper, Measure, PathStepper, SimConfig};
use crate::error::{Error, Result};
use crate::model::{ModelParams, PenaltyPair};
use crate::regions::StoppingMask;

/// Truncation above this fraction marks an estimate as unreliable.
pub const TRUNCATION_LIMIT: f64 = 0.05;

/// A stopping rule that looks only at the current posterior.
pub trait StopRule: Sync {
    fn stops(&self, pi: &[f64]) -> bool;
}

impl StopRule for StoppingMask {
    fn stops(&self, pi: &[f64]) -> bool {
        self.lookup(pi)
    }
}

impl<F: Fn(&[f64]) -> bool + Sync> StopRule for F {
    fn stops(&self, pi: &[f64]) -> bool {
        self(pi)
    }
}

/// Continue while every coordinate lies strictly inside `(lo[i], hi[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRule {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StopRule for BoxRule {
    fn stops(&self, pi: &[f64]) -> bool {
        pi.iter().zip(self.lo.iter().zip(&self.hi)).any(|(&x, (&lo, &hi))| x <= lo || x >= hi)
    }
}

/// Stop once coordinate `axis` is at or below `lower` or at or above `upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub axis: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl StopRule for ThresholdRule {
    fn stops(&self, pi: &[f64]) -> bool {
        let x = pi[self.axis];
        self.lower.is_some_and(|l| x <= l) || self.upper.is_some_and(|u| x >= u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Fraction of paths stopped by the horizon rather than the rule.
    pub truncation_fraction: f64,
    pub unreliable: bool,
    /// Paths whose measure-change weight exceeded the cap at some step.
    pub weight_cap_hits: usize,
    pub max_weight: Option<f64>,
}

impl MCEstimate {
    /// Mean and standard error of `samples`, shifted by the first sample so
    /// that a constant sample has exactly zero spread.
    pub fn from_samples(samples: &[f64], truncated: usize) -> Self {
        let n = samples.len();
        let shift = samples.first().copied().unwrap_or(0.0);
        let (mut s1, mut s2) = (0.0, 0.0);
        for &x in samples {
            let d = x - shift;
            s1 += d;
            s2 += d * d;
        }
        let nf = n as f64;
        let mean_d = s1 / nf;
        let var = if n > 1 { ((s2 - nf * mean_d * mean_d) / (nf - 1.0)).max(0.0) } else { 0.0 };
        let truncation_fraction = truncated as f64 / nf;
        Self {
            mean: shift + mean_d,
            std_error: (var / nf).sqrt(),
            n_paths: n,
            truncation_fraction,
            unreliable: truncation_fraction > TRUNCATION_LIMIT,
            weight_cap_hits: 0,
            max_weight: None,
        }
    }
}

fn check_inputs(p: &ModelParams, pen: &PenaltyPair, cfg: &SimConfig) -> Result<()> {
    p.ensure_valid()?;
    cfg.validate()?;
    if pen.dim != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: pen.dim });
    }
    Ok(())
}

/// Estimates `E[g(Π_τ) + ∫₀^τ h(Π_s) ds]` for the first step at which the
/// rule says stop. Paths still running at the horizon are stopped there.
pub fn evaluate_stopping_rule<R: StopRule + ?Sized>(p: &ModelParams, pen: &PenaltyPair, rule: &R, cfg: &SimConfig) -> Result<MCEstimate> {
    check_inputs(p, pen, cfg)?;
    let steps = cfg.steps();
    let dt = cfg.dt;
    let outcomes: Vec<(f64, bool)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut s = AnyStepper::new(p, cfg, path);
            let mut running = 0.0;
            for k in 0..=steps {
                let pi = s.pi();
                if rule.stops(pi) {
                    return (pen.g(pi) + running, false);
                }
                if k == steps {
                    return (pen.g(pi) + running, true);
                }
                running += pen.h(pi) * dt;
                s.step();
            }
            unreachable!()
        })
        .collect();
    let samples: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let truncated = outcomes.iter().filter(|o| o.1).count();
    Ok(MCEstimate::from_samples(&samples, truncated))
}

/// Same target as [`evaluate_stopping_rule`], estimated under the reference
/// measure with the weight `e^{−λt} ∏ (1+Φⁱ_t)/(1+φᵢ)`.
pub fn measure_change_value<R: StopRule + ?Sized>(p: &ModelParams, pen: &PenaltyPair, rule: &R, cfg: &SimConfig) -> Result<MCEstimate> {
    check_inputs(p, pen, cfg)?;
    if let Some(i) = p.prior.iter().position(|&x| x >= 1.0) {
        return Err(Error::InvalidParams(format!("prior[{i}] = 1 has no finite likelihood ratio")));
    }
    let steps = cfg.steps();
    let dt = cfg.dt;
    let lambda = p.total_rate();
    let outcomes: Vec<(f64, bool, f64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut s = PathStepper::new(p, dt, Measure::Reference, cfg.seed, path);
            let base: Vec<f64> = s.phi.iter().map(|f| 1.0 + f).collect();
            let mut running = 0.0;
            let mut max_w: f64 = 0.0;
            for k in 0..=steps {
                let t = k as f64 * dt;
                let w = s.phi.iter().zip(&base).fold((-lambda * t).exp(), |acc, (f, b)| acc * ((1.0 + f) / b));
                max_w = max_w.max(w);
                let pi = &s.pi;
                if rule.stops(pi) {
                    return (w * pen.g(pi) + running, false, max_w);
                }
                if k == steps {
                    return (w * pen.g(pi) + running, true, max_w);
                }
                running += w * pen.h(pi) * dt;
                s.step();
            }
            unreachable!()
        })
        .collect();
    let samples: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let truncated = outcomes.iter().filter(|o| o.1).count();
    let mut est = MCEstimate::from_samples(&samples, truncated);
    est.weight_cap_hits = outcomes.iter().filter(|o| o.2 > cfg.weight_cap).count();
    est.max_weight = Some(outcomes.iter().map(|o| o.2).fold(0.0, f64::max));
    Ok(est)
}
