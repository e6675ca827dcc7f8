use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{odds, phi_step, AnyStepper, Measure, PathStepper, SimConfig};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `1 − (1−π)e^{−λt}`.
    pub expected: f64,
}

fn marks(times: &[f64], cfg: &SimConfig) -> Result<Vec<usize>> {
    let steps = cfg.steps();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let m = (t / cfg.dt).round() as usize;
        if !(t >= 0.0) || m > steps {
            return Err(Error::InvalidParams(format!("time {t} outside [0, horizon]")));
        }
        if out.last().is_some_and(|&prev| m < prev) {
            return Err(Error::InvalidParams("times must be non-decreasing".into()));
        }
        out.push(m);
    }
    Ok(out)
}

fn mean_se(columns: &[Vec<f64>], col: usize) -> (f64, f64) {
    let n = columns.len() as f64;
    let mean = columns.iter().map(|r| r[col]).sum::<f64>() / n;
    let var = columns.iter().map(|r| (r[col] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Empirical mean of `Πᵃˣⁱˢ_t` at the given times, under `cfg.scheme`.
pub fn posterior_mean(p: &ModelParams, axis: usize, times: &[f64], cfg: &SimConfig) -> Result<Vec<MeanPoint>> {
    p.ensure_valid()?;
    cfg.validate()?;
    if axis >= p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: axis + 1 });
    }
    let marks = marks(times, cfg)?;
    let rows: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut s = AnyStepper::new(p, cfg, path);
            let mut done = 0;
            marks
                .iter()
                .map(|&m| {
                    while done < m {
                        s.step();
                        done += 1;
                    }
                    s.pi()[axis]
                })
                .collect()
        })
        .collect();
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let (mean, std_error) = mean_se(&rows, j);
            MeanPoint { t, mean, std_error, expected: 1.0 - (1.0 - p.prior[axis]) * (-p.lambda[axis] * t).exp() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `(π̃ − π)e^{−λt}`.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub points: Vec<CouplingPoint>,
    pub n_paths: usize,
    /// Paths on which the lower start overtook the upper one at some step.
    pub ordering_violations: usize,
}

/// Runs the filter from two priors on `axis` with shared chain uniforms,
/// jump clocks and observation noise, and estimates `E[Π̃_t − Π_t]`.
pub fn coupling_decay(p: &ModelParams, axis: usize, pi_lo: f64, pi_hi: f64, t_grid: &[f64], cfg: &SimConfig) -> Result<CouplingReport> {
    p.ensure_valid()?;
    cfg.validate()?;
    if axis >= p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: axis + 1 });
    }
    if !(0.0 <= pi_lo && pi_lo < pi_hi && pi_hi <= 1.0) {
        return Err(Error::InvalidParams(format!("need 0 ≤ pi_lo < pi_hi ≤ 1, got {pi_lo}, {pi_hi}")));
    }
    let marks = marks(t_grid, cfg)?;
    let last = marks.last().copied().unwrap_or(0);
    let with = |x: f64| {
        let mut prior = p.prior.clone();
        prior[axis] = x;
        p.with_prior(prior)
    };
    let (lo, hi) = (with(pi_lo), with(pi_hi));
    let rows: Vec<(Vec<f64>, bool)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut a = PathStepper::new(&lo, cfg.dt, Measure::Physical, cfg.seed, path);
            let mut b = PathStepper::new(&hi, cfg.dt, Measure::Physical, cfg.seed, path);
            let mut ordered = true;
            let mut diffs = Vec::with_capacity(marks.len());
            let mut next = 0;
            for k in 0..=last {
                if k > 0 {
                    a.step();
                    b.step();
                }
                // compare on the odds scale, where the recursion is monotone
                ordered &= a.phi[axis] <= b.phi[axis];
                while next < marks.len() && marks[next] == k {
                    diffs.push(b.pi[axis] - a.pi[axis]);
                    next += 1;
                }
            }
            (diffs, ordered)
        })
        .collect();
    let ordering_violations = rows.iter().filter(|r| !r.1).count();
    let diffs: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
    let points = t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let (mean, std_error) = mean_se(&diffs, j);
            CouplingPoint { t, mean, std_error, expected: (pi_hi - pi_lo) * (-p.lambda[axis] * t).exp() }
        })
        .collect();
    Ok(CouplingReport { points, n_paths: cfg.n_paths, ordering_violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConsistency {
    pub dt: f64,
    pub n_paths: usize,
    /// Mean over paths of the pathwise max gap at step `dt`.
    pub coarse_mean: f64,
    /// Same at step `dt/2`.
    pub fine_mean: f64,
    pub ratio: f64,
}

/// Max over the mesh of `|Φ_explicit − Φ_euler|` for one increment sequence.
fn max_gap(phi0: f64, mu: f64, lambda: f64, h: f64, dx: impl Iterator<Item = f64>) -> f64 {
    let growth = (lambda - 0.5 * mu * mu) * h;
    let (mut exact, mut euler) = (phi0, phi0);
    let mut worst: f64 = 0.0;
    for d in dx {
        exact = phi_step(exact, growth, mu, lambda, h, d);
        euler += lambda * (1.0 + euler) * h + mu * euler * d;
        worst = worst.max((exact - euler).abs());
    }
    worst
}

/// Compares the explicit likelihood-ratio solution with Euler steps of its
/// linear SDE on the same observation path, at `dt` and at `dt/2`.
pub fn filter_consistency(p: &ModelParams, axis: usize, cfg: &SimConfig) -> Result<FilterConsistency> {
    p.ensure_valid()?;
    cfg.validate()?;
    if axis >= p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: axis + 1 });
    }
    let one = p.axis_params(axis);
    let phi0 = odds(one.prior[0]);
    if phi0.is_infinite() {
        return Err(Error::InvalidParams("prior 1 has no finite likelihood ratio".into()));
    }
    let (mu, lambda) = (one.mu[0], one.lambda[0]);
    let fine_dt = 0.5 * cfg.dt;
    let fine_steps = 2 * cfg.steps();
    let gaps: Vec<(f64, f64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut s = PathStepper::new(&one, fine_dt, Measure::Physical, cfg.seed, path);
            let fine: Vec<f64> = (0..fine_steps)
                .map(|_| {
                    s.step();
                    s.dx[0]
                })
                .collect();
            let coarse = fine.chunks_exact(2).map(|w| w[0] + w[1]);
            (max_gap(phi0, mu, lambda, cfg.dt, coarse), max_gap(phi0, mu, lambda, fine_dt, fine.iter().copied()))
        })
        .collect();
    let n = gaps.len() as f64;
    let coarse_mean = gaps.iter().map(|g| g.0).sum::<f64>() / n;
    let fine_mean = gaps.iter().map(|g| g.1).sum::<f64>() / n;
    Ok(FilterConsistency { dt: cfg.dt, n_paths: cfg.n_paths, coarse_mean, fine_mean, ratio: coarse_mean / fine_mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_paths_stay_ordered() {
        let p = ModelParams::new(vec![1.0], vec![0.5], 1.0, vec![0.0]);
        let cfg = SimConfig { horizon: 1.0, ..SimConfig::new(9, 300) };
        let r = coupling_decay(&p, 0, 0.2, 0.6, &[0.0, 0.5, 1.0], &cfg).unwrap();
        assert_eq!(r.ordering_violations, 0);
        assert!((r.points[0].mean - 0.4).abs() < 1e-12);
        assert!(r.points[0].std_error < 1e-15);
    }

    #[test]
    fn coupling_rejects_reversed_priors() {
        let p = ModelParams::new(vec![1.0], vec![0.5], 1.0, vec![0.0]);
        assert!(coupling_decay(&p, 0, 0.6, 0.2, &[1.0], &SimConfig::new(0, 2)).is_err());
        assert!(coupling_decay(&p, 0, 0.2, 0.6, &[100.0], &SimConfig::new(0, 2)).is_err());
    }

    #[test]
    fn posterior_mean_starts_at_prior() {
        let p = ModelParams::new(vec![1.0, 1.0], vec![0.5, 0.0], 1.0, vec![0.3, 0.7]);
        let cfg = SimConfig { horizon: 0.1, ..SimConfig::new(4, 50) };
        let m = posterior_mean(&p, 1, &[0.0, 0.1], &cfg).unwrap();
        assert!((m[0].mean - 0.7).abs() < 1e-15);
        assert_eq!(m[1].expected, 0.7);
    }

    #[test]
    fn euler_gap_shrinks_with_step() {
        let p = ModelParams::new(vec![1.0], vec![0.5], 1.0, vec![0.3]);
        let cfg = SimConfig { horizon: 1.0, dt: 1e-2, ..SimConfig::new(3, 200) };
        let r = filter_consistency(&p, 0, &cfg).unwrap();
        assert!(r.ratio > 1.0, "{r:?}");
    }
}
