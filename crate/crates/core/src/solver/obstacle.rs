use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::catalog::{ASSUMPTION_SAMPLES, ASSUMPTION_TOL};
use crate::error::{Error, Result};
use crate::model::{check_assumption, PenaltyPair};
use crate::regions::StoppingMask;
use crate::solver::{DiscreteGenerator, ValueField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Policy iteration in one dimension, projected SOR otherwise.
    Auto,
    /// Howard policy iteration with a direct tridiagonal solve (1D only).
    PolicyIteration,
    /// Projected successive over-relaxation.
    ProjectedSor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Sup-norm tolerance on the residual of `min(LV + h, g − V)`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Relaxation factor; defaults to `2/(1 + sin(π·h))` for the finest
    /// spacing `h`.
    pub omega: Option<f64>,
    pub method: SolveMethod,
    /// Run the assumption check on the penalty pair before solving.
    pub check_assumption: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_sweeps: 100_000, omega: None, method: SolveMethod::Auto, check_assumption: true }
    }
}

impl SolverOptions {
    /// A node is stopping iff `g − V ≤ tie_tol`.
    pub fn tie_tol(&self) -> f64 {
        10.0 * self.tol
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub tol: f64,
    pub tie_tol: f64,
    pub max_sweeps: usize,
    /// Relaxation sweeps, or policy updates for policy iteration.
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub omega: Option<f64>,
    /// Nodes where the obstacle is active.
    pub active_nodes: usize,
    pub total_nodes: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct ObstacleSolution {
    pub field: ValueField,
    pub mask: StoppingMask,
    pub report: SolveReport,
}

/// Sup norm of `min(LV + h, g − V)` over the nodes, with the worst node.
pub fn obstacle_residual(gen: &DiscreteGenerator, g: &[f64], h: &[f64], v: &[f64]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for idx in 0..v.len() {
        let r = (gen.apply_at(v, idx) + h[idx]).min(g[idx] - v[idx]).abs();
        if r > worst.0 {
            worst = (r, idx);
        }
    }
    worst
}

/// Solves `min(LV + h, g − V) = 0` on the generator's grid. A run that
/// exhausts `max_sweeps` returns its last iterate with `converged = false`.
pub fn solve_obstacle(gen: &DiscreteGenerator, pen: &PenaltyPair, opts: &SolverOptions) -> Result<ObstacleSolution> {
    let grid = gen.grid();
    if pen.dim != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: pen.dim });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParams("solver tolerance must be > 0".into()));
    }
    if opts.check_assumption {
        let report = check_assumption(gen.params(), pen, ASSUMPTION_SAMPLES, ASSUMPTION_TOL)?;
        if !report.all_ok() {
            let worst: Vec<String> = report.worst_violations.iter().map(|w| format!("{} ({:.3e})", w.check, w.magnitude)).collect();
            return Err(Error::AssumptionViolated(worst.join(", ")));
        }
    }
    let started = Instant::now();
    let mut x = vec![0.0; grid.dim()];
    let mut g = Vec::with_capacity(grid.len());
    let mut h = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        grid.node_into(idx, &mut x);
        g.push(pen.g(&x));
        h.push(pen.h(&x));
    }

    let method = match opts.method {
        SolveMethod::Auto if grid.dim() == 1 => SolveMethod::PolicyIteration,
        SolveMethod::Auto => SolveMethod::ProjectedSor,
        SolveMethod::PolicyIteration if grid.dim() != 1 => {
            return Err(Error::InvalidParams("policy iteration with a direct solve is one-dimensional only".into()))
        }
        m => m,
    };

    let (values, iterations, omega) = match method {
        SolveMethod::PolicyIteration => {
            let (v, it) = policy_iteration_1d(gen, &g, &h, opts.max_sweeps);
            (v, it, None)
        }
        _ => {
            let omega = opts.omega.unwrap_or_else(|| {
                let h = (0..grid.dim()).map(|a| grid.spacing(a)).fold(f64::INFINITY, f64::min);
                2.0 / (1.0 + (std::f64::consts::PI * h).sin())
            });
            let mut v = g.clone();
            let it = projected_sor(gen, &g, &h, &mut v, omega, opts.tol, opts.max_sweeps);
            (v, it, Some(omega))
        }
    };

    let (residual_norm, _) = obstacle_residual(gen, &g, &h, &values);
    let converged = residual_norm <= opts.tol;
    let tie_tol = opts.tie_tol();
    let stopping: Vec<bool> = g.iter().zip(&values).map(|(gi, vi)| gi - vi <= tie_tol).collect();
    let active_nodes = stopping.iter().filter(|&&s| s).count();
    let mask = StoppingMask::new(grid.clone(), stopping)?;
    let field = ValueField { grid: grid.clone(), values, residual_norm, iterations };
    let report = SolveReport {
        method,
        tol: opts.tol,
        tie_tol,
        max_sweeps: opts.max_sweeps,
        iterations,
        residual_norm,
        converged,
        omega,
        active_nodes,
        total_nodes: grid.len(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(ObstacleSolution { field, mask, report })
}

/// Projected SOR with alternating sweep direction. Returns the number of
/// sweeps performed.
fn projected_sor(gen: &DiscreteGenerator, g: &[f64], h: &[f64], v: &mut [f64], omega: f64, tol: f64, max_sweeps: usize) -> usize {
    const CHECK_EVERY: usize = 10;
    let len = v.len();
    let relax = |v: &mut [f64], idx: usize| {
        let total = gen.total_weight(idx);
        if total == 0.0 {
            // absorbing node: nothing to gain from waiting
            v[idx] = g[idx];
            return;
        }
        let target = (h[idx] + gen.neighbour_sum(v, idx)) / total;
        let relaxed = v[idx] + omega * (target - v[idx]);
        v[idx] = relaxed.min(g[idx]);
    };
    for sweep in 1..=max_sweeps {
        if sweep % 2 == 1 {
            for idx in 0..len {
                relax(v, idx);
            }
        } else {
            for idx in (0..len).rev() {
                relax(v, idx);
            }
        }
        if (sweep % CHECK_EVERY == 0 || sweep == max_sweeps) && obstacle_residual(gen, g, h, v).0 <= tol {
            return sweep;
        }
    }
    max_sweeps
}

/// Howard policy iteration on a one-dimensional grid; each policy is
/// evaluated exactly with the Thomas algorithm. Returns the values and the
/// number of policy evaluations.
fn policy_iteration_1d(gen: &DiscreteGenerator, g: &[f64], h: &[f64], max_iter: usize) -> (Vec<f64>, usize) {
    let n = g.len();
    // start from "continue wherever the chain moves"
    let mut stop: Vec<bool> = (0..n).map(|k| gen.total_weight(k) == 0.0).collect();
    let mut v = g.to_vec();
    let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for it in 1..=max_iter.max(1) {
        for k in 0..n {
            if stop[k] {
                (sub[k], diag[k], sup[k], rhs[k]) = (0.0, 1.0, 0.0, g[k]);
            } else {
                let (lo, up) = gen.axis_weights(k, 0);
                (sub[k], diag[k], sup[k], rhs[k]) = (-lo, lo + up, -up, h[k]);
            }
        }
        thomas(&sub, &diag, &sup, &rhs, &mut v);

        let mut changed = false;
        for k in 0..n {
            let total = gen.total_weight(k);
            if total == 0.0 {
                continue;
            }
            let wait = gen.apply_at(&v, k) + h[k];
            let stop_now = g[k] - v[k];
            // ties keep the current action; the margin absorbs rounding in Lv
            let eps = 64.0 * f64::EPSILON * (total * v[k].abs().max(g[k].abs()) + h[k].abs() + 1.0);
            let next = if stop[k] { wait >= stop_now - eps } else { stop_now < wait - eps };
            if next != stop[k] {
                stop[k] = next;
                changed = true;
            }
        }
        if !changed {
            return (v, it);
        }
    }
    (v, max_iter.max(1))
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64], out: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for k in 1..n {
        let m = diag[k] - sub[k] * c[k - 1];
        c[k] = sup[k] / m;
        d[k] = (rhs[k] - sub[k] * d[k - 1]) / m;
    }
    out[n - 1] = d[n - 1];
    for k in (0..n - 1).rev() {
        out[k] = d[k] - c[k] * out[k + 1];
    }
}
