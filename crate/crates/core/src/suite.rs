//! Solve-and-verify pipeline for catalog problems.

use serde::{Deserialize, Serialize};

use crate::catalog::{build_penalty, penalty_symmetries, CoordMap, OneDSolution, ProblemKind, ProblemSpec, ASSUMPTION_SAMPLES, ASSUMPTION_TOL};
use crate::error::{Error, Result};
use crate::model::{check_assumption, ModelParams, PenaltyPair};
use crate::regions::{
    check_column_structure, check_containment, check_containment_with, check_lipschitz, check_monotone_shape, check_symmetry, check_unilateral_concavity, extract_boundary,
    lower_bound_region, Anchor, BoundaryCurve, CheckReport, Clip, Containment, Convention, Shape, StoppingMask, Window,
};
use crate::solver::{build_grid, discretize_generator, solve_1d_qd_with, solve_1d_st_with, solve_obstacle, ObstacleSolution, SolveReport, SolverOptions, TensorGrid};

pub const DEFAULT_NODES_1D: usize = 401;
pub const DEFAULT_NODES_2D: usize = 201;
pub const DEFAULT_QD_LAMBDA: f64 = 0.5;

/// Default node count per axis for a problem dimension.
pub fn default_nodes(n: usize) -> usize {
    if n == 1 {
        DEFAULT_NODES_1D
    } else {
        DEFAULT_NODES_2D
    }
}

/// A solved catalog problem together with the one-dimensional solutions its
/// checks refer to.
#[derive(Debug, Clone)]
pub struct SolvedProblem {
    pub spec: ProblemSpec,
    pub penalty: PenaltyPair,
    pub solution: ObstacleSolution,
    /// `ST(μᵢ, c)` or `QD(μᵢ, λᵢ, c)` per axis.
    pub axis_solutions: Vec<OneDSolution>,
    /// ST3 only: `u^{μ, c(1−γ)}`.
    pub inner: Option<OneDSolution>,
    /// ST3 only: `u^{μ, c/2}`.
    pub half: Option<OneDSolution>,
}

impl SolvedProblem {
    pub fn grid(&self) -> &TensorGrid {
        &self.solution.field.grid
    }

    pub fn mask(&self) -> &StoppingMask {
        &self.solution.mask
    }

    pub fn report(&self) -> &SolveReport {
        &self.solution.report
    }

    /// Per-axis thresholds `A*ᵢ` (testing) or `B*ᵢ` (detection).
    pub fn axis_thresholds(&self) -> Vec<f64> {
        self.axis_solutions.iter().map(|s| s.threshold_low).collect()
    }
}

fn solve_axis(spec: &ProblemSpec, axis: usize, grid1: &TensorGrid, opts: &SolverOptions) -> Result<OneDSolution> {
    let p = &spec.params;
    if spec.kind.is_testing() {
        solve_1d_st_with(p.mu[axis], p.c, grid1, opts)
    } else {
        solve_1d_qd_with(p.mu[axis], p.lambda[axis], p.c, grid1, opts)
    }
}

/// Solves a catalog problem on a uniform grid with `nodes` per axis.
pub fn solve_problem(spec: &ProblemSpec, nodes: usize, opts: &SolverOptions) -> Result<SolvedProblem> {
    spec.validate()?;
    let n = spec.params.n;
    let grid = build_grid(n, nodes)?;
    let grid1 = build_grid(1, nodes)?;
    let (inner, half) = if spec.kind == ProblemKind::St3 {
        let mu = spec.params.mu[0];
        let inner_cost = spec.st3_inner_cost().ok_or_else(|| Error::MissingInput("ST3 requires gamma".into()))?;
        (Some(solve_1d_st_with(mu, inner_cost, &grid1, opts)?), Some(solve_1d_st_with(mu, 0.5 * spec.params.c, &grid1, opts)?))
    } else {
        (None, None)
    };
    let penalty = build_penalty(spec, inner.as_ref())?;
    let gen = discretize_generator(&spec.params, &grid)?;
    let solution = solve_obstacle(&gen, &penalty, opts)?;
    let axis_solutions = (0..n).map(|i| solve_axis(spec, i, &grid1, opts)).collect::<Result<Vec<_>>>()?;
    Ok(SolvedProblem { spec: spec.clone(), penalty, solution, axis_solutions, inner, half })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub conc_tol: f64,
    pub lip_tol: f64,
    pub sym_tol: f64,
    /// Tolerance of the γ = 1/2 product identity in ST3.
    pub product_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { conc_tol: 1e-4, lip_tol: 1e-3, sym_tol: 1e-6, product_tol: 5e-3 }
    }
}

/// The boundary curve drawn for a problem's figure, if it has one.
pub fn primary_boundary(solved: &SolvedProblem) -> Result<Option<BoundaryCurve>> {
    if solved.spec.params.n != 2 {
        return Ok(None);
    }
    let mask = solved.mask();
    let th = solved.axis_thresholds();
    let curve = match solved.spec.kind {
        ProblemKind::St1 => extract_boundary(mask, &Window::rect([0.0, 0.5], [0.0, 0.5]), 0, Convention::MaxStopping)?,
        ProblemKind::St2 | ProblemKind::St3 => extract_boundary(mask, &Window::full().clipped(Clip::BelowTent), 0, Convention::MaxStopping)?,
        ProblemKind::Qd1 => extract_boundary(mask, &Window::full(), 0, Convention::MinStopping)?,
        ProblemKind::Qd2 => extract_boundary(mask, &Window::rect([th[0].min(1.0), 1.0], [0.0, 1.0]), 0, Convention::MinStopping)?,
        ProblemKind::Qd3 => extract_boundary(mask, &Window::full().clipped(Clip::AboveDiagonal), 0, Convention::MinStopping)?,
        ProblemKind::St1d | ProblemKind::Qd1d => return Ok(None),
    };
    Ok(Some(curve))
}

fn region(grid: &TensorGrid, pred: impl Fn(&[f64]) -> bool) -> Vec<bool> {
    (0..grid.len()).map(|i| pred(&grid.node(i))).collect()
}

fn max_abs_gap(a: impl Iterator<Item = (f64, f64)>) -> (f64, usize) {
    a.enumerate().fold((0.0, 0), |acc, (i, (x, y))| if (x - y).abs() > acc.0 { ((x - y).abs(), i) } else { acc })
}

/// Runs every check that applies to the problem's kind. Check names are
/// stable identifiers used in manifests.
pub fn verify_problem(solved: &SolvedProblem, opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    let mut out = common_checks(&solved.spec.params, &solved.penalty, &solved.solution, &penalty_symmetries(&solved.spec), opts)?;
    if solved.spec.params.n == 2 {
        out.extend(geometry_checks(solved, opts)?);
    }
    Ok(out)
}

/// Checks that hold for any admissible penalty pair: solver residual,
/// assumption, `0 ≤ V ≤ g`, unilateral concavity, Lipschitz bounds, the
/// given symmetries and the lower bound on the continuation region.
pub fn common_checks(p: &ModelParams, pen: &PenaltyPair, solution: &ObstacleSolution, symmetries: &[CoordMap], opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    let field = &solution.field;
    let grid = field.grid.clone();
    let mask = &solution.mask;
    let report = &solution.report;
    let mut out = Vec::new();

    out.push(CheckReport::new("solver-residual", report.residual_norm, report.tol, (!report.converged) as usize, None));

    let assumption = check_assumption(p, pen, ASSUMPTION_SAMPLES, ASSUMPTION_TOL)?;
    let worst = assumption.worst_violations.iter().map(|w| w.magnitude).fold(0.0, f64::max);
    let failed = [assumption.nonnegative_ok, assumption.lipschitz_ok, assumption.unilateral_concavity_ok, assumption.h_constant_rule_ok].iter().filter(|&&ok| !ok).count();
    let mut a = CheckReport::new("assumption", if failed == 0 { 0.0 } else { worst.max(f64::MIN_POSITIVE) }, 0.0, failed, None);
    a.passed = assumption.all_ok();
    out.push(a);

    let g: Vec<f64> = (0..grid.len()).map(|i| pen.g(&grid.node(i))).collect();
    let (mut worst, mut at, mut count) = (f64::NEG_INFINITY, 0, 0);
    for (i, (&v, &gi)) in field.values.iter().zip(&g).enumerate() {
        let excess = (-v).max(v - gi);
        count += (excess > 0.0) as usize;
        if excess > worst {
            (worst, at) = (excess, i);
        }
    }
    out.push(CheckReport::new("value-bounds", worst, 0.0, count, Some(grid.node(at))));

    out.push(check_unilateral_concavity(field, opts.conc_tol));
    out.push(check_lipschitz(field, &pen.value_lipschitz_bounds(p), opts.lip_tol)?);
    for &map in symmetries {
        out.push(check_symmetry(field, map, opts.sym_tol)?);
    }
    let lower = lower_bound_region(p, pen, &grid)?;
    out.push(check_containment(mask, &lower, Containment::RegionInC)?.renamed("lower-bound-in-continuation"));
    Ok(out)
}

fn geometry_checks(solved: &SolvedProblem, opts: &VerifyOptions) -> Result<Vec<CheckReport>> {
    let spec = &solved.spec;
    let mask = solved.mask();
    let grid = mask.grid().clone();
    let cell = grid.max_cell();
    let th = solved.axis_thresholds();
    let mut out = Vec::new();
    match spec.kind {
        ProblemKind::St1 => {
            let r1 = Window::rect([0.0, 0.5], [0.0, 0.5]);
            let quadrants: [(&str, Vec<CoordMap>); 4] =
                [("R1", vec![]), ("R2", vec![CoordMap::Flip(0)]), ("R3", vec![CoordMap::Flip(0), CoordMap::Flip(1)]), ("R4", vec![CoordMap::Flip(1)])];
            for (name, flips) in quadrants {
                // bring the quadrant onto [0,1/2]²
                let mut m = mask.clone();
                for f in &flips {
                    if let CoordMap::Flip(i) = f {
                        m = m.flipped(*i)?;
                    }
                }
                out.push(check_column_structure(&m, &r1, 0, Anchor::Low)?.renamed(format!("{name}-columns-anchored")));
                let b = extract_boundary(&m, &r1, 0, Convention::MaxStopping)?;
                out.push(check_monotone_shape(&b, Shape::NonIncreasing)?.renamed(format!("{name}-boundary-non-increasing")));
                let face = (b.values[0] - th[1]).abs();
                out.push(CheckReport::new(format!("{name}-boundary-meets-face-threshold"), face, cell, (face > cell) as usize, Some(vec![0.0, b.values[0]])));
                let (a1, a2) = (th[0], th[1]);
                let outside = region(&grid, |x| x[0] <= 0.5 && x[1] <= 0.5 && (x[0] > a1 || x[1] > a2));
                out.push(check_containment(&m, &outside, Containment::RegionInC)?.renamed(format!("{name}-beyond-thresholds-in-continuation")));
            }
        }
        ProblemKind::St2 => {
            let t = Window::full().clipped(Clip::BelowTent);
            out.push(check_column_structure(mask, &t, 0, Anchor::Low)?.renamed("T-columns-anchored"));
            let b = extract_boundary(mask, &t, 0, Convention::MaxStopping)?;
            out.push(check_monotone_shape(&b.restricted(0.0, 0.5), Shape::NonDecreasing)?.renamed("boundary-non-decreasing-on-left-half"));
            out.push(check_monotone_shape(&b, Shape::SymmetricFlip)?.renamed("boundary-flip-symmetric"));
            let (a1, a2) = (th[0], th[1]);
            let rect = region(&grid, |x| x[0] > a1 && x[0] < 1.0 - a1 && x[1] > a2 && x[1] < 1.0 - a2);
            out.push(check_containment(mask, &rect, Containment::RegionInC)?.renamed("rectangle-in-continuation"));
            let row = region(&grid, |x| x[1] == 0.0);
            out.push(check_containment_with(mask, &row, Containment::RegionInD, 0)?.renamed("edge-row-in-stopping"));
        }
        ProblemKind::St3 => {
            let t = Window::full().clipped(Clip::BelowTent);
            out.push(check_column_structure(mask, &t, 0, Anchor::Low)?.renamed("T-columns-anchored"));
            let b = extract_boundary(mask, &t, 0, Convention::MaxStopping)?;
            out.push(check_monotone_shape(&b, Shape::SymmetricFlip)?.renamed("boundary-flip-symmetric"));
            let row = region(&grid, |x| x[1] == 0.0);
            out.push(check_containment_with(mask, &row, Containment::RegionInD, 0)?.renamed("edge-row-in-stopping"));
            let gamma = spec.gamma.unwrap_or(0.5);
            let a_in = solved.inner.as_ref().map(|s| s.threshold_low).unwrap_or(0.5);
            let a_half = solved.half.as_ref().map(|s| s.threshold_low).unwrap_or(0.5);
            let in_square = |x: &[f64], a: f64| x.iter().all(|&v| v > a && v < 1.0 - a);
            if gamma >= 0.5 {
                let outside = region(&grid, |x| !in_square(x, a_in));
                out.push(check_containment(mask, &outside, Containment::RegionInD)?.renamed("continuation-inside-inner-square"));
            }
            if gamma <= 0.5 {
                let square = region(&grid, |x| in_square(x, a_in));
                out.push(check_containment(mask, &square, Containment::RegionInC)?.renamed("inner-square-in-continuation"));
                let neither = region(&grid, |x| x.iter().all(|&v| v <= a_half || v >= 1.0 - a_half));
                out.push(check_containment(mask, &neither, Containment::RegionInD)?.renamed("continuation-inside-half-cost-cross"));
            }
            if gamma == 0.5 {
                if let Some(u) = &solved.half {
                    let field = &solved.solution.field;
                    let (gap, at) = max_abs_gap((0..grid.len()).map(|i| {
                        let x = grid.node(i);
                        (field.values[i], u.eval(x[0]) + u.eval(x[1]))
                    }));
                    out.push(CheckReport::new("half-cost-product-identity", gap, opts.product_tol, (gap > opts.product_tol) as usize, Some(grid.node(at))));
                }
            }
        }
        ProblemKind::Qd1 => {
            let full = Window::full();
            out.push(check_column_structure(mask, &full, 0, Anchor::High)?.renamed("columns-anchored-at-top"));
            let b = extract_boundary(mask, &full, 0, Convention::MinStopping)?;
            out.push(check_monotone_shape(&b, Shape::NonIncreasing)?.renamed("boundary-non-increasing"));
            let edges = region(&grid, |x| x[0] == 1.0 || x[1] == 1.0);
            out.push(check_containment_with(mask, &edges, Containment::RegionInD, 0)?.renamed("unit-edges-in-stopping"));
        }
        ProblemKind::Qd2 => {
            let (b1, b2) = (th[0], th[1]);
            let strip2 = region(&grid, |x| x[1] < b2);
            out.push(check_containment(mask, &strip2, Containment::RegionInC)?.renamed("strip-below-B2-in-continuation"));
            let strip1 = region(&grid, |x| x[0] < b1);
            out.push(check_containment(mask, &strip1, Containment::RegionInC)?.renamed("strip-left-of-B1-in-continuation"));
            let w = Window::rect([b1.min(1.0), 1.0], [0.0, 1.0]);
            out.push(check_column_structure(mask, &w, 0, Anchor::High)?.renamed("columns-anchored-at-top"));
            let b = extract_boundary(mask, &w, 0, Convention::MinStopping)?;
            out.push(check_monotone_shape(&b, Shape::NonIncreasing)?.renamed("boundary-non-increasing"));
            // the top row beyond B1* stops; keep one cell clear of B1*
            let top = region(&grid, |x| x[1] == 1.0 && x[0] >= b1 + cell);
            out.push(check_containment_with(mask, &top, Containment::RegionInD, 0)?.renamed("top-row-beyond-B1-in-stopping"));
        }
        ProblemKind::Qd3 => {
            let t = Window::full().clipped(Clip::AboveDiagonal);
            out.push(check_column_structure(mask, &t, 0, Anchor::High)?.renamed("T-columns-anchored-at-top"));
            let b = extract_boundary(mask, &t, 0, Convention::MinStopping)?;
            out.push(check_monotone_shape(&b, Shape::Valley)?.renamed("boundary-valley"));
            let top = region(&grid, |x| x[1] == 1.0);
            out.push(check_containment_with(mask, &top, Containment::RegionInD, 0)?.renamed("top-row-in-stopping"));
        }
        ProblemKind::St1d | ProblemKind::Qd1d => {}
    }
    Ok(out)
}

/// Per-problem verification record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub problem: ProblemSpec,
    pub nodes: usize,
    pub solve: SolveReport,
    pub axis_thresholds: Vec<f64>,
    pub checks: Vec<CheckReport>,
    pub failed: usize,
}

impl Manifest {
    pub fn new(solved: &SolvedProblem, checks: Vec<CheckReport>) -> Self {
        let failed = checks.iter().filter(|c| !c.passed).count();
        Self {
            problem: solved.spec.clone(),
            nodes: solved.grid().shape()[0],
            solve: solved.report().clone(),
            axis_thresholds: solved.axis_thresholds(),
            checks,
            failed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;


    fn spec(kind: ProblemKind, gamma: Option<f64>) -> ProblemSpec {
        let (lambda, c) = if kind.is_testing() { (0.0, 0.2) } else { (DEFAULT_QD_LAMBDA, 1.0) };
        ProblemSpec::new(kind, ModelParams::new(vec![1.0, 1.0], vec![lambda, lambda], c, vec![0.5, 0.5]), gamma).unwrap()
    }

    #[test]
    fn coarse_grids_pass_every_check() {
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
            let solved = solve_problem(&spec(kind, gamma), 61, &SolverOptions::default()).unwrap();
            let opts = VerifyOptions { conc_tol: 1e-3, product_tol: 2e-2, ..Default::default() };
            for c in verify_problem(&solved, &opts).unwrap() {
                assert!(c.passed, "{kind} {gamma:?}: {c:?}");
            }
        }
    }

    #[test]
    fn one_dimensional_problems_verify() {
        let st = ProblemSpec::new(ProblemKind::St1d, ModelParams::new(vec![1.0], vec![0.0], 0.2, vec![0.5]), None).unwrap();
        let solved = solve_problem(&st, 101, &SolverOptions::default()).unwrap();
        assert!(verify_problem(&solved, &VerifyOptions::default()).unwrap().iter().all(|c| c.passed));
        assert!(primary_boundary(&solved).unwrap().is_none());
    }
}
