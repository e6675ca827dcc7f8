use crate::catalog::{build_penalty, OneDKind, OneDSolution, ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solver::{discretize_generator, solve_obstacle, ObstacleSolution, SolverOptions, TensorGrid};

/// One-dimensional sequential testing `ST(μ, c)`: cost function `u` and the
/// continuation interval `(A*, 1 − A*)`.
pub fn solve_1d_st(mu: f64, cost: f64, grid: &TensorGrid) -> Result<OneDSolution> {
    solve_1d_st_with(mu, cost, grid, &SolverOptions::default())
}

pub fn solve_1d_st_with(mu: f64, cost: f64, grid: &TensorGrid, opts: &SolverOptions) -> Result<OneDSolution> {
    let params = ModelParams::new(vec![mu], vec![0.0], cost, vec![0.5]);
    let sol = solve_one(ProblemKind::St1d, params, grid, opts)?;
    let nodes = grid.axis(0);
    // first continuation node; the threshold sits half a cell below it
    let (low, degenerate) = match sol.mask.stopping().iter().position(|&s| !s) {
        Some(k) if k > 0 => (nodes[k] - 0.5 * (nodes[k] - nodes[k - 1]), false),
        _ => (0.5, true),
    };
    Ok(OneDSolution {
        kind: OneDKind::Testing,
        mu,
        lambda: 0.0,
        cost,
        nodes: nodes.to_vec(),
        values: sol.field.values,
        threshold_low: low,
        threshold_high: Some(1.0 - low),
        degenerate,
    })
}

/// One-dimensional quickest detection `QD(μ, λ, c)`: cost function `u` and
/// the continuation interval `[0, B*)`.
pub fn solve_1d_qd(mu: f64, lambda: f64, cost: f64, grid: &TensorGrid) -> Result<OneDSolution> {
    solve_1d_qd_with(mu, lambda, cost, grid, &SolverOptions::default())
}

pub fn solve_1d_qd_with(mu: f64, lambda: f64, cost: f64, grid: &TensorGrid, opts: &SolverOptions) -> Result<OneDSolution> {
    let params = ModelParams::new(vec![mu], vec![lambda], cost, vec![0.0]);
    let sol = solve_one(ProblemKind::Qd1d, params, grid, opts)?;
    let nodes = grid.axis(0);
    // π = 1 always stops, so a stopping node exists
    let k = sol.mask.stopping().iter().position(|&s| s).unwrap_or(nodes.len() - 1);
    let (low, degenerate) = if k == 0 { (0.0, true) } else { (nodes[k] - 0.5 * (nodes[k] - nodes[k - 1]), false) };
    Ok(OneDSolution {
        kind: OneDKind::Detection,
        mu,
        lambda,
        cost,
        nodes: nodes.to_vec(),
        values: sol.field.values,
        threshold_low: low,
        threshold_high: None,
        degenerate,
    })
}

fn solve_one(kind: ProblemKind, params: ModelParams, grid: &TensorGrid, opts: &SolverOptions) -> Result<ObstacleSolution> {
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: grid.dim() });
    }
    let spec = ProblemSpec::new(kind, params, None)?;
    let pen = build_penalty(&spec, None)?;
    let gen = discretize_generator(&spec.params, grid)?;
    solve_obstacle(&gen, &pen, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::build_grid;

    #[test]
    fn testing_value_vanishes_at_the_ends() {
        let grid = build_grid(1, 401).unwrap();
        let u = solve_1d_st(1.0, 0.2, &grid).unwrap();
        assert_eq!(u.values[0], 0.0);
        assert_eq!(u.values[400], 0.0);
        assert!(u.threshold_low > 0.0 && u.threshold_low < 0.5);
        assert!(!u.degenerate);
    }

    #[test]
    fn testing_value_is_symmetric_concave_and_below_the_wedge() {
        let grid = build_grid(1, 401).unwrap();
        let u = solve_1d_st(1.0, 0.2, &grid).unwrap();
        let n = u.values.len();
        for k in 0..n {
            // exact up to the rounding of the direct solve
            assert!((u.values[k] - u.values[n - 1 - k]).abs() <= 1e-14, "node {k}");
            assert!(u.values[k] <= u.nodes[k].min(1.0 - u.nodes[k]));
        }
        for k in 1..n - 1 {
            assert!(u.values[k - 1] + u.values[k + 1] - 2.0 * u.values[k] <= 1e-14);
        }
    }

    #[test]
    fn detection_value_is_monotone_concave() {
        let grid = build_grid(1, 401).unwrap();
        let u = solve_1d_qd(1.0, 0.5, 1.0, &grid).unwrap();
        assert_eq!(u.values[400], 0.0);
        assert!(u.values.windows(2).all(|w| w[1] <= w[0]));
        for k in 0..401 {
            assert!(u.values[k] <= 1.0 - u.nodes[k] + 1e-15);
        }
        for k in 1..400 {
            assert!(u.values[k - 1] + u.values[k + 1] - 2.0 * u.values[k] <= 1e-13);
        }
        assert!(u.threshold_low > 0.0 && u.threshold_low < 1.0);
    }

    #[test]
    fn expensive_observation_is_degenerate() {
        let grid = build_grid(1, 101).unwrap();
        let u = solve_1d_st(1.0, 50.0, &grid).unwrap();
        assert!(u.degenerate);
        assert_eq!(u.threshold_low, 0.5);
    }

    #[test]
    fn two_dimensional_grid_is_rejected() {
        let grid = build_grid(2, 11).unwrap();
        assert!(solve_1d_st(1.0, 0.2, &grid).is_err());
    }
}
