use crate::error::Result;
use crate::model::{ModelParams, PenaltyPair};
use crate::solver::{discretize_generator, TensorGrid};

/// Disagreement between centered and one-sided second differences of `g`
/// above which a node is treated as a kink.
pub const KINK_TOL: f64 = 1e-8;

/// Whether the centered three-point stencil at `idx` along `axis` straddles
/// a kink of the sampled `g`: its second difference matches neither
/// one-sided neighbour stencil.
fn is_kink(g: &[f64], grid: &TensorGrid, idx: usize, axis: usize, tol: f64) -> bool {
    let lattice = grid.lattice();
    let m = lattice.shape()[axis];
    let k = lattice.coord(idx, axis);
    if k == 0 || k + 1 == m {
        return false;
    }
    let s = lattice.stride(axis);
    let centered = g[idx - s] + g[idx + s] - 2.0 * g[idx];
    let left = (k >= 2).then(|| g[idx - 2 * s] + g[idx] - 2.0 * g[idx - s]);
    let right = (k + 2 < m).then(|| g[idx + 2 * s] + g[idx] - 2.0 * g[idx + s]);
    let agrees = |o: Option<f64>| o.is_some_and(|d| (d - centered).abs() <= tol);
    if left.is_none() && right.is_none() {
        return false;
    }
    !(agrees(left) || agrees(right))
}

/// Nodes where the discrete `Lg + h` is negative, kinks of `g` excluded.
/// By complementarity these nodes must be continuation nodes.
pub fn lower_bound_region(p: &ModelParams, pen: &PenaltyPair, grid: &TensorGrid) -> Result<Vec<bool>> {
    lower_bound_region_with(p, pen, grid, KINK_TOL)
}

pub fn lower_bound_region_with(p: &ModelParams, pen: &PenaltyPair, grid: &TensorGrid, kink_tol: f64) -> Result<Vec<bool>> {
    let gen = discretize_generator(p, grid)?;
    let mut x = vec![0.0; grid.dim()];
    let mut g = Vec::with_capacity(grid.len());
    let mut h = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        grid.node_into(idx, &mut x);
        g.push(pen.g(&x));
        h.push(pen.h(&x));
    }
    Ok((0..grid.len())
        .map(|idx| gen.apply_at(&g, idx) + h[idx] < 0.0 && !(0..grid.dim()).any(|a| is_kink(&g, grid, idx, a, kink_tol)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_penalty, ProblemKind, ProblemSpec};
    use crate::solver::build_grid;

    #[test]
    fn detection_1d_is_an_initial_interval() {
        let (lambda, c) = (0.5, 1.0);
        let spec = ProblemSpec::new(ProblemKind::Qd1d, ModelParams::new(vec![1.0], vec![lambda], c, vec![0.0]), None).unwrap();
        let grid = build_grid(1, 101).unwrap();
        let region = lower_bound_region(&spec.params, &build_penalty(&spec, None).unwrap(), &grid).unwrap();
        let cut = lambda / (lambda + c);
        for (k, &r) in region.iter().enumerate() {
            let x = grid.axis(0)[k];
            if (x - cut).abs() > 0.011 {
                assert_eq!(r, x < cut, "node {x}");
            }
        }
    }

    #[test]
    fn testing_1d_is_empty_off_the_kink() {
        let spec = ProblemSpec::new(ProblemKind::St1d, ModelParams::new(vec![1.0], vec![0.0], 0.2, vec![0.5]), None).unwrap();
        let grid = build_grid(1, 101).unwrap();
        let region = lower_bound_region(&spec.params, &build_penalty(&spec, None).unwrap(), &grid).unwrap();
        assert!(region.iter().all(|&r| !r));
        // without kink exclusion the wedge at 1/2 shows up
        let region = lower_bound_region_with(&spec.params, &build_penalty(&spec, None).unwrap(), &grid, f64::INFINITY).unwrap();
        assert_eq!(region.iter().filter(|&&r| r).count(), 1);
    }

    #[test]
    fn detection_2d_matches_hand_computation() {
        let p = ModelParams::new(vec![1.0, 1.0], vec![0.5, 0.3], 1.0, vec![0.0, 0.0]);
        let spec = ProblemSpec::new(ProblemKind::Qd2, p.clone(), None).unwrap();
        let grid = build_grid(2, 41).unwrap();
        let region = lower_bound_region(&p, &build_penalty(&spec, None).unwrap(), &grid).unwrap();
        let h = grid.spacing(0);
        for idx in 0..grid.len() {
            let x = grid.node(idx);
            // forward differences are exact on g = 1 − π₁π₂, which is affine per axis
            let exact = -0.5 * (1.0 - x[0]) * x[1] - 0.3 * (1.0 - x[1]) * x[0] + x[0] * x[1];
            if exact.abs() > h {
                assert_eq!(region[idx], exact < 0.0, "at {x:?}");
            }
        }
    }
}
