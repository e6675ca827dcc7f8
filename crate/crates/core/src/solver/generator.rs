use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solver::TensorGrid;

/// Monotone finite-difference approximation of
///
/// ```text
/// L = Σᵢ ½ μᵢ² πᵢ²(1−πᵢ)² ∂ᵢ² + λᵢ(1−πᵢ) ∂ᵢ
/// ```
///
/// with central second differences and forward (upwind) first differences.
/// No boundary rows are imposed: the diffusion vanishes on the faces and the
/// drift never points out of the cube.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    params: ModelParams,
    grid: TensorGrid,
    /// Per axis, weight of the lower neighbour at every node.
    lower: Vec<Vec<f64>>,
    /// Per axis, weight of the upper neighbour at every node.
    upper: Vec<Vec<f64>>,
    /// Sum of all neighbour weights (minus the diagonal entry).
    total: Vec<f64>,
}

/// Builds the generator of the posterior process for `p` on a uniform grid.
pub fn discretize_generator(p: &ModelParams, grid: &TensorGrid) -> Result<DiscreteGenerator> {
    p.ensure_valid()?;
    if grid.dim() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: grid.dim() });
    }
    if !grid.is_uniform() {
        return Err(Error::InvalidGrid("the generator needs a uniform grid".into()));
    }
    let lattice = grid.lattice();
    let len = grid.len();
    let mut lower = vec![vec![0.0; len]; p.n];
    let mut upper = vec![vec![0.0; len]; p.n];
    let mut total = vec![0.0; len];
    for a in 0..p.n {
        let nodes = grid.axis(a);
        let m = nodes.len();
        let h = grid.spacing(a);
        let (mu, lambda) = (p.mu[a], p.lambda[a]);
        // node m−1−k carries the exact complement 1 − x_k of node k
        let per_node: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let (x, y) = (nodes[k], nodes[m - 1 - k]);
                let diffusion = 0.5 * mu * mu * (x * y) * (x * y) / (h * h);
                let drift = lambda * y / h;
                (diffusion, diffusion + drift)
            })
            .collect();
        for idx in 0..len {
            let (lo, up) = per_node[lattice.coord(idx, a)];
            lower[a][idx] = lo;
            upper[a][idx] = up;
            total[idx] += lo + up;
        }
    }
    Ok(DiscreteGenerator { params: p.clone(), grid: grid.clone(), lower, upper, total })
}

impl DiscreteGenerator {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    /// Total off-diagonal weight of row `idx`; zero at absorbing nodes.
    #[inline]
    pub fn total_weight(&self, idx: usize) -> f64 {
        self.total[idx]
    }

    /// `Σ_j w_ij v_j` over the neighbours of `idx`.
    #[inline]
    pub fn neighbour_sum(&self, v: &[f64], idx: usize) -> f64 {
        let lattice = self.grid.lattice();
        let mut s = 0.0;
        for a in 0..self.lower.len() {
            let stride = lattice.stride(a);
            let lo = self.lower[a][idx];
            if lo != 0.0 {
                s += lo * v[idx - stride];
            }
            let up = self.upper[a][idx];
            if up != 0.0 {
                s += up * v[idx + stride];
            }
        }
        s
    }

    /// `(Lv)` at a single node.
    #[inline]
    pub fn apply_at(&self, v: &[f64], idx: usize) -> f64 {
        self.neighbour_sum(v, idx) - self.total[idx] * v[idx]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len()).map(|idx| self.apply_at(v, idx)).collect()
    }

    /// Row `idx` as `(column, coefficient)` pairs, diagonal first.
    pub fn row(&self, idx: usize) -> Vec<(usize, f64)> {
        let lattice = self.grid.lattice();
        let mut out = vec![(idx, -self.total[idx])];
        for a in 0..self.lower.len() {
            let stride = lattice.stride(a);
            if self.lower[a][idx] != 0.0 {
                out.push((idx - stride, self.lower[a][idx]));
            }
            if self.upper[a][idx] != 0.0 {
                out.push((idx + stride, self.upper[a][idx]));
            }
        }
        out
    }

    /// Weight of the lower and upper neighbour of `idx` along `axis`.
    pub fn axis_weights(&self, idx: usize, axis: usize) -> (f64, f64) {
        (self.lower[axis][idx], self.upper[axis][idx])
    }
}
