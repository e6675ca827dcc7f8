use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Tensor product of per-axis node lists covering `[0,1]ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TensorGrid {
    axes: Vec<Vec<f64>>,
    uniform: bool,
    lattice: Lattice,
}

/// Uniform grid with `nodes_per_axis` nodes on each of `n` axes. The node
/// count must be odd so that `1/2` is a node and `x ↦ 1 − x` maps nodes to
/// nodes.
pub fn build_grid(n: usize, nodes_per_axis: usize) -> Result<TensorGrid> {
    if n == 0 {
        return Err(Error::InvalidGrid("dimension must be >= 1".into()));
    }
    if nodes_per_axis < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 nodes per axis, got {nodes_per_axis}")));
    }
    if nodes_per_axis % 2 == 0 {
        return Err(Error::InvalidGrid(format!("node count must be odd so that 1/2 is a node, got {nodes_per_axis}")));
    }
    let m = (nodes_per_axis - 1) as f64;
    // k/m for every node, so that node N−1−k is the correctly rounded 1 − x_k
    let axis: Vec<f64> = (0..nodes_per_axis).map(|k| k as f64 / m).collect();
    TensorGrid::from_axes(vec![axis; n])
}

impl TensorGrid {
    pub fn from_axes(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("dimension must be >= 1".into()));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.len() < 3 {
                return Err(Error::InvalidGrid(format!("axis {i} has {} nodes, need at least 3", a.len())));
            }
            if a[0] != 0.0 || *a.last().unwrap() != 1.0 {
                return Err(Error::InvalidGrid(format!("axis {i} must start at 0 and end at 1")));
            }
            if a.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidGrid(format!("axis {i} is not strictly increasing")));
            }
        }
        let uniform = axes.iter().all(|a| {
            let h = 1.0 / (a.len() - 1) as f64;
            a.iter().enumerate().all(|(k, &x)| (x - k as f64 * h).abs() <= 1e-12)
        });
        let lattice = Lattice::new(axes.iter().map(Vec::len).collect());
        Ok(Self { axes, uniform, lattice })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn shape(&self) -> &[usize] {
        self.lattice.shape()
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Node spacing of a uniform axis.
    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / (self.axes[axis].len() - 1) as f64
    }

    /// Largest cell width over all axes.
    pub fn max_cell(&self) -> f64 {
        self.axes.iter().flat_map(|a| a.windows(2).map(|w| w[1] - w[0])).fold(0.0, f64::max)
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.axes[a][self.lattice.coord(idx, a)]).collect()
    }

    pub fn node_into(&self, idx: usize, buf: &mut [f64]) {
        for (a, b) in buf.iter_mut().enumerate() {
            *b = self.axes[a][self.lattice.coord(idx, a)];
        }
    }

    /// Whether the axis is closed under `x ↦ 1 − x`.
    pub fn is_flip_symmetric(&self, axis: usize) -> bool {
        let a = &self.axes[axis];
        let n = a.len();
        (0..n).all(|k| (a[k] + a[n - 1 - k] - 1.0).abs() <= 1e-12)
    }

    /// Position of the node nearest to `x` along `axis`.
    pub fn nearest(&self, axis: usize, x: f64) -> usize {
        let a = &self.axes[axis];
        let n = a.len();
        if self.uniform {
            return ((x * (n - 1) as f64).round().max(0.0) as usize).min(n - 1);
        }
        let k = a.partition_point(|&v| v < x);
        if k == 0 {
            0
        } else if k == n {
            n - 1
        } else if x - a[k - 1] <= a[k] - x {
            k - 1
        } else {
            k
        }
    }

    /// Flat index of the node nearest to `x`.
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        (0..self.dim()).map(|a| self.nearest(a, x[a]) * self.lattice.stride(a)).sum()
    }

    /// Cell `k` with `x ∈ [x_k, x_{k+1}]` and the local coordinate in it.
    pub fn locate(&self, axis: usize, x: f64) -> (usize, f64) {
        let a = &self.axes[axis];
        let n = a.len();
        let k = a.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        (k, (x - a[k]) / (a[k + 1] - a[k]))
    }
}

impl TryFrom<Vec<Vec<f64>>> for TensorGrid {
    type Error = Error;

    fn try_from(axes: Vec<Vec<f64>>) -> Result<Self> {
        TensorGrid::from_axes(axes)
    }
}

impl From<TensorGrid> for Vec<Vec<f64>> {
    fn from(g: TensorGrid) -> Self {
        g.axes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_partition() {
        let g = build_grid(1, 5).unwrap();
        assert_eq!(g.axis(0), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(g.is_uniform() && g.is_flip_symmetric(0));
    }

    #[test]
    fn two_dimensional_shape() {
        let g = build_grid(2, 201).unwrap();
        assert_eq!(g.shape(), &[201, 201]);
        assert_eq!(g.len(), 201 * 201);
        assert_eq!(g.axis(1)[100], 0.5);
    }

    #[test]
    fn even_node_count_is_rejected() {
        assert!(matches!(build_grid(2, 200), Err(Error::InvalidGrid(_))));
        assert!(build_grid(1, 1).is_err());
    }

    #[test]
    fn flipped_nodes_are_exact_complements() {
        let g = build_grid(1, 201).unwrap();
        let a = g.axis(0);
        for k in 0..201 {
            assert_eq!(a[200 - k], (200 - k) as f64 / 200.0);
            assert!((a[k] + a[200 - k] - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn from_axes_validation() {
        assert!(TensorGrid::from_axes(vec![vec![0.0, 0.3, 1.0]]).is_ok());
        assert!(!TensorGrid::from_axes(vec![vec![0.0, 0.3, 1.0]]).unwrap().is_uniform());
        assert!(TensorGrid::from_axes(vec![vec![0.0, 0.6, 0.5, 1.0]]).is_err());
        assert!(TensorGrid::from_axes(vec![vec![0.1, 0.5, 1.0]]).is_err());
    }

    #[test]
    fn nearest_and_locate() {
        let g = build_grid(2, 5).unwrap();
        assert_eq!(g.nearest(0, 0.13), 1);
        assert_eq!(g.nearest(0, 1.0), 4);
        assert_eq!(g.nearest_index(&[0.5, 0.99]), 2 * 5 + 4);
        assert_eq!(g.locate(0, 1.0), (3, 1.0));
        assert_eq!(g.locate(0, 0.375), (1, 0.5));
    }
}
