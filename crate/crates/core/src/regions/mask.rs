use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::TensorGrid;

/// Discrete stopping region: `true` marks nodes of `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingMask {
    grid: TensorGrid,
    stopping: Vec<bool>,
}

impl StoppingMask {
    pub fn new(grid: TensorGrid, stopping: Vec<bool>) -> Result<Self> {
        if stopping.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: stopping.len() });
        }
        Ok(Self { grid, stopping })
    }

    /// Mask whose stopping nodes satisfy `stop`.
    pub fn from_predicate(grid: TensorGrid, stop: impl Fn(&[f64]) -> bool) -> Self {
        let stopping = (0..grid.len()).map(|idx| stop(&grid.node(idx))).collect();
        Self { grid, stopping }
    }

    pub fn everywhere(grid: TensorGrid) -> Self {
        let len = grid.len();
        Self { grid, stopping: vec![true; len] }
    }

    pub fn nowhere(grid: TensorGrid) -> Self {
        let len = grid.len();
        Self { grid, stopping: vec![false; len] }
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn stopping(&self) -> &[bool] {
        &self.stopping
    }

    #[inline]
    pub fn is_stopping(&self, idx: usize) -> bool {
        self.stopping[idx]
    }

    /// Classification of the node nearest to `x`.
    #[inline]
    pub fn lookup(&self, x: &[f64]) -> bool {
        self.stopping[self.grid.nearest_index(x)]
    }

    pub fn stopping_count(&self) -> usize {
        self.stopping.iter().filter(|&&s| s).count()
    }

    /// The mask seen through `πᵢ ↦ 1 − πᵢ`; the axis must be flip symmetric.
    pub fn flipped(&self, axis: usize) -> Result<Self> {
        if !self.grid.is_flip_symmetric(axis) {
            return Err(Error::InvalidGrid(format!("axis {axis} is not flip symmetric")));
        }
        let lattice = self.grid.lattice();
        let m = lattice.shape()[axis];
        let stride = lattice.stride(axis);
        let stopping = (0..self.stopping.len())
            .map(|idx| {
                let k = lattice.coord(idx, axis);
                self.stopping[idx + (m - 1 - k) * stride - k * stride]
            })
            .collect();
        Ok(Self { grid: self.grid.clone(), stopping })
    }

    /// Exchanges two axes; both must carry the same nodes.
    pub fn swapped(&self, i: usize, j: usize) -> Result<Self> {
        if self.grid.axis(i) != self.grid.axis(j) {
            return Err(Error::InvalidGrid(format!("axes {i} and {j} differ")));
        }
        let lattice = self.grid.lattice();
        let stopping = (0..self.stopping.len())
            .map(|idx| {
                let mut multi = lattice.multi(idx);
                multi.swap(i, j);
                self.stopping[lattice.index(&multi)]
            })
            .collect();
        Ok(Self { grid: self.grid.clone(), stopping })
    }
}
