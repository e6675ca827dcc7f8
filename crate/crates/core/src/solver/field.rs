use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HypercubePoint;
use crate::solver::TensorGrid;

/// Cost function sampled on a tensor grid, with multilinear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueField {
    pub grid: TensorGrid,
    pub values: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl ValueField {
    /// Wraps arbitrary node samples, e.g. a penalty sampled on the grid.
    pub fn from_samples(grid: TensorGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values, residual_norm: 0.0, iterations: 0 })
    }

    pub fn from_fn(grid: TensorGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(&grid.node(idx))).collect();
        Self { grid, values, residual_norm: 0.0, iterations: 0 }
    }

    /// Multilinear interpolation; exact at nodes.
    pub fn evaluate(&self, x: &HypercubePoint) -> Result<f64> {
        self.evaluate_coords(x.coords())
    }

    pub fn evaluate_coords(&self, x: &[f64]) -> Result<f64> {
        let n = self.grid.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        let cells: Vec<(usize, f64)> = (0..n).map(|a| self.grid.locate(a, x[a])).collect();
        let lattice = self.grid.lattice();
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut idx = 0;
            for (a, &(k, t)) in cells.iter().enumerate() {
                let upper = corner >> a & 1 == 1;
                weight *= if upper { t } else { 1.0 - t };
                idx += (k + upper as usize) * lattice.stride(a);
            }
            if weight != 0.0 {
                acc += weight * self.values[idx];
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::build_grid;

    fn field() -> ValueField {
        let grid = build_grid(2, 5).unwrap();
        ValueField::from_fn(grid, |x| (3.0 * x[0]).sin() + x[1] * x[1])
    }

    #[test]
    fn exact_at_nodes() {
        let f = field();
        for idx in 0..f.grid.len() {
            let x = HypercubePoint::new(f.grid.node(idx)).unwrap();
            assert_eq!(f.evaluate(&x).unwrap(), f.values[idx]);
        }
    }

    #[test]
    fn edge_midpoint_is_average() {
        let f = field();
        let v = f.evaluate_coords(&[0.375, 0.5]).unwrap();
        let avg = 0.5 * (f.values[1 * 5 + 2] + f.values[2 * 5 + 2]);
        assert!((v - avg).abs() < 1e-15);
    }

    #[test]
    fn bilinear_functions_are_reproduced() {
        let grid = build_grid(2, 5).unwrap();
        let f = ValueField::from_fn(grid, |x| 1.0 - x[0] * x[1]);
        let v = f.evaluate_coords(&[0.33, 0.71]).unwrap();
        assert!((v - (1.0 - 0.33 * 0.71)).abs() < 1e-14);
    }

    #[test]
    fn out_of_domain_and_dimension_errors() {
        let f = field();
        assert!(matches!(f.evaluate_coords(&[0.5, 1.2]), Err(Error::OutOfDomain(_))));
        assert!(matches!(f.evaluate_coords(&[0.5]), Err(Error::DimensionMismatch { .. })));
    }
}
