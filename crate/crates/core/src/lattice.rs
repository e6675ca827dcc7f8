//! Row-major index arithmetic on tensor lattices, and the discrete
//! difference predicates shared by the assumption checks and the checks on
//! solved cost functions.

/// Shape and strides of a tensor lattice; the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl Lattice {
    pub fn new(shape: Vec<usize>) -> Self {
        let mut strides = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        Self { shape, strides }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of flat index `idx` along `axis`.
    #[inline]
    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.shape[axis]
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    pub fn multi(&self, idx: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.coord(idx, a)).collect()
    }
}

/// Largest centered second difference `v(x−e) + v(x+e) − 2v(x)` along
/// `axis`, with the flat index of its centre. `None` when the axis has fewer
/// than three nodes.
pub fn worst_second_difference(values: &[f64], lattice: &Lattice, axis: usize) -> Option<(f64, usize)> {
    let n = lattice.shape()[axis];
    if n < 3 {
        return None;
    }
    let s = lattice.stride(axis);
    let mut worst: Option<(f64, usize)> = None;
    for idx in 0..values.len() {
        let k = lattice.coord(idx, axis);
        if k == 0 || k + 1 == n {
            continue;
        }
        let d2 = values[idx - s] + values[idx + s] - 2.0 * values[idx];
        if worst.is_none_or(|(w, _)| d2 > w) {
            worst = Some((d2, idx));
        }
    }
    worst
}

/// Largest absolute node-to-node slope along `axis`, with the flat index of
/// the left node. `nodes` are the coordinates of that axis.
pub fn worst_slope(values: &[f64], lattice: &Lattice, axis: usize, nodes: &[f64]) -> Option<(f64, usize)> {
    let n = lattice.shape()[axis];
    if n < 2 {
        return None;
    }
    let s = lattice.stride(axis);
    let mut worst: Option<(f64, usize)> = None;
    for idx in 0..values.len() {
        let k = lattice.coord(idx, axis);
        if k + 1 == n {
            continue;
        }
        let slope = (values[idx + s] - values[idx]).abs() / (nodes[k + 1] - nodes[k]);
        if worst.is_none_or(|(w, _)| slope > w) {
            worst = Some((slope, idx));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_are_row_major() {
        let l = Lattice::new(vec![3, 4, 5]);
        assert_eq!(l.len(), 60);
        assert_eq!(l.stride(0), 20);
        assert_eq!(l.stride(2), 1);
        let idx = l.index(&[2, 1, 3]);
        assert_eq!(l.multi(idx), vec![2, 1, 3]);
        assert_eq!(l.coord(idx, 1), 1);
    }

    #[test]
    fn second_difference_detects_convexity() {
        let l = Lattice::new(vec![5]);
        let concave: Vec<f64> = (0..5).map(|k| -((k * k) as f64)).collect();
        assert!(worst_second_difference(&concave, &l, 0).unwrap().0 < 0.0);
        let convex: Vec<f64> = (0..5).map(|k| (k * k) as f64).collect();
        let (w, idx) = worst_second_difference(&convex, &l, 0).unwrap();
        assert_eq!(w, 2.0);
        assert_eq!(idx, 1);
    }

    #[test]
    fn slope_uses_node_spacing() {
        let l = Lattice::new(vec![3]);
        let nodes = [0.0, 0.5, 1.0];
        let (s, _) = worst_slope(&[0.0, 1.0, 1.25], &l, 0, &nodes).unwrap();
        assert_eq!(s, 2.0);
    }
}
