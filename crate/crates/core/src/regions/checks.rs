use serde::{Deserialize, Serialize};

use super::boundary::{window_columns, BoundaryCurve, Window};
use super::StoppingMask;
use crate::catalog::CoordMap;
use crate::error::{Error, Result};
use crate::lattice::{worst_second_difference, worst_slope};
use crate::solver::{TensorGrid, ValueField};

/// Outcome of one structural check. `passed` iff `worst_violation ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub violations: usize,
    /// Coordinates of the worst offender.
    pub location: Option<Vec<f64>>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, worst_violation: f64, tolerance: f64, violations: usize, location: Option<Vec<f64>>) -> Self {
        Self { name: name.into(), passed: worst_violation <= tolerance, worst_violation, tolerance, violations, location }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

// slack comparisons of node coordinates
const SLACK_EPS: f64 = 1e-9;

/// Which end of a column the stopping block must touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    Low,
    High,
}

/// In every column of `window` the stopping nodes must form one block
/// touching the `anchor` end. A stopping node separated from the block by a
/// single continuation node is tolerated.
pub fn check_column_structure(mask: &StoppingMask, window: &Window, abscissa_axis: usize, anchor: Anchor) -> Result<CheckReport> {
    let cols = window_columns(mask.grid(), window, abscissa_axis)?;
    let (mut worst, mut count, mut location) = (0.0_f64, 0, None);
    for (x, nodes) in &cols.columns {
        let ordered: Vec<&(f64, usize)> = match anchor {
            Anchor::Low => nodes.iter().collect(),
            Anchor::High => nodes.iter().rev().collect(),
        };
        let run = ordered.iter().take_while(|(_, idx)| mask.is_stopping(*idx)).count();
        for (j, (y, idx)) in ordered.iter().enumerate().skip(run + 2) {
            if mask.is_stopping(*idx) {
                count += 1;
                let excess = (j - run - 1) as f64 * cols.cell;
                if excess > worst {
                    worst = excess;
                    location = Some(place(abscissa_axis, *x, *y));
                }
            }
        }
    }
    Ok(CheckReport::new("column-structure", worst, 0.0, count, location))
}

fn place(abscissa_axis: usize, x: f64, y: f64) -> Vec<f64> {
    if abscissa_axis == 0 {
        vec![x, y]
    } else {
        vec![y, x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    NonIncreasing,
    NonDecreasing,
    /// Non-increasing, then non-decreasing.
    Valley,
    /// `b(x) = b(1 − x)`.
    SymmetricFlip,
}

/// Largest rise `b_j − min_{i<j} b_i` over `values`, with its position.
fn worst_rise(values: &[f64]) -> (f64, usize) {
    let mut lowest = f64::INFINITY;
    let mut worst = (f64::NEG_INFINITY, 0);
    for (j, &v) in values.iter().enumerate() {
        if j > 0 && v - lowest > worst.0 {
            worst = (v - lowest, j);
        }
        lowest = lowest.min(v);
    }
    (worst.0.max(0.0), worst.1)
}

fn worst_fall(values: &[f64]) -> (f64, usize) {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    worst_rise(&neg)
}

/// Checks the shape of a sampled boundary with one ordinate cell of slack.
pub fn check_monotone_shape(curve: &BoundaryCurve, shape: Shape) -> Result<CheckReport> {
    let b = &curve.values;
    let tol = curve.cell * (1.0 + SLACK_EPS);
    let at = |j: usize| Some(place(curve.abscissa_axis, curve.abscissae[j], b[j]));
    let name = match shape {
        Shape::NonIncreasing => "non-increasing",
        Shape::NonDecreasing => "non-decreasing",
        Shape::Valley => "valley",
        Shape::SymmetricFlip => "flip-symmetric",
    };
    if b.is_empty() {
        return Ok(CheckReport::new(name, 0.0, tol, 0, None));
    }
    let report = match shape {
        Shape::NonIncreasing => {
            let (w, j) = worst_rise(b);
            CheckReport::new(name, w, tol, count_over(b, tol, worst_rise), at(j))
        }
        Shape::NonDecreasing => {
            let (w, j) = worst_fall(b);
            CheckReport::new(name, w, tol, count_over(b, tol, worst_fall), at(j))
        }
        Shape::Valley => {
            let mut best = (f64::INFINITY, 0, 0);
            for s in 0..b.len() {
                let (down, jd) = worst_rise(&b[..=s]);
                let (up, ju) = worst_fall(&b[s..]);
                let w = down.max(up);
                if w < best.0 {
                    best = (w, s, if down >= up { jd } else { s + ju });
                }
            }
            CheckReport::new(name, best.0, tol, (best.0 > tol) as usize, at(best.2))
        }
        Shape::SymmetricFlip => {
            let xs = &curve.abscissae;
            let mut worst = (0.0_f64, 0);
            let mut count = 0;
            for j in 0..xs.len() {
                let Some(k) = xs.iter().position(|&x| (x - (1.0 - xs[j])).abs() <= SLACK_EPS) else {
                    return Err(Error::InvalidGrid(format!("abscissa {} has no mirror node", xs[j])));
                };
                let d = (b[j] - b[k]).abs();
                count += (d > tol) as usize;
                if d > worst.0 {
                    worst = (d, j);
                }
            }
            CheckReport::new(name, worst.0, tol, count, at(worst.1))
        }
    };
    Ok(report)
}

/// Number of prefix positions at which the running violation exceeds `tol`.
fn count_over(b: &[f64], tol: f64, f: fn(&[f64]) -> (f64, usize)) -> usize {
    (1..b.len()).filter(|&j| {
        let (w, at) = f(&b[..=j]);
        w > tol && at == j
    }).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Containment {
    /// Region nodes must be continuation nodes.
    RegionInC,
    /// Region nodes must be stopping nodes.
    RegionInD,
}

/// Every node with `region[idx]` must carry the classification required by
/// `direction`. A violating node is excused when one of its grid neighbours
/// (including diagonals) lies outside the region.
pub fn check_containment(mask: &StoppingMask, region: &[bool], direction: Containment) -> Result<CheckReport> {
    check_containment_with(mask, region, direction, 1)
}

/// As [`check_containment`], excusing violations within `slack_cells` of the
/// region's edge. Use zero slack for regions one node thick.
pub fn check_containment_with(mask: &StoppingMask, region: &[bool], direction: Containment, slack_cells: usize) -> Result<CheckReport> {
    let grid = mask.grid();
    if region.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: region.len() });
    }
    let want_stop = direction == Containment::RegionInD;
    let (mut worst, mut count, mut location) = (0.0_f64, 0, None);
    for idx in 0..grid.len() {
        if !region[idx] || mask.is_stopping(idx) == want_stop {
            continue;
        }
        let depth = depth_in_cells(grid, region, idx);
        if depth <= slack_cells {
            continue;
        }
        count += 1;
        let excess = depth.saturating_sub(slack_cells).min(grid.len()) as f64;
        if excess > worst {
            worst = excess;
            location = Some(grid.node(idx));
        }
    }
    let name = match direction {
        Containment::RegionInC => "region-in-continuation",
        Containment::RegionInD => "region-in-stopping",
    };
    Ok(CheckReport::new(name, worst, 0.0, count, location))
}

/// Chebyshev distance, in cells, from `idx` to the nearest node outside the
/// region; `usize::MAX` when the region covers the grid.
fn depth_in_cells(grid: &TensorGrid, region: &[bool], idx: usize) -> usize {
    let lattice = grid.lattice();
    let centre = lattice.multi(idx);
    let reach = lattice.shape().iter().copied().max().unwrap_or(1);
    let mut probe = vec![0usize; centre.len()];
    for r in 1..reach {
        // walk the cube of radius r and look at its shell
        let lo: Vec<usize> = centre.iter().map(|&c| c.saturating_sub(r)).collect();
        let hi: Vec<usize> = centre.iter().zip(lattice.shape()).map(|(&c, &m)| (c + r).min(m - 1)).collect();
        probe.copy_from_slice(&lo);
        loop {
            let on_shell = probe.iter().zip(&centre).any(|(&p, &c)| p.abs_diff(c) == r);
            if on_shell && !region[lattice.index(&probe)] {
                return r;
            }
            let mut a = probe.len();
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                if probe[a] < hi[a] {
                    probe[a] += 1;
                    break;
                }
                probe[a] = lo[a];
            }
            if probe == lo {
                break;
            }
        }
    }
    usize::MAX
}

/// Largest centered second difference of the field along any axis.
pub fn check_unilateral_concavity(field: &ValueField, tol: f64) -> CheckReport {
    let lattice = field.grid.lattice();
    let mut worst: Option<(f64, usize)> = None;
    let mut count = 0;
    for axis in 0..field.grid.dim() {
        if let Some(w) = worst_second_difference(&field.values, lattice, axis) {
            if worst.is_none_or(|(v, _)| w.0 > v) {
                worst = Some(w);
            }
        }
        count += count_second_differences_over(&field.values, lattice, axis, tol);
    }
    let (w, idx) = worst.unwrap_or((0.0, 0));
    CheckReport::new("unilateral-concavity", w, tol, count, worst.map(|_| field.grid.node(idx)))
}

fn count_second_differences_over(values: &[f64], lattice: &crate::lattice::Lattice, axis: usize, tol: f64) -> usize {
    let n = lattice.shape()[axis];
    let s = lattice.stride(axis);
    (0..values.len())
        .filter(|&idx| {
            let k = lattice.coord(idx, axis);
            k > 0 && k + 1 < n && values[idx - s] + values[idx + s] - 2.0 * values[idx] > tol
        })
        .count()
}

/// Node-to-node slopes along each axis against `bound[axis] + tol`. The
/// reported violation is the largest `slope − bound`.
pub fn check_lipschitz(field: &ValueField, bounds: &[f64], tol: f64) -> Result<CheckReport> {
    let grid = &field.grid;
    if bounds.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: bounds.len() });
    }
    let lattice = grid.lattice();
    let mut worst: Option<(f64, usize)> = None;
    let mut count = 0;
    for axis in 0..grid.dim() {
        let nodes = grid.axis(axis);
        if let Some((slope, idx)) = worst_slope(&field.values, lattice, axis, nodes) {
            let excess = slope - bounds[axis];
            if excess > tol {
                count += 1;
            }
            if worst.is_none_or(|(w, _)| excess > w) {
                worst = Some((excess, idx));
            }
        }
    }
    let (w, idx) = worst.unwrap_or((f64::NEG_INFINITY, 0));
    Ok(CheckReport::new("lipschitz", w, tol, count, worst.map(|_| grid.node(idx))))
}

/// `max |V(S x) − V(x)|` over the nodes, for a grid invariant under `map`.
pub fn check_symmetry(field: &ValueField, map: CoordMap, tol: f64) -> Result<CheckReport> {
    let grid = &field.grid;
    match map {
        CoordMap::Flip(i) if i >= grid.dim() || !grid.is_flip_symmetric(i) => {
            return Err(Error::InvalidGrid(format!("grid is not symmetric under {map:?}")))
        }
        CoordMap::Swap(i, j) if i.max(j) >= grid.dim() || grid.axis(i) != grid.axis(j) => {
            return Err(Error::InvalidGrid(format!("grid is not symmetric under {map:?}")))
        }
        _ => {}
    }
    let lattice = grid.lattice();
    let (mut worst, mut at, mut count) = (0.0_f64, 0, 0);
    for idx in 0..grid.len() {
        let image = lattice.index(&map.apply_index(&lattice.multi(idx), lattice.shape()));
        let d = (field.values[image] - field.values[idx]).abs();
        count += (d > tol) as usize;
        if d > worst {
            worst = d;
            at = idx;
        }
    }
    let name = match map {
        CoordMap::Flip(i) => format!("symmetry-flip-{i}"),
        CoordMap::Swap(i, j) => format!("symmetry-swap-{i}-{j}"),
    };
    Ok(CheckReport::new(name, worst, tol, count, Some(grid.node(at))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::boundary::{extract_boundary, Clip, Convention, Semicontinuity};
    use crate::solver::build_grid;

    fn curve(values: Vec<f64>, cell: f64) -> BoundaryCurve {
        let n = values.len();
        BoundaryCurve {
            abscissa_axis: 0,
            abscissae: (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
            empty: vec![false; n],
            values,
            convention: Convention::MaxStopping,
            semicontinuity: Semicontinuity::Upper,
            cell,
            window: Window::full(),
        }
    }

    #[test]
    fn constant_curve_has_every_shape() {
        let c = curve(vec![0.3; 11], 0.1);
        for s in [Shape::NonIncreasing, Shape::NonDecreasing, Shape::Valley, Shape::SymmetricFlip] {
            assert!(check_monotone_shape(&c, s).unwrap().passed, "{s:?}");
        }
    }

    #[test]
    fn one_cell_jitter_is_tolerated() {
        let c = curve(vec![0.5, 0.4, 0.5, 0.3, 0.2], 0.1);
        assert!(check_monotone_shape(&c, Shape::NonIncreasing).unwrap().passed);
        let c = curve(vec![0.5, 0.4, 0.6, 0.3, 0.2], 0.1);
        let r = check_monotone_shape(&c, Shape::NonIncreasing).unwrap();
        assert!(!r.passed);
        assert!((r.worst_violation - 0.2).abs() < 1e-12);
        assert_eq!(r.location, Some(vec![0.5, 0.6]));
    }

    #[test]
    fn valley_shapes() {
        assert!(check_monotone_shape(&curve(vec![0.9, 0.6, 0.4, 0.5, 0.8], 0.05), Shape::Valley).unwrap().passed);
        assert!(!check_monotone_shape(&curve(vec![0.4, 0.8, 0.4, 0.8, 0.4], 0.05), Shape::Valley).unwrap().passed);
        assert!(!check_monotone_shape(&curve(vec![0.9, 0.6, 0.4, 0.5, 0.8], 0.05), Shape::NonIncreasing).unwrap().passed);
    }

    #[test]
    fn flip_symmetry_of_curves() {
        assert!(check_monotone_shape(&curve(vec![0.1, 0.3, 0.4, 0.3, 0.1], 0.05), Shape::SymmetricFlip).unwrap().passed);
        assert!(!check_monotone_shape(&curve(vec![0.1, 0.3, 0.4, 0.3, 0.3], 0.05), Shape::SymmetricFlip).unwrap().passed);
    }

    #[test]
    fn checkerboard_columns_fail() {
        let grid = build_grid(2, 11).unwrap();
        let lattice = grid.lattice().clone();
        let mask = StoppingMask::new(grid.clone(), (0..grid.len()).map(|i| (lattice.coord(i, 0) + lattice.coord(i, 1)) % 2 == 0).collect()).unwrap();
        let r = check_column_structure(&mask, &Window::full(), 0, Anchor::Low).unwrap();
        assert!(!r.passed);
        assert!(r.violations > 0);
    }

    #[test]
    fn anchored_blocks_pass() {
        let grid = build_grid(2, 21).unwrap();
        let mask = StoppingMask::from_predicate(grid.clone(), |x| x[1] <= 0.5 * x[0]);
        assert!(check_column_structure(&mask, &Window::full(), 0, Anchor::Low).unwrap().passed);
        assert!(!check_column_structure(&mask, &Window::full(), 0, Anchor::High).unwrap().passed);
        let mask = StoppingMask::from_predicate(grid, |x| x[1] >= 0.9 - 0.5 * x[0]);
        assert!(check_column_structure(&mask, &Window::full().clipped(Clip::AboveDiagonal), 0, Anchor::High).unwrap().passed);
        let b = extract_boundary(&mask, &Window::full(), 0, Convention::MinStopping).unwrap();
        assert!(check_monotone_shape(&b, Shape::NonIncreasing).unwrap().passed);
    }

    #[test]
    fn containment_with_boundary_slack() {
        let grid = build_grid(2, 21).unwrap();
        let region: Vec<bool> = (0..grid.len()).map(|i| grid.node(i)[0] < 0.5).collect();
        // stopping set reaches one cell into the region: excused
        let mask = StoppingMask::from_predicate(grid.clone(), |x| x[0] >= 0.45);
        let r = check_containment(&mask, &region, Containment::RegionInC).unwrap();
        assert!(r.passed, "{r:?}");
        // three cells deep: not excused
        let mask = StoppingMask::from_predicate(grid.clone(), |x| x[0] >= 0.35);
        let r = check_containment(&mask, &region, Containment::RegionInC).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst_violation, 2.0);
        let r = check_containment(&mask, &region, Containment::RegionInD).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn thin_regions_need_zero_slack() {
        let grid = build_grid(2, 11).unwrap();
        let row: Vec<bool> = (0..grid.len()).map(|i| grid.node(i)[1] == 0.0).collect();
        let mask = StoppingMask::from_predicate(grid, |x| x[0] < 0.5);
        assert!(check_containment(&mask, &row, Containment::RegionInD).unwrap().passed);
        let r = check_containment_with(&mask, &row, Containment::RegionInD, 0).unwrap();
        assert!(!r.passed);
        assert_eq!(r.violations, 6);
    }

    #[test]
    fn concavity_of_sampled_fields() {
        let grid = build_grid(2, 21).unwrap();
        let qd1 = ValueField::from_fn(grid.clone(), |x| (1.0 - x[0]) * (1.0 - x[1]));
        assert!(check_unilateral_concavity(&qd1, 1e-12).passed);
        let convex = ValueField::from_fn(grid, |x| x[0] * x[0]);
        let r = check_unilateral_concavity(&convex, 1e-12);
        assert!(!r.passed && r.worst_violation > 0.0);
    }

    #[test]
    fn lipschitz_of_sampled_fields() {
        let grid = build_grid(2, 21).unwrap();
        let flat = ValueField::from_fn(grid.clone(), |_| 0.4);
        let r = check_lipschitz(&flat, &[1.0, 1.0], 1e-3).unwrap();
        assert!(r.passed);
        assert_eq!(r.worst_violation, -1.0);
        let steep = ValueField::from_fn(grid, |x| 2.0 * x[1]);
        let r = check_lipschitz(&steep, &[1.0, 1.0], 1e-3).unwrap();
        assert!(!r.passed);
        assert!((r.worst_violation - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetry_of_sampled_fields() {
        let grid = build_grid(2, 11).unwrap();
        let f = ValueField::from_fn(grid, |x| x[0].min(1.0 - x[0]) + x[1]);
        assert!(check_symmetry(&f, CoordMap::Flip(0), 1e-15).unwrap().passed);
        assert!(!check_symmetry(&f, CoordMap::Flip(1), 1e-6).unwrap().passed);
        assert!(!check_symmetry(&f, CoordMap::Swap(0, 1), 1e-6).unwrap().passed);
    }
}
