use serde::{Deserialize, Serialize};

use super::StoppingMask;
use crate::error::{Error, Result};
use crate::solver::TensorGrid;

const EDGE_EPS: f64 = 1e-12;

/// Column-dependent restriction of the ordinate range of a [`Window`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clip {
    None,
    /// `y ≤ x ∧ (1 − x)`.
    BelowTent,
    /// `y ≥ x`.
    AboveDiagonal,
}

/// Sub-rectangle `[a₀,a₁] × [o₀,o₁]` of a 2D grid in (abscissa, ordinate)
/// coordinates, optionally clipped per column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub abscissa: [f64; 2],
    pub ordinate: [f64; 2],
    pub clip: Clip,
}

impl Window {
    pub fn full() -> Self {
        Self { abscissa: [0.0, 1.0], ordinate: [0.0, 1.0], clip: Clip::None }
    }

    pub fn rect(abscissa: [f64; 2], ordinate: [f64; 2]) -> Self {
        Self { abscissa, ordinate, clip: Clip::None }
    }

    pub fn clipped(self, clip: Clip) -> Self {
        Self { clip, ..self }
    }

    pub fn has_abscissa(&self, x: f64) -> bool {
        x >= self.abscissa[0] - EDGE_EPS && x <= self.abscissa[1] + EDGE_EPS
    }

    /// Ordinate range of the column at `x`.
    pub fn column_range(&self, x: f64) -> (f64, f64) {
        let [mut lo, mut hi] = self.ordinate;
        match self.clip {
            Clip::None => {}
            Clip::BelowTent => hi = hi.min(x.min(1.0 - x)),
            Clip::AboveDiagonal => lo = lo.max(x),
        }
        (lo, hi)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (lo, hi) = self.column_range(x);
        self.has_abscissa(x) && y >= lo - EDGE_EPS && y <= hi + EDGE_EPS
    }

    fn validate(&self) -> Result<()> {
        let ok = |r: [f64; 2]| r[0] <= r[1] && r[0] >= -EDGE_EPS && r[1] <= 1.0 + EDGE_EPS;
        if !ok(self.abscissa) || !ok(self.ordinate) {
            return Err(Error::InvalidGrid(format!("window {:?} × {:?} is not inside the unit square", self.abscissa, self.ordinate)));
        }
        Ok(())
    }
}

/// Node positions of a 2D window, column by column.
#[derive(Debug, Clone)]
pub(crate) struct Columns {
    /// `(abscissa, [(ordinate, flat index)])`, ordinates ascending.
    pub columns: Vec<(f64, Vec<(f64, usize)>)>,
    pub cell: f64,
}

pub(crate) fn window_columns(grid: &TensorGrid, window: &Window, abscissa_axis: usize) -> Result<Columns> {
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: grid.dim() });
    }
    if abscissa_axis > 1 {
        return Err(Error::InvalidParams(format!("axis {abscissa_axis} out of range for a 2D grid")));
    }
    window.validate()?;
    let ord_axis = 1 - abscissa_axis;
    let lattice = grid.lattice();
    let xs = grid.axis(abscissa_axis);
    let ys = grid.axis(ord_axis);
    let mut columns = Vec::new();
    let mut multi = [0usize; 2];
    for (ka, &x) in xs.iter().enumerate() {
        if !window.has_abscissa(x) {
            continue;
        }
        multi[abscissa_axis] = ka;
        let nodes = ys
            .iter()
            .enumerate()
            .filter(|(_, &y)| window.contains(x, y))
            .map(|(ko, &y)| {
                multi[ord_axis] = ko;
                (y, lattice.index(&multi))
            })
            .collect();
        columns.push((x, nodes));
    }
    if columns.is_empty() {
        return Err(Error::InvalidGrid("window contains no grid column".into()));
    }
    Ok(Columns { columns, cell: grid.spacing(ord_axis) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `b` is the largest stopping ordinate; stopping lies below the curve.
    MaxStopping,
    /// `b` is the smallest stopping ordinate; continuation lies below.
    MinStopping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Semicontinuity {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub abscissa_axis: usize,
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    /// Columns without a stopping node; their value is the window edge.
    pub empty: Vec<bool>,
    pub convention: Convention,
    /// Recorded, not tested.
    pub semicontinuity: Semicontinuity,
    /// Ordinate grid spacing.
    pub cell: f64,
    pub window: Window,
}

impl BoundaryCurve {
    /// Restriction to abscissae in `[lo, hi]`.
    pub fn restricted(&self, lo: f64, hi: f64) -> Self {
        let keep: Vec<usize> = (0..self.abscissae.len()).filter(|&k| self.abscissae[k] >= lo - EDGE_EPS && self.abscissae[k] <= hi + EDGE_EPS).collect();
        Self {
            abscissae: keep.iter().map(|&k| self.abscissae[k]).collect(),
            values: keep.iter().map(|&k| self.values[k]).collect(),
            empty: keep.iter().map(|&k| self.empty[k]).collect(),
            window: Window { abscissa: [lo.max(self.window.abscissa[0]), hi.min(self.window.abscissa[1])], ..self.window },
            ..self.clone()
        }
    }
}

/// Boundary `b` of the stopping region over each grid column of `window`.
pub fn extract_boundary(mask: &StoppingMask, window: &Window, abscissa_axis: usize, convention: Convention) -> Result<BoundaryCurve> {
    let cols = window_columns(mask.grid(), window, abscissa_axis)?;
    let mut curve = BoundaryCurve {
        abscissa_axis,
        abscissae: Vec::with_capacity(cols.columns.len()),
        values: Vec::with_capacity(cols.columns.len()),
        empty: Vec::with_capacity(cols.columns.len()),
        convention,
        semicontinuity: match convention {
            Convention::MaxStopping => Semicontinuity::Upper,
            Convention::MinStopping => Semicontinuity::Lower,
        },
        cell: cols.cell,
        window: *window,
    };
    for (x, nodes) in &cols.columns {
        let mut stops = nodes.iter().filter(|(_, idx)| mask.is_stopping(*idx)).map(|(y, _)| *y);
        let found = match convention {
            Convention::MaxStopping => stops.next_back(),
            Convention::MinStopping => stops.next(),
        };
        let (lo, hi) = window.column_range(*x);
        let edge = match convention {
            Convention::MaxStopping => nodes.first().map_or(lo, |n| n.0),
            Convention::MinStopping => nodes.last().map_or(hi, |n| n.0),
        };
        curve.abscissae.push(*x);
        curve.values.push(found.unwrap_or(edge));
        curve.empty.push(found.is_none());
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::build_grid;

    #[test]
    fn all_stopping_gives_top_edge() {
        let mask = StoppingMask::everywhere(build_grid(2, 11).unwrap());
        let w = Window::rect([0.0, 0.5], [0.0, 0.5]);
        let b = extract_boundary(&mask, &w, 0, Convention::MaxStopping).unwrap();
        assert_eq!(b.abscissae.len(), 6);
        assert!(b.values.iter().all(|&v| v == 0.5));
        assert!(b.empty.iter().all(|&e| !e));
    }

    #[test]
    fn empty_columns_are_flagged() {
        let mask = StoppingMask::nowhere(build_grid(2, 11).unwrap());
        let b = extract_boundary(&mask, &Window::full(), 1, Convention::MinStopping).unwrap();
        assert!(b.values.iter().all(|&v| v == 1.0));
        assert!(b.empty.iter().all(|&e| e));
    }

    #[test]
    fn recovers_a_staircase() {
        let grid = build_grid(2, 21).unwrap();
        let mask = StoppingMask::from_predicate(grid, |x| x[1] >= 1.0 - x[0] - 1e-9);
        let b = extract_boundary(&mask, &Window::full(), 0, Convention::MinStopping).unwrap();
        for (x, v) in b.abscissae.iter().zip(&b.values) {
            assert!((v - (1.0 - x)).abs() < 1e-9);
        }
        // same mask scanned along the other axis
        let b = extract_boundary(&mask, &Window::full(), 1, Convention::MinStopping).unwrap();
        assert!((b.values[4] - 0.8).abs() < 1e-9);
    }

    #[test]
    fn tent_clip_limits_columns() {
        let grid = build_grid(2, 11).unwrap();
        let w = Window::full().clipped(Clip::BelowTent);
        let cols = window_columns(&grid, &w, 0).unwrap();
        assert_eq!(cols.columns[0].1.len(), 1);
        assert_eq!(cols.columns[5].1.len(), 6);
        assert_eq!(cols.columns[10].1.len(), 1);
    }

    #[test]
    fn window_outside_square_is_rejected() {
        let mask = StoppingMask::everywhere(build_grid(2, 5).unwrap());
        assert!(extract_boundary(&mask, &Window::rect([0.0, 1.5], [0.0, 1.0]), 0, Convention::MaxStopping).is_err());
        assert!(extract_boundary(&StoppingMask::everywhere(build_grid(1, 5).unwrap()), &Window::full(), 0, Convention::MaxStopping).is_err());
    }
}
