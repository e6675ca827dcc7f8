//! Tabulated penalty pairs read from CSV (`pi_1,…,pi_n,g,h`) on a tensor
//! grid and extended by multilinear interpolation.

use std::path::Path;

use seqstop::lattice::worst_slope;
use seqstop::{Error, PenaltyPair, Result, TensorGrid, ValueField};

pub fn load_penalty(path: &Path, n: usize) -> Result<PenaltyPair> {
    let text = std::fs::read_to_string(path)?;
    parse_penalty(&text, n)
}

pub fn parse_penalty(text: &str, n: usize) -> Result<PenaltyPair> {
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut g = Vec::new();
    let mut h = Vec::new();
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Parse("empty penalty table".into()))?.split(',').map(str::trim).collect();
    let mut expected: Vec<String> = (1..=n).map(|i| format!("pi_{i}")).collect();
    expected.extend(["g".into(), "h".into()]);
    if header != expected {
        return Err(Error::Parse(format!("penalty table header must be {}", expected.join(","))));
    }
    for line in lines {
        let vals = line.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|e| Error::Parse(format!("{line:?}: {e}")))?;
        if vals.len() != n + 2 {
            return Err(Error::Parse(format!("{line:?}: expected {} fields", n + 2)));
        }
        coords.push(vals[..n].to_vec());
        g.push(vals[n]);
        h.push(vals[n + 1]);
    }
    let mut axes: Vec<Vec<f64>> = vec![Vec::new(); n];
    for row in &coords {
        for (a, &v) in row.iter().enumerate() {
            if !axes[a].contains(&v) {
                axes[a].push(v);
            }
        }
    }
    for a in &mut axes {
        a.sort_by(f64::total_cmp);
    }
    let grid = TensorGrid::from_axes(axes)?;
    if grid.len() != coords.len() || (0..grid.len()).any(|i| grid.node(i) != coords[i]) {
        return Err(Error::Parse("penalty table rows must cover a tensor grid of [0,1]^n in row-major order".into()));
    }
    let slopes = |vals: &[f64]| -> Vec<f64> { (0..n).map(|a| worst_slope(vals, grid.lattice(), a, grid.axis(a)).map_or(0.0, |(s, _)| s)).collect() };
    let (g_lip, h_lip) = (slopes(&g), slopes(&h));
    let h_is_constant = h.iter().all(|&v| v == h[0]);
    let gf = ValueField::from_samples(grid.clone(), g)?;
    let hf = ValueField::from_samples(grid, h)?;
    Ok(PenaltyPair::new(
        n,
        move |x: &[f64]| gf.evaluate_coords(x).unwrap_or(f64::NAN),
        move |x: &[f64]| hf.evaluate_coords(x).unwrap_or(f64::NAN),
        g_lip,
        h_lip,
        h_is_constant,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_a_tent() {
        let text = "pi_1,g,h\n0,0,1\n0.5,0.5,1\n1,0,1\n";
        let pen = parse_penalty(text, 1).unwrap();
        assert_eq!(pen.g(&[0.25]), 0.25);
        assert_eq!(pen.g_lipschitz, vec![1.0]);
        assert!(pen.h_is_constant);
    }

    #[test]
    fn rejects_ragged_tables() {
        assert!(parse_penalty("pi_1,pi_2,g,h\n0,0,1,1\n1,0,1,1\n0,1,1,1\n", 2).is_err());
        assert!(parse_penalty("x,g,h\n0,0,1\n", 1).is_err());
    }
}
