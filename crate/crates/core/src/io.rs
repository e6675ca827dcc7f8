//! CSV artifacts and atomic file output.
//!
//! Every CSV starts with `#` comment lines carrying the resolved run
//! configuration, followed by a header row. Column orders are fixed:
//!
//! * value surface: `pi_1,…,pi_n,V,g,h,stopping_flag`
//! * boundary curve: `abscissa,ordinate,flag` (flag 1 marks an empty column)
//! * paths: `path,t,` then `y_i,x_i,phi_i,pi_i` per axis

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::PenaltyPair;
use crate::regions::{BoundaryCurve, StoppingMask};
use crate::sde::PathBundle;
use crate::solver::{TensorGrid, ValueField};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidParams(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn comment_block(provenance: &str) -> String {
    provenance.lines().map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") }).collect()
}

fn csv_body(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Value surface with penalty samples and the stopping flag per node.
pub fn value_csv(field: &ValueField, pen: &PenaltyPair, mask: &StoppingMask, provenance: &str) -> Result<String> {
    let grid = &field.grid;
    if mask.grid() != grid {
        return Err(Error::GridMismatch("mask and field live on different grids".into()));
    }
    let n = grid.dim();
    let mut header: Vec<String> = (1..=n).map(|i| format!("pi_{i}")).collect();
    header.extend(["V", "g", "h", "stopping_flag"].map(String::from));
    let rows = (0..grid.len()).map(|idx| {
        let x = grid.node(idx);
        let mut r: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        r.push(field.values[idx].to_string());
        r.push(pen.g(&x).to_string());
        r.push(pen.h(&x).to_string());
        r.push((mask.is_stopping(idx) as u8).to_string());
        r
    });
    Ok(comment_block(provenance) + &csv_body(&header, rows)?)
}

pub fn boundary_csv(curve: &BoundaryCurve, provenance: &str) -> Result<String> {
    let header = ["abscissa", "ordinate", "flag"].map(String::from);
    let rows = (0..curve.abscissae.len()).map(|k| vec![curve.abscissae[k].to_string(), curve.values[k].to_string(), (curve.empty[k] as u8).to_string()]);
    Ok(comment_block(provenance) + &csv_body(&header, rows)?)
}

/// Recorded paths, one row per (path, record).
pub fn paths_csv(bundle: &PathBundle, provenance: &str) -> Result<String> {
    let mut header = vec!["path".to_string(), "t".to_string()];
    for i in 1..=bundle.n {
        header.extend([format!("y_{i}"), format!("x_{i}"), format!("phi_{i}"), format!("pi_{i}")]);
    }
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let rows = (0..bundle.n_paths).flat_map(|p| {
        (0..bundle.records()).map(move |r| {
            let mut row = vec![p.to_string(), bundle.times[r].to_string()];
            for a in 0..bundle.n {
                row.push(bundle.y_at(p, r, a).map_or(String::new(), |y| (y as u8).to_string()));
                row.push(opt(bundle.x_at(p, r, a)));
                row.push(opt(bundle.phi_at(p, r, a)));
                row.push(bundle.pi_at(p, r, a).to_string());
            }
            row
        })
    });
    Ok(comment_block(provenance) + &csv_body(&header, rows)?)
}

/// Loads the stopping mask from a value-surface CSV. When `expected` is
/// given, the file's grid must coincide with it.
pub fn read_mask_csv(path: &Path, expected: Option<&TensorGrid>) -> Result<StoppingMask> {
    let text = fs::read_to_string(path)?;
    parse_mask_csv(&text, expected)
}

pub fn parse_mask_csv(text: &str, expected: Option<&TensorGrid>) -> Result<StoppingMask> {
    parse_value_csv(text, expected).map(|(mask, _)| mask)
}

/// Stopping mask and, when the file has a `V` column, the value field.
pub fn read_value_csv(path: &Path, expected: Option<&TensorGrid>) -> Result<(StoppingMask, Option<ValueField>)> {
    parse_value_csv(&fs::read_to_string(path)?, expected)
}

pub fn parse_value_csv(text: &str, expected: Option<&TensorGrid>) -> Result<(StoppingMask, Option<ValueField>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    let n = header.iter().take_while(|h| h.starts_with("pi_")).count();
    let flag_col = header.iter().position(|h| h == "stopping_flag").ok_or_else(|| Error::Parse("missing stopping_flag column".into()))?;
    let v_col = header.iter().position(|h| h == "V");
    if n == 0 {
        return Err(Error::Parse("missing pi_1 column".into()));
    }
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut flags = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |i: usize| rec.get(i).ok_or_else(|| Error::Parse("short row".into()))?.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
        coords.push((0..n).map(parse).collect::<Result<_>>()?);
        if let Some(c) = v_col {
            values.push(parse(c)?);
        }
        flags.push(match rec.get(flag_col).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => return Err(Error::Parse(format!("bad stopping_flag {other:?}"))),
        });
    }
    // row-major order: each axis's nodes appear in increasing order
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
        return Err(Error::GridMismatch("rows do not form a tensor grid in row-major order".into()));
    }
    if let Some(e) = expected {
        if e.shape() != grid.shape() || (0..e.dim()).any(|a| e.axis(a) != grid.axis(a)) {
            return Err(Error::GridMismatch(format!("mask grid {:?} does not match the configured grid {:?}", grid.shape(), e.shape())));
        }
    }
    let field = match v_col {
        Some(_) => Some(ValueField::from_samples(grid.clone(), values)?),
        None => None,
    };
    Ok((StoppingMask::new(grid, flags)?, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::build_grid;

    fn pair() -> PenaltyPair {
        PenaltyPair::new(2, |x| x[0].min(1.0 - x[0]) + x[1].min(1.0 - x[1]), |_| 0.2, vec![1.0, 1.0], vec![0.0, 0.0], true)
    }

    #[test]
    fn value_csv_round_trips_the_mask() {
        let grid = build_grid(2, 7).unwrap();
        let mask = StoppingMask::from_predicate(grid.clone(), |x| x[0] < 0.3 || x[1] > 0.8);
        let field = ValueField::from_fn(grid.clone(), |x| 0.5 * x[0]);
        let text = value_csv(&field, &pair(), &mask, "[problem]\nkind = \"ST1\"").unwrap();
        assert!(text.starts_with("# [problem]\n# kind = \"ST1\"\npi_1,pi_2,V,g,h,stopping_flag\n"));
        assert_eq!(text.lines().count(), 2 + 1 + 49);
        let (back, v) = parse_value_csv(&text, Some(&grid)).unwrap();
        assert_eq!(back, mask);
        assert_eq!(v.unwrap().values, field.values);
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let grid = build_grid(2, 7).unwrap();
        let mask = StoppingMask::everywhere(grid.clone());
        let text = value_csv(&ValueField::from_fn(grid, |_| 0.0), &pair(), &mask, "").unwrap();
        let other = build_grid(2, 9).unwrap();
        assert!(matches!(parse_mask_csv(&text, Some(&other)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn boundary_rows() {
        let grid = build_grid(2, 5).unwrap();
        let mask = StoppingMask::from_predicate(grid, |x| x[1] <= 0.25);
        let b = crate::regions::extract_boundary(&mask, &crate::regions::Window::full(), 0, crate::regions::Convention::MaxStopping).unwrap();
        let text = boundary_csv(&b, "").unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0,0.25,0");
    }
}
