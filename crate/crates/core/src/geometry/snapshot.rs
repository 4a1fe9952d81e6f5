//! Plain-text metric snapshots.
//!
//! ```text
//! # ricci-lab metric
//! n 4
//! node_count 400
//! time 1.0000000000000000e-2
//! far_end pole
//! x phi psi
//! 0.0000000000000000e0 3.1415926535897931e0 0.0000000000000000e0
//! ...
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! `f64` exactly. An optional fourth column `f` carries a scalar field.

use std::fmt::Write as _;
use std::sync::Arc;

use super::{End, Grid, WarpedMetric};
use crate::error::{Error, Result};

const MAGIC: &str = "# ricci-lab metric";

/// A parsed snapshot: the metric and the optional extra column.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub metric: WarpedMetric,
    pub field: Option<Vec<f64>>,
}

pub fn to_string(m: &WarpedMetric, field: Option<&[f64]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "n {}", m.dim());
    let _ = writeln!(out, "node_count {}", m.grid().node_count());
    let _ = writeln!(out, "time {:.16e}", m.time());
    let _ = writeln!(out, "far_end {}", m.grid().far_end().as_str());
    let _ = writeln!(out, "{}", if field.is_some() { "x phi psi f" } else { "x phi psi" });
    for i in 0..m.grid().node_count() {
        let _ = write!(out, "{:.16e} {:.16e} {:.16e}", m.grid().x()[i], m.phi()[i], m.psi()[i]);
        if let Some(f) = field {
            let _ = write!(out, " {:.16e}", f[i]);
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses a snapshot. `grid` may supply an already-built grid with the same
/// nodes, which avoids rebuilding stencils when reading many checkpoints.
pub fn from_str(text: &str, grid: Option<&Arc<Grid>>) -> Result<Snapshot> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut header = |key: &str| -> Result<(usize, String)> {
        for (no, l) in lines.by_ref() {
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let mut parts = l.splitn(2, ' ');
            let k = parts.next().unwrap_or_default();
            if k != key {
                return Err(parse_err(no, format!("expected `{key}`, found `{l}`")));
            }
            return Ok((no, parts.next().unwrap_or_default().trim().to_string()));
        }
        Err(parse_err(0, format!("missing `{key}`")))
    };
    let (no, v) = header("n")?;
    let dim: usize = v.parse().map_err(|_| parse_err(no, "bad dimension"))?;
    let (no, v) = header("node_count")?;
    let count: usize = v.parse().map_err(|_| parse_err(no, "bad node count"))?;
    let (no, v) = header("time")?;
    let time: f64 = v.parse().map_err(|_| parse_err(no, "bad time"))?;
    let (no, v) = header("far_end")?;
    let far = match v.as_str() {
        "pole" => End::Pole,
        "boundary" => End::Boundary,
        _ => return Err(parse_err(no, format!("unknown far end `{v}`"))),
    };
    let (no, v) = header("x")?;
    let with_field = match v.as_str() {
        "phi psi" => false,
        "phi psi f" => true,
        _ => return Err(parse_err(no, "bad column header")),
    };
    let cols = if with_field { 4 } else { 3 };
    let mut data = vec![Vec::with_capacity(count); cols];
    for (no, l) in lines {
        if l.is_empty() {
            continue;
        }
        let vals: Vec<&str> = l.split_whitespace().collect();
        if vals.len() != cols {
            return Err(parse_err(no, format!("expected {cols} columns, found {}", vals.len())));
        }
        for (c, v) in vals.iter().enumerate() {
            data[c].push(v.parse::<f64>().map_err(|_| parse_err(no, format!("bad number `{v}`")))?);
        }
    }
    if data[0].len() != count {
        return Err(parse_err(0, format!("expected {count} rows, found {}", data[0].len())));
    }
    let grid = match grid {
        Some(g) if g.x() == data[0].as_slice() && g.far_end() == far => g.clone(),
        _ => Arc::new(Grid::from_nodes(data[0].clone(), far)?),
    };
    let field = with_field.then(|| data[3].clone());
    let metric = WarpedMetric::new(grid, data[1].clone(), data[2].clone(), dim, time)?;
    Ok(Snapshot { metric, field })
}

pub fn write(path: &std::path::Path, m: &WarpedMetric, field: Option<&[f64]>) -> Result<()> {
    std::fs::write(path, to_string(m, field))?;
    Ok(())
}

pub fn read(path: &std::path::Path, grid: Option<&Arc<Grid>>) -> Result<Snapshot> {
    from_str(&std::fs::read_to_string(path)?, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Arc::new(Grid::uniform(37, End::Pole).unwrap());
        let m = WarpedMetric::from_fn(g, 4, |x| PI + 0.1 * (PI * x).cos().powi(2), |x| (PI * x).sin() / 3.0)
            .unwrap()
            .with_time(0.012_345_678_901_234_567);
        let f: Vec<f64> = (0..37).map(|i| (i as f64).sqrt() / 7.0).collect();
        let back = from_str(&to_string(&m, Some(&f)), None).unwrap();
        assert_eq!(back.metric.phi(), m.phi());
        assert_eq!(back.metric.psi(), m.psi());
        assert_eq!(back.metric.grid().x(), m.grid().x());
        assert_eq!(back.metric.time().to_bits(), m.time().to_bits());
        assert_eq!(back.field.unwrap(), f);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "n 4\nnode_count 16\ntime zero\n";
        match from_str(text, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
