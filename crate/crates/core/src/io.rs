//! Text formats.
//!
//! Field CSV: a header line `dims=n1xn2x...`, then one value per line in site
//! order (dimension 1 fastest-varying). Point-cloud CSV: one row per point,
//! `d` coordinate columns then a response column. DAG text: first line `|V|`,
//! then `a b` edge lines (1-based), then `obs v y` observation lines.
//!
//! Data files round-trip bit-exactly: values are written with the shortest
//! representation that re-parses to the same f64.

use crate::error::{IsoError, Result};
use crate::graph::Dag;
use crate::lattice::{Field, LatticeShape, PointCloud};
use std::fmt::Write as _;
use std::path::Path;

pub fn field_to_csv(field: &Field) -> String {
    let dims: Vec<String> = field.shape().dims().iter().map(|d| d.to_string()).collect();
    let mut out = format!("dims={}\n", dims.join("x"));
    for v in field.values() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<Field> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| IsoError::Parse("empty field file".into()))?;
    let dims_str = header
        .trim()
        .strip_prefix("dims=")
        .ok_or_else(|| IsoError::Parse("field file must start with dims=...".into()))?;
    let dims: Vec<usize> = dims_str
        .split('x')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| IsoError::Parse(format!("bad dimension {t:?}")))
        })
        .collect::<Result<_>>()?;
    let shape = LatticeShape::new(dims)?;
    let mut values = Vec::with_capacity(shape.len());
    for line in lines {
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| IsoError::Parse(format!("bad value {line:?}")))?;
        values.push(v);
    }
    Field::new(shape, values)
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    std::fs::write(path, field_to_csv(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    let text = std::fs::read_to_string(path)?;
    field_from_csv(&text)
}

pub fn cloud_to_csv(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for (p, y) in cloud.points().iter().zip(cloud.responses()) {
        for c in p {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{y}");
    }
    out
}

pub fn cloud_from_csv(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut responses = Vec::new();
    let mut dim = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| IsoError::Parse(format!("bad number {t:?}")))
            })
            .collect::<Result<_>>()?;
        if cols.len() < 2 {
            return Err(IsoError::Parse(
                "point rows need at least one coordinate and a response".into(),
            ));
        }
        let d = cols.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(d0) if d0 != d => {
                return Err(IsoError::Parse("inconsistent column counts".into()))
            }
            _ => {}
        }
        points.push(cols[..d].to_vec());
        responses.push(cols[d]);
    }
    let d = dim.ok_or_else(|| IsoError::Parse("empty point-cloud file".into()))?;
    PointCloud::new(d, points, responses)
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    cloud_from_csv(&text)
}

/// Detected kind of an input data file.
pub enum DataFile {
    Field(Field),
    Cloud(PointCloud),
}

/// Parse either format; field files are recognized by their `dims=` header.
pub fn read_data(path: &Path) -> Result<DataFile> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with("dims=") {
        Ok(DataFile::Field(field_from_csv(&text)?))
    } else {
        Ok(DataFile::Cloud(cloud_from_csv(&text)?))
    }
}

pub fn dag_to_text(dag: &Dag) -> String {
    let mut out = format!("{}\n", dag.n_vertices());
    for &(a, b) in dag.edges() {
        let _ = writeln!(out, "{} {}", a + 1, b + 1);
    }
    for (v, row) in dag.observations().iter().enumerate() {
        for y in row {
            let _ = writeln!(out, "obs {} {}", v + 1, y);
        }
    }
    out
}

pub fn dag_from_text(text: &str) -> Result<Dag> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let n: usize = lines
        .next()
        .ok_or_else(|| IsoError::Parse("empty graph file".into()))?
        .trim()
        .parse()
        .map_err(|_| IsoError::Parse("first line must be the vertex count".into()))?;
    let mut edges = Vec::new();
    let mut obs = vec![Vec::new(); n];
    let check = |v: usize| -> Result<usize> {
        if v < 1 || v > n {
            Err(IsoError::Parse(format!("vertex {v} out of range 1..={n}")))
        } else {
            Ok(v - 1)
        }
    };
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [a, b] => {
                let a = check(
                    a.parse()
                        .map_err(|_| IsoError::Parse(format!("bad vertex {a:?}")))?,
                )?;
                let b = check(
                    b.parse()
                        .map_err(|_| IsoError::Parse(format!("bad vertex {b:?}")))?,
                )?;
                edges.push((a, b));
            }
            ["obs", v, y] => {
                let v = check(
                    v.parse()
                        .map_err(|_| IsoError::Parse(format!("bad vertex {v:?}")))?,
                )?;
                let y: f64 = y
                    .parse()
                    .map_err(|_| IsoError::Parse(format!("bad response {y:?}")))?;
                obs[v].push(y);
            }
            _ => return Err(IsoError::Parse(format!("unrecognized line {line:?}"))),
        }
    }
    Dag::new(n, edges, obs)
}

pub fn read_dag(path: &Path) -> Result<Dag> {
    let text = std::fs::read_to_string(path)?;
    dag_from_text(&text)
}

/// Format with 6 significant digits, stable across runs; used for report
/// tables so golden-file comparisons are byte-identical. Falls back to
/// scientific notation outside a readable magnitude window.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let scale = 10f64.powi(5 - mag);
        let rounded = (x * scale).round() / scale;
        format!("{rounded}")
    } else {
        format!("{x:.5e}")
    }
}
