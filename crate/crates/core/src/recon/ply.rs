//! ASCII PLY for clouds: `x y z` plus `nx ny nz` when normals are present.
//!
//! Coordinates are written with the shortest representation that parses back
//! to the same `f64`, so write→read is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::ReconError;
use crate::geometry::OrientedCloud;

pub fn export_cloud_ply(cloud: &OrientedCloud, path: impl AsRef<Path>) -> Result<(), ReconError> {
    let path = path.as_ref();
    if cloud.is_empty() {
        return Err(ReconError::EmptyCloud);
    }
    let mut out = String::with_capacity(64 * cloud.len() + 256);
    out.push_str("ply\nformat ascii 1.0\ncomment sfmreg cloud\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    for p in ["x", "y", "z"] {
        let _ = writeln!(out, "property double {p}");
    }
    if cloud.normals.is_some() {
        for p in ["nx", "ny", "nz"] {
            let _ = writeln!(out, "property double {p}");
        }
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(ns) = &cloud.normals {
            let n = ns[i];
            let _ = write!(out, " {} {} {}", n.x, n.y, n.z);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| ReconError::io(path, e))
}

/// Read the `vertex` element of an ASCII PLY. Row ids are the vertex order.
pub fn read_cloud_ply(path: impl AsRef<Path>) -> Result<OrientedCloud, ReconError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(ReconError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| ReconError::io(path, e))?;
    let file = path.display().to_string();
    let bad = |line: usize, reason: &str| ReconError::MalformedLine {
        file: file.clone(),
        line,
        reason: reason.to_string(),
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(bad(1, "missing `ply` magic")),
    }
    // (name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut header_end = None;
    for (i, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(ReconError::UnsupportedFormat(format!("PLY format {other}; only ascii is supported")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| bad(i + 1, "bad element count"))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            ["property", "list", ..] => {
                let el = elements.last_mut().ok_or_else(|| bad(i + 1, "property before element"))?;
                el.2.push(String::from("<list>"));
            }
            ["property", _ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad(i + 1, "property before element"))?;
                el.2.push(name.to_string());
            }
            ["end_header"] => {
                header_end = Some(i);
                break;
            }
            _ => return Err(bad(i + 1, "unrecognized header line")),
        }
    }
    if header_end.is_none() {
        return Err(bad(1, "missing end_header"));
    }
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut has_normals = false;
    for (name, count, props) in &elements {
        if name != "vertex" {
            // skip rows of elements we do not read
            for _ in 0..*count {
                lines.next();
            }
            continue;
        }
        let col = |p: &str| props.iter().position(|q| q == p);
        let (xi, yi, zi) = match (col("x"), col("y"), col("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(bad(1, "vertex element lacks x/y/z")),
        };
        let nidx = match (col("nx"), col("ny"), col("nz")) {
            (Some(a), Some(b), Some(c)) => Some((a, b, c)),
            _ => None,
        };
        has_normals = nidx.is_some();
        for _ in 0..*count {
            let (i, line) = lines.next().ok_or_else(|| bad(0, "truncated vertex data"))?;
            let vals = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(i + 1, "non-numeric vertex value")))
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() < props.len() {
                return Err(bad(i + 1, "too few vertex values"));
            }
            points.push(Point3::new(vals[xi], vals[yi], vals[zi]));
            if let Some((a, b, c)) = nidx {
                let n = Vector3::new(vals[a], vals[b], vals[c]);
                let norm = n.norm();
                if !(norm > 0.0) {
                    return Err(bad(i + 1, "zero-length normal"));
                }
                normals.push(if (norm - 1.0).abs() > 1e-12 { n / norm } else { n });
            }
        }
    }
    if points.is_empty() {
        return Err(ReconError::EmptyCloud);
    }
    let ids = (0..points.len() as u64).collect();
    OrientedCloud::new(points, has_normals.then_some(normals), ids)
        .map_err(|e| bad(0, &e.to_string()))
}
