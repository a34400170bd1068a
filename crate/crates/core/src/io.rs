//! CSV and binary encodings for point configurations and atom measures.

use std::io::{BufRead, Read, Write};

use crate::blocks::{Atom, AtomMeasure};
use crate::error::{Error, Result};
use crate::hypgeom::HPoint;
use crate::real::Real;
use crate::sampler::PointConfig;

const MAGIC: &[u8; 8] = b"HYPKNNPC";
pub const BINARY_VERSION: u32 = 1;

pub fn points_csv_header(d: usize) -> String {
    let mut cols = vec!["replicate".to_string(), "region_id".to_string()];
    cols.extend((1..d).map(|i| format!("x_{i}")));
    cols.push("y".into());
    cols.join(",")
}

/// Appends one replicate's points as CSV rows (no header).
pub fn write_points_csv<F: Real, W: Write>(mut w: W, replicate: u64, config: &PointConfig<F>) -> Result<()> {
    for i in 0..config.len() {
        write!(w, "{replicate},{}", config.region_id(i))?;
        for c in config.x(i) {
            write!(w, ",{}", c.as_f64())?;
        }
        writeln!(w, ",{}", config.y(i).as_f64())?;
    }
    Ok(())
}

/// Rows of a points CSV as `(replicate, region_id, point)`; the header line is required.
pub fn read_points_csv<R: BufRead>(r: R) -> Result<Vec<(u64, u32, HPoint<f64>)>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("missing header".into()))??;
    let width = header.split(',').count();
    if width < 4 {
        return Err(Error::Format("points CSV needs at least 4 columns".into()));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Format(format!("row {} has {} fields, expected {width}", n + 2, fields.len())));
        }
        let bad = |e: &dyn std::fmt::Display| Error::Format(format!("row {}: {e}", n + 2));
        let rep: u64 = fields[0].parse().map_err(|e| bad(&e))?;
        let region: u32 = fields[1].parse().map_err(|e| bad(&e))?;
        let coords: Vec<f64> = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(&e))?;
        let (x, y) = coords.split_at(coords.len() - 1);
        out.push((rep, region, HPoint::new(x.to_vec(), y[0])?));
    }
    Ok(out)
}

/// Versioned little-endian dump: magic, version, `d`, count, row-major `f64` coordinates.
pub fn write_points_binary<F: Real, W: Write>(mut w: W, config: &PointConfig<F>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&(config.dim() as u32).to_le_bytes())?;
    w.write_all(&(config.len() as u64).to_le_bytes())?;
    for c in config.raw_coords() {
        w.write_all(&c.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_points_binary<R: Read>(mut r: R) -> Result<PointConfig<f64>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a point dump".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported dump version {version}")));
    }
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let total = count
        .checked_mul(d)
        .ok_or_else(|| Error::Format("point count overflows".into()))?;
    let mut coords = Vec::with_capacity(total.min(1 << 24));
    for _ in 0..total {
        r.read_exact(&mut b8)?;
        coords.push(f64::from_le_bytes(b8));
    }
    PointConfig::from_raw(d, coords, vec![0; count], Vec::new(), Vec::new())
}

pub const ATOMS_CSV_HEADER: &str = "replicate,block,value,weight,censored";

/// Appends atoms as CSV rows; `block` is empty for whole-window measures.
pub fn write_atoms_csv<F: Real, W: Write>(
    mut w: W,
    replicate: u64,
    block: Option<usize>,
    measure: &AtomMeasure<F>,
) -> Result<()> {
    let block = block.map(|b| b.to_string()).unwrap_or_default();
    for a in &measure.atoms {
        writeln!(
            w,
            "{replicate},{block},{},{},{}",
            a.value.as_f64(),
            a.weight.as_f64(),
            a.censored as u8
        )?;
    }
    Ok(())
}

/// One parsed row of an atoms CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomRow {
    pub replicate: u64,
    pub block: Option<usize>,
    pub atom: Atom<f64>,
}

/// Rows of an atoms CSV. Lines starting with `#` are metadata and skipped; the
/// first remaining line must be the header.
pub fn read_atoms_csv<R: BufRead>(r: R) -> Result<Vec<AtomRow>> {
    let mut lines = r.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.starts_with('#')));
    match lines.next() {
        Some((_, Ok(h))) if h == ATOMS_CSV_HEADER => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(Error::Format(format!("expected header '{ATOMS_CSV_HEADER}'"))),
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("line {}: bad {what}", n + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad("field count"));
        }
        let block = if f[1].is_empty() {
            None
        } else {
            Some(f[1].parse().map_err(|_| bad("block"))?)
        };
        out.push(AtomRow {
            replicate: f[0].parse().map_err(|_| bad("replicate"))?,
            block,
            atom: Atom {
                value: f[2].parse().map_err(|_| bad("value"))?,
                weight: f[3].parse().map_err(|_| bad("weight"))?,
                censored: match f[4] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("censored flag")),
                },
            },
        });
    }
    Ok(out)
}
