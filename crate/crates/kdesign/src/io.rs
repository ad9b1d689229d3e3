//! CSV and JSON files. Numbers are written in their shortest round-trip
//! decimal form; files are written to a temporary sibling and renamed.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        // Rust's Display is the shortest round-trip representation.
        format!("{v}")
    }
}

/// C99-style hexadecimal float, exact.
pub fn hex_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

/// Inverse of [`hex_f64`].
pub fn parse_hex_f64(s: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("bad hex float '{s}'"));
    match s {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let body = body.strip_prefix("0x").ok_or_else(bad)?;
    let (m, e) = body.split_once('p').ok_or_else(bad)?;
    let e: i64 = e.parse().map_err(|_| bad())?;
    let (lead, frac) = m.split_once('.').unwrap_or((m, ""));
    if frac.len() > 13 {
        return Err(bad());
    }
    let lead: u64 = lead.parse().map_err(|_| bad())?;
    let frac_bits = if frac.is_empty() { 0 } else { u64::from_str_radix(frac, 16).map_err(|_| bad())? << (4 * (13 - frac.len())) };
    let bits = match (lead, e) {
        (0, _) if frac_bits == 0 => 0,
        (0, -1022) => frac_bits,
        (1, -1022..=1023) => (((e + 1023) as u64) << 52) | frac_bits,
        _ => return Err(bad()),
    };
    let v = f64::from_bits(bits);
    Ok(if neg { -v } else { v })
}

/// Write `contents` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Rows of a table rendered with `fmt_f64`.
pub fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn coord_header(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Design CSV: header `x1,...,xd`, one point per row.
pub fn write_points(path: &Path, pts: &PointSet) -> Result<()> {
    let rows = pts.rows().map(|r| r.iter().map(|v| fmt_f64(*v)).collect());
    write_atomic(path, &csv_bytes(&coord_header(pts.dim()), rows)?)
}

/// Measure CSV: header `x1,...,xd,weight`.
pub fn write_measure(path: &Path, pts: &PointSet, weights: &[f64]) -> Result<()> {
    if weights.len() != pts.len() {
        return Err(Error::DimensionMismatch { expected: pts.len(), got: weights.len() });
    }
    let mut header = coord_header(pts.dim());
    header.push("weight".into());
    let rows = pts.rows().zip(weights).map(|(r, w)| {
        let mut v: Vec<String> = r.iter().map(|x| fmt_f64(*x)).collect();
        v.push(fmt_f64(*w));
        v
    });
    write_atomic(path, &csv_bytes(&header, rows)?)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("{}: row {}: '{t}'", path.display(), line + 2))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Read a design CSV; a trailing `weight` column, if present, is ignored.
pub fn read_points(path: &Path) -> Result<PointSet> {
    let (header, rows) = read_table(path)?;
    let d = header.iter().filter(|h| h.as_str() != "weight").count();
    if d == 0 {
        return Err(Error::Parse(format!("{}: no coordinate columns", path.display())));
    }
    let mut out = PointSet::with_capacity(d, rows.len());
    for r in rows {
        out.push(&r[..d.min(r.len())])?;
    }
    Ok(out)
}

pub fn read_measure(path: &Path) -> Result<(PointSet, Vec<f64>)> {
    let (header, rows) = read_table(path)?;
    if header.last().map(String::as_str) != Some("weight") || header.len() < 2 {
        return Err(Error::Parse(format!("{}: expected x1..xd,weight columns", path.display())));
    }
    let d = header.len() - 1;
    let mut pts = PointSet::with_capacity(d, rows.len());
    let mut w = Vec::with_capacity(rows.len());
    for r in rows {
        pts.push(&r[..d])?;
        w.push(r[d]);
    }
    Ok((pts, w))
}

/// Numeric table with named columns.
pub fn read_numeric(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    read_table(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_examples() {
        assert_eq!(hex_f64(1.0), "0x1p+0");
        assert_eq!(hex_f64(0.75), "0x1.8p-1");
        assert_eq!(hex_f64(-2.5), "-0x1.4p+1");
        assert_eq!(hex_f64(0.0), "0x0p+0");
        assert_eq!(hex_f64(f64::MIN_POSITIVE / 2.0), "0x0.8p-1022");
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            prop_assert_eq!(parse_hex_f64(&hex_f64(v)).unwrap().to_bits(), bits);
        }

        #[test]
        fn decimal_round_trip(v in any::<f64>()) {
            prop_assume!(v.is_finite());
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn design_and_measure_files() {
        let dir = tempfile::tempdir().unwrap();
        let pts = PointSet::from_rows(&[[0.1, 1.0 / 3.0], [0.7, 1e-300]]).unwrap();
        let p = dir.path().join("d.csv");
        write_points(&p, &pts).unwrap();
        assert_eq!(read_points(&p).unwrap(), pts);
        let m = dir.path().join("sub/m.csv");
        write_measure(&m, &pts, &[0.25, 0.75]).unwrap();
        let (q, w) = read_measure(&m).unwrap();
        assert_eq!(q, pts);
        assert_eq!(w, vec![0.25, 0.75]);
        // only the final files remain
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
