use std::path::Path;

use super::{JumpCurve, SpaceTimeCurve};
use crate::error::{Error, Result};

/// Reads a curve from CSV with header `t,x1,…,xd`.
pub fn read_curve_csv(path: &Path) -> Result<SpaceTimeCurve> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::Parse { line: 1, message: "header must be t,x1,...,xd".into() });
    }
    let dim = headers.len() - 1;
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != dim + 1 {
            return Err(Error::Parse { line, message: format!("expected {} fields, found {}", dim + 1, rec.len()) });
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse { line, message: format!("not a number: {field:?}") })?;
            data.push(v);
        }
    }
    SpaceTimeCurve::new(dim, data).map_err(|e| Error::Parse { line: 0, message: e.to_string() })
}

pub fn write_curve_csv(path: &Path, c: &SpaceTimeCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=c.dim()).map(|k| format!("x{k}"))).collect();
    w.write_record(&header)?;
    for v in c.vertices() {
        w.write_record(v.iter().map(|x| format!("{x:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jump_json(path: &Path) -> Result<JumpCurve> {
    let text = std::fs::read_to_string(path)?;
    let c: JumpCurve = serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    c.check()?;
    Ok(c)
}

pub fn write_jump_json(path: &Path, c: &JumpCurve) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(c)?)?;
    Ok(())
}
