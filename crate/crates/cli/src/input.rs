//! Flag values and input files.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rpcd::{Point, RFactor};

/// Parses an r-factor: a decimal, a fraction such as `11/10`, or `inf`.
pub fn parse_r(s: &str) -> Result<RFactor, String> {
    let t = s.trim();
    let v = match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        _ => parse_ratio(t)?,
    };
    RFactor::new(v).map_err(|e| e.to_string())
}

/// Parses ε as a decimal, a fraction, or `[k]sqrt3[/m]` (e.g. `sqrt3/8`,
/// `2sqrt3/7`), so values on the piecewise breakpoints are hit exactly.
pub fn parse_eps(s: &str) -> Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let v = match t.find("sqrt3") {
        Some(at) => {
            let coef = match t[..at].trim_end_matches('*') {
                "" => 1.0,
                c => number(c)?,
            };
            let rest = &t[at + "sqrt3".len()..];
            let div = match rest.strip_prefix('/') {
                Some(d) => number(d)?,
                None if rest.is_empty() => 1.0,
                None => return Err(format!("cannot parse ε value {s:?}")),
            };
            coef * 3f64.sqrt() / div
        }
        None => parse_ratio(&t)?,
    };
    if !(v.is_finite() && v >= 0.0) {
        return Err(format!("ε must be a finite non-negative number, got {s:?}"));
    }
    Ok(v)
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    match s.split_once('/') {
        Some((a, b)) => {
            let d = number(b)?;
            if d == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(number(a)? / d)
        }
        None => number(s),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(file))
}

/// Reads a two-column CSV of points with an optional `x,y` header line.
pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    for (i, record) in reader(path)?.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0
            && record.len() == 2
            && record[0].eq_ignore_ascii_case("x")
            && record[1].eq_ignore_ascii_case("y")
        {
            continue;
        }
        ensure!(
            record.len() == 2,
            "{}:{line}: expected 2 columns, found {}",
            path.display(),
            record.len()
        );
        let coord = |k: usize| -> Result<f64> {
            let v: f64 = record[k].parse().with_context(|| {
                format!(
                    "{}:{line}: {:?} is not a number",
                    path.display(),
                    &record[k]
                )
            })?;
            ensure!(
                v.is_finite(),
                "{}:{line}: {v} is not finite",
                path.display()
            );
            Ok(v)
        };
        points.push(Point::new(coord(0)?, coord(1)?));
    }
    Ok(points)
}

/// Reads one positive weight (or area) per line; the values are rescaled to
/// sum to one.
pub fn read_weights(path: &Path) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, record) in reader(path)?.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let field = record.get(0).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => values.push(v),
            Ok(v) => bail!("{}: weight {v} is not positive", path.display()),
            // a header line
            Err(_) if i == 0 => {}
            Err(_) => bail!("{}: {field:?} is not a number", path.display()),
        }
    }
    ensure!(!values.is_empty(), "{}: no weights", path.display());
    let total: f64 = values.iter().sum();
    Ok(values.into_iter().map(|w| w / total).collect())
}
