//! Count files: a `# key=value` comment block (keys `N`, `M`, `T`), the
//! header `interval_end,count`, then one row per observation interval.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dsa_core::CountData;

use crate::error::{CliError, Result};

pub const COUNTS_HEADER: &str = "interval_end,count";

pub fn parse_counts_str(text: &str, path: &Path) -> Result<CountData> {
    let err = |line: usize, message: String| CliError::Parse { path: path.to_path_buf(), line, message };
    let mut n = None;
    let mut m = None;
    let mut t_end: Option<(usize, f64)> = None;
    let mut schedule = vec![0.0];
    let mut counts = Vec::new();
    let mut seen_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if seen_header {
                return Err(err(line_no, "comment lines must precede the header".into()));
            }
            let meta = meta.trim();
            let Some((key, value)) = meta.split_once('=') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "N" => n = Some(value.parse::<u64>().map_err(|e| err(line_no, format!("N: {e}")))?),
                "M" => m = Some(value.parse::<u64>().map_err(|e| err(line_no, format!("M: {e}")))?),
                "T" => t_end = Some((line_no, value.parse::<f64>().map_err(|e| err(line_no, format!("T: {e}")))?)),
                _ => {}
            }
            continue;
        }
        if !seen_header {
            if line != COUNTS_HEADER {
                return Err(err(line_no, format!("expected header `{COUNTS_HEADER}`, found `{line}`")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(err(line_no, format!("expected 2 fields, found {}", fields.len())));
        }
        let x: f64 = fields[0].parse().map_err(|e| err(line_no, format!("interval_end `{}`: {e}", fields[0])))?;
        let y: u64 = fields[1]
            .parse()
            .map_err(|_| err(line_no, format!("count `{}` is not a non-negative integer", fields[1])))?;
        if !(x.is_finite() && x > *schedule.last().unwrap()) {
            return Err(err(
                line_no,
                format!("interval_end {x} does not increase strictly from {}", schedule.last().unwrap()),
            ));
        }
        schedule.push(x);
        counts.push(y);
    }
    if !seen_header {
        return Err(err(text.lines().count().max(1), format!("missing header `{COUNTS_HEADER}`")));
    }
    if counts.is_empty() {
        return Err(err(text.lines().count().max(1), "no data rows".into()));
    }
    if let Some((line, t)) = t_end {
        if t != *schedule.last().unwrap() {
            return Err(err(line, format!("T = {t} differs from the last interval_end {}", schedule.last().unwrap())));
        }
    }
    let data = CountData { schedule, counts, n, m };
    data.validate()?;
    Ok(data)
}

pub fn parse_counts_csv(path: &Path) -> Result<CountData> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_counts_str(&text, path)
}

/// Serialises counts with shortest round-trip float formatting.
pub fn counts_to_string(data: &CountData) -> String {
    let mut out = String::new();
    if let Some(n) = data.n {
        let _ = writeln!(out, "# N={n}");
    }
    if let Some(m) = data.m {
        let _ = writeln!(out, "# M={m}");
    }
    let _ = writeln!(out, "# T={}", data.t_end());
    let _ = writeln!(out, "{COUNTS_HEADER}");
    for (x, y) in data.schedule[1..].iter().zip(&data.counts) {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

pub fn write_counts_csv(path: &Path, data: &CountData) -> Result<()> {
    fs::write(path, counts_to_string(data)).map_err(|e| CliError::io(path, e))
}
