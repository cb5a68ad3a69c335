//! File formats: scan tables as CSV and fit reports as JSON.
//!
//! CSV layout:
//!
//! ```text
//! # fourphoton v1 <scenario>
//! x,probability[,counts]
//! <x>,<probability>[,<counts>]
//! ```
//!
//! Floats are written with 17 significant digits so they parse back to the
//! same bits.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::fit::{Balance, FitReport};
use crate::scan::{ScanRow, ScanTable};
use crate::{Error, Result};

pub const CSV_MAGIC: &str = "# fourphoton v1 ";

pub fn format_float(v: f64) -> String {
    format!("{:.16e}", v)
}

pub fn write_csv(table: &ScanTable) -> String {
    let with_counts = table.has_counts();
    let mut out = String::new();
    out.push_str(CSV_MAGIC);
    out.push_str(&table.scenario);
    out.push('\n');
    out.push_str(if with_counts {
        "x,probability,counts\n"
    } else {
        "x,probability\n"
    });
    for row in &table.rows {
        let _ = write!(out, "{},{}", format_float(row.x), format_float(row.probability));
        if with_counts {
            let _ = write!(out, ",{}", row.counts.unwrap_or(0));
        }
        out.push('\n');
    }
    out
}

pub fn read_csv(text: &str) -> Result<ScanTable> {
    let bad = |line: usize, msg: &str| Error::invalid(format!("csv line {line}: {msg}"));
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let scenario = first
        .strip_prefix(CSV_MAGIC)
        .ok_or_else(|| bad(1, "expected '# fourphoton v1 <scenario>'"))?
        .trim();
    if scenario.is_empty() || scenario.contains(char::is_whitespace) {
        return Err(bad(1, "scenario must be a single word"));
    }
    let with_counts = match lines.next().map(str::trim) {
        Some("x,probability") => false,
        Some("x,probability,counts") => true,
        _ => return Err(bad(2, "expected 'x,probability' or 'x,probability,counts'")),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 3;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let want = if with_counts { 3 } else { 2 };
        if fields.len() != want {
            return Err(bad(lineno, &format!("expected {want} fields, got {}", fields.len())));
        }
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| bad(lineno, &format!("bad number '{s}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(lineno, "non-finite value"))
            }
        };
        let counts = if with_counts {
            Some(
                fields[2]
                    .parse::<u64>()
                    .map_err(|_| bad(lineno, &format!("bad count '{}'", fields[2])))?,
            )
        } else {
            None
        };
        rows.push(ScanRow {
            x: num(fields[0])?,
            probability: num(fields[1])?,
            counts,
        });
    }
    ScanTable::new(scenario, rows)
}

fn named_object(pairs: Vec<(&'static str, f64)>) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.to_string(), json!(v));
    }
    Value::Object(m)
}

/// `{params, stderr, rss, r2, iterations, converged}`.
pub fn fit_report_json(r: &FitReport) -> Value {
    let names = r.params.named();
    let stderr = names
        .iter()
        .zip(&r.stderr)
        .map(|(&(n, _), &s)| (n, s))
        .collect();
    json!({
        "params": named_object(names),
        "stderr": named_object(stderr),
        "rss": r.rss,
        "r2": r.r2,
        "iterations": r.iterations,
        "converged": r.converged,
    })
}

pub fn balance_json(b: &Balance, tolerance: f64) -> Value {
    json!({
        "theta1_rad": b.theta1,
        "theta1_deg": b.theta1.to_degrees(),
        "v2": b.v2,
        "v4": b.v4,
        "tolerance": tolerance,
        "balanced": b.balanced,
        "fit": fit_report_json(&b.report),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_precision() {
        let t = ScanTable::new(
            "fringe",
            vec![
                ScanRow { x: 0.1, probability: 1.0 / 3.0, counts: None },
                ScanRow { x: 0.2, probability: 0.0, counts: None },
            ],
        )
        .unwrap();
        let text = write_csv(&t);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# fourphoton v1 fringe"));
        assert_eq!(lines.next(), Some("x,probability"));
        assert_eq!(lines.next(), Some("1.0000000000000001e-1,3.3333333333333331e-1"));
        assert_eq!(read_csv(&text).unwrap().rows, t.rows);
    }

    #[test]
    fn malformed_csv() {
        assert!(read_csv("").is_err());
        assert!(read_csv("x,probability\n1,0.5\n").is_err());
        assert!(read_csv("# fourphoton v1 a\nx,p\n").is_err());
        assert!(read_csv("# fourphoton v1 a\nx,probability\n1\n").is_err());
        assert!(read_csv("# fourphoton v1 a\nx,probability,counts\n1,0.5,-3\n").is_err());
        assert!(read_csv("# fourphoton v1 a\nx,probability\n1,abc\n").is_err());
    }
}
