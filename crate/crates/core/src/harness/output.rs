//! CSV and JSON persistence of sweep results.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::Result;

pub const CSV_HEADER: &str = "strategy,x_name,x_value,metric,value,stderr,n_trials";

/// One tabulated value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub strategy: String,
    pub x_name: String,
    pub x_value: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

/// 17 significant digits, so every value round-trips exactly.
fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.strategy,
            r.x_name,
            float(r.x_value),
            r.metric,
            float(r.value),
            float(r.stderr),
            r.n_trials
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    std::fs::write(path, to_csv(rows))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}
