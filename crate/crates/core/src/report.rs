//! Machine-readable report shapes shared by the verifiers and the CLI:
//! a verdict block per check plus CSV tables with stable formatting.
//!
//! Formatting is part of the determinism contract: identical inputs must
//! produce byte-identical files, so floats render through one fixed-precision
//! path and rows keep their construction order.

use serde::Serialize;

/// One named check with its decision, test statistic, and threshold.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub pass: bool,
    pub statistic: f64,
    pub threshold: f64,
}

impl CheckResult {
    pub fn new(check: impl Into<String>, pass: bool, statistic: f64, threshold: f64) -> Self {
        CheckResult {
            check: check.into(),
            pass,
            statistic,
            threshold,
        }
    }
}

/// Verdict block for a whole command: pass iff every check passed.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictBlock {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl VerdictBlock {
    pub fn new(command: impl Into<String>, checks: Vec<CheckResult>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        VerdictBlock {
            command: command.into(),
            pass,
            checks,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdicts always serialize")
    }
}

/// A CSV table with a fixed header; values are already formatted.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        CsvTable {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Fixed-precision float rendering used in every CSV cell.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.9}")
    }
}

pub fn fmt_usize(v: usize) -> String {
    v.to_string()
}
