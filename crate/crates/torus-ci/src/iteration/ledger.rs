//! Norm ledger: one row per measured quantity, with an optional target and verdict.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub level: usize,
    pub window: String,
    pub norm_name: String,
    pub value: f64,
    /// Upper bound; the row passes when `value <= target`.
    pub target: Option<f64>,
    pub pass: Option<bool>,
}

impl LedgerRow {
    pub fn new(level: usize, window: impl Into<String>, name: impl Into<String>, value: f64, target: Option<f64>) -> Self {
        let value = value + 0.0;
        let pass = target.map(|t| value <= t);
        LedgerRow { level, window: window.into(), norm_name: name.into(), value, target, pass }
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false) || !self.value.is_finite()
    }
}

pub fn window(a: f64, b: f64, closed_left: bool) -> String {
    format!("{}{a:.6},{b:.6}]", if closed_left { "[" } else { "(" })
}

/// Writes the rows as RFC 4180 CSV with header `level,window,norm_name,value,target,pass`.
pub fn write_csv<W: Write>(rows: &[LedgerRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["level", "window", "norm_name", "value", "target", "pass"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<LedgerRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

/// Fixed-width table for terminals.
pub fn render_table(rows: &[LedgerRow]) -> String {
    let mut s = format!("{:<5} {:<26} {:<28} {:>14} {:>14} {:>5}\n", "level", "window", "norm", "value", "target", "pass");
    for r in rows {
        let target = r.target.map(|t| format!("{t:.6e}")).unwrap_or_else(|| "-".into());
        let pass = match r.pass {
            Some(true) => "ok",
            Some(false) => "FAIL",
            None => "-",
        };
        s.push_str(&format!("{:<5} {:<26} {:<28} {:>14.6e} {:>14} {:>5}\n", r.level, r.window, r.norm_name, r.value, target, pass));
    }
    s
}
