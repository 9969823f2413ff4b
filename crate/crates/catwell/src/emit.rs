//! Deterministic CSV/JSON emission.
//!
//! Every figure and number leaves the binary through this module so that the
//! same inputs always produce the same bytes: floats are printed in a fixed
//! `%.12e` form (twelve fractional digits, sign-and-two-digit exponent),
//! CSV columns keep their declared order, and JSON objects keep their
//! declaration (struct) or sorted (map) key order.
//!
//! A CSV file carries its provenance inline: `# key=value` comment lines
//! ahead of the header echo every resolved parameter of the run, so the file
//! alone suffices to reproduce it. [`read_csv`] parses the same dialect
//! back, which is how `evolve` consumes schedules produced by `ramp`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{CatwellError, Result};

/// Fixed-width scientific notation: twelve fractional digits and a
/// sign-and-at-least-two-digit exponent (`1.087500000000e-08`), the same for
/// every run and platform. Non-finite values print as `nan`/`inf`/`-inf`.
pub fn fmt_e(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("scientific form has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    format!("{mantissa}e{exp:+03}")
}

/// A rectangular table of floats on its way to CSV: named columns, rows in
/// emission order, and `key=value` metadata echoing the run's parameters.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Emitted as `# key=value` lines, in insertion order.
    pub metadata: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl AsRef<str>) -> &mut Self {
        self.metadata.push((key.into(), value.as_ref().into()));
        self
    }

    pub fn meta_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.meta(key, fmt_e(value))
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(CatwellError::Invalid(format!(
                "row has {} fields but the table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Look up a metadata value by key.
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Render the whole table as CSV text (metadata, header, rows).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|&x| fmt_e(x)).collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

/// Parse the CSV dialect written by [`Table::to_csv`]: leading `# key=value`
/// lines, one header row, float rows.
pub fn read_csv(text: &str) -> Result<Table> {
    let mut table = Table::default();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if saw_header {
                return Err(CatwellError::Invalid(format!(
                    "line {}: metadata after the header row",
                    lineno + 1
                )));
            }
            let rest = rest.trim_start();
            let (k, v) = rest.split_once('=').ok_or_else(|| {
                CatwellError::Invalid(format!("line {}: metadata without '='", lineno + 1))
            })?;
            table.metadata.push((k.trim().into(), v.into()));
            continue;
        }
        if !saw_header {
            table.columns = line.split(',').map(|c| c.trim().to_string()).collect();
            saw_header = true;
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    CatwellError::Invalid(format!(
                        "line {}: unparsable float field {f:?}",
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != table.columns.len() {
            return Err(CatwellError::Invalid(format!(
                "line {}: {} fields under {} columns",
                lineno + 1,
                row.len(),
                table.columns.len()
            )));
        }
        table.rows.push(row);
    }
    if !saw_header {
        return Err(CatwellError::Invalid("CSV has no header row".into()));
    }
    Ok(table)
}

/// Serialize a value as pretty JSON with a trailing newline. Struct fields
/// keep declaration order; maps are sorted — both deterministic.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CatwellError::Invalid(format!("JSON serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Write text to a file, or to stdout when `path` is `None`.
pub fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CatwellError::Write {
            path: p.display().to_string(),
            source: e,
        }),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CatwellError::Write {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}
