//! CSV and manifest writers.
//!
//! `diagnostics.csv` has the header `t,name,lhs,rhs,margin,pass` and one row
//! per check per snapshot. Numbers are written in scientific notation with
//! the configured number of significant digits; `pass` is `true`/`false`.

use std::fmt::Write as _;
use std::path::Path;

use crate::diagnostics::InequalityRecord;
use crate::error::Result;

pub const DIAGNOSTICS_HEADER: &str = "t,name,lhs,rhs,margin,pass";

/// Scientific notation with `digits` significant digits.
pub fn fmt_num(x: f64, digits: usize) -> String {
    if x.is_finite() {
        format!("{:.*e}", digits.saturating_sub(1), x)
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn record_row(r: &InequalityRecord, digits: usize) -> String {
    format!(
        "{},{},{},{},{},{}",
        fmt_num(r.t, digits),
        r.name,
        fmt_num(r.lhs, digits),
        fmt_num(r.rhs, digits),
        fmt_num(r.margin, digits),
        r.pass
    )
}

pub fn diagnostics_csv(records: &[InequalityRecord], digits: usize) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&record_row(r, digits));
        out.push('\n');
    }
    out
}

pub fn write_diagnostics(path: &Path, records: &[InequalityRecord], digits: usize) -> Result<()> {
    std::fs::write(path, diagnostics_csv(records, digits))?;
    Ok(())
}

/// Key-value manifest: the full config echo plus run metadata.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    pub config_text: String,
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# run manifest\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str("# config (parse with load_config to reproduce the run)\n");
        out.push_str(&self.config_text);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0, 3), "0.00e0");
        assert_eq!(fmt_num(1234.5, 3), "1.23e3");
        assert_eq!(fmt_num(f64::INFINITY, 3), "inf");
    }

    #[test]
    fn csv_header_and_rows() {
        let r = InequalityRecord::new(0.5, "x", 1.0, 2.0, 0.0, 0.0);
        let text = diagnostics_csv(&[r], 4);
        assert_eq!(text, "t,name,lhs,rhs,margin,pass\n5.000e-1,x,1.000e0,2.000e0,1.000e0,true\n");
    }
}
