//! CSV emission. One schema for sweeps and single-point runs:
//! `load,scheme,analytic_delay,simulated_delay,ci95,support_size,status`,
//! floats printed with 9 significant digits so identical runs produce
//! byte-identical files.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::config::Scheme;
use crate::CliError;

pub const CSV_HEADER: &str = "load,scheme,analytic_delay,simulated_delay,ci95,support_size,status";

/// Nine significant digits, locale-independent.
pub fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

fn opt9(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Infeasible,
    /// Stable on paper but the simulation hit the divergence cap.
    Diverged,
    /// The solver failed on this point; the sweep carried on.
    Error,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::Diverged => "diverged",
            RowStatus::Error => "error",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub load: f64,
    pub scheme: Scheme,
    pub analytic_delay: Option<f64>,
    pub simulated_delay: Option<f64>,
    pub ci95: Option<f64>,
    pub support_size: usize,
    pub status: RowStatus,
}

impl SweepRow {
    pub fn empty(load: f64, scheme: Scheme, status: RowStatus) -> SweepRow {
        SweepRow {
            load,
            scheme,
            analytic_delay: None,
            simulated_delay: None,
            ci95: None,
            support_size: 0,
            status,
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            sig9(self.load),
            self.scheme,
            opt9(self.analytic_delay),
            opt9(self.simulated_delay),
            opt9(self.ci95),
            self.support_size,
            self.status
        )
    }
}

pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

/// Write to the path when given, stdout otherwise.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(format!("stdout: {e}"))),
    }
}
