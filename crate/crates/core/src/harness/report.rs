//! Emission of convergence tables as CSV, JSON and aligned markdown.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::dynamics::SaddleConfig;
use crate::error::Result;
use crate::problems::ProblemKind;

pub(crate) fn build_version() -> &'static str {
    option_env!("SSD_GIT_DESCRIBE").unwrap_or("unknown")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub inv_tau: u64,
    pub tau: f64,
    pub max_ex: f64,
    /// `log2(prev.max_ex / max_ex)`; absent on the first row.
    pub cr_x: Option<f64>,
    pub max_ev: f64,
    pub cr_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub k: usize,
    pub mode: ProblemKind,
    pub scheme: Scheme,
    pub x0: Vec<f64>,
    pub v0: Vec<Vec<f64>>,
    pub config: SaddleConfig,
    pub taus: Vec<f64>,
    pub ref_tau: f64,
    pub rows: Vec<ConvergenceRow>,
    pub warnings: Vec<String>,
    /// `git describe` of the build that produced the report.
    pub build: String,
}

/// Closed interval every reported rate must fall into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateWindow {
    pub lo: f64,
    pub hi: f64,
}

impl RateWindow {
    pub fn contains(&self, rate: f64) -> bool {
        rate >= self.lo && rate <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckFailure {
    pub row: ConvergenceRow,
    pub column: &'static str,
    pub rate: Option<f64>,
    pub window: RateWindow,
}

impl std::fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rate = self.rate.map_or("blank".to_string(), |r| format!("{r:.2}"));
        write!(
            f,
            "row 1/tau = {}: {} = {rate} outside [{:.2}, {:.2}]",
            self.row.inv_tau, self.column, self.window.lo, self.window.hi
        )
    }
}

/// `2.60E-02`-style scientific notation with a signed two-digit exponent.
pub fn format_sci(x: f64) -> String {
    if x == 0.0 {
        return "0.00E+00".to_string();
    }
    let s = format!("{x:.2E}");
    let (mant, exp) = s.split_once('E').expect("LowerExp always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}E{sign}{:02}", exp.abs())
}

fn inv_tau_label(inv_tau: u64) -> String {
    if inv_tau.is_power_of_two() {
        format!("2^{}", inv_tau.trailing_zeros())
    } else {
        inv_tau.to_string()
    }
}

fn opt_csv(v: Option<f64>) -> String {
    v.map_or(String::new(), |r| format!("{r:e}"))
}

impl ConvergenceReport {
    /// `inv_tau,max_ex,cr_x,max_ev,cr_v`, shortest round-trip floats,
    /// blank rates where undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("inv_tau,max_ex,cr_x,max_ev,cr_v\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{},{:e},{}",
                r.inv_tau,
                r.max_ex,
                opt_csv(r.cr_x),
                r.max_ev,
                opt_csv(r.cr_v)
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Markdown table with one row per step size and rates on the finer row.
    pub fn to_markdown(&self) -> String {
        let (ex, ev) = match self.scheme {
            Scheme::Euler => ("max_n ‖e^x_n‖", "max_n ‖e^v_n‖"),
            Scheme::Richardson => ("max_n ‖e^{R,x}_n‖", "max_n ‖e^{R,v}_n‖"),
        };
        let mut out = String::new();
        writeln!(
            out,
            "{} index-{} ({}, {} scheme, reference tau = {})\n",
            self.problem,
            self.k,
            self.mode,
            self.scheme,
            inv_tau_label((1.0 / self.ref_tau).round() as u64).replacen("2^", "2^-", 1)
        )
        .unwrap();
        writeln!(out, "| 1/tau | {ex:>17} |   CR | {ev:>17} |   CR |").unwrap();
        writeln!(out, "|------:|{:->19}|-----:|{:->19}|-----:|", ":", ":").unwrap();
        for r in &self.rows {
            let cr = |c: Option<f64>| c.map_or(String::new(), |v| format!("{v:.2}"));
            writeln!(
                out,
                "| {:>5} | {:>17} | {:>4} | {:>17} | {:>4} |",
                inv_tau_label(r.inv_tau),
                format_sci(r.max_ex),
                cr(r.cr_x),
                format_sci(r.max_ev),
                cr(r.cr_v)
            )
            .unwrap();
        }
        for w in &self.warnings {
            writeln!(out, "\nwarning: {w}").unwrap();
        }
        out
    }

    /// First rate (position column before direction column, top to bottom)
    /// outside `window`. Blank rates after the first row count as failures.
    pub fn check(&self, window: RateWindow) -> std::result::Result<(), CheckFailure> {
        for row in self.rows.iter().skip(1) {
            for (column, rate) in [("cr_x", row.cr_x), ("cr_v", row.cr_v)] {
                if !rate.is_some_and(|r| window.contains(r)) {
                    return Err(CheckFailure {
                        row: row.clone(),
                        column,
                        rate,
                        window,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ConvergenceReport {
        let row = |inv_tau: u64, ex: f64, crx: Option<f64>| ConvergenceRow {
            inv_tau,
            tau: 1.0 / inv_tau as f64,
            max_ex: ex,
            cr_x: crx,
            max_ev: ex / 2.0,
            cr_v: crx,
        };
        ConvergenceReport {
            problem: "stingray".into(),
            k: 1,
            mode: ProblemKind::Gradient,
            scheme: Scheme::Euler,
            x0: vec![1.0, 1.0],
            v0: vec![vec![0.0, 1.0]],
            config: SaddleConfig::new(1, 1.0 / 32.0, ProblemKind::Gradient),
            taus: vec![1.0 / 32.0, 1.0 / 64.0],
            ref_tau: 1.0 / 8192.0,
            rows: vec![row(32, 2.6e-2, None), row(64, 1.23e-2, Some(1.08))],
            warnings: vec![],
            build: "test".into(),
        }
    }

    #[test]
    fn sci_format() {
        assert_eq!(format_sci(2.6049e-2), "2.60E-02");
        assert_eq!(format_sci(1.45e-3), "1.45E-03");
        assert_eq!(format_sci(12.0), "1.20E+01");
        assert_eq!(format_sci(0.0), "0.00E+00");
    }

    #[test]
    fn csv_layout() {
        let csv = report().to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "inv_tau,max_ex,cr_x,max_ev,cr_v");
        assert_eq!(lines[1], "32,2.6e-2,,1.3e-2,");
        assert_eq!(lines[2], "64,1.23e-2,1.08e0,6.15e-3,1.08e0");
    }

    #[test]
    fn markdown_layout() {
        let md = report().to_markdown();
        assert!(md.contains("|   2^5 |          2.60E-02 |      |"));
        assert!(md.contains("|   2^6 |          1.23E-02 | 1.08 |"));
        assert!(md.contains("reference tau = 2^-13"));
    }

    #[test]
    fn json_has_provenance() {
        let json = report().to_json().unwrap();
        for key in [
            "\"problem\"",
            "\"x0\"",
            "\"v0\"",
            "\"k\"",
            "\"taus\"",
            "\"ref_tau\"",
            "\"build\"",
        ] {
            assert!(json.contains(key), "missing {key}");
        }
        let back: ConvergenceReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report());
    }

    #[test]
    fn check_windows() {
        let r = report();
        assert!(r.check(RateWindow { lo: 0.9, hi: 1.15 }).is_ok());
        let fail = r.check(RateWindow { lo: 1.85, hi: 2.15 }).unwrap_err();
        assert_eq!((fail.row.inv_tau, fail.column), (64, "cr_x"));
        let mut blank = r.clone();
        blank.rows[1].cr_v = None;
        assert_eq!(
            blank
                .check(RateWindow { lo: 0.9, hi: 1.15 })
                .unwrap_err()
                .column,
            "cr_v"
        );
    }
}
