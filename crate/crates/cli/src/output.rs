//! Text renderings of trajectories and reports.
//!
//! Both formats are pure functions of the scenario and the numbers, so
//! reruns are byte-identical.

use std::fmt::Write;

use serde::Serialize;
use treesir_core::Trajectory;

use crate::scenario::{Mode, Scenario};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Decimals needed to print every multiple of `step` exactly (at most 12).
pub fn time_decimals(step: f64) -> usize {
    (0..=12)
        .find(|&d| {
            let scaled = step * 10f64.powi(d as i32);
            (scaled - scaled.round()).abs() <= 1e-9 * scaled.max(1.0)
        })
        .unwrap_or(12)
}

/// 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a `#` comment header carrying the tool version and the resolved
/// scenario, then `t` and one column per series.
pub fn trajectory_csv(scenario: &Scenario, traj: &Trajectory) -> String {
    let grid = traj.grid();
    let decimals = time_decimals(grid.step());
    let mut out = String::new();
    writeln!(out, "# treesir {VERSION}").unwrap();
    writeln!(
        out,
        "# scenario: {}",
        scenario.provenance().canonical_json()
    )
    .unwrap();
    out.push('t');
    for s in traj.series() {
        out.push(',');
        out.push_str(&s.name);
    }
    out.push('\n');
    for (k, t) in grid.times().enumerate() {
        write!(out, "{t:.decimals$}").unwrap();
        for s in traj.series() {
            out.push(',');
            out.push_str(&format_value(s.values[k]));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub max_abs_diff: Option<f64>,
    pub z_max: Option<f64>,
    pub bracket_width: Option<f64>,
    pub orders: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub mode: Mode,
    pub version: &'static str,
    pub parameters: Scenario,
    pub metrics: Metrics,
    pub pass: bool,
    pub details: serde_json::Value,
}

impl Report {
    pub fn new(
        scenario: &Scenario,
        metrics: Metrics,
        pass: bool,
        details: serde_json::Value,
    ) -> Self {
        Report {
            scenario: scenario.name.clone(),
            mode: scenario.mode,
            version: VERSION,
            parameters: scenario.provenance(),
            metrics,
            pass,
            details,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
