//! File formats written by the command-line tool.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beam_design::ChannelPair;
use crate::error::Result;
use crate::region::{CurveDiagnostics, PhiCurve, RegionPoint, RegionRow, Scheme, SweepResult};

pub const REGION_HEADER: &str = "scheme,xi1,e1_watts,e2_watts,n_ok_realizations";

/// Rows are written in the given order; callers sort by (scheme, xi1).
pub fn region_csv(rows: &[RegionRow]) -> String {
    let mut out = String::from(REGION_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.scheme.as_str(), r.xi1, r.e1, r.e2, r.n_ok).unwrap();
    }
    out
}

pub fn parse_region_csv(text: &str) -> std::result::Result<Vec<RegionRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == REGION_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(format!("malformed row {line:?}"));
            }
            let scheme = Scheme::ALL
                .into_iter()
                .find(|s| s.as_str() == f[0])
                .ok_or_else(|| format!("unknown scheme {:?}", f[0]))?;
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
            Ok(RegionRow {
                scheme,
                xi1: num(f[1])?,
                e1: num(f[2])?,
                e2: num(f[3])?,
                n_ok: f[4].parse().map_err(|e| format!("{:?}: {e}", f[4]))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub scheme: Scheme,
    pub realization: u64,
    #[serde(flatten)]
    pub point: RegionPoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellChannels {
    pub realization: u64,
    pub channels: ChannelPair,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub xi1: f64,
    pub realization: u64,
    pub diagnostics: CurveDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoliciesFile {
    pub p_x: f64,
    pub channels: Vec<CellChannels>,
    /// Sorted by scheme, weight, realization.
    pub policies: Vec<PolicyEntry>,
    pub cells: Vec<CellSummary>,
    pub failures: Vec<String>,
}

impl PoliciesFile {
    /// `k` selects the budget within a multi-budget sweep.
    pub fn from_sweep(result: &SweepResult, k: usize, channels: Vec<CellChannels>) -> Self {
        let mut policies = Vec::new();
        for cell in &result.cells {
            for scheme in Scheme::ALL {
                let point = cell.by_budget[k].get(scheme).clone();
                policies.push(PolicyEntry { scheme, realization: cell.realization, point });
            }
        }
        policies.sort_by(|a, b| {
            a.scheme.cmp(&b.scheme).then(a.point.xi1.total_cmp(&b.point.xi1)).then(a.realization.cmp(&b.realization))
        });
        let mut cells: Vec<CellSummary> = result
            .cells
            .iter()
            .map(|c| CellSummary { xi1: c.xi1, realization: c.realization, diagnostics: c.diagnostics.clone() })
            .collect();
        cells.sort_by(|a, b| a.xi1.total_cmp(&b.xi1).then(a.realization.cmp(&b.realization)));
        Self { p_x: result.p_x[k], channels, policies, cells, failures: result.failures.clone() }
    }
}

pub fn phi_curve_csv(curve: &PhiCurve) -> String {
    let mut out = String::from("nu_watts,phi_watts,region,eig_ratio,sca_iterations,repaired\n");
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{}{},{},{},{}",
            p.nu, p.value, p.region.0, p.region.1, p.eig_ratio, p.sca_iterations, p.repaired as u8
        )
        .unwrap();
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}
