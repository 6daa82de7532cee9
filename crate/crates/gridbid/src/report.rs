//! Result exports: settlement reports, bilevel results and summary rows.
//!
//! Settlement CSV has one row per scenario with columns
//! `scenario,weight,cost_rt,shed_total,curtail_total`.

use std::io::Write;

use gridbid_core::bilevel::{BilevelResult, KktStatus};
use gridbid_core::market::SettlementReport;
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: usize,
    pub weight: f64,
    pub cost_rt: f64,
    pub shed_total: f64,
    pub curtail_total: f64,
}

pub fn scenario_rows(report: &SettlementReport) -> Vec<ScenarioRow> {
    report
        .rt
        .iter()
        .zip(&report.weights)
        .enumerate()
        .map(|(scenario, (rt, &weight))| ScenarioRow {
            scenario,
            weight,
            cost_rt: rt.cost_rt,
            shed_total: rt.total_shed(),
            curtail_total: rt.total_curtailed(),
        })
        .collect()
}

pub fn write_settlement_csv<W: Write>(out: W, report: &SettlementReport) -> Result<(), Error> {
    write_csv(out, &scenario_rows(report))
}

/// Writes rows with a header, even when `rows` is empty.
pub fn write_csv<W: Write, T: Serialize + Default>(mut out: W, rows: &[T]) -> Result<(), Error> {
    if rows.is_empty() {
        // the header comes from the field names of a placeholder row
        let mut probe = csv::Writer::from_writer(Vec::new());
        probe.serialize(T::default())?;
        let text = probe.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        let end = text.iter().position(|&b| b == b'\n').map_or(text.len(), |i| i + 1);
        return out.write_all(&text[..end]).map_err(|e| Error::Csv(e.into()));
    }
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Compact view of a [`BilevelResult`] for JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilevelExport {
    pub offer: Vec<f64>,
    pub relaxed_objective: Option<f64>,
    pub exact_objective: Option<f64>,
    pub z: Vec<f64>,
    pub evaluated_total_cost: f64,
    pub evaluated_da_cost: f64,
    pub evaluated_expected_rt_cost: f64,
    pub nodes: usize,
    pub gap: Option<f64>,
    pub status: KktStatus,
    pub lp_iterations: usize,
    pub solve_seconds: f64,
}

impl From<&BilevelResult> for BilevelExport {
    fn from(r: &BilevelResult) -> Self {
        BilevelExport {
            offer: r.offer.w.clone(),
            relaxed_objective: r.relaxed_objective,
            exact_objective: r.exact_objective,
            z: r.z.clone(),
            evaluated_total_cost: r.evaluated.total_cost,
            evaluated_da_cost: r.evaluated.da.cost_da,
            evaluated_expected_rt_cost: r.evaluated.expected_rt_cost,
            nodes: r.diagnostics.nodes,
            // JSON has no infinity
            gap: r.diagnostics.gap.is_finite().then_some(r.diagnostics.gap),
            status: r.diagnostics.status,
            lp_iterations: r.diagnostics.lp_iterations,
            solve_seconds: r.diagnostics.solve_seconds,
        }
    }
}
