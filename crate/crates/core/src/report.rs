//! CSV and JSON output.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{correlator, correlator_analytic};
use crate::models::{ModelKind, CELLS};
use crate::protocol::CountTable;

/// Column order of the counts file.
pub const COUNTS_HEADER: [&str; 13] =
    ["model", "pair_label", "n_l_x", "n_l_y", "n_l_z", "n_r_x", "n_r_y", "n_r_z", "sigma", "tau", "count", "frequency", "analytic"];

/// Column order of the angle–correlator curve.
pub const CURVE_HEADER: [&str; 10] =
    ["model", "pair_label", "angle_deg", "trials", "correlator", "analytic_correlator", "freq_pp", "freq_pm", "freq_mp", "freq_mm"];

/// Column order of metric rows.
pub const METRIC_HEADER: [&str; 6] = ["metric", "model", "parameters", "value", "tolerance", "pass"];

/// 17 significant digits, enough to round-trip any f64.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// One row per outcome cell of every table.
pub fn counts_csv(tables: &[CountTable]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COUNTS_HEADER)?;
    for t in tables {
        let vectors: Vec<String> = match &t.pair {
            Some(p) => p.n_l.components().iter().chain(&p.n_r.components()).map(|&c| float(c)).collect(),
            None => vec![String::new(); 6],
        };
        let freq = t.frequencies();
        for (i, (s, tau)) in CELLS.iter().enumerate() {
            let mut row = vec![t.model.name().to_string(), t.label.clone()];
            row.extend(vectors.iter().cloned());
            row.extend([s.value().to_string(), tau.value().to_string(), t.counts[i].to_string(), float(freq[i]), float(t.analytic[i])]);
            w.write_record(&row)?;
        }
    }
    finish(w)
}

/// Correlator and cell frequencies against relative angle, one row per table.
pub fn curve_csv(tables: &[CountTable]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CURVE_HEADER)?;
    for t in tables {
        let measured = correlator(t).map(float).unwrap_or_default();
        let analytic = match &t.pair {
            Some(p) => correlator_analytic(t.model, p),
            None => CELLS.iter().zip(t.analytic).map(|((a, b), p)| a.as_f64() * b.as_f64() * p).sum(),
        };
        let mut row =
            vec![t.model.name().to_string(), t.label.clone(), float(t.angle_deg()), t.total().to_string(), measured, float(analytic)];
        row.extend(t.frequencies().map(float));
        w.write_record(&row)?;
    }
    finish(w)
}

/// One checked quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub model: String,
    pub parameters: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Whether the row counts towards the overall verdict.
    #[serde(default = "decisive_default")]
    pub decisive: bool,
}

fn decisive_default() -> bool {
    true
}

impl MetricRow {
    pub fn new(metric: &str, model: Option<ModelKind>, parameters: impl Into<String>, value: f64, tolerance: f64, pass: bool) -> Self {
        MetricRow {
            metric: metric.to_string(),
            model: model.map(|m| m.name().to_string()).unwrap_or_default(),
            parameters: parameters.into(),
            value,
            tolerance,
            pass,
            decisive: true,
        }
    }

    /// Marks the row as supporting detail that does not decide the verdict.
    pub fn detail(self) -> Self {
        MetricRow { decisive: false, ..self }
    }
}

/// Structured report of metric rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub passed: bool,
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn new() -> Self {
        MetricsReport { passed: true, rows: Vec::new() }
    }

    pub fn push(&mut self, row: MetricRow) {
        self.passed &= row.pass || !row.decisive;
        self.rows.push(row);
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.decisive && !r.pass).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(METRIC_HEADER)?;
        for r in &self.rows {
            w.write_record([r.metric.clone(), r.model.clone(), r.parameters.clone(), float(r.value), float(r.tolerance), r.pass.to_string()])?;
        }
        finish(w)
    }
}
