//! Evaluation outputs: the report as JSON, a tidy per-slot CSV, and the
//! long-format sweep tables.

use std::io::Write;

use baton_core::metrics::{EvalReport, RunReport};
use baton_core::sim::ScenarioOutcome;
use serde::{Deserialize, Serialize};

use crate::error::{BatonError, Result};

/// Pretty JSON with a trailing newline; identical inputs give identical
/// bytes.
pub fn write_report_json<W: Write>(mut out: W, report: &EvalReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n").map_err(|e| BatonError::io("<json>", e))?;
    Ok(())
}

/// One row of the tidy per-slot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    pub run: String,
    pub slot: usize,
    pub time: f64,
    pub x_true: f64,
    pub y_true: f64,
    pub x_est: f64,
    pub y_est: f64,
    pub error: f64,
    /// Cells of this slot that were observed.
    pub observed: usize,
}

/// Columns `run,slot,time,x_true,y_true,x_est,y_est,error,observed`.
pub fn write_slot_csv<W: Write>(out: W, runs: &[(&ScenarioOutcome, &RunReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (outcome, report) in runs {
        let dt = outcome.truth.slot_duration;
        for (t, err) in report.tracking.errors.iter().enumerate() {
            let truth = outcome.truth.positions[t];
            let est = outcome.output.trace.positions[t];
            w.serialize(SlotRow {
                run: report.label.clone(),
                slot: t,
                time: t as f64 * dt,
                x_true: truth.x,
                y_true: truth.y,
                x_est: est.x,
                y_est: est.y,
                error: *err,
                observed: outcome.raw.row_mask(t).iter().filter(|m| **m).count(),
            })?;
        }
    }
    w.flush().map_err(|e| BatonError::io("<csv>", e))?;
    Ok(())
}

/// One scenario of a sweep or ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub predictors: String,
    pub repeat: usize,
    pub seed: u64,
    pub median_error: f64,
    pub mean_error: f64,
    pub mse_missing: f64,
    pub mse_all: f64,
    pub self_corrected: bool,
}

/// Aggregate over the repeats of one (predictor set, axis value) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: String,
    pub predictors: String,
    pub runs: usize,
    /// Median over every slot of every run.
    pub pooled_median_error: f64,
    pub median_of_run_means: f64,
    pub pooled_mse_missing: f64,
    pub pooled_mse_all: f64,
    pub self_correction_rate: f64,
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| BatonError::io("<csv>", e))?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(input: impl std::io::Read) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(BatonError::from)).collect()
}
