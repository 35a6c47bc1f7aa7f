//! Aggregated trade-off records and their CSV serializations.

use std::path::Path;

use crate::filters::{FilterMethod, FilterSpec};

use super::HarnessError;

/// One query's outcome inside a grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PerQueryOutcome {
    pub qid: String,
    pub med: f64,
    pub time_ms: f64,
    pub result_size: usize,
    pub unmatched: usize,
}

/// Aggregates for one (method, k, theta) grid cell.
#[derive(Debug, Clone)]
pub struct TradeoffRecord {
    pub method: FilterMethod,
    pub k: usize,
    pub theta: f64,
    pub per_query: Vec<PerQueryOutcome>,
    pub med_mean: f64,
    pub med_p10: f64,
    pub med_q1: f64,
    pub med_median: f64,
    pub med_q3: f64,
    pub med_p90: f64,
    pub time_median_ms: f64,
    pub time_p10_ms: f64,
    pub time_p90_ms: f64,
    pub mean_result_size: f64,
    pub combined_time_ms: f64,
}

impl TradeoffRecord {
    pub fn from_outcomes(
        spec: &FilterSpec,
        per_query: Vec<PerQueryOutcome>,
        final_ms_per_doc: f64,
    ) -> Self {
        let mut meds: Vec<f64> = per_query.iter().map(|o| o.med).collect();
        meds.sort_by(f64::total_cmp);
        let mut times: Vec<f64> = per_query.iter().map(|o| o.time_ms).collect();
        times.sort_by(f64::total_cmp);
        let n = per_query.len();
        let mean_result_size = if n == 0 {
            0.0
        } else {
            per_query.iter().map(|o| o.result_size as f64).sum::<f64>() / n as f64
        };
        let mut record = Self {
            method: spec.method,
            k: spec.k,
            theta: spec.theta,
            med_mean: mean(&meds),
            med_p10: nearest_rank(&meds, 0.10),
            med_q1: nearest_rank(&meds, 0.25),
            med_median: median(&meds),
            med_q3: nearest_rank(&meds, 0.75),
            med_p90: nearest_rank(&meds, 0.90),
            time_median_ms: median(&times),
            time_p10_ms: nearest_rank(&times, 0.10),
            time_p90_ms: nearest_rank(&times, 0.90),
            mean_result_size,
            combined_time_ms: 0.0,
            per_query,
        };
        record.combined_time_ms = combined_cost(&record, final_ms_per_doc);
        record
    }
}

/// Median filter time plus a per-document allowance for the final stage run
/// over the mean result size.
pub fn combined_cost(record: &TradeoffRecord, ms_per_doc: f64) -> f64 {
    record.time_median_ms + ms_per_doc * record.mean_result_size
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Nearest-rank percentile over pre-sorted values.
fn nearest_rank(sorted: &[f64], fraction: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (fraction * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Median over pre-sorted values; even counts average the two central ones.
fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        0.0
    } else if n % 2 == 0 {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    } else {
        sorted[n / 2]
    }
}

/// Six significant digits, plain decimal notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let precision = (5 - magnitude).max(0) as usize;
    format!("{x:.precision$}")
}

const SUMMARY_HEADER: [&str; 13] = [
    "method",
    "k",
    "theta",
    "med_mean",
    "med_p10",
    "med_q1",
    "med_median",
    "med_q3",
    "med_p90",
    "time_median_ms",
    "time_p10_ms",
    "time_p90_ms",
    "combined_time_ms",
];

const PER_QUERY_HEADER: [&str; 8] = [
    "method",
    "k",
    "theta",
    "qid",
    "med",
    "time_ms",
    "result_size",
    "unmatched",
];

fn write_csv<P: AsRef<Path>>(path: P, build: impl FnOnce(&mut csv::Writer<Vec<u8>>)) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_writer(Vec::new());
    build(&mut writer);
    let bytes = writer.into_inner().expect("in-memory csv never fails");
    std::fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One row per grid cell.
pub fn emit_csv<P: AsRef<Path>>(records: &[TradeoffRecord], path: P) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    write_csv(path, |writer| {
        writer.write_record(SUMMARY_HEADER).expect("in-memory write");
        for r in records {
            writer
                .write_record([
                    r.method.as_str().to_string(),
                    r.k.to_string(),
                    fmt_sig(r.theta),
                    fmt_sig(r.med_mean),
                    fmt_sig(r.med_p10),
                    fmt_sig(r.med_q1),
                    fmt_sig(r.med_median),
                    fmt_sig(r.med_q3),
                    fmt_sig(r.med_p90),
                    fmt_sig(r.time_median_ms),
                    fmt_sig(r.time_p10_ms),
                    fmt_sig(r.time_p90_ms),
                    fmt_sig(r.combined_time_ms),
                ])
                .expect("in-memory write");
        }
    })
}

/// One row per (grid cell, query).
pub fn emit_per_query_csv<P: AsRef<Path>>(
    records: &[TradeoffRecord],
    path: P,
) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    write_csv(path, |writer| {
        writer
            .write_record(PER_QUERY_HEADER)
            .expect("in-memory write");
        for r in records {
            for o in &r.per_query {
                writer
                    .write_record([
                        r.method.as_str().to_string(),
                        r.k.to_string(),
                        fmt_sig(r.theta),
                        o.qid.clone(),
                        fmt_sig(o.med),
                        fmt_sig(o.time_ms),
                        o.result_size.to_string(),
                        o.unmatched.to_string(),
                    ])
                    .expect("in-memory write");
            }
        }
    })
}
