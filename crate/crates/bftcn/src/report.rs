//! Delay-interval reports: bucket completed runs by future window, pick a
//! representative per interval by F1@50, and compute global and local
//! competitive ratios.

use std::fs;
use std::path::{Path, PathBuf};

use bftcn_core::metrics::{MetricsReport, competitive_ratio, local_competitive_ratio};
use bftcn_core::window::{DELAY_BUCKET_COUNT, DelayBucket, NetworkConfig, Variant, bucket_delay};
use serde::{Deserialize, Serialize};

use crate::formats::FormatError;

/// One completed experiment, as written by the grid runner (`result.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub config: NetworkConfig,
    pub in_features: usize,
    pub fw_frames: u64,
    pub fw_seconds: f64,
    /// Mean metrics over the evaluation videos.
    pub metrics: MetricsReport,
    /// Marks the run as an offline (acausal) baseline candidate regardless
    /// of its delay bucket.
    #[serde(default)]
    pub offline_baseline: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no run records found under {0}")]
    NoRuns(PathBuf),
    #[error(
        "no acausal baseline present: no run is marked offline_baseline and none falls in the \
         unbounded delay interval"
    )]
    NoBaseline,
    #[error("run {name}: invalid future window: {source}")]
    BadDelay { name: String, source: bftcn_core::window::DelayError },
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub variant: Variant,
    pub fw_seconds: f64,
    pub f1_50: f64,
}

impl RunSummary {
    fn of(r: &RunRecord) -> Self {
        Self {
            name: r.name.clone(),
            variant: r.config.variant,
            fw_seconds: r.fw_seconds,
            f1_50: r.metrics.f1_50(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub bucket: DelayBucket,
    pub label: String,
    pub run_count: usize,
    /// Best run in the interval by F1@50, if any.
    pub best: Option<RunSummary>,
    pub best_bf: Option<RunSummary>,
    pub best_rr: Option<RunSummary>,
    /// Best-in-interval F1@50 over the baseline F1@50.
    pub global_competitive_ratio: Option<f64>,
    /// Best BF over best RR inside the interval; null when either is missing.
    pub local_competitive_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub baseline: RunSummary,
    pub intervals: Vec<IntervalReport>,
}

/// Build the interval table. The baseline is the best F1@50 among runs
/// marked `offline_baseline` or falling in the unbounded `(64, inf)`
/// interval; without such a run the report is refused.
pub fn build_report(records: &[RunRecord]) -> Result<Report, ReportError> {
    let mut bucketed: Vec<Vec<&RunRecord>> = vec![Vec::new(); DELAY_BUCKET_COUNT];
    for r in records {
        let bucket = bucket_delay(r.fw_seconds)
            .map_err(|source| ReportError::BadDelay { name: r.name.clone(), source })?;
        bucketed[bucket.index].push(r);
    }

    let baseline = records
        .iter()
        .filter(|r| r.offline_baseline || r.fw_seconds > 64.0)
        .max_by(|a, b| a.metrics.f1_50().total_cmp(&b.metrics.f1_50()))
        .ok_or(ReportError::NoBaseline)?;
    let baseline_f1 = baseline.metrics.f1_50();

    let best_of = |runs: &[&RunRecord], variant: Option<Variant>| -> Option<RunSummary> {
        runs.iter()
            .filter(|r| variant.is_none_or(|v| r.config.variant == v))
            .max_by(|a, b| a.metrics.f1_50().total_cmp(&b.metrics.f1_50()))
            .map(|r| RunSummary::of(r))
    };

    let mut intervals = Vec::with_capacity(DELAY_BUCKET_COUNT);
    for index in 0..DELAY_BUCKET_COUNT {
        let bucket = DelayBucket::from_index(index).unwrap();
        let runs = &bucketed[index];
        let best = best_of(runs, None);
        let best_bf = best_of(runs, Some(Variant::Bf));
        let best_rr = best_of(runs, Some(Variant::Rr));
        let global = best
            .as_ref()
            .map(|b| competitive_ratio(b.f1_50, baseline_f1).expect("baseline f1 > 0"));
        let local = match (&best_bf, &best_rr) {
            (Some(bf), Some(rr)) => local_competitive_ratio(bf.f1_50, rr.f1_50).ok(),
            _ => None,
        };
        intervals.push(IntervalReport {
            bucket,
            label: bucket.label(),
            run_count: runs.len(),
            best,
            best_bf,
            best_rr,
            global_competitive_ratio: global,
            local_competitive_ratio: local,
        });
    }
    Ok(Report { baseline: RunSummary::of(baseline), intervals })
}

/// Flatten the report to CSV (one row per interval).
pub fn report_to_csv(report: &Report) -> String {
    let mut out = String::from(
        "interval_index,interval,run_count,best_name,best_f1_50,global_competitive_ratio,\
         best_bf_name,best_bf_f1_50,best_rr_name,best_rr_f1_50,local_competitive_ratio\n",
    );
    let fmt_opt = |v: &Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let name_of = |s: &Option<RunSummary>| s.as_ref().map(|r| r.name.clone()).unwrap_or_default();
    let f1_of = |s: &Option<RunSummary>| s.as_ref().map(|r| format!("{:.4}", r.f1_50)).unwrap_or_default();
    for iv in &report.intervals {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            iv.bucket.index,
            iv.label.replace(',', ";"),
            iv.run_count,
            name_of(&iv.best),
            f1_of(&iv.best),
            fmt_opt(&iv.global_competitive_ratio),
            name_of(&iv.best_bf),
            f1_of(&iv.best_bf),
            name_of(&iv.best_rr),
            f1_of(&iv.best_rr),
            fmt_opt(&iv.local_competitive_ratio),
        ));
    }
    out
}

/// Recursively collect every `result.json` under `dir`, sorted by run name
/// for determinism.
pub fn collect_run_records(dir: &Path) -> Result<Vec<RunRecord>, ReportError> {
    let mut records = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = fs::read_dir(&d)
            .map_err(|source| FormatError::Io { path: d.clone(), source })?;
        for entry in entries {
            let entry = entry.map_err(|source| FormatError::Io { path: d.clone(), source })?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "result.json") {
                let text = fs::read_to_string(&path)
                    .map_err(|source| FormatError::Io { path: path.clone(), source })?;
                let record: RunRecord = serde_json::from_str(&text)
                    .map_err(|source| FormatError::HeaderJson { path: path.clone(), source })?;
                records.push(record);
            }
        }
    }
    if records.is_empty() {
        return Err(ReportError::NoRuns(dir.to_path_buf()));
    }
    records.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(records)
}
