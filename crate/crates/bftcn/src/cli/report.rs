use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use serde_json::Value;

use crate::report::{build_report, collect_run_records, report_to_csv};

#[derive(clap::Args, Debug)]
pub struct ReportArgs {
    /// Directory containing grid runs (scanned recursively for result.json).
    #[arg(long)]
    pub results: PathBuf,
    /// Also write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the interval table as CSV here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn run(args: ReportArgs) -> anyhow::Result<Value> {
    let records = collect_run_records(&args.results)?;
    let report = build_report(&records)?;
    let value = serde_json::to_value(&report)?;
    if let Some(out) = &args.out {
        fs::write(out, format!("{}\n", serde_json::to_string_pretty(&value)?))
            .with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(csv) = &args.csv {
        fs::write(csv, report_to_csv(&report))
            .with_context(|| format!("writing {}", csv.display()))?;
    }
    Ok(value)
}
