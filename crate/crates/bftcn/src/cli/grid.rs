use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use bftcn_core::window::{NetworkConfig, Variant, bucket_delay, future_window, future_window_seconds};
use serde_json::{Value, json};

use super::args::VariantArg;
use super::eval::evaluate_videos;
use super::train::{history_json, run_training};
use crate::formats::{Precision, load_videos, write_checkpoint};
use crate::report::RunRecord;

#[derive(clap::Args, Debug)]
pub struct GridArgs {
    /// Training dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Validation manifest (model selection).
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Held-out manifest for the reported metrics; falls back to --val, then
    /// to the training manifest.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    #[arg(long = "l-list", value_delimiter = ',', required = true)]
    pub l_list: Vec<u32>,
    #[arg(long = "nr-list", value_delimiter = ',', default_values_t = vec![0u32, 1, 2, 3])]
    pub nr_list: Vec<u32>,
    /// w_max values (bf only; rr runs once per (L, N_R)).
    #[arg(long = "wmax-list", value_delimiter = ',', default_values_t = vec![0u64])]
    pub wmax_list: Vec<u64>,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    #[arg(long = "batch-size", default_value_t = 2)]
    pub batch_size: usize,
    #[arg(long = "learning-rate", default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long = "feature-maps", default_value_t = 64)]
    pub feature_maps: u32,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, env = "BFTCN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Every run writes into its own subdirectory here.
    #[arg(long)]
    pub outdir: PathBuf,
}

pub fn run(args: GridArgs) -> anyhow::Result<Value> {
    fs::create_dir_all(&args.outdir)
        .with_context(|| format!("creating {}", args.outdir.display()))?;
    let manifest = crate::formats::read_manifest(&args.manifest)?;
    let n_classes = manifest.classes.len() as u32;
    let variant: Variant = args.variant.into();
    let eval_manifest = args
        .test
        .clone()
        .or_else(|| args.val.clone())
        .unwrap_or_else(|| args.manifest.clone());
    let (_, eval_videos) = load_videos(&eval_manifest)
        .with_context(|| format!("loading {}", eval_manifest.display()))?;

    let mut summaries = Vec::new();
    for &l in &args.l_list {
        for &n_r in &args.nr_list {
            let wmax_values: &[u64] = match variant {
                Variant::Rr => &[0],
                Variant::Bf => &args.wmax_list,
            };
            for &w_max in wmax_values {
                let name = match variant {
                    Variant::Rr => format!("rr_l{l}_nr{n_r}"),
                    Variant::Bf => format!("bf_l{l}_nr{n_r}_w{w_max}"),
                };
                let config = NetworkConfig {
                    variant,
                    l_pg: l,
                    l_r: l,
                    n_r,
                    w_max,
                    n_feature_maps: args.feature_maps,
                    n_classes,
                    frame_rate_hz: args.fps,
                };
                config.validate()?;

                let run_dir = args.outdir.join(&name);
                fs::create_dir_all(&run_dir)
                    .with_context(|| format!("creating {}", run_dir.display()))?;

                let trained = run_training(
                    &config,
                    &args.manifest,
                    args.val.as_deref(),
                    args.epochs,
                    args.batch_size,
                    args.learning_rate,
                    args.dropout,
                    args.seed,
                )?;
                write_checkpoint(
                    &run_dir.join("checkpoint.bftc"),
                    &trained.model,
                    &trained.classes,
                    Precision::F64,
                )?;
                fs::write(run_dir.join("history.json"), history_json(&trained.history)?)?;
                fs::write(
                    run_dir.join("config.json"),
                    format!("{}\n", serde_json::to_string_pretty(&config)?),
                )?;

                let evaluation = evaluate_videos(&trained.model, &eval_videos)?;
                let fw_frames = future_window(&config);
                let fw_seconds = future_window_seconds(&config);
                let record = RunRecord {
                    name: name.clone(),
                    config,
                    in_features: trained.model.in_features,
                    fw_frames,
                    fw_seconds,
                    metrics: evaluation.mean.clone(),
                    offline_baseline: false,
                };
                fs::write(
                    run_dir.join("result.json"),
                    format!("{}\n", serde_json::to_string_pretty(&record)?),
                )?;

                summaries.push(json!({
                    "name": name,
                    "fw_frames": fw_frames,
                    "fw_seconds": fw_seconds,
                    "bucket": bucket_delay(fw_seconds)?.label(),
                    "f1_50": evaluation.mean.f1_50(),
                    "accuracy": evaluation.mean.accuracy,
                    "edit_score": evaluation.mean.edit_score,
                    "dir": run_dir,
                }));
            }
        }
    }
    Ok(json!({ "runs": summaries }))
}
