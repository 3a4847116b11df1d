use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, bail};
use bftcn_core::ModelParameters;
use bftcn_core::metrics::MetricsReport;
use bftcn_core::window::{future_window, future_window_seconds};
use serde_json::{Value, json};

use crate::formats::{FormatError, LoadedVideo, load_videos, read_checkpoint};

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Also write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub(super) struct Evaluation {
    pub per_video: Vec<(String, MetricsReport)>,
    pub mean: MetricsReport,
    pub std: MetricsReport,
}

/// Offline forward plus metrics for every video; mean/std across videos.
pub(super) fn evaluate_videos(
    model: &ModelParameters,
    videos: &[LoadedVideo],
) -> anyhow::Result<Evaluation> {
    if videos.is_empty() {
        bail!("manifest has no videos to evaluate");
    }
    let fw_frames = future_window(&model.config);
    let fw_seconds = future_window_seconds(&model.config);
    let n_classes = model.config.n_classes as usize;
    let mut per_video = Vec::with_capacity(videos.len());
    for video in videos {
        let probs = model.forward(&video.features)?;
        let pred = probs.last().unwrap().argmax_per_frame();
        let report = MetricsReport::compute(&pred, &video.labels, n_classes, fw_frames, fw_seconds)?;
        per_video.push((video.name.clone(), report));
    }
    let reports: Vec<MetricsReport> = per_video.iter().map(|(_, r)| r.clone()).collect();
    let mean = MetricsReport::mean(&reports).unwrap();
    let std = MetricsReport::std(&reports).unwrap();
    Ok(Evaluation { per_video, mean, std })
}

pub(super) fn load_checkpoint_for_manifest(
    checkpoint: &Path,
    manifest_classes: &[String],
) -> anyhow::Result<(ModelParameters, Vec<String>)> {
    let (model, header) = read_checkpoint(checkpoint)?;
    if header.classes != manifest_classes {
        return Err(FormatError::ClassListMismatch {
            checkpoint: header.classes,
            manifest: manifest_classes.to_vec(),
        }
        .into());
    }
    Ok((model, header.classes))
}

pub fn run(args: EvalArgs) -> anyhow::Result<Value> {
    let (manifest, videos) = load_videos(&args.manifest)
        .with_context(|| format!("loading {}", args.manifest.display()))?;
    let (model, _) = load_checkpoint_for_manifest(&args.checkpoint, &manifest.classes)?;
    let evaluation = evaluate_videos(&model, &videos)?;

    let output = json!({
        "checkpoint": args.checkpoint,
        "videos": evaluation
            .per_video
            .iter()
            .map(|(name, metrics)| json!({"name": name, "metrics": metrics}))
            .collect::<Vec<_>>(),
        "summary": {
            "count": evaluation.per_video.len(),
            "mean": evaluation.mean,
            "std": evaluation.std,
        },
    });
    if let Some(out) = &args.out {
        fs::write(out, format!("{}\n", serde_json::to_string_pretty(&output)?))
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(output)
}
