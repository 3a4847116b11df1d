use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, bail};
use bftcn_core::model::build_model;
use bftcn_core::training::{TrainHistory, TrainOptions, TrainSample, train};
use bftcn_core::window::NetworkConfig;
use serde_json::{Value, json};

use super::args::ConfigArgs;
use crate::formats::{LoadedVideo, Precision, load_videos, write_checkpoint};

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    /// Training dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Validation manifest for per-epoch F1@50 model selection. Without it
    /// the final epoch is kept.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 40)]
    pub epochs: usize,
    /// Videos per optimizer step.
    #[arg(long = "batch-size", default_value_t = 2)]
    pub batch_size: usize,
    #[arg(long = "learning-rate", default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, env = "BFTCN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory for checkpoint.bftc and history.json.
    #[arg(long)]
    pub out: PathBuf,
}

pub(super) fn to_samples(videos: &[LoadedVideo]) -> Vec<TrainSample> {
    videos
        .iter()
        .map(|v| TrainSample { features: v.features.clone(), labels: v.labels.clone() })
        .collect()
}

pub(super) fn check_feature_dims(videos: &[LoadedVideo]) -> anyhow::Result<usize> {
    let Some(first) = videos.first() else { bail!("manifest has no videos") };
    let dim = first.features.n_channels();
    for v in videos {
        if v.features.n_channels() != dim {
            bail!(
                "inconsistent feature dimensions: {} has {} channels, {} has {}",
                first.name,
                dim,
                v.name,
                v.features.n_channels()
            );
        }
    }
    Ok(dim)
}

pub(super) struct TrainedRun {
    pub model: bftcn_core::ModelParameters,
    pub history: TrainHistory,
    pub classes: Vec<String>,
}

pub(super) fn run_training(
    config: &NetworkConfig,
    manifest: &Path,
    val: Option<&Path>,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    dropout: f64,
    seed: u64,
) -> anyhow::Result<TrainedRun> {
    let (train_manifest, train_videos) =
        load_videos(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    let in_features = check_feature_dims(&train_videos)?;
    if train_manifest.classes.len() != config.n_classes as usize {
        bail!(
            "manifest declares {} classes but the configuration expects {}",
            train_manifest.classes.len(),
            config.n_classes
        );
    }
    let val_videos = match val {
        Some(path) => {
            let (val_manifest, videos) =
                load_videos(path).with_context(|| format!("loading {}", path.display()))?;
            if val_manifest.classes != train_manifest.classes {
                bail!(
                    "validation class list {:?} differs from training class list {:?}",
                    val_manifest.classes,
                    train_manifest.classes
                );
            }
            videos
        }
        None => Vec::new(),
    };

    let mut model = build_model(config, in_features, seed)?;
    model.set_dropout(dropout);
    let opts = TrainOptions {
        epochs,
        batch_size,
        learning_rate,
        loss: bftcn_core::training::LossConfig::standard(config.n_classes as usize),
        seed,
    };
    let (model, history) = train(model, &to_samples(&train_videos), &to_samples(&val_videos), &opts)?;
    Ok(TrainedRun { model, history, classes: train_manifest.classes })
}

pub fn run(args: TrainArgs) -> anyhow::Result<Value> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    // Class count comes from the manifest, not a flag.
    let manifest = crate::formats::read_manifest(&args.manifest)?;
    let config = args.config.to_config(manifest.classes.len() as u32)?;

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

    let checkpoint_path = args.out.join("checkpoint.bftc");
    write_checkpoint(&checkpoint_path, &trained.model, &trained.classes, Precision::F64)?;
    let history_path = args.out.join("history.json");
    fs::write(&history_path, history_json(&trained.history)?)
        .with_context(|| format!("writing {}", history_path.display()))?;

    let best_val_f1 = trained
        .history
        .epochs
        .get(trained.history.best_epoch)
        .and_then(|e| e.val.as_ref())
        .map(|v| v.f1_50());
    Ok(json!({
        "checkpoint": checkpoint_path,
        "history": history_path,
        "epochs": trained.history.epochs.len(),
        "best_epoch": trained.history.best_epoch,
        "best_val_f1_50": best_val_f1,
    }))
}

pub(super) fn history_json(history: &TrainHistory) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(history)?;
    text.push('\n');
    Ok(text)
}
