use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{Value, json};

use crate::formats::{
    LabelFileFormat, read_checkpoint, read_features, read_manifest, write_labels,
};

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum PredictFormat {
    Frames,
    Segments,
}

#[derive(clap::Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Manifest naming the feature files (label paths are not read).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub outdir: PathBuf,
    #[arg(long, value_enum, default_value_t = PredictFormat::Frames)]
    pub format: PredictFormat,
}

pub fn run(args: PredictArgs) -> anyhow::Result<Value> {
    let (model, header) = read_checkpoint(&args.checkpoint)?;
    let manifest = read_manifest(&args.manifest)?;
    fs::create_dir_all(&args.outdir)
        .with_context(|| format!("creating {}", args.outdir.display()))?;
    let base = args.manifest.parent().unwrap_or_else(|| Path::new("."));
    let format = match args.format {
        PredictFormat::Frames => LabelFileFormat::Frames,
        PredictFormat::Segments => LabelFileFormat::Segments,
    };

    let mut written = Vec::new();
    for entry in &manifest.videos {
        let feature_path =
            if entry.features.is_absolute() { entry.features.clone() } else { base.join(&entry.features) };
        let features = read_features(&feature_path)?;
        let probs = model.forward(&features)?;
        let pred = probs.last().unwrap().argmax_per_frame();
        let stem = entry
            .features
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into());
        let out_path = args.outdir.join(format!("{stem}.pred.txt"));
        write_labels(&out_path, &pred, &header.classes, format)?;
        written.push(out_path);
    }
    Ok(json!({ "written": written, "classes": header.classes }))
}
