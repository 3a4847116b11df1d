use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use bftcn_core::synth::{SynthSpec, generate_synthetic};
use serde_json::{Value, json};

use crate::formats::{DatasetManifest, LabelFileFormat, VideoEntry, write_features, write_labels};

#[derive(clap::Args, Debug)]
pub struct SynthArgs {
    /// Output directory for feature/label files and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub videos: usize,
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    #[arg(long = "feature-dim", default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long = "t-min", default_value_t = 500)]
    pub t_min: usize,
    #[arg(long = "t-max", default_value_t = 700)]
    pub t_max: usize,
    /// Gaussian feature noise around the class means.
    #[arg(long, default_value_t = 0.45)]
    pub sigma: f64,
    /// Minimum segment duration in frames.
    #[arg(long, default_value_t = 20)]
    pub dwell: usize,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, env = "BFTCN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "label-format", value_enum, default_value_t = super::predict::PredictFormat::Frames)]
    pub label_format: super::predict::PredictFormat,
    /// Comma-separated video counts for train,val,test manifests drawn from
    /// one distribution (overrides --videos; e.g. --split 20,6,10).
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<usize>>,
}

pub fn run(args: SynthArgs) -> anyhow::Result<Value> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let classes: Vec<String> = (0..args.classes).map(|c| format!("G{c}")).collect();
    let format = match args.label_format {
        super::predict::PredictFormat::Frames => LabelFileFormat::Frames,
        super::predict::PredictFormat::Segments => LabelFileFormat::Segments,
    };

    // One spec fixes the class means and transition structure; each video
    // re-seeds only the sampling path.
    let base = SynthSpec::separable(args.classes, args.feature_dim, args.sigma, args.seed)
        .with_length(args.t_min, args.t_max)
        .with_dwell(args.dwell);

    let splits: Vec<(String, usize)> = match &args.split {
        None => vec![("manifest".into(), args.videos)],
        Some(counts) => {
            let names = ["train", "val", "test"];
            if counts.len() > names.len() {
                anyhow::bail!("--split takes at most {} counts", names.len());
            }
            names.iter().zip(counts).map(|(n, &c)| (n.to_string(), c)).collect()
        }
    };

    let mut video_seed = args.seed;
    let mut manifests = serde_json::Map::new();
    let mut total = 0usize;
    for (split_name, count) in &splits {
        let mut entries = Vec::with_capacity(*count);
        for _ in 0..*count {
            let spec = base.clone().with_seed(video_seed);
            video_seed = video_seed.wrapping_add(1);
            let (features, labels) = generate_synthetic(&spec)?;
            let feature_name = format!("v{total:03}.bftf");
            let label_name = format!("v{total:03}.labels.txt");
            write_features(&args.out.join(&feature_name), &features)?;
            write_labels(&args.out.join(&label_name), &labels, &classes, format)?;
            entries.push(VideoEntry {
                features: feature_name.into(),
                labels: label_name.into(),
                fps: args.fps,
            });
            total += 1;
        }
        let manifest = DatasetManifest { classes: classes.clone(), videos: entries };
        let manifest_path = args.out.join(format!("{split_name}.json"));
        fs::write(&manifest_path, format!("{}\n", serde_json::to_string_pretty(&manifest)?))
            .with_context(|| format!("writing {}", manifest_path.display()))?;
        manifests.insert(split_name.clone(), json!(manifest_path));
    }
    Ok(json!({ "manifests": manifests, "videos": total }))
}
