use std::fs;
use std::path::{Path, PathBuf};

use bftcn_core::ChannelTimeMatrix;
use serde::{Deserialize, Serialize};

use super::{FormatError, io_err, read_features, read_labels};

/// A dataset: an ordered class list plus feature/label file pairs.
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub videos: Vec<VideoEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub features: PathBuf,
    pub labels: PathBuf,
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_fps() -> f64 {
    30.0
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text)
        .map_err(|source| FormatError::HeaderJson { path: path.into(), source })
}

/// One fully loaded video.
#[derive(Debug, Clone)]
pub struct LoadedVideo {
    pub name: String,
    pub features: ChannelTimeMatrix,
    pub labels: Vec<usize>,
    pub fps: f64,
}

/// Load every video in a manifest, checking label/feature frame counts.
pub fn load_videos(
    manifest_path: &Path,
) -> Result<(DatasetManifest, Vec<LoadedVideo>), FormatError> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut videos = Vec::with_capacity(manifest.videos.len());
    for entry in &manifest.videos {
        let feature_path = resolve(base, &entry.features);
        let label_path = resolve(base, &entry.labels);
        let features = read_features(&feature_path)?;
        let labels = read_labels(&label_path, &manifest.classes)?;
        if labels.len() != features.n_frames() {
            return Err(FormatError::LabelLengthMismatch {
                path: label_path,
                labels: labels.len(),
                frames: features.n_frames(),
            });
        }
        let name = entry
            .features
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.features.to_string_lossy().into_owned());
        videos.push(LoadedVideo { name, features, labels, fps: entry.fps });
    }
    Ok((manifest, videos))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
}
