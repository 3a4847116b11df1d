use anyhow::bail;
use bftcn_core::window::{DelayBucket, NetworkConfig, Variant};
use serde_json::{Value, json};

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantArg {
    /// Reduced receptive field (symmetric convolutions).
    Rr,
    /// Bounded future (asymmetric convolutions capped at w_max).
    Bf,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Rr => Variant::Rr,
            VariantArg::Bf => Variant::Bf,
        }
    }
}

/// Structural flags shared by every command that names a network.
#[derive(clap::Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Network variant.
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    /// Layer count; sets the prediction generator and the refinement stages
    /// to the same depth.
    #[arg(long)]
    pub l: Option<u32>,
    /// Prediction-generator layer count (overrides --l).
    #[arg(long)]
    pub lpg: Option<u32>,
    /// Refinement-stage layer count (overrides --l).
    #[arg(long)]
    pub lr: Option<u32>,
    /// Number of refinement stages.
    #[arg(long, default_value_t = 1)]
    pub nr: u32,
    /// Per-layer future bound in frames (ignored for the rr variant).
    #[arg(long, default_value_t = 0)]
    pub wmax: u64,
    /// Feature maps inside every stage.
    #[arg(long = "feature-maps", default_value_t = 64)]
    pub feature_maps: u32,
    /// Frame rate used to convert the future window to seconds.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
}

impl ConfigArgs {
    pub fn to_config(&self, n_classes: u32) -> anyhow::Result<NetworkConfig> {
        let l_pg = self.lpg.or(self.l);
        let l_r = self.lr.or(self.l);
        let (Some(l_pg), Some(l_r)) = (l_pg, l_r) else {
            bail!("layer counts missing: pass --l, or both --lpg and --lr");
        };
        let config = NetworkConfig {
            variant: self.variant.into(),
            l_pg,
            l_r,
            n_r: self.nr,
            w_max: self.wmax,
            n_feature_maps: self.feature_maps,
            n_classes,
            frame_rate_hz: self.fps,
        };
        config.validate()?;
        Ok(config)
    }
}

pub(crate) fn bucket_json(bucket: DelayBucket) -> Value {
    json!({
        "index": bucket.index,
        "lo_seconds": bucket.lo_seconds,
        "hi_seconds": bucket.hi_seconds,
        "label": bucket.label(),
    })
}

pub(crate) fn config_json(config: &NetworkConfig) -> Value {
    serde_json::to_value(config).expect("config serializes")
}
