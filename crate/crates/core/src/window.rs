//! Future-window calculus over network configurations.
//!
//! A dilated temporal convolution with kernel size 3 and dilation `d` pads
//! its input with `2d` zero columns in total. Splitting that padding as
//! `2d - m` columns before and `m` columns after makes the output at frame
//! `t` depend on input frames no later than `t + m`; `m` is the layer's
//! *direct future window* (DFW). The *future window* (FW) of the network is
//! the sum of the DFWs of all its layers, and equals the minimum output
//! delay of a correct online implementation.
//!
//! Everything in this module is pure integer/float arithmetic on
//! [`NetworkConfig`]; the empirical cross-check against an actual model
//! lives in [`crate::probe`].

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

/// Network family: symmetric convolutions vs. per-layer future bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Reduced receptive field: symmetric dilated convolutions, the future
    /// window is controlled only through depth.
    Rr,
    /// Bounded future: each convolution's future padding is capped at
    /// `w_max` frames.
    Bf,
}

/// Which part of the network a layer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageKind {
    PredictionGenerator,
    Refinement,
}

/// A single (dual) dilated residual layer, addressed by stage and 1-based
/// layer number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerAddress {
    pub stage: StageKind,
    /// 1-based layer number within the stage.
    pub layer: u32,
}

impl LayerAddress {
    pub fn prediction_generator(layer: u32) -> Self {
        Self { stage: StageKind::PredictionGenerator, layer }
    }

    pub fn refinement(layer: u32) -> Self {
        Self { stage: StageKind::Refinement, layer }
    }
}

/// Structural hyperparameters of one network. Fully determines the future
/// window of the network and the shape of every tensor in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub variant: Variant,
    /// Number of dual dilated residual layers in the prediction generator.
    pub l_pg: u32,
    /// Number of dilated residual layers per refinement stage.
    pub l_r: u32,
    /// Number of refinement stages.
    pub n_r: u32,
    /// Per-layer future bound, in frames. Unused when `variant` is `Rr`.
    pub w_max: u64,
    /// Feature maps inside every stage.
    pub n_feature_maps: u32,
    /// Output classes.
    pub n_classes: u32,
    /// Frame rate used to convert frames to seconds.
    pub frame_rate_hz: f64,
}

impl NetworkConfig {
    /// Largest supported layer count; keeps `2^(l-1)` comfortably in `u64`.
    pub const MAX_LAYERS: u32 = 32;

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.l_pg == 0 || self.l_r == 0 {
            return Err(ConfigError::ZeroLayerCount);
        }
        if self.l_pg > Self::MAX_LAYERS || self.l_r > Self::MAX_LAYERS {
            return Err(ConfigError::LayerCountTooLarge {
                got: self.l_pg.max(self.l_r),
                max: Self::MAX_LAYERS,
            });
        }
        if self.n_feature_maps == 0 {
            return Err(ConfigError::ZeroFeatureMaps);
        }
        if self.n_classes == 0 {
            return Err(ConfigError::ZeroClasses);
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(ConfigError::BadFrameRate(self.frame_rate_hz));
        }
        Ok(())
    }

    fn stage_layer_count(&self, stage: StageKind) -> u32 {
        match stage {
            StageKind::PredictionGenerator => self.l_pg,
            StageKind::Refinement => self.l_r,
        }
    }

    fn check_address(&self, addr: LayerAddress) -> Result<(), AddressError> {
        let bound = self.stage_layer_count(addr.stage);
        if addr.layer == 0 || addr.layer > bound {
            return Err(AddressError::LayerOutOfRange { stage: addr.stage, layer: addr.layer, bound });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("layer counts must be positive")]
    ZeroLayerCount,
    #[error("layer count {got} exceeds maximum {max}")]
    LayerCountTooLarge { got: u32, max: u32 },
    #[error("n_feature_maps must be positive")]
    ZeroFeatureMaps,
    #[error("n_classes must be positive")]
    ZeroClasses,
    #[error("frame rate must be positive and finite, got {0}")]
    BadFrameRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AddressError {
    #[error("layer {layer} out of range for {stage:?} stage with {bound} layers")]
    LayerOutOfRange { stage: StageKind, layer: u32, bound: u32 },
}

/// Dilation factors of the convolutions at `addr`.
///
/// Refinement layers hold one convolution with dilation `2^(l-1)`.
/// Prediction-generator layers hold two, with dilations `2^(l-1)` and
/// `2^(L_PG - l)`.
pub fn dilation_factors(
    cfg: &NetworkConfig,
    addr: LayerAddress,
) -> Result<(u64, Option<u64>), AddressError> {
    cfg.check_address(addr)?;
    let d1 = 1u64 << (addr.layer - 1);
    match addr.stage {
        StageKind::Refinement => Ok((d1, None)),
        StageKind::PredictionGenerator => {
            let d2 = 1u64 << (cfg.l_pg - addr.layer);
            Ok((d1, Some(d2)))
        }
    }
}

/// Number of future frames the layer at `addr` can see in its own input.
pub fn direct_future_window(cfg: &NetworkConfig, addr: LayerAddress) -> Result<u64, AddressError> {
    let (d1, d2) = dilation_factors(cfg, addr)?;
    let bound = |d: u64| match cfg.variant {
        Variant::Rr => d,
        Variant::Bf => cfg.w_max.min(d),
    };
    Ok(match d2 {
        None => bound(d1),
        Some(d2) => bound(d1).max(bound(d2)),
    })
}

/// Total future reach of the network, in frames: the sum of the direct
/// future windows of all `L_PG + N_R * L_R` layers.
pub fn future_window(cfg: &NetworkConfig) -> u64 {
    let stage_sum = |stage: StageKind, layers: u32| -> u64 {
        (1..=layers)
            .map(|l| {
                direct_future_window(cfg, LayerAddress { stage, layer: l })
                    .expect("in-range address")
            })
            .sum()
    };
    stage_sum(StageKind::PredictionGenerator, cfg.l_pg)
        + u64::from(cfg.n_r) * stage_sum(StageKind::Refinement, cfg.l_r)
}

/// Future window converted to seconds at the configured frame rate.
pub fn future_window_seconds(cfg: &NetworkConfig) -> f64 {
    future_window(cfg) as f64 / cfg.frame_rate_hz
}

/// Finite edges of the delay intervals, in seconds. Together with the
/// implicit `+inf` edge they partition `[0, inf)` into 12 buckets.
pub const DELAY_BUCKET_EDGES: [f64; 12] =
    [0.0, 0.001, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

/// Number of delay buckets.
pub const DELAY_BUCKET_COUNT: usize = DELAY_BUCKET_EDGES.len();

/// One of the 12 delay intervals. The first bucket is the closed interval
/// `[0, 0.001]`; every later bucket is half-open `(lo, hi]`, with the last
/// extending to infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBucket {
    pub index: usize,
    pub lo_seconds: f64,
    /// Upper edge; `None` for the unbounded last bucket.
    pub hi_seconds: Option<f64>,
}

impl DelayBucket {
    /// Bucket by index, `0..DELAY_BUCKET_COUNT`.
    pub fn from_index(index: usize) -> Option<DelayBucket> {
        if index >= DELAY_BUCKET_COUNT {
            return None;
        }
        Some(DelayBucket {
            index,
            lo_seconds: DELAY_BUCKET_EDGES[index],
            hi_seconds: DELAY_BUCKET_EDGES.get(index + 1).copied(),
        })
    }

    pub fn label(&self) -> String {
        match (self.index, self.hi_seconds) {
            (0, Some(hi)) => format!("[0, {hi}]"),
            (_, Some(hi)) => format!("({}, {hi}]", self.lo_seconds),
            (_, None) => format!("({}, inf)", self.lo_seconds),
        }
    }
}

impl core::fmt::Display for DelayBucket {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DelayError {
    #[error("delay must be non-negative and finite, got {0}")]
    InvalidDelay(f64),
}

/// Map a future window in seconds onto its delay interval.
pub fn bucket_delay(fw_seconds: f64) -> Result<DelayBucket, DelayError> {
    if !fw_seconds.is_finite() || fw_seconds < 0.0 {
        return Err(DelayError::InvalidDelay(fw_seconds));
    }
    for i in 0..DELAY_BUCKET_COUNT - 1 {
        if fw_seconds <= DELAY_BUCKET_EDGES[i + 1] {
            return Ok(DelayBucket::from_index(i).unwrap());
        }
    }
    Ok(DelayBucket::from_index(DELAY_BUCKET_COUNT - 1).unwrap())
}
