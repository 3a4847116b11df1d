//! Empirical future-window measurement: the perturbation oracle that
//! cross-checks the closed-form calculus in [`crate::window`] against an
//! actual model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::ModelParameters;
use crate::seqcore::ChannelTimeMatrix;
use crate::window::future_window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error("inconclusive measurement: horizon {horizon} is smaller than the formula value {required}")]
    HorizonTooSmall { horizon: usize, required: u64 },
}

/// Measure how far the model actually looks into the future.
///
/// A random input of length `t + horizon + 1` is generated, then each frame
/// `t + d` for `d` in `horizon..=1` is perturbed in turn; the function
/// returns the largest `d` whose perturbation changes the final-stage output
/// at frame `t` (0 if none does). Comparisons are exact: a frame outside the
/// dependency cone produces a bit-identical output column.
///
/// `horizon` must be at least the closed-form future window, otherwise the
/// measurement could not distinguish a correct bound from a violated one.
pub fn measure_future_window(
    model: &ModelParameters,
    t: usize,
    horizon: usize,
) -> Result<u64, MeasureError> {
    let required = future_window(&model.config);
    if (horizon as u64) < required {
        return Err(MeasureError::HorizonTooSmall { horizon, required });
    }
    let n_frames = t + horizon + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x70b5_cafe_f00d_1234);
    let features = ChannelTimeMatrix::from_fn(model.in_features, n_frames, |_, _| {
        2.0 * rng.random::<f64>() - 1.0
    });
    let baseline = model
        .forward(&features)
        .expect("probe input is non-empty and well-shaped")
        .pop()
        .expect("at least one stage");

    for d in (1..=horizon).rev() {
        let frame = t + d;
        let mut perturbed = features.clone();
        for c in 0..perturbed.n_channels() {
            perturbed.set(c, frame, perturbed.get(c, frame) + 1.0);
        }
        let out = model.forward(&perturbed).unwrap().pop().unwrap();
        if out.frame(t) != baseline.frame(t) {
            return Ok(d as u64);
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;
    use crate::window::{NetworkConfig, Variant, future_window};

    fn cfg(variant: Variant, l: u32, n_r: u32, w_max: u64) -> NetworkConfig {
        NetworkConfig {
            variant,
            l_pg: l,
            l_r: l,
            n_r,
            w_max,
            n_feature_maps: 6,
            n_classes: 4,
            frame_rate_hz: 30.0,
        }
    }

    #[test]
    fn causal_network_measures_zero() {
        let c = cfg(Variant::Bf, 3, 1, 0);
        let m = build_model(&c, 4, 5).unwrap();
        assert_eq!(measure_future_window(&m, 3, 10).unwrap(), 0);
    }

    #[test]
    fn rr_depth_two_three_refinements() {
        let c = cfg(Variant::Rr, 2, 3, 0);
        assert_eq!(future_window(&c), 13);
        let m = build_model(&c, 4, 6).unwrap();
        assert_eq!(measure_future_window(&m, 3, 13 + 6).unwrap(), 13);
    }

    #[test]
    fn bf_example_matches_formula() {
        let c = cfg(Variant::Bf, 3, 1, 2);
        assert_eq!(future_window(&c), 11);
        let m = build_model(&c, 4, 7).unwrap();
        assert_eq!(measure_future_window(&m, 2, 11 + 5).unwrap(), 11);
    }

    #[test]
    fn short_horizon_is_inconclusive() {
        let c = cfg(Variant::Rr, 3, 1, 0);
        let m = build_model(&c, 4, 8).unwrap();
        let err = measure_future_window(&m, 2, 3).unwrap_err();
        assert_eq!(err, MeasureError::HorizonTooSmall { horizon: 3, required: 17 });
    }
}
