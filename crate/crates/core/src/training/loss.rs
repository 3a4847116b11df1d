use alloc::vec::Vec;

use super::TrainError;
use crate::math;
use crate::seqcore::ChannelTimeMatrix;

/// Probabilities are floored here before taking logs, keeping the loss
/// finite when softmax underflows.
pub const LOG_PROB_FLOOR: f64 = 1e-12;

/// Loss hyperparameters: per-stage loss is `CE + lambda * T-MSE` where the
/// smoothing term clips each squared log-probability jump at `tau^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub tau: f64,
    pub n_classes: usize,
}

impl LossConfig {
    /// The customary hyperparameters: `lambda = 1`, `tau^2 = 16`.
    pub fn standard(n_classes: usize) -> Self {
        Self { lambda: 1.0, tau: 4.0, n_classes }
    }
}

/// Multi-stage segmentation loss and its gradients w.r.t. each stage's
/// logits.
///
/// Per stage: `CE = -(1/T) sum_t log p_t[y_t]` plus
/// `lambda / ((T-1) C) * sum_{t>=1, c} min(|log p_{t,c} - log p_{t-1,c}|, tau)^2`,
/// where the previous-frame term is a constant during differentiation (the
/// smoothing penalty only pushes on the current frame). The total is the sum
/// over stages. For `T = 1` the smoothing term is zero.
pub fn mstcn_loss(
    stage_probs: &[ChannelTimeMatrix],
    labels: &[usize],
    lc: &LossConfig,
) -> Result<(f64, Vec<ChannelTimeMatrix>), TrainError> {
    let n_frames = labels.len();
    if n_frames == 0 {
        return Err(TrainError::EmptySequence);
    }
    for (frame, &y) in labels.iter().enumerate() {
        if y >= lc.n_classes {
            return Err(TrainError::LabelOutOfRange { label: y, n_classes: lc.n_classes, frame });
        }
    }

    let mut total = 0.0;
    let mut grads = Vec::with_capacity(stage_probs.len());
    for probs in stage_probs {
        if probs.n_channels() != lc.n_classes {
            return Err(TrainError::ClassCountMismatch {
                expected: lc.n_classes,
                got: probs.n_channels(),
            });
        }
        if probs.n_frames() != n_frames {
            return Err(TrainError::LabelLengthMismatch {
                labels: n_frames,
                frames: probs.n_frames(),
            });
        }
        let (stage_loss, grad) = stage_loss(probs, labels, lc);
        total += stage_loss;
        grads.push(grad);
    }
    Ok((total, grads))
}

fn stage_loss(
    probs: &ChannelTimeMatrix,
    labels: &[usize],
    lc: &LossConfig,
) -> (f64, ChannelTimeMatrix) {
    let n_frames = probs.n_frames();
    let n_classes = lc.n_classes;
    let t_f = n_frames as f64;

    // Floored log-probabilities, plus which entries the floor left alive
    // (gradient passes through only there).
    let mut log_p = ChannelTimeMatrix::zeros(n_classes, n_frames);
    for t in 0..n_frames {
        let p = probs.frame(t);
        let lp = log_p.frame_mut(t);
        for c in 0..n_classes {
            lp[c] = math::ln(p[c].max(LOG_PROB_FLOOR));
        }
    }

    // d(loss)/d(log p_{t,c}), the prev-frame occurrence excluded.
    let mut grad_lp = ChannelTimeMatrix::zeros(n_classes, n_frames);
    let mut ce = 0.0;
    for (t, &y) in labels.iter().enumerate() {
        ce -= log_p.get(y, t);
        let g = grad_lp.frame_mut(t);
        g[y] -= 1.0 / t_f;
    }
    ce /= t_f;

    let mut smooth = 0.0;
    if n_frames > 1 {
        let norm = 1.0 / ((t_f - 1.0) * n_classes as f64);
        for t in 1..n_frames {
            let curr = log_p.frame(t);
            let prev = log_p.frame(t - 1);
            for c in 0..n_classes {
                let diff = curr[c] - prev[c];
                let delta = math::abs(diff);
                if delta <= lc.tau {
                    smooth += delta * delta;
                    grad_lp.frame_mut(t)[c] += lc.lambda * norm * 2.0 * diff;
                } else {
                    smooth += lc.tau * lc.tau;
                }
            }
        }
        smooth *= norm;
    }

    // Pull back through log-softmax with the floor: entries the floor
    // clamped contribute no gradient of their own.
    let mut grad_logits = ChannelTimeMatrix::zeros(n_classes, n_frames);
    for t in 0..n_frames {
        let p = probs.frame(t);
        let glp = grad_lp.frame(t);
        let gz = grad_logits.frame_mut(t);
        let mut sum = 0.0;
        for c in 0..n_classes {
            let w = if p[c] > LOG_PROB_FLOOR { glp[c] } else { 0.0 };
            gz[c] = w;
            sum += w;
        }
        for c in 0..n_classes {
            gz[c] -= p[c] * sum;
        }
    }

    (ce + lc.lambda * smooth, grad_logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{gradient_check, softmax_over_channels};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN_6: f64 = 1.791759469228055;

    fn uniform_probs(n_classes: usize, n_frames: usize) -> ChannelTimeMatrix {
        ChannelTimeMatrix::from_fn(n_classes, n_frames, |_, _| 1.0 / n_classes as f64)
    }

    #[test]
    fn uniform_probabilities_give_ln6_per_stage() {
        let lc = LossConfig::standard(6);
        let probs = uniform_probs(6, 10);
        let labels = vec![0usize, 1, 2, 3, 4, 5, 0, 1, 2, 3];
        let (loss, _) = mstcn_loss(&[probs.clone()], &labels, &lc).unwrap();
        assert!((loss - LN_6).abs() < 1e-12);
        // Two stages: twice the loss.
        let (loss2, grads) = mstcn_loss(&[probs.clone(), probs], &labels, &lc).unwrap();
        assert!((loss2 - 2.0 * LN_6).abs() < 1e-12);
        assert_eq!(grads.len(), 2);
    }

    #[test]
    fn constant_probabilities_have_zero_smoothing() {
        let lc = LossConfig::standard(3);
        // Same column at every frame, not uniform.
        let probs = ChannelTimeMatrix::from_fn(3, 8, |c, _| [0.6, 0.3, 0.1][c]);
        let labels = vec![0usize; 8];
        let (loss, _) = mstcn_loss(&[probs], &labels, &lc).unwrap();
        let expected_ce = -math::ln(0.6);
        assert!((loss - expected_ce).abs() < 1e-12);
    }

    #[test]
    fn smoothing_clips_at_tau_squared() {
        let lc = LossConfig { lambda: 1.0, tau: 4.0, n_classes: 2 };
        // Log-prob jump of about ln(.9999.../.0000...) >> tau in both classes.
        let probs = ChannelTimeMatrix::from_channel_rows(&[
            &[1.0 - 1e-9, 1e-9],
            &[1e-9, 1.0 - 1e-9],
        ]);
        let labels = vec![0usize, 1];
        let (loss, _) = mstcn_loss(&[probs], &labels, &lc).unwrap();
        // CE is ~0 (correct confident labels); smoothing: both classes clip
        // at tau^2 = 16, normalized by (T-1)*C = 2.
        let expected_smooth = (16.0 + 16.0) / 2.0;
        assert!((loss - expected_smooth).abs() < 1e-6, "loss={loss}");
    }

    #[test]
    fn one_jump_of_ten_contributes_sixteen() {
        let lc = LossConfig { lambda: 1.0, tau: 4.0, n_classes: 2 };
        // Class 0 log-prob jumps by 10 between frames; class 1 stays ~const.
        // p0 = e^-12 -> e^-2 is a jump of exactly 10 in log space.
        let p_lo = math::exp(-12.0);
        let p_hi = math::exp(-2.0);
        let probs = ChannelTimeMatrix::from_channel_rows(&[
            &[p_lo, p_hi],
            &[1.0 - p_lo, 1.0 - p_hi],
        ]);
        let labels = vec![1usize, 1];
        let lc0 = LossConfig { lambda: 0.0, ..lc };
        let (ce_only, _) = mstcn_loss(&[probs.clone()], &labels, &lc0).unwrap();
        let (full, _) = mstcn_loss(&[probs], &labels, &lc).unwrap();
        let smooth = full - ce_only;
        // Clipped element contributes tau^2 = 16; the other class contributes
        // (log(1-p_hi)-log(1-p_lo))^2 which is small. Normalization: 1/((2-1)*2).
        assert!((smooth - 16.0 / 2.0).abs() < 0.02, "smooth={smooth}");
    }

    #[test]
    fn loss_is_non_negative_and_zero_iff_perfect() {
        let lc = LossConfig::standard(3);
        // One-hot correct predictions: CE -> 0 except the floor, constant in
        // time so smoothing is 0.
        let labels = vec![2usize; 5];
        let probs = ChannelTimeMatrix::from_fn(3, 5, |c, _| if c == 2 { 1.0 } else { 0.0 });
        let (loss, _) = mstcn_loss(&[probs], &labels, &lc).unwrap();
        assert!((0.0..1e-12).contains(&loss));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let logits = ChannelTimeMatrix::from_fn(3, 6, |_, _| 4.0 * rng.random::<f64>() - 2.0);
            let probs = softmax_over_channels(&logits);
            let labels: Vec<usize> = (0..6).map(|_| rng.random_range(0..3)).collect();
            let (loss, _) = mstcn_loss(&[probs], &labels, &lc).unwrap();
            assert!(loss >= 0.0);
        }
    }

    #[test]
    fn smoothing_is_invariant_to_class_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lc = LossConfig { lambda: 1.0, tau: 4.0, n_classes: 4 };
        for _ in 0..10 {
            let logits = ChannelTimeMatrix::from_fn(4, 7, |_, _| 6.0 * rng.random::<f64>() - 3.0);
            let probs = softmax_over_channels(&logits);
            let labels: Vec<usize> = (0..7).map(|_| rng.random_range(0..4)).collect();
            let lc0 = LossConfig { lambda: 0.0, ..lc };
            let smooth = |p: &ChannelTimeMatrix, y: &[usize]| {
                let (full, _) = mstcn_loss(&[p.clone()], y, &lc).unwrap();
                let (ce, _) = mstcn_loss(&[p.clone()], y, &lc0).unwrap();
                full - ce
            };
            let base = smooth(&probs, &labels);
            // Swap classes 1 and 3 everywhere.
            let perm = [0usize, 3, 2, 1];
            let permuted =
                ChannelTimeMatrix::from_fn(4, 7, |c, t| probs.get(perm[c], t));
            let labels_p: Vec<usize> = labels.iter().map(|&y| perm[y]).collect();
            let permuted_smooth = smooth(&permuted, &labels_p);
            assert!((base - permuted_smooth).abs() < 1e-12);
        }
    }

    #[test]
    fn label_and_shape_errors() {
        let lc = LossConfig::standard(3);
        let probs = uniform_probs(3, 4);
        assert!(matches!(
            mstcn_loss(&[probs.clone()], &[0, 1, 3, 0], &lc),
            Err(TrainError::LabelOutOfRange { label: 3, .. })
        ));
        assert!(matches!(mstcn_loss(&[probs], &[], &lc), Err(TrainError::EmptySequence)));
        let wrong = uniform_probs(2, 4);
        assert!(matches!(
            mstcn_loss(&[wrong], &[0, 1, 0, 1], &lc),
            Err(TrainError::ClassCountMismatch { .. })
        ));
    }

    /// Finite-difference oracle for the detached smoothing loss: the
    /// previous-frame log-probabilities are frozen at the evaluation point,
    /// which is exactly the function the analytic gradient differentiates.
    fn loss_value_with_frozen_prev(
        logits_flat: &[f64],
        frozen_lp: &ChannelTimeMatrix,
        labels: &[usize],
        lc: &LossConfig,
        n_frames: usize,
    ) -> f64 {
        let mut z = ChannelTimeMatrix::zeros(lc.n_classes, n_frames);
        z.data_mut().copy_from_slice(logits_flat);
        let p = softmax_over_channels(&z);
        let t_f = n_frames as f64;
        let mut ce = 0.0;
        for (t, &y) in labels.iter().enumerate() {
            ce -= math::ln(p.get(y, t).max(LOG_PROB_FLOOR));
        }
        ce /= t_f;
        let mut smooth = 0.0;
        if n_frames > 1 {
            for t in 1..n_frames {
                for c in 0..lc.n_classes {
                    let curr = math::ln(p.get(c, t).max(LOG_PROB_FLOOR));
                    let delta = math::abs(curr - frozen_lp.get(c, t - 1));
                    smooth += delta.min(lc.tau) * delta.min(lc.tau);
                }
            }
            smooth /= (t_f - 1.0) * lc.n_classes as f64;
        }
        ce + lc.lambda * smooth
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let lc = LossConfig::standard(4);
        for trial in 0..5 {
            let n_frames = 5 + trial;
            let logits =
                ChannelTimeMatrix::from_fn(4, n_frames, |_, _| 3.0 * rng.random::<f64>() - 1.5);
            let probs = softmax_over_channels(&logits);
            let labels: Vec<usize> = (0..n_frames).map(|_| rng.random_range(0..4)).collect();
            let (_, grads) = mstcn_loss(&[probs.clone()], &labels, &lc).unwrap();

            let mut frozen_lp = ChannelTimeMatrix::zeros(4, n_frames);
            for t in 0..n_frames {
                for c in 0..4 {
                    frozen_lp.set(c, t, math::ln(probs.get(c, t).max(LOG_PROB_FLOOR)));
                }
            }
            let labels_c = labels.clone();
            let rep = gradient_check(
                move |z| loss_value_with_frozen_prev(z, &frozen_lp, &labels_c, &lc, n_frames),
                logits.data(),
                grads[0].data(),
                1e-4,
            )
            .unwrap();
            assert!(rep.passed, "trial {trial}: {rep:?}");
        }
    }

    #[test]
    fn single_frame_has_no_smoothing_term() {
        let lc = LossConfig::standard(2);
        let probs = ChannelTimeMatrix::from_channel_rows(&[&[0.8], &[0.2]]);
        let (loss, _) = mstcn_loss(&[probs], &[0], &lc).unwrap();
        assert!((loss + math::ln(0.8)).abs() < 1e-12);
    }
}
