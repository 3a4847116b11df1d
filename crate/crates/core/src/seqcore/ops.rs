use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::matrix::ChannelTimeMatrix;
use crate::math;

pub fn relu(x: &ChannelTimeMatrix) -> ChannelTimeMatrix {
    let mut out = x.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(x: &mut ChannelTimeMatrix) {
    for v in x.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Gradient of relu given the forward *input* and the output gradient.
pub fn relu_backward(input: &ChannelTimeMatrix, grad_out: &ChannelTimeMatrix) -> ChannelTimeMatrix {
    let mut g = grad_out.clone();
    relu_backward_in_place(input, &mut g);
    g
}

pub fn relu_backward_in_place(input: &ChannelTimeMatrix, grad: &mut ChannelTimeMatrix) {
    assert_eq!(input.n_channels(), grad.n_channels());
    assert_eq!(input.n_frames(), grad.n_frames());
    for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Per-element keep/scale factors recorded by a dropout application, for the
/// backward pass.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    scale: Vec<f64>,
    identity: bool,
}

impl DropoutMask {
    pub fn identity() -> Self {
        Self { scale: Vec::new(), identity: true }
    }

    pub fn apply_gradient(&self, grad: &mut ChannelTimeMatrix) {
        if self.identity {
            return;
        }
        for (g, s) in grad.data_mut().iter_mut().zip(&self.scale) {
            *g *= s;
        }
    }
}

/// Inverted dropout: each element is zeroed with probability `p` and the
/// survivors are scaled by `1/(1-p)`. Identity when not training or `p = 0`.
pub fn dropout(
    x: &ChannelTimeMatrix,
    p: f64,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> (ChannelTimeMatrix, DropoutMask) {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if !training || p == 0.0 {
        return (x.clone(), DropoutMask::identity());
    }
    let keep_scale = 1.0 / (1.0 - p);
    let mut out = x.clone();
    let mut scale = vec![0.0; x.data().len()];
    for (v, s) in out.data_mut().iter_mut().zip(scale.iter_mut()) {
        if rng.random::<f64>() < p {
            *v = 0.0;
        } else {
            *v *= keep_scale;
            *s = keep_scale;
        }
    }
    (out, DropoutMask { scale, identity: false })
}

pub fn dropout_backward(mask: &DropoutMask, grad_out: &ChannelTimeMatrix) -> ChannelTimeMatrix {
    let mut g = grad_out.clone();
    mask.apply_gradient(&mut g);
    g
}

/// Softmax over the channel axis, independently per frame. Uses the usual
/// max-subtraction; every output column sums to 1.
pub fn softmax_over_channels(x: &ChannelTimeMatrix) -> ChannelTimeMatrix {
    let mut out = x.clone();
    softmax_in_place(&mut out);
    out
}

pub(crate) fn softmax_in_place(x: &mut ChannelTimeMatrix) {
    for t in 0..x.n_frames() {
        softmax_column(x.frame_mut(t));
    }
}

pub(crate) fn softmax_column(col: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for &v in col.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = 0.0;
    for v in col.iter_mut() {
        *v = math::exp(*v - max);
        sum += *v;
    }
    for v in col.iter_mut() {
        *v /= sum;
    }
}

/// Pull a gradient w.r.t. softmax outputs back to the logits:
/// `g_z = p .* (g - <g, p>)` per frame.
pub fn softmax_backward(
    probs: &ChannelTimeMatrix,
    grad_probs: &ChannelTimeMatrix,
) -> ChannelTimeMatrix {
    assert_eq!(probs.n_channels(), grad_probs.n_channels());
    assert_eq!(probs.n_frames(), grad_probs.n_frames());
    let mut out = ChannelTimeMatrix::zeros(probs.n_channels(), probs.n_frames());
    for t in 0..probs.n_frames() {
        let p = probs.frame(t);
        let g = grad_probs.frame(t);
        let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        let o = out.frame_mut(t);
        for c in 0..p.len() {
            o[c] = p[c] * (g[c] - dot);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::gradient_check;
    use rand::SeedableRng;

    #[test]
    fn relu_clamps_negatives() {
        let x = ChannelTimeMatrix::from_channel_rows(&[&[-1.0, 0.0, 2.0]]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn dropout_identities() {
        let x = ChannelTimeMatrix::from_fn(3, 5, |c, t| (c + t) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (y, _) = dropout(&x, 0.5, &mut rng, false);
        assert_eq!(y, x);
        let (y, _) = dropout(&x, 0.0, &mut rng, true);
        assert_eq!(y, x);
    }

    #[test]
    fn dropout_scales_survivors() {
        let x = ChannelTimeMatrix::from_fn(4, 100, |_, _| 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (y, mask) = dropout(&x, 0.5, &mut rng, true);
        let mut zeros = 0usize;
        for &v in y.data() {
            if v == 0.0 {
                zeros += 1;
            } else {
                assert!((v - 2.0).abs() < 1e-15);
            }
        }
        // p=0.5 over 400 elements: very unlikely to fall outside [100, 300].
        assert!(zeros > 100 && zeros < 300, "zeros={zeros}");

        // Backward scales by the same mask.
        let g = ChannelTimeMatrix::from_fn(4, 100, |_, _| 1.0);
        let gx = dropout_backward(&mask, &g);
        assert_eq!(gx, y);
    }

    #[test]
    fn softmax_uniform_on_zero_logits() {
        let x = ChannelTimeMatrix::zeros(6, 3);
        let p = softmax_over_channels(&x);
        for t in 0..3 {
            for c in 0..6 {
                assert!((p.get(c, t) - 1.0 / 6.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_columns_sum_to_one() {
        let x = ChannelTimeMatrix::from_fn(5, 9, |c, t| ((c * 7 + t * 3) % 13) as f64 - 6.0);
        let p = softmax_over_channels(&x);
        for t in 0..9 {
            let s: f64 = p.frame(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(p.frame(t).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let z = ChannelTimeMatrix::from_fn(4, 3, |c, t| 0.3 * c as f64 - 0.2 * t as f64);
        let probs = softmax_over_channels(&z);
        // Objective: sum of elementwise-weighted probabilities.
        let weights = ChannelTimeMatrix::from_fn(4, 3, |c, t| ((c + 2 * t) % 5) as f64 * 0.25);
        let analytic = softmax_backward(&probs, &weights);
        let wclone = weights.clone();
        let rep = gradient_check(
            move |zv| {
                let mut zm = ChannelTimeMatrix::zeros(4, 3);
                zm.data_mut().copy_from_slice(zv);
                let p = softmax_over_channels(&zm);
                p.data().iter().zip(wclone.data()).map(|(a, b)| a * b).sum()
            },
            z.data(),
            analytic.data(),
            1e-7,
        )
        .unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}
