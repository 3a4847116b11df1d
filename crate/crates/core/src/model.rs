//! Multi-stage network assembly: dilated residual layers, dual dilated
//! residual layers, stages, and the full model with its offline forward and
//! backward passes.
//!
//! Stage 0 (the prediction generator) consumes the input features; every
//! refinement stage consumes the previous stage's softmax probabilities.
//! Each dilated convolution's future pad is fixed at build time — `m = d`
//! for the symmetric `Rr` variant, `m = min(w_max, d)` for `Bf` — which is
//! exactly what the window calculus in [`crate::window`] sums over.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::seqcore::{
    ChannelTimeMatrix, ColumnSource, DilatedConvLayer, DropoutMask, PointwiseConvLayer,
    ShapeError, dropout, relu, relu_backward, softmax_backward, softmax_over_channels,
};
use crate::window::{ConfigError, NetworkConfig, Variant};

/// Dropout probability applied inside every residual layer.
pub const DEFAULT_DROPOUT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    FeatureDimMismatch { expected: usize, got: usize },
    #[error("empty sequence: need at least one frame")]
    EmptySequence,
    #[error("stage count mismatch: expected {expected}, got {got}")]
    StageCountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Refinement-stage layer: dilated conv, relu, pointwise conv, dropout,
/// residual add.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatedResidualLayer {
    pub conv: DilatedConvLayer,
    pub pointwise: PointwiseConvLayer,
    pub dropout_p: f64,
}

/// Prediction-generator layer: two dilated convs with complementary
/// dilations, channel concatenation, merge pointwise conv, relu, second
/// pointwise conv, dropout, residual add.
#[derive(Debug, Clone, PartialEq)]
pub struct DualDilatedResidualLayer {
    /// Dilation `2^(l-1)`.
    pub conv_dilated_1: DilatedConvLayer,
    /// Dilation `2^(L-l)`.
    pub conv_dilated_2: DilatedConvLayer,
    pub merge: PointwiseConvLayer,
    pub pointwise: PointwiseConvLayer,
    pub dropout_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemporalLayer {
    Dual(DualDilatedResidualLayer),
    Single(DilatedResidualLayer),
}

/// Intermediates retained by a training forward pass, per layer.
#[derive(Debug, Clone)]
pub struct LayerCache {
    input: ChannelTimeMatrix,
    /// Merge input (channel concat of the two branches); `Dual` only.
    concat: Option<ChannelTimeMatrix>,
    /// Pre-relu activations (conv output for `Single`, merge output for `Dual`).
    pre_relu: ChannelTimeMatrix,
    mask: DropoutMask,
}

impl TemporalLayer {
    /// Future frames this layer reads from its own input: its direct future
    /// window.
    pub fn future_need(&self) -> usize {
        match self {
            TemporalLayer::Single(l) => l.conv.future_pad,
            TemporalLayer::Dual(l) => {
                l.conv_dilated_1.future_pad.max(l.conv_dilated_2.future_pad)
            }
        }
    }

    /// Past frames this layer reads from its own input.
    pub fn past_span(&self) -> usize {
        let span = |c: &DilatedConvLayer| 2 * c.dilation - c.future_pad;
        match self {
            TemporalLayer::Single(l) => span(&l.conv),
            TemporalLayer::Dual(l) => span(&l.conv_dilated_1).max(span(&l.conv_dilated_2)),
        }
    }

    pub fn n_channels(&self) -> usize {
        match self {
            TemporalLayer::Single(l) => l.conv.in_channels,
            TemporalLayer::Dual(l) => l.conv_dilated_1.in_channels,
        }
    }

    /// One output column at time `t` (eval mode: dropout is the identity).
    /// `src` must hold this layer's input columns. Used by the streaming
    /// path and by the offline eval pass, so both see identical arithmetic.
    pub fn forward_column(
        &self,
        src: &impl ColumnSource,
        t: i64,
        scratch: &mut ColumnScratch,
        out: &mut [f64],
    ) {
        let residual = src.column(t).expect("in-range output column");
        match self {
            TemporalLayer::Single(l) => {
                let a = &mut scratch.branch_a[..l.conv.out_channels];
                l.conv.forward_column(src, t, a);
                for v in a.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                l.pointwise.forward_column(a, out);
            }
            TemporalLayer::Dual(l) => {
                let n = l.conv_dilated_1.out_channels;
                l.conv_dilated_1.forward_column(src, t, &mut scratch.branch_a[..n]);
                l.conv_dilated_2.forward_column(src, t, &mut scratch.branch_b[..n]);
                scratch.concat[..n].copy_from_slice(&scratch.branch_a[..n]);
                scratch.concat[n..2 * n].copy_from_slice(&scratch.branch_b[..n]);
                let mid = &mut scratch.mid[..l.merge.out_channels];
                l.merge.forward_column(&scratch.concat[..2 * n], mid);
                for v in mid.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                l.pointwise.forward_column(mid, out);
            }
        }
        for (o, r) in out.iter_mut().zip(residual) {
            *o += r;
        }
    }

    fn forward_training(
        &self,
        x: &ChannelTimeMatrix,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(ChannelTimeMatrix, LayerCache), ModelError> {
        match self {
            TemporalLayer::Single(l) => {
                let pre_relu = l.conv.forward(x)?;
                let activated = relu(&pre_relu);
                let projected = l.pointwise.forward(&activated)?;
                let (dropped, mask) = apply_dropout(&projected, l.dropout_p, rng.as_deref_mut());
                let out = x.add(&dropped);
                Ok((out, LayerCache { input: x.clone(), concat: None, pre_relu, mask }))
            }
            TemporalLayer::Dual(l) => {
                let a = l.conv_dilated_1.forward(x)?;
                let b = l.conv_dilated_2.forward(x)?;
                let concat = ChannelTimeMatrix::concat_channels(&a, &b);
                let pre_relu = l.merge.forward(&concat)?;
                let activated = relu(&pre_relu);
                let projected = l.pointwise.forward(&activated)?;
                let (dropped, mask) = apply_dropout(&projected, l.dropout_p, rng.as_deref_mut());
                let out = x.add(&dropped);
                Ok((out, LayerCache { input: x.clone(), concat: Some(concat), pre_relu, mask }))
            }
        }
    }

    /// Backpropagate through the layer; parameter gradients accumulate into
    /// `grad_layer` (a zero-initialized structural clone).
    fn backward(
        &self,
        cache: &LayerCache,
        grad_out: &ChannelTimeMatrix,
        grad_layer: &mut TemporalLayer,
    ) -> Result<ChannelTimeMatrix, ModelError> {
        let mut grad_dropped = grad_out.clone();
        cache.mask.apply_gradient(&mut grad_dropped);
        match (self, grad_layer) {
            (TemporalLayer::Single(l), TemporalLayer::Single(g)) => {
                let activated = relu(&cache.pre_relu);
                let (grad_act, gw_pw, gb_pw) = l.pointwise.backward(&activated, &grad_dropped)?;
                accumulate(&mut g.pointwise.weights, &gw_pw);
                accumulate(&mut g.pointwise.bias, &gb_pw);
                let grad_pre = relu_backward(&cache.pre_relu, &grad_act);
                let (grad_x, gw, gb) = l.conv.backward(&cache.input, &grad_pre)?;
                accumulate(&mut g.conv.weights, &gw);
                accumulate(&mut g.conv.bias, &gb);
                Ok(grad_out.add(&grad_x))
            }
            (TemporalLayer::Dual(l), TemporalLayer::Dual(g)) => {
                let concat = cache.concat.as_ref().expect("dual layer cache");
                let activated = relu(&cache.pre_relu);
                let (grad_act, gw_pw, gb_pw) = l.pointwise.backward(&activated, &grad_dropped)?;
                accumulate(&mut g.pointwise.weights, &gw_pw);
                accumulate(&mut g.pointwise.bias, &gb_pw);
                let grad_pre = relu_backward(&cache.pre_relu, &grad_act);
                let (grad_cat, gw_m, gb_m) = l.merge.backward(concat, &grad_pre)?;
                accumulate(&mut g.merge.weights, &gw_m);
                accumulate(&mut g.merge.bias, &gb_m);
                let n = l.conv_dilated_1.out_channels;
                let t_frames = grad_cat.n_frames();
                let mut grad_a = ChannelTimeMatrix::zeros(n, t_frames);
                let mut grad_b = ChannelTimeMatrix::zeros(n, t_frames);
                for t in 0..t_frames {
                    let src = grad_cat.frame(t);
                    grad_a.frame_mut(t).copy_from_slice(&src[..n]);
                    grad_b.frame_mut(t).copy_from_slice(&src[n..]);
                }
                let (grad_x1, gw1, gb1) = l.conv_dilated_1.backward(&cache.input, &grad_a)?;
                accumulate(&mut g.conv_dilated_1.weights, &gw1);
                accumulate(&mut g.conv_dilated_1.bias, &gb1);
                let (grad_x2, gw2, gb2) = l.conv_dilated_2.backward(&cache.input, &grad_b)?;
                accumulate(&mut g.conv_dilated_2.weights, &gw2);
                accumulate(&mut g.conv_dilated_2.bias, &gb2);
                let mut grad_in = grad_out.add(&grad_x1);
                grad_in.add_assign(&grad_x2);
                Ok(grad_in)
            }
            _ => unreachable!("gradient model mirrors the parameter model"),
        }
    }
}

fn apply_dropout(
    x: &ChannelTimeMatrix,
    p: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> (ChannelTimeMatrix, DropoutMask) {
    match rng {
        Some(r) => dropout(x, p, r, true),
        None => (x.clone(), DropoutMask::identity()),
    }
}

fn accumulate(acc: &mut [f64], delta: &[f64]) {
    debug_assert_eq!(acc.len(), delta.len());
    for (a, d) in acc.iter_mut().zip(delta) {
        *a += d;
    }
}

/// Reusable column buffers for [`TemporalLayer::forward_column`].
#[derive(Debug, Clone)]
pub struct ColumnScratch {
    branch_a: Vec<f64>,
    branch_b: Vec<f64>,
    concat: Vec<f64>,
    mid: Vec<f64>,
}

impl ColumnScratch {
    pub fn for_feature_maps(n_feature_maps: usize) -> Self {
        Self {
            branch_a: vec![0.0; n_feature_maps],
            branch_b: vec![0.0; n_feature_maps],
            concat: vec![0.0; 2 * n_feature_maps],
            mid: vec![0.0; n_feature_maps],
        }
    }
}

/// One network stage: input projection, a stack of temporal layers, and the
/// prediction head.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub input_conv: PointwiseConvLayer,
    pub layers: Vec<TemporalLayer>,
    pub head: PointwiseConvLayer,
}

/// Intermediates retained per stage for the backward pass.
#[derive(Debug, Clone)]
pub struct StageCache {
    input: ChannelTimeMatrix,
    layers: Vec<LayerCache>,
    pre_head: ChannelTimeMatrix,
}

/// Retained activations from [`ModelParameters::forward_training`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    stages: Vec<StageCache>,
}

impl Stage {
    fn forward_eval(&self, input: &ChannelTimeMatrix) -> Result<ChannelTimeMatrix, ModelError> {
        let mut h = self.input_conv.forward(input)?;
        let scratch_width = self.layers.first().map_or(1, |l| l.n_channels());
        let mut scratch = ColumnScratch::for_feature_maps(scratch_width);
        for layer in &self.layers {
            let mut next = ChannelTimeMatrix::zeros(h.n_channels(), h.n_frames());
            for t in 0..h.n_frames() {
                let mut col = vec![0.0; h.n_channels()];
                layer.forward_column(&h, t as i64, &mut scratch, &mut col);
                next.frame_mut(t).copy_from_slice(&col);
            }
            h = next;
        }
        let logits = self.head.forward(&h)?;
        Ok(softmax_over_channels(&logits))
    }

    fn forward_training(
        &self,
        input: &ChannelTimeMatrix,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(ChannelTimeMatrix, StageCache), ModelError> {
        let mut h = self.input_conv.forward(input)?;
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward_training(&h, rng.as_deref_mut())?;
            layer_caches.push(cache);
            h = next;
        }
        let logits = self.head.forward(&h)?;
        let probs = softmax_over_channels(&logits);
        Ok((probs, StageCache { input: input.clone(), layers: layer_caches, pre_head: h }))
    }

    fn backward(
        &self,
        cache: &StageCache,
        grad_logits: &ChannelTimeMatrix,
        grad_stage: &mut Stage,
    ) -> Result<ChannelTimeMatrix, ModelError> {
        let (mut grad_h, gw_head, gb_head) = self.head.backward(&cache.pre_head, grad_logits)?;
        accumulate(&mut grad_stage.head.weights, &gw_head);
        accumulate(&mut grad_stage.head.bias, &gb_head);
        for ((layer, lcache), glayer) in self
            .layers
            .iter()
            .zip(&cache.layers)
            .zip(&mut grad_stage.layers)
            .rev()
        {
            grad_h = layer.backward(lcache, &grad_h, glayer)?;
        }
        let (grad_input, gw_in, gb_in) = self.input_conv.backward(&cache.input, &grad_h)?;
        accumulate(&mut grad_stage.input_conv.weights, &gw_in);
        accumulate(&mut grad_stage.input_conv.bias, &gb_in);
        Ok(grad_input)
    }
}

/// All parameters of one network: the prediction generator followed by
/// `N_R` refinement stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: NetworkConfig,
    /// Channel count of the raw input features (not part of [`NetworkConfig`];
    /// it is a property of the data).
    pub in_features: usize,
    /// Seed the weights were initialized from.
    pub seed: u64,
    pub stages: Vec<Stage>,
}

/// Build a model with every future pad derived from the variant and
/// `w_max`, and weights drawn uniformly from `±1/sqrt(fan_in)`.
pub fn build_model(
    cfg: &NetworkConfig,
    in_features: usize,
    seed: u64,
) -> Result<ModelParameters, ConfigError> {
    cfg.validate()?;
    assert!(in_features > 0, "in_features must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_f = cfg.n_feature_maps as usize;
    let n_classes = cfg.n_classes as usize;
    let pad = |d: usize| match cfg.variant {
        Variant::Rr => d,
        Variant::Bf => (cfg.w_max as usize).min(d),
    };

    let mut stages = Vec::with_capacity(1 + cfg.n_r as usize);
    // Prediction generator.
    {
        let mut input_conv = PointwiseConvLayer::new(in_features, n_f);
        init_pointwise(&mut input_conv, &mut rng);
        let mut layers = Vec::with_capacity(cfg.l_pg as usize);
        for l in 1..=cfg.l_pg {
            let d1 = 1usize << (l - 1);
            let d2 = 1usize << (cfg.l_pg - l);
            let mut conv_dilated_1 = DilatedConvLayer::new(n_f, n_f, d1, pad(d1));
            init_dilated(&mut conv_dilated_1, &mut rng);
            let mut conv_dilated_2 = DilatedConvLayer::new(n_f, n_f, d2, pad(d2));
            init_dilated(&mut conv_dilated_2, &mut rng);
            let mut merge = PointwiseConvLayer::new(2 * n_f, n_f);
            init_pointwise(&mut merge, &mut rng);
            let mut pointwise = PointwiseConvLayer::new(n_f, n_f);
            init_pointwise(&mut pointwise, &mut rng);
            layers.push(TemporalLayer::Dual(DualDilatedResidualLayer {
                conv_dilated_1,
                conv_dilated_2,
                merge,
                pointwise,
                dropout_p: DEFAULT_DROPOUT,
            }));
        }
        let mut head = PointwiseConvLayer::new(n_f, n_classes);
        init_pointwise(&mut head, &mut rng);
        stages.push(Stage { input_conv, layers, head });
    }
    // Refinement stages.
    for _ in 0..cfg.n_r {
        let mut input_conv = PointwiseConvLayer::new(n_classes, n_f);
        init_pointwise(&mut input_conv, &mut rng);
        let mut layers = Vec::with_capacity(cfg.l_r as usize);
        for l in 1..=cfg.l_r {
            let d = 1usize << (l - 1);
            let mut conv = DilatedConvLayer::new(n_f, n_f, d, pad(d));
            init_dilated(&mut conv, &mut rng);
            let mut pointwise = PointwiseConvLayer::new(n_f, n_f);
            init_pointwise(&mut pointwise, &mut rng);
            layers.push(TemporalLayer::Single(DilatedResidualLayer {
                conv,
                pointwise,
                dropout_p: DEFAULT_DROPOUT,
            }));
        }
        let mut head = PointwiseConvLayer::new(n_f, n_classes);
        init_pointwise(&mut head, &mut rng);
        stages.push(Stage { input_conv, layers, head });
    }

    Ok(ModelParameters { config: *cfg, in_features, seed, stages })
}

fn uniform_fan_in(rng: &mut ChaCha8Rng, fan_in: usize, slice: &mut [f64]) {
    let bound = 1.0 / crate::math::sqrt(fan_in as f64);
    for v in slice {
        *v = bound * (2.0 * rng.random::<f64>() - 1.0);
    }
}

fn init_dilated(layer: &mut DilatedConvLayer, rng: &mut ChaCha8Rng) {
    let fan_in = layer.in_channels * crate::seqcore::KERNEL_SIZE;
    uniform_fan_in(rng, fan_in, &mut layer.weights);
    uniform_fan_in(rng, fan_in, &mut layer.bias);
}

fn init_pointwise(layer: &mut PointwiseConvLayer, rng: &mut ChaCha8Rng) {
    let fan_in = layer.in_channels;
    uniform_fan_in(rng, fan_in, &mut layer.weights);
    uniform_fan_in(rng, fan_in, &mut layer.bias);
}

impl ModelParameters {
    fn check_input(&self, features: &ChannelTimeMatrix) -> Result<(), ModelError> {
        if features.n_frames() == 0 {
            return Err(ModelError::EmptySequence);
        }
        if features.n_channels() != self.in_features {
            return Err(ModelError::FeatureDimMismatch {
                expected: self.in_features,
                got: features.n_channels(),
            });
        }
        Ok(())
    }

    /// Offline forward pass in eval mode (dropout off). Returns one softmax
    /// probability matrix per stage; the last one is the network's output.
    pub fn forward(&self, features: &ChannelTimeMatrix) -> Result<Vec<ChannelTimeMatrix>, ModelError> {
        self.check_input(features)?;
        let mut outputs: Vec<ChannelTimeMatrix> = Vec::with_capacity(self.stages.len());
        for (s, stage) in self.stages.iter().enumerate() {
            let input = if s == 0 { features } else { outputs.last().unwrap() };
            let probs = stage.forward_eval(input)?;
            outputs.push(probs);
        }
        Ok(outputs)
    }

    /// Forward pass that retains the intermediates needed by [`Self::backward`].
    /// Dropout is active iff an RNG is supplied.
    pub fn forward_training(
        &self,
        features: &ChannelTimeMatrix,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Vec<ChannelTimeMatrix>, ForwardCache), ModelError> {
        self.check_input(features)?;
        let mut outputs: Vec<ChannelTimeMatrix> = Vec::with_capacity(self.stages.len());
        let mut caches = Vec::with_capacity(self.stages.len());
        for (s, stage) in self.stages.iter().enumerate() {
            let input = if s == 0 { features } else { outputs.last().unwrap() };
            let (probs, cache) = stage.forward_training(input, rng.as_deref_mut())?;
            outputs.push(probs);
            caches.push(cache);
        }
        Ok((outputs, ForwardCache { stages: caches }))
    }

    /// Backpropagate per-stage logit gradients through the whole network,
    /// accumulating parameter gradients into `grads` (a zeroed structural
    /// clone, see [`Self::zeros_like`]). Gradients flow between stages
    /// through the softmax that feeds the next stage.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        stage_probs: &[ChannelTimeMatrix],
        logit_grads: &[ChannelTimeMatrix],
        grads: &mut ModelParameters,
    ) -> Result<(), ModelError> {
        if stage_probs.len() != self.stages.len() || logit_grads.len() != self.stages.len() {
            return Err(ModelError::StageCountMismatch {
                expected: self.stages.len(),
                got: stage_probs.len().min(logit_grads.len()),
            });
        }
        let mut grad_from_next: Option<ChannelTimeMatrix> = None;
        for s in (0..self.stages.len()).rev() {
            let mut grad_logits = logit_grads[s].clone();
            if let Some(gp) = grad_from_next.take() {
                grad_logits.add_assign(&softmax_backward(&stage_probs[s], &gp));
            }
            let grad_input =
                self.stages[s].backward(&cache.stages[s], &grad_logits, &mut grads.stages[s])?;
            grad_from_next = Some(grad_input);
        }
        Ok(())
    }

    /// Structural clone with all tensors zeroed; the shape used for gradient
    /// accumulation.
    pub fn zeros_like(&self) -> ModelParameters {
        let mut m = self.clone();
        for t in m.tensors_mut() {
            t.fill(0.0);
        }
        m
    }

    /// All parameter tensors in the canonical (checkpoint) order: stages in
    /// network order; within a stage the input conv, then each layer's
    /// tensors, then the head; weights before biases.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for stage in &self.stages {
            out.push(stage.input_conv.weights.as_slice());
            out.push(stage.input_conv.bias.as_slice());
            for layer in &stage.layers {
                match layer {
                    TemporalLayer::Dual(l) => {
                        out.push(l.conv_dilated_1.weights.as_slice());
                        out.push(l.conv_dilated_1.bias.as_slice());
                        out.push(l.conv_dilated_2.weights.as_slice());
                        out.push(l.conv_dilated_2.bias.as_slice());
                        out.push(l.merge.weights.as_slice());
                        out.push(l.merge.bias.as_slice());
                        out.push(l.pointwise.weights.as_slice());
                        out.push(l.pointwise.bias.as_slice());
                    }
                    TemporalLayer::Single(l) => {
                        out.push(l.conv.weights.as_slice());
                        out.push(l.conv.bias.as_slice());
                        out.push(l.pointwise.weights.as_slice());
                        out.push(l.pointwise.bias.as_slice());
                    }
                }
            }
            out.push(stage.head.weights.as_slice());
            out.push(stage.head.bias.as_slice());
        }
        out
    }

    /// Mutable variant of [`Self::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for stage in &mut self.stages {
            out.push(stage.input_conv.weights.as_mut_slice());
            out.push(stage.input_conv.bias.as_mut_slice());
            for layer in &mut stage.layers {
                match layer {
                    TemporalLayer::Dual(l) => {
                        out.push(l.conv_dilated_1.weights.as_mut_slice());
                        out.push(l.conv_dilated_1.bias.as_mut_slice());
                        out.push(l.conv_dilated_2.weights.as_mut_slice());
                        out.push(l.conv_dilated_2.bias.as_mut_slice());
                        out.push(l.merge.weights.as_mut_slice());
                        out.push(l.merge.bias.as_mut_slice());
                        out.push(l.pointwise.weights.as_mut_slice());
                        out.push(l.pointwise.bias.as_mut_slice());
                    }
                    TemporalLayer::Single(l) => {
                        out.push(l.conv.weights.as_mut_slice());
                        out.push(l.conv.bias.as_mut_slice());
                        out.push(l.pointwise.weights.as_mut_slice());
                        out.push(l.pointwise.bias.as_mut_slice());
                    }
                }
            }
            out.push(stage.head.weights.as_mut_slice());
            out.push(stage.head.bias.as_mut_slice());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for t in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    /// Set the dropout probability of every residual layer.
    pub fn set_dropout(&mut self, p: f64) {
        assert!((0.0..1.0).contains(&p));
        for stage in &mut self.stages {
            for layer in &mut stage.layers {
                match layer {
                    TemporalLayer::Dual(l) => l.dropout_p = p,
                    TemporalLayer::Single(l) => l.dropout_p = p,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::gradient_check;
    use crate::window::{self, LayerAddress, StageKind};

    fn cfg(variant: Variant, l: u32, n_r: u32, w_max: u64) -> NetworkConfig {
        NetworkConfig {
            variant,
            l_pg: l,
            l_r: l,
            n_r,
            w_max,
            n_feature_maps: 8,
            n_classes: 4,
            frame_rate_hz: 30.0,
        }
    }

    fn random_features(channels: usize, frames: usize, seed: u64) -> ChannelTimeMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ChannelTimeMatrix::from_fn(channels, frames, |_, _| 2.0 * rng.random::<f64>() - 1.0)
    }

    #[test]
    fn build_sets_future_pads_from_variant() {
        // Causal: every pad zero.
        let m = build_model(&cfg(Variant::Bf, 3, 1, 0), 5, 1).unwrap();
        for stage in &m.stages {
            for layer in &stage.layers {
                assert_eq!(layer.future_need(), 0);
            }
        }
        // Symmetric: refinement pads are the dilations 1, 2, 4.
        let m = build_model(&cfg(Variant::Rr, 3, 1, 0), 5, 1).unwrap();
        let pads: Vec<usize> = m.stages[1]
            .layers
            .iter()
            .map(|l| match l {
                TemporalLayer::Single(d) => d.conv.future_pad,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(pads, [1, 2, 4]);
        // Bounded: min(w_max, dilation).
        let m = build_model(&cfg(Variant::Bf, 3, 1, 3), 5, 1).unwrap();
        let pads: Vec<usize> = m.stages[1]
            .layers
            .iter()
            .map(|l| match l {
                TemporalLayer::Single(d) => d.conv.future_pad,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(pads, [1, 2, 3]);
    }

    #[test]
    fn layer_future_need_matches_window_calculus() {
        for variant in [Variant::Rr, Variant::Bf] {
            for w in [0u64, 1, 3, 8] {
                let c = cfg(variant, 4, 2, w);
                let m = build_model(&c, 5, 9).unwrap();
                for (s, stage) in m.stages.iter().enumerate() {
                    let kind = if s == 0 {
                        StageKind::PredictionGenerator
                    } else {
                        StageKind::Refinement
                    };
                    for (i, layer) in stage.layers.iter().enumerate() {
                        let addr = LayerAddress { stage: kind, layer: (i + 1) as u32 };
                        let dfw = window::direct_future_window(&c, addr).unwrap();
                        assert_eq!(layer.future_need() as u64, dfw);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_weights_make_residual_layers_identity() {
        let c = cfg(Variant::Rr, 3, 2, 0);
        let mut m = build_model(&c, 5, 3).unwrap();
        // Zero everything except the input convs and heads, then check each
        // stage's temporal trunk is the identity: with zero head weights the
        // logits are zero, so probabilities are uniform.
        for stage in &mut m.stages {
            for layer in &mut stage.layers {
                match layer {
                    TemporalLayer::Dual(l) => {
                        l.conv_dilated_1.weights.fill(0.0);
                        l.conv_dilated_1.bias.fill(0.0);
                        l.conv_dilated_2.weights.fill(0.0);
                        l.conv_dilated_2.bias.fill(0.0);
                        l.merge.weights.fill(0.0);
                        l.merge.bias.fill(0.0);
                        l.pointwise.weights.fill(0.0);
                        l.pointwise.bias.fill(0.0);
                    }
                    TemporalLayer::Single(l) => {
                        l.conv.weights.fill(0.0);
                        l.conv.bias.fill(0.0);
                        l.pointwise.weights.fill(0.0);
                        l.pointwise.bias.fill(0.0);
                    }
                }
            }
        }
        let x = random_features(8, 6, 4);
        let scratch = &mut ColumnScratch::for_feature_maps(8);
        for stage in &m.stages {
            for layer in &stage.layers {
                let mut out = vec![0.0; 8];
                for t in 0..x.n_frames() {
                    layer.forward_column(&x, t as i64, scratch, &mut out);
                    assert_eq!(out.as_slice(), x.frame(t));
                }
            }
        }
    }

    #[test]
    fn zero_head_gives_uniform_probabilities() {
        let c = cfg(Variant::Rr, 2, 1, 0);
        let mut m = build_model(&c, 5, 3).unwrap();
        let last = m.stages.len() - 1;
        m.stages[last].head.weights.fill(0.0);
        m.stages[last].head.bias.fill(0.0);
        let x = random_features(5, 7, 5);
        let probs = m.forward(&x).unwrap();
        let final_probs = probs.last().unwrap();
        for t in 0..7 {
            for ch in 0..4 {
                assert!((final_probs.get(ch, t) - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stage_count_and_shapes() {
        let c = cfg(Variant::Bf, 2, 0, 1);
        let m = build_model(&c, 3, 0).unwrap();
        assert_eq!(m.stages.len(), 1);
        let x = random_features(3, 5, 1);
        let probs = m.forward(&x).unwrap();
        assert_eq!(probs.len(), 1);
        assert_eq!(probs[0].n_channels(), 4);
        assert_eq!(probs[0].n_frames(), 5);

        let c = cfg(Variant::Bf, 2, 3, 1);
        let m = build_model(&c, 3, 0).unwrap();
        assert_eq!(m.stages.len(), 4);
        assert_eq!(m.forward(&x).unwrap().len(), 4);
    }

    #[test]
    fn probability_columns_sum_to_one() {
        let c = cfg(Variant::Rr, 3, 2, 0);
        let m = build_model(&c, 5, 11).unwrap();
        let x = random_features(5, 9, 2);
        for probs in m.forward(&x).unwrap() {
            for t in 0..probs.n_frames() {
                let s: f64 = probs.frame(t).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(probs.frame(t).iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn single_frame_input_is_finite() {
        let c = cfg(Variant::Rr, 3, 1, 0);
        let m = build_model(&c, 5, 6).unwrap();
        let x = random_features(5, 1, 3);
        let probs = m.forward(&x).unwrap();
        assert!(probs.iter().all(|p| p.is_finite()));
        assert_eq!(probs.last().unwrap().n_frames(), 1);
    }

    #[test]
    fn forward_rejects_bad_inputs() {
        let c = cfg(Variant::Rr, 2, 0, 0);
        let m = build_model(&c, 5, 0).unwrap();
        let empty = ChannelTimeMatrix::zeros(5, 0);
        assert_eq!(m.forward(&empty).unwrap_err(), ModelError::EmptySequence);
        let wrong = ChannelTimeMatrix::zeros(4, 3);
        assert!(matches!(
            m.forward(&wrong).unwrap_err(),
            ModelError::FeatureDimMismatch { expected: 5, got: 4 }
        ));
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let c = cfg(Variant::Bf, 3, 1, 2);
        let m1 = build_model(&c, 5, 42).unwrap();
        let m2 = build_model(&c, 5, 42).unwrap();
        assert_eq!(m1, m2);
        let x = random_features(5, 20, 7);
        let p1 = m1.forward(&x).unwrap();
        let p2 = m2.forward(&x).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn training_forward_without_dropout_matches_eval() {
        let c = cfg(Variant::Bf, 3, 2, 2);
        let m = build_model(&c, 5, 13).unwrap();
        let x = random_features(5, 12, 8);
        let eval = m.forward(&x).unwrap();
        let (train, _) = m.forward_training(&x, None).unwrap();
        for (a, b) in eval.iter().zip(&train) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn end_to_end_causality_bound() {
        for (variant, w) in [(Variant::Rr, 0u64), (Variant::Bf, 0), (Variant::Bf, 2)] {
            let c = cfg(variant, 3, 1, w);
            let fw = window::future_window(&c) as usize;
            let m = build_model(&c, 5, 21).unwrap();
            let t_frames = fw + 30;
            let x = random_features(5, t_frames, 9);
            let base = m.forward(&x).unwrap().pop().unwrap();
            let t_check = 4usize;
            // Beyond the future window: exactly zero influence.
            for later in (t_check + fw + 1)..t_frames.min(t_check + fw + 6) {
                let mut x2 = x.clone();
                x2.set(2, later, x2.get(2, later) + 5.0);
                let pert = m.forward(&x2).unwrap().pop().unwrap();
                assert_eq!(base.frame(t_check), pert.frame(t_check), "variant {variant:?} w={w}");
            }
            // At the future window: generically nonzero influence.
            if fw > 0 {
                let mut x2 = x.clone();
                x2.set(2, t_check + fw, x2.get(2, t_check + fw) + 5.0);
                let pert = m.forward(&x2).unwrap().pop().unwrap();
                assert_ne!(base.frame(t_check), pert.frame(t_check));
            }
        }
    }

    #[test]
    fn layer_gradients_match_finite_differences() {
        // One full DDRL and one full DRL, objective = sum of outputs.
        let c = cfg(Variant::Rr, 2, 1, 0);
        let m = build_model(&c, 5, 33).unwrap();
        let x = random_features(8, 6, 10);
        for layer in [&m.stages[0].layers[0], &m.stages[1].layers[0]] {
            let (out, cache) = layer.forward_training(&x, None).unwrap();
            let grad_out = ChannelTimeMatrix::from_fn(8, 6, |_, _| 1.0);
            let mut grads = match layer {
                TemporalLayer::Dual(_) => m.stages[0].layers[0].clone(),
                TemporalLayer::Single(_) => m.stages[1].layers[0].clone(),
            };
            zero_layer(&mut grads);
            layer.backward(&cache, &grad_out, &mut grads).unwrap();
            drop(out);

            let flat = layer_params(layer);
            let analytic = layer_params(&grads);
            let proto = layer.clone();
            let xc = x.clone();
            let rep = gradient_check(
                move |p| {
                    let mut l2 = proto.clone();
                    load_layer_params(&mut l2, p);
                    let (o, _) = l2.forward_training(&xc, None).unwrap();
                    o.data().iter().sum()
                },
                &flat,
                &analytic,
                1e-4,
            )
            .unwrap();
            assert!(rep.passed, "{rep:?}");
        }
    }

    fn zero_layer(layer: &mut TemporalLayer) {
        match layer {
            TemporalLayer::Dual(l) => {
                l.conv_dilated_1.weights.fill(0.0);
                l.conv_dilated_1.bias.fill(0.0);
                l.conv_dilated_2.weights.fill(0.0);
                l.conv_dilated_2.bias.fill(0.0);
                l.merge.weights.fill(0.0);
                l.merge.bias.fill(0.0);
                l.pointwise.weights.fill(0.0);
                l.pointwise.bias.fill(0.0);
            }
            TemporalLayer::Single(l) => {
                l.conv.weights.fill(0.0);
                l.conv.bias.fill(0.0);
                l.pointwise.weights.fill(0.0);
                l.pointwise.bias.fill(0.0);
            }
        }
    }

    fn layer_params(layer: &TemporalLayer) -> Vec<f64> {
        let mut out = Vec::new();
        match layer {
            TemporalLayer::Dual(l) => {
                for t in [
                    &l.conv_dilated_1.weights,
                    &l.conv_dilated_1.bias,
                    &l.conv_dilated_2.weights,
                    &l.conv_dilated_2.bias,
                    &l.merge.weights,
                    &l.merge.bias,
                    &l.pointwise.weights,
                    &l.pointwise.bias,
                ] {
                    out.extend_from_slice(t);
                }
            }
            TemporalLayer::Single(l) => {
                for t in [&l.conv.weights, &l.conv.bias, &l.pointwise.weights, &l.pointwise.bias] {
                    out.extend_from_slice(t);
                }
            }
        }
        out
    }

    fn load_layer_params(layer: &mut TemporalLayer, flat: &[f64]) {
        let mut off = 0;
        let mut load = |t: &mut Vec<f64>| {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        };
        match layer {
            TemporalLayer::Dual(l) => {
                load(&mut l.conv_dilated_1.weights);
                load(&mut l.conv_dilated_1.bias);
                load(&mut l.conv_dilated_2.weights);
                load(&mut l.conv_dilated_2.bias);
                load(&mut l.merge.weights);
                load(&mut l.merge.bias);
                load(&mut l.pointwise.weights);
                load(&mut l.pointwise.bias);
            }
            TemporalLayer::Single(l) => {
                load(&mut l.conv.weights);
                load(&mut l.conv.bias);
                load(&mut l.pointwise.weights);
                load(&mut l.pointwise.bias);
            }
        }
    }

    #[test]
    fn flatten_roundtrip_preserves_model() {
        let c = cfg(Variant::Bf, 3, 2, 2);
        let m = build_model(&c, 5, 77).unwrap();
        let flat = m.flatten();
        assert_eq!(flat.len(), m.param_count());
        let mut m2 = m.zeros_like();
        assert_ne!(m, m2);
        m2.load_flat(&flat);
        assert_eq!(m, m2);
    }
}
