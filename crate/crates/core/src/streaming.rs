//! Bounded-delay online inference.
//!
//! Frames enter one at a time; finalized per-frame predictions come out
//! exactly `future_window` frames behind the input and are numerically
//! identical to the offline forward pass (the per-column kernels are shared
//! between the two paths, so the arithmetic is literally the same).
//!
//! Each temporal layer keeps a ring of its own input columns sized by its
//! dependency span — `past_span + future_need + 1` columns — and computes
//! its output at time `t` as soon as its input has reached `t +
//! future_need`. A pushed frame therefore cascades down the layer pipeline,
//! each layer emitting at most one new column, and the total pipeline lag is
//! the sum of the per-layer future needs: the network's future window.
//! Closing the stream flushes every layer using implicit zero columns past
//! the end of its input, which is exactly the offline end-of-sequence
//! padding.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{ColumnScratch, ModelParameters};
use crate::seqcore::{ColumnSource, softmax_column};
use crate::window::future_window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StreamError {
    #[error("feature dimension mismatch: stream expects {expected}, got {got}")]
    FeatureDimMismatch { expected: usize, got: usize },
    #[error("push after close")]
    PushAfterClose,
    #[error("stream already closed")]
    DoubleClose,
}

/// A prediction the stream has committed to: it will never be revised.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalizedFrame {
    pub frame_index: usize,
    /// Final-stage class probabilities.
    pub probs: Vec<f64>,
    /// Argmax of `probs`.
    pub label: usize,
}

/// Fixed-capacity ring of the most recent input columns of one layer.
/// Indices before the start of time or after the last pushed column read as
/// zero columns (the padding); reads below the retention window are a bug.
#[derive(Debug, Clone)]
struct ColumnRing {
    width: usize,
    capacity: usize,
    data: Vec<f64>,
    count: usize,
}

impl ColumnRing {
    fn new(width: usize, capacity: usize) -> Self {
        Self { width, capacity, data: vec![0.0; width * capacity], count: 0 }
    }

    fn push(&mut self, col: &[f64]) {
        debug_assert_eq!(col.len(), self.width);
        let slot = self.count % self.capacity;
        self.data[slot * self.width..(slot + 1) * self.width].copy_from_slice(col);
        self.count += 1;
    }
}

impl ColumnSource for ColumnRing {
    fn n_channels(&self) -> usize {
        self.width
    }

    fn column(&self, t: i64) -> Option<&[f64]> {
        if t < 0 || t as usize >= self.count {
            return None;
        }
        let t = t as usize;
        assert!(
            t + self.capacity >= self.count,
            "ring read below retention window: t={t}, count={}, capacity={}",
            self.count,
            self.capacity
        );
        let slot = t % self.capacity;
        Some(&self.data[slot * self.width..(slot + 1) * self.width])
    }
}

#[derive(Debug, Clone)]
enum Unit {
    /// Stage input 1x1 conv (stage 0 consumes raw features, later stages the
    /// previous stage's probabilities).
    StageInput { stage: usize },
    /// One (dual) dilated residual layer with its input ring.
    Temporal { stage: usize, layer: usize, ring: ColumnRing, next_out: usize, future_need: usize },
    /// Stage head: 1x1 conv to class logits plus softmax.
    Head { stage: usize },
}

/// Incremental evaluation state over a borrowed model (eval mode; dropout
/// off). One stream is single-owner; several streams may share one model.
#[derive(Debug)]
pub struct StreamState<'m> {
    model: &'m ModelParameters,
    units: Vec<Unit>,
    scratch: ColumnScratch,
    delay_frames: usize,
    frames_ingested: usize,
    frames_emitted: usize,
    closed: bool,
    columns_computed: u64,
}

/// Open a bounded-delay stream over `model`. The delay contract —
/// [`StreamState::delay_frames`] — is the model's future window.
pub fn open_stream(model: &ModelParameters) -> StreamState<'_> {
    let mut units = Vec::new();
    for (s, stage) in model.stages.iter().enumerate() {
        units.push(Unit::StageInput { stage: s });
        for (l, layer) in stage.layers.iter().enumerate() {
            let capacity = layer.past_span() + layer.future_need() + 1;
            units.push(Unit::Temporal {
                stage: s,
                layer: l,
                ring: ColumnRing::new(layer.n_channels(), capacity),
                next_out: 0,
                future_need: layer.future_need(),
            });
        }
        units.push(Unit::Head { stage: s });
    }
    StreamState {
        model,
        units,
        scratch: ColumnScratch::for_feature_maps(model.config.n_feature_maps as usize),
        delay_frames: future_window(&model.config) as usize,
        frames_ingested: 0,
        frames_emitted: 0,
        closed: false,
        columns_computed: 0,
    }
}

impl<'m> StreamState<'m> {
    /// The emission delay this stream guarantees: the output for frame `t`
    /// appears during the push of frame `t + delay_frames`, or at close.
    pub fn delay_frames(&self) -> usize {
        self.delay_frames
    }

    pub fn frames_ingested(&self) -> usize {
        self.frames_ingested
    }

    pub fn frames_emitted(&self) -> usize {
        self.frames_emitted
    }

    /// Total temporal-layer columns evaluated so far (work counter).
    pub fn columns_computed(&self) -> u64 {
        self.columns_computed
    }

    /// Number of temporal layers in the pipeline.
    pub fn temporal_layer_count(&self) -> usize {
        self.units.iter().filter(|u| matches!(u, Unit::Temporal { .. })).count()
    }

    /// Per-layer ring capacities, in columns (fixed at open).
    pub fn ring_capacities(&self) -> Vec<usize> {
        self.units
            .iter()
            .filter_map(|u| match u {
                Unit::Temporal { ring, .. } => Some(ring.capacity),
                _ => None,
            })
            .collect()
    }

    /// Ingest one frame; returns every newly finalized output, in frame
    /// order.
    pub fn push_frame(&mut self, features: &[f64]) -> Result<Vec<FinalizedFrame>, StreamError> {
        if self.closed {
            return Err(StreamError::PushAfterClose);
        }
        if features.len() != self.model.in_features {
            return Err(StreamError::FeatureDimMismatch {
                expected: self.model.in_features,
                got: features.len(),
            });
        }
        let t = self.frames_ingested;
        self.frames_ingested += 1;
        let mut out = Vec::new();
        self.cascade(0, t, features.to_vec(), &mut out);
        self.frames_emitted += out.len();
        Ok(out)
    }

    /// Flush the pipeline: compute every remaining output using zero columns
    /// past the end of each layer's input, exactly as the offline pass pads.
    pub fn close(&mut self) -> Result<Vec<FinalizedFrame>, StreamError> {
        if self.closed {
            return Err(StreamError::DoubleClose);
        }
        self.closed = true;
        let total = self.frames_ingested;
        let mut out = Vec::new();
        for u in 0..self.units.len() {
            loop {
                let pending = match &self.units[u] {
                    Unit::Temporal { next_out, .. } if *next_out < total => Some(*next_out),
                    _ => None,
                };
                let Some(t) = pending else { break };
                let col = self.compute_temporal(u, t);
                self.cascade(u + 1, t, col, &mut out);
            }
        }
        self.frames_emitted += out.len();
        debug_assert_eq!(self.frames_emitted, total);
        Ok(out)
    }

    /// Feed a column into the pipeline at `start_unit` and run the resulting
    /// work to completion, appending any finalized frames to `out`.
    fn cascade(&mut self, start_unit: usize, t0: usize, col0: Vec<f64>, out: &mut Vec<FinalizedFrame>) {
        let mut queue: VecDeque<(usize, usize, Vec<f64>)> = VecDeque::new();
        queue.push_back((start_unit, t0, col0));
        while let Some((u, t, col)) = queue.pop_front() {
            if u == self.units.len() {
                let label = argmax(&col);
                out.push(FinalizedFrame { frame_index: t, probs: col, label });
                continue;
            }
            match &mut self.units[u] {
                Unit::StageInput { stage } => {
                    let conv = &self.model.stages[*stage].input_conv;
                    let mut next = vec![0.0; conv.out_channels];
                    conv.forward_column(&col, &mut next);
                    queue.push_back((u + 1, t, next));
                    continue;
                }
                Unit::Head { stage } => {
                    let conv = &self.model.stages[*stage].head;
                    let mut next = vec![0.0; conv.out_channels];
                    conv.forward_column(&col, &mut next);
                    softmax_column(&mut next);
                    queue.push_back((u + 1, t, next));
                    continue;
                }
                Unit::Temporal { ring, .. } => ring.push(&col),
            }
            // Drain every column the temporal unit can now finalize.
            loop {
                let ready = match &self.units[u] {
                    Unit::Temporal { ring, next_out, future_need, .. }
                        if *next_out + *future_need + 1 <= ring.count =>
                    {
                        Some(*next_out)
                    }
                    _ => None,
                };
                let Some(t_ready) = ready else { break };
                let col2 = self.compute_temporal(u, t_ready);
                queue.push_back((u + 1, t_ready, col2));
            }
        }
    }

    /// Evaluate one output column of the temporal unit at `u`, advancing its
    /// cursor. Reads past the ring's last column resolve to zeros, which
    /// only happens during the close flush.
    fn compute_temporal(&mut self, u: usize, t: usize) -> Vec<f64> {
        let model = self.model;
        let scratch = &mut self.scratch;
        let Unit::Temporal { stage, layer, ring, next_out, .. } = &mut self.units[u] else {
            unreachable!("compute_temporal on a pointwise unit")
        };
        debug_assert_eq!(*next_out, t);
        let model_layer = &model.stages[*stage].layers[*layer];
        let mut col = vec![0.0; ring.width];
        model_layer.forward_column(ring, t as i64, scratch, &mut col);
        *next_out += 1;
        self.columns_computed += 1;
        col
    }
}

fn argmax(col: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in col.iter().enumerate() {
        if v > col[best] {
            best = c;
        }
    }
    best
}
