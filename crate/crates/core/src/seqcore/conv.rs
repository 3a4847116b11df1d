use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{ChannelTimeMatrix, ColumnSource};
use super::ShapeError;

/// All temporal convolutions have three taps.
pub const KERNEL_SIZE: usize = 3;

/// A kernel-size-3 dilated 1-D convolution with asymmetric zero padding.
///
/// With dilation `d` and future pad `m` (`0 <= m <= d`), the input is
/// parsed with `2d - m` zero columns before and `m` after, so the output at
/// frame `t` reads input frames `t - (2d - m)`, `t - (d - m)` and `t + m`
/// and never anything later than `t + m`. `m = d` is the symmetric layout,
/// `m = 0` the causal one. Output length always equals input length.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatedConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub dilation: usize,
    pub future_pad: usize,
    /// `[out][in][tap]`, flat.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DilatedConvLayer {
    pub fn new(in_channels: usize, out_channels: usize, dilation: usize, future_pad: usize) -> Self {
        assert!(in_channels > 0 && out_channels > 0);
        assert!(dilation >= 1, "dilation must be positive");
        assert!(future_pad <= dilation, "future pad {future_pad} exceeds dilation {dilation}");
        Self {
            in_channels,
            out_channels,
            dilation,
            future_pad,
            weights: vec![0.0; out_channels * in_channels * KERNEL_SIZE],
            bias: vec![0.0; out_channels],
        }
    }

    /// Signed time offsets of the three taps relative to the output frame.
    #[inline]
    pub fn tap_offsets(&self) -> [i64; KERNEL_SIZE] {
        let d = self.dilation as i64;
        let m = self.future_pad as i64;
        [m - 2 * d, m - d, m]
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize, tap: usize) -> f64 {
        self.weights[(out * self.in_channels + inp) * KERNEL_SIZE + tap]
    }

    #[inline]
    pub fn weight_mut(&mut self, out: usize, inp: usize, tap: usize) -> &mut f64 {
        &mut self.weights[(out * self.in_channels + inp) * KERNEL_SIZE + tap]
    }

    /// One output column. Summation order is fixed: bias, then taps in
    /// temporal order, channels inner — the streaming path calls this very
    /// function, which keeps the two paths numerically identical.
    pub fn forward_column(&self, src: &impl ColumnSource, t: i64, out: &mut [f64]) {
        debug_assert_eq!(src.n_channels(), self.in_channels);
        debug_assert_eq!(out.len(), self.out_channels);
        out.copy_from_slice(&self.bias);
        let offsets = self.tap_offsets();
        for (k, off) in offsets.into_iter().enumerate() {
            let Some(col) = src.column(t + off) else { continue };
            for (o, acc) in out.iter_mut().enumerate() {
                let wrow = &self.weights[o * self.in_channels * KERNEL_SIZE..];
                let mut s = 0.0;
                for (i, &x) in col.iter().enumerate() {
                    s += wrow[i * KERNEL_SIZE + k] * x;
                }
                *acc += s;
            }
        }
    }

    pub fn forward(&self, x: &ChannelTimeMatrix) -> Result<ChannelTimeMatrix, ShapeError> {
        if x.n_channels() != self.in_channels {
            return Err(ShapeError { expected: self.in_channels, got: x.n_channels() });
        }
        let mut out = ChannelTimeMatrix::zeros(self.out_channels, x.n_frames());
        for t in 0..x.n_frames() {
            self.forward_column(x, t as i64, out.frame_mut(t));
        }
        Ok(out)
    }

    /// Exact gradients of the forward map.
    pub fn backward(
        &self,
        x: &ChannelTimeMatrix,
        grad_out: &ChannelTimeMatrix,
    ) -> Result<(ChannelTimeMatrix, Vec<f64>, Vec<f64>), ShapeError> {
        if x.n_channels() != self.in_channels {
            return Err(ShapeError { expected: self.in_channels, got: x.n_channels() });
        }
        if grad_out.n_channels() != self.out_channels {
            return Err(ShapeError { expected: self.out_channels, got: grad_out.n_channels() });
        }
        assert_eq!(x.n_frames(), grad_out.n_frames());
        let n_frames = x.n_frames();
        let mut grad_x = ChannelTimeMatrix::zeros(self.in_channels, n_frames);
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; self.bias.len()];
        let offsets = self.tap_offsets();
        for t in 0..n_frames {
            let g = grad_out.frame(t);
            for (o, &go) in g.iter().enumerate() {
                grad_b[o] += go;
            }
            for (k, off) in offsets.into_iter().enumerate() {
                let tap = t as i64 + off;
                if tap < 0 || tap as usize >= n_frames {
                    continue;
                }
                let tap = tap as usize;
                for (o, &go) in g.iter().enumerate() {
                    let wrow = &self.weights[o * self.in_channels * KERNEL_SIZE..];
                    let gwrow = &mut grad_w[o * self.in_channels * KERNEL_SIZE..];
                    let xcol = x.frame(tap);
                    let gxcol = grad_x.frame_mut(tap);
                    for i in 0..self.in_channels {
                        gwrow[i * KERNEL_SIZE + k] += xcol[i] * go;
                        gxcol[i] += wrow[i * KERNEL_SIZE + k] * go;
                    }
                }
            }
        }
        Ok((grad_x, grad_w, grad_b))
    }
}

/// A 1x1 convolution: an affine map applied to every frame independently.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out][in]`, flat.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl PointwiseConvLayer {
    pub fn new(in_channels: usize, out_channels: usize) -> Self {
        assert!(in_channels > 0 && out_channels > 0);
        Self {
            in_channels,
            out_channels,
            weights: vec![0.0; out_channels * in_channels],
            bias: vec![0.0; out_channels],
        }
    }

    /// Identity map; requires equal channel counts.
    pub fn identity(channels: usize) -> Self {
        let mut layer = Self::new(channels, channels);
        for c in 0..channels {
            layer.weights[c * channels + c] = 1.0;
        }
        layer
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.in_channels + inp]
    }

    pub fn forward_column(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_channels);
        debug_assert_eq!(out.len(), self.out_channels);
        for (o, acc) in out.iter_mut().enumerate() {
            let wrow = &self.weights[o * self.in_channels..(o + 1) * self.in_channels];
            let mut s = self.bias[o];
            for (w, x) in wrow.iter().zip(input) {
                s += w * x;
            }
            *acc = s;
        }
    }

    pub fn forward(&self, x: &ChannelTimeMatrix) -> Result<ChannelTimeMatrix, ShapeError> {
        if x.n_channels() != self.in_channels {
            return Err(ShapeError { expected: self.in_channels, got: x.n_channels() });
        }
        let mut out = ChannelTimeMatrix::zeros(self.out_channels, x.n_frames());
        for t in 0..x.n_frames() {
            let mut col = vec![0.0; self.out_channels];
            self.forward_column(x.frame(t), &mut col);
            out.frame_mut(t).copy_from_slice(&col);
        }
        Ok(out)
    }

    pub fn backward(
        &self,
        x: &ChannelTimeMatrix,
        grad_out: &ChannelTimeMatrix,
    ) -> Result<(ChannelTimeMatrix, Vec<f64>, Vec<f64>), ShapeError> {
        if x.n_channels() != self.in_channels {
            return Err(ShapeError { expected: self.in_channels, got: x.n_channels() });
        }
        if grad_out.n_channels() != self.out_channels {
            return Err(ShapeError { expected: self.out_channels, got: grad_out.n_channels() });
        }
        assert_eq!(x.n_frames(), grad_out.n_frames());
        let mut grad_x = ChannelTimeMatrix::zeros(self.in_channels, x.n_frames());
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; self.bias.len()];
        for t in 0..x.n_frames() {
            let g = grad_out.frame(t);
            let xcol = x.frame(t);
            let gxcol = grad_x.frame_mut(t);
            for (o, &go) in g.iter().enumerate() {
                grad_b[o] += go;
                let wrow = &self.weights[o * self.in_channels..(o + 1) * self.in_channels];
                let gwrow = &mut grad_w[o * self.in_channels..(o + 1) * self.in_channels];
                for i in 0..self.in_channels {
                    gwrow[i] += xcol[i] * go;
                    gxcol[i] += wrow[i] * go;
                }
            }
        }
        Ok((grad_x, grad_w, grad_b))
    }
}
