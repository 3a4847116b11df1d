use alloc::vec;
use alloc::vec::Vec;

/// A dense matrix of per-frame feature columns, addressed `[channel][time]`.
///
/// Storage is frame-major: the column for frame `t` is contiguous, which is
/// what every per-frame operation (convolution taps, softmax, residual adds)
/// touches.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTimeMatrix {
    n_channels: usize,
    n_frames: usize,
    data: Vec<f64>,
}

impl ChannelTimeMatrix {
    pub fn zeros(n_channels: usize, n_frames: usize) -> Self {
        Self { n_channels, n_frames, data: vec![0.0; n_channels * n_frames] }
    }

    /// Build from one slice per channel (all the same length).
    pub fn from_channel_rows(rows: &[&[f64]]) -> Self {
        let n_channels = rows.len();
        let n_frames = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(n_channels, n_frames);
        for (c, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n_frames, "ragged channel rows");
            for (t, &v) in row.iter().enumerate() {
                m.set(c, t, v);
            }
        }
        m
    }

    pub fn from_fn(n_channels: usize, n_frames: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n_channels, n_frames);
        for t in 0..n_frames {
            for c in 0..n_channels {
                m.set(c, t, f(c, t));
            }
        }
        m
    }

    #[inline]
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    #[inline]
    pub fn get(&self, channel: usize, t: usize) -> f64 {
        self.data[t * self.n_channels + channel]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, t: usize, value: f64) {
        self.data[t * self.n_channels + channel] = value;
    }

    /// The feature column of frame `t`.
    #[inline]
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_channels..(t + 1) * self.n_channels]
    }

    #[inline]
    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.n_channels..(t + 1) * self.n_channels]
    }

    /// Frame-major flat view.
    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n_channels, other.n_channels);
        assert_eq!(self.n_frames, other.n_frames);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| crate::math::abs(a - b))
            .fold(0.0, f64::max)
    }

    /// Elementwise sum with `other` into a new matrix.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n_channels, other.n_channels);
        assert_eq!(self.n_frames, other.n_frames);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { n_channels: self.n_channels, n_frames: self.n_frames, data }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.n_channels, other.n_channels);
        assert_eq!(self.n_frames, other.n_frames);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Per-frame argmax over channels.
    pub fn argmax_per_frame(&self) -> Vec<usize> {
        (0..self.n_frames)
            .map(|t| {
                let col = self.frame(t);
                let mut best = 0;
                for (c, &v) in col.iter().enumerate() {
                    if v > col[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    /// Stack two matrices along the channel axis.
    pub fn concat_channels(a: &Self, b: &Self) -> Self {
        assert_eq!(a.n_frames, b.n_frames);
        let n_channels = a.n_channels + b.n_channels;
        let mut out = Self::zeros(n_channels, a.n_frames);
        for t in 0..a.n_frames {
            let dst = out.frame_mut(t);
            dst[..a.n_channels].copy_from_slice(a.frame(t));
            dst[a.n_channels..].copy_from_slice(b.frame(t));
        }
        out
    }
}

/// Read-only access to a sequence of frame columns with zero padding outside
/// the valid range. Implemented by [`ChannelTimeMatrix`] for offline passes
/// and by the streaming ring buffers for incremental ones.
pub trait ColumnSource {
    fn n_channels(&self) -> usize;

    /// Column at (possibly out-of-range) time `t`; `None` means an implicit
    /// zero column.
    fn column(&self, t: i64) -> Option<&[f64]>;
}

impl ColumnSource for ChannelTimeMatrix {
    fn n_channels(&self) -> usize {
        self.n_channels
    }

    fn column(&self, t: i64) -> Option<&[f64]> {
        if t < 0 || t as usize >= self.n_frames {
            None
        } else {
            Some(self.frame(t as usize))
        }
    }
}
