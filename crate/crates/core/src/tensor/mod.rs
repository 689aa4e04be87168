//! Rank-4 tensors with a small reverse-mode tape.
//!
//! Only the primitives the planners need are provided: same-padded
//! convolution, channel max, the gate nonlinearities, elementwise
//! arithmetic, channel stacking, per-sample cell gathering, a softmax
//! weighted sum and softmax cross-entropy. Everything runs in `f64`.

mod gradcheck;
mod kernels;
mod tape;

pub use gradcheck::{finite_diff_check, FdConfig, FdEval, FdFailure, FdReport};
pub use kernels::{channel_max, conv2d_same, leaky_relu, sigmoid, ArgIndexMap};
pub use tape::{Gradients, Tape, Var};

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Dims,
        right: Dims,
    },
    #[error("invalid kernel {dims}: {reason}")]
    InvalidKernel { dims: Dims, reason: &'static str },
    #[error("data length {len} does not match dims {dims}")]
    DataLength { dims: Dims, len: usize },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// (batch, channels, height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub const fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Self {
            batch,
            channels,
            height,
            width,
        }
    }

    pub const fn scalar() -> Self {
        Self::new(1, 1, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.batch, self.channels, self.height, self.width]
    }

    /// Row-major flat offset.
    #[inline]
    pub fn index(&self, b: usize, c: usize, i: usize, j: usize) -> usize {
        ((b * self.channels + c) * self.height + i) * self.width + j
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.batch, self.channels, self.height, self.width
        )
    }
}

/// Dense row-major rank-4 array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(Dims::scalar(), value)
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(TensorError::DataLength {
                dims,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for b in 0..dims.batch {
            for c in 0..dims.channels {
                for i in 0..dims.height {
                    for j in 0..dims.width {
                        data.push(f(b, c, i, j));
                    }
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, i: usize, j: usize) -> f64 {
        self.data[self.dims.index(b, c, i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, c: usize, i: usize, j: usize) -> &mut f64 {
        let idx = self.dims.index(b, c, i, j);
        &mut self.data[idx]
    }

    /// Contiguous `height * width` slice for one (batch, channel) pair.
    pub fn plane(&self, b: usize, c: usize) -> &[f64] {
        let p = self.dims.plane();
        let start = (b * self.dims.channels + c) * p;
        &self.data[start..start + p]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if self.dims != other.dims {
            return Err(TensorError::ShapeMismatch {
                op,
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Concatenate along the channel axis.
    pub fn stack_channels(&self, other: &Tensor) -> Result<Self> {
        let (a, b) = (self.dims, other.dims);
        if a.batch != b.batch || a.height != b.height || a.width != b.width {
            return Err(TensorError::ShapeMismatch {
                op: "stack_channels",
                left: a,
                right: b,
            });
        }
        let dims = Dims::new(a.batch, a.channels + b.channels, a.height, a.width);
        let mut data = Vec::with_capacity(dims.len());
        let (sa, sb) = (a.channels * a.plane(), b.channels * b.plane());
        for n in 0..a.batch {
            data.extend_from_slice(&self.data[n * sa..(n + 1) * sa]);
            data.extend_from_slice(&other.data[n * sb..(n + 1) * sb]);
        }
        Ok(Self { dims, data })
    }

    /// Split off a contiguous channel range.
    pub fn channel_range(&self, start: usize, count: usize) -> Result<Self> {
        let d = self.dims;
        if start + count > d.channels {
            return Err(TensorError::Validation(format!(
                "channel range {start}..{} out of {} channels",
                start + count,
                d.channels
            )));
        }
        let dims = Dims::new(d.batch, count, d.height, d.width);
        let p = d.plane();
        let mut data = Vec::with_capacity(dims.len());
        for n in 0..d.batch {
            let base = (n * d.channels + start) * p;
            data.extend_from_slice(&self.data[base..base + count * p]);
        }
        Ok(Self { dims, data })
    }
}

/// Bias-free square convolution kernel with shape (out, in, f, f) and odd `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    weights: Tensor,
}

impl ConvKernel {
    pub fn new(weights: Tensor) -> Result<Self> {
        check_kernel_dims(weights.dims())?;
        Ok(Self { weights })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, f: usize) -> Result<Self> {
        Self::new(Tensor::zeros(Dims::new(out_channels, in_channels, f, f)))
    }

    pub fn size(&self) -> usize {
        self.weights.dims().height
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dims().batch
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dims().channels
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn into_tensor(self) -> Tensor {
        self.weights
    }
}

pub(crate) fn check_kernel_dims(dims: Dims) -> Result<()> {
    if dims.height != dims.width {
        return Err(TensorError::InvalidKernel {
            dims,
            reason: "kernel must be square",
        });
    }
    if dims.height.is_multiple_of(2) {
        return Err(TensorError::InvalidKernel {
            dims,
            reason: "kernel size must be odd",
        });
    }
    if dims.is_empty() {
        return Err(TensorError::InvalidKernel {
            dims,
            reason: "kernel must be non-empty",
        });
    }
    Ok(())
}
