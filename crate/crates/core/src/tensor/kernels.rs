//! Forward and backward kernels on plain tensors. The tape wires these up;
//! they are also exposed directly for gradient-free inference.

use super::{check_kernel_dims, ConvKernel, Dims, Result, Tensor, TensorError};

/// Winning channel per (batch, row, col) cell of a channel max.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgIndexMap {
    dims: Dims,
    indices: Vec<u32>,
}

impl ArgIndexMap {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn at(&self, b: usize, i: usize, j: usize) -> usize {
        self.indices[self.dims.index(b, 0, i, j)] as usize
    }
}

/// Zero-padded, stride-1 cross-correlation with odd square kernels; output keeps
/// the input's spatial size.
pub fn conv2d_same(input: &Tensor, kernel: &ConvKernel) -> Result<Tensor> {
    conv_forward(input, kernel.weights())
}

pub fn channel_max(input: &Tensor) -> Result<(Tensor, ArgIndexMap)> {
    let d = input.dims();
    if d.channels == 0 {
        return Err(TensorError::Validation(
            "channel_max needs at least one channel".into(),
        ));
    }
    let out_dims = Dims::new(d.batch, 1, d.height, d.width);
    let plane = d.plane();
    let mut out = Vec::with_capacity(out_dims.len());
    let mut indices = Vec::with_capacity(out_dims.len());
    let data = input.data();
    for b in 0..d.batch {
        let base = b * d.channels * plane;
        for p in 0..plane {
            let mut best = data[base + p];
            let mut arg = 0u32;
            for c in 1..d.channels {
                let v = data[base + c * plane + p];
                // strict comparison: ties go to the lowest channel
                if v > best {
                    best = v;
                    arg = c as u32;
                }
            }
            out.push(best);
            indices.push(arg);
        }
    }
    Ok((
        Tensor::from_vec(out_dims, out)?,
        ArgIndexMap {
            dims: out_dims,
            indices,
        },
    ))
}

#[inline]
pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn leaky_relu_scalar(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    input.map(sigmoid_scalar)
}

pub fn leaky_relu(input: &Tensor, slope: f64) -> Tensor {
    input.map(|x| leaky_relu_scalar(x, slope))
}

/// Row range `i` such that `i + d - pad` stays inside `0..len`.
#[inline]
fn valid_range(len: usize, d: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(d);
    let hi = (len + pad).saturating_sub(d).min(len);
    (lo, hi.max(lo))
}

pub(crate) fn check_conv_shapes(input: Dims, weights: Dims) -> Result<()> {
    check_kernel_dims(weights)?;
    if input.channels != weights.channels {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d_same",
            left: input,
            right: weights,
        });
    }
    Ok(())
}

/// Columns processed together; keeps a slab of the column matrix in cache.
const COL_BLOCK: usize = 256;

/// Convolutions run as matrix products over a column matrix with one row per
/// (in-channel, tap) and one column per (batch, row, col) output cell.
struct Geometry {
    input: Dims,
    f: usize,
    pad: usize,
    rows: usize,
    cols: usize,
}

impl Geometry {
    fn new(input: Dims, f: usize) -> Self {
        Self {
            input,
            f,
            pad: (f - 1) / 2,
            rows: input.channels * f * f,
            cols: input.batch * input.plane(),
        }
    }

    /// Calls `visit(row, src_offset, dst_offset, span)` for every contiguous
    /// run shared by the input tensor and the column matrix.
    fn for_each_run(&self, mut visit: impl FnMut(usize, usize, usize, usize)) {
        let Dims {
            batch,
            channels,
            height: h,
            width: w,
        } = self.input;
        let (f, pad, plane) = (self.f, self.pad, self.input.plane());
        for c in 0..channels {
            for di in 0..f {
                let (i0, i1) = valid_range(h, di, pad);
                for dj in 0..f {
                    let (j0, j1) = valid_range(w, dj, pad);
                    if j0 >= j1 {
                        continue;
                    }
                    let r = (c * f + di) * f + dj;
                    for b in 0..batch {
                        for i in i0..i1 {
                            let src = ((b * channels + c) * h + i + di - pad) * w + j0 + dj - pad;
                            let dst = r * self.cols + b * plane + i * w + j0;
                            visit(r, src, dst, j1 - j0);
                        }
                    }
                }
            }
        }
    }

    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        if self.f == 1 {
            let d = self.input;
            return to_channel_major(x, d.batch, d.channels, d.plane());
        }
        let mut col = vec![0.0; self.rows * self.cols];
        self.for_each_run(|_, src, dst, n| col[dst..dst + n].copy_from_slice(&x[src..src + n]));
        col
    }

    fn col2im(&self, col: &[f64]) -> Vec<f64> {
        if self.f == 1 {
            let d = self.input;
            return to_batch_major(col, d.batch, d.channels, d.plane());
        }
        let mut x = vec![0.0; self.input.len()];
        self.for_each_run(|_, src, dst, n| {
            for (a, b) in x[src..src + n].iter_mut().zip(&col[dst..dst + n]) {
                *a += b;
            }
        });
        x
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (d, s) in y.iter_mut().zip(x) {
        *d += alpha * s;
    }
}

/// Dot product with four independent partial sums (lets the loop vectorize).
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// (B, O, H, W) <-> (O, B * H * W).
fn to_channel_major(x: &[f64], batch: usize, channels: usize, plane: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for o in 0..channels {
        for b in 0..batch {
            out.extend_from_slice(&x[(b * channels + o) * plane..][..plane]);
        }
    }
    out
}

fn to_batch_major(x: &[f64], batch: usize, channels: usize, plane: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for b in 0..batch {
        for o in 0..channels {
            out.extend_from_slice(&x[(o * batch + b) * plane..][..plane]);
        }
    }
    out
}

fn col_blocks(cols: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..cols)
        .step_by(COL_BLOCK)
        .map(move |s| (s, COL_BLOCK.min(cols - s)))
}

pub(crate) fn conv_forward(input: &Tensor, weights: &Tensor) -> Result<Tensor> {
    let (id, wd) = (input.dims(), weights.dims());
    check_conv_shapes(id, wd)?;
    let g = Geometry::new(id, wd.height);
    let col = g.im2col(input.data());
    let k = weights.data();
    let outs = wd.batch;
    let mut tmp = vec![0.0; outs * g.cols];
    for (start, len) in col_blocks(g.cols) {
        for o in 0..outs {
            let dst = &mut tmp[o * g.cols + start..][..len];
            for (r, &wt) in k[o * g.rows..][..g.rows].iter().enumerate() {
                axpy(wt, &col[r * g.cols + start..][..len], dst);
            }
        }
    }
    let out_dims = Dims::new(id.batch, outs, id.height, id.width);
    Tensor::from_vec(out_dims, to_batch_major(&tmp, id.batch, outs, id.plane()))
}

/// Gradient with respect to the convolution input.
pub(crate) fn conv_backward_input(grad_out: &Tensor, weights: &Tensor, input_dims: Dims) -> Tensor {
    let (gd, wd) = (grad_out.dims(), weights.dims());
    let g = Geometry::new(input_dims, wd.height);
    let go = to_channel_major(grad_out.data(), gd.batch, gd.channels, gd.plane());
    let k = weights.data();
    let mut gcol = vec![0.0; g.rows * g.cols];
    for (start, len) in col_blocks(g.cols) {
        for r in 0..g.rows {
            let dst = &mut gcol[r * g.cols + start..][..len];
            for o in 0..gd.channels {
                axpy(k[o * g.rows + r], &go[o * g.cols + start..][..len], dst);
            }
        }
    }
    Tensor::from_vec(input_dims, g.col2im(&gcol)).expect("input dims")
}

/// Gradient with respect to the kernel weights.
pub(crate) fn conv_backward_weights(
    grad_out: &Tensor,
    input: &Tensor,
    weight_dims: Dims,
) -> Tensor {
    let gd = grad_out.dims();
    let g = Geometry::new(input.dims(), weight_dims.height);
    let col = g.im2col(input.data());
    let go = to_channel_major(grad_out.data(), gd.batch, gd.channels, gd.plane());
    let mut gw = vec![0.0; weight_dims.len()];
    for (start, len) in col_blocks(g.cols) {
        for o in 0..gd.channels {
            let gro = &go[o * g.cols + start..][..len];
            for r in 0..g.rows {
                gw[o * g.rows + r] += dot(gro, &col[r * g.cols + start..][..len]);
            }
        }
    }
    Tensor::from_vec(weight_dims, gw).expect("weight dims")
}
