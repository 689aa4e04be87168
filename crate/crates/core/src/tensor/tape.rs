use super::kernels::{
    channel_max, conv_backward_input, conv_backward_weights, conv_forward, leaky_relu_scalar,
    sigmoid_scalar, ArgIndexMap,
};
use super::{Dims, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv {
        input: Var,
        kernel: Var,
    },
    ChannelMax {
        input: Var,
        arg: ArgIndexMap,
    },
    Sigmoid {
        input: Var,
    },
    LeakyRelu {
        input: Var,
        slope: f64,
    },
    Add {
        a: Var,
        b: Var,
    },
    Hadamard {
        a: Var,
        b: Var,
    },
    Stack {
        a: Var,
        b: Var,
    },
    ChannelSlice {
        input: Var,
        start: usize,
    },
    Gather {
        input: Var,
        cells: Vec<(usize, usize)>,
    },
    SoftmaxWeightedSum {
        values: Vec<Var>,
        logits: Var,
        weights: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum {
        input: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Linear record of executed operations. Values are immutable once recorded;
/// [`Tape::backward`] walks the record in reverse and never mutates it, so a
/// tape can be replayed any number of times.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Leaf gradients indexed by [`Var`]. Intermediate gradients are released
/// during the sweep; untracked leaves have none.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `var`, or zeros shaped like `like` when nothing flowed back.
    pub fn get_or_zeros(&self, var: Var, like: Dims) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf; receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Untracked leaf (inputs, constants).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn dims(&self, var: Var) -> Dims {
        self.nodes[var.0].value.dims()
    }

    pub fn conv2d_same(&mut self, input: Var, kernel: Var) -> Result<Var> {
        let value = conv_forward(self.value(input), self.value(kernel))?;
        let rg = self.tracked(input) || self.tracked(kernel);
        Ok(self.push(value, Op::Conv { input, kernel }, rg))
    }

    /// Channel max; also returns the winning-channel map.
    pub fn channel_max(&mut self, input: Var) -> Result<(Var, ArgIndexMap)> {
        let (value, arg) = channel_max(self.value(input))?;
        let rg = self.tracked(input);
        let out = self.push(
            value,
            Op::ChannelMax {
                input,
                arg: arg.clone(),
            },
            rg,
        );
        Ok((out, arg))
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let value = self.value(input).map(sigmoid_scalar);
        let rg = self.tracked(input);
        self.push(value, Op::Sigmoid { input }, rg)
    }

    pub fn leaky_relu(&mut self, input: Var, slope: f64) -> Var {
        let value = self.value(input).map(|x| leaky_relu_scalar(x, slope));
        let rg = self.tracked(input);
        self.push(value, Op::LeakyRelu { input, slope }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let rg = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self
            .value(a)
            .zip_map(self.value(b), "hadamard", |x, y| x * y)?;
        let rg = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Hadamard { a, b }, rg))
    }

    pub fn stack_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).stack_channels(self.value(b))?;
        let rg = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Stack { a, b }, rg))
    }

    /// Channels `start..start + count` of `input`.
    pub fn channel_slice(&mut self, input: Var, start: usize, count: usize) -> Result<Var> {
        let value = self.value(input).channel_range(start, count)?;
        let rg = self.tracked(input);
        Ok(self.push(value, Op::ChannelSlice { input, start }, rg))
    }

    /// Picks one (row, col) cell per batch element: (B, C, H, W) -> (B, C, 1, 1).
    pub fn gather_cells(&mut self, input: Var, cells: &[(usize, usize)]) -> Result<Var> {
        let d = self.dims(input);
        if cells.len() != d.batch {
            return Err(TensorError::Validation(format!(
                "gather_cells: {} cells for batch of {}",
                cells.len(),
                d.batch
            )));
        }
        if let Some(&(i, j)) = cells.iter().find(|&&(i, j)| i >= d.height || j >= d.width) {
            return Err(TensorError::Validation(format!(
                "cell ({i}, {j}) outside {}x{} map",
                d.height, d.width
            )));
        }
        let x = self.value(input);
        let out_dims = Dims::new(d.batch, d.channels, 1, 1);
        let value = Tensor::from_fn(out_dims, |b, c, _, _| {
            let (i, j) = cells[b];
            x.at(b, c, i, j)
        });
        let rg = self.tracked(input);
        Ok(self.push(
            value,
            Op::Gather {
                input,
                cells: cells.to_vec(),
            },
            rg,
        ))
    }

    /// `sum_t softmax(logits)_t * values[t]`; `logits` has shape (1, T, 1, 1).
    pub fn softmax_weighted_sum(&mut self, values: &[Var], logits: Var) -> Result<Var> {
        let ld = self.dims(logits);
        if values.is_empty() || ld.len() != values.len() {
            return Err(TensorError::Validation(format!(
                "softmax_weighted_sum: {} logits for {} values",
                ld.len(),
                values.len()
            )));
        }
        let weights = softmax(self.value(logits).data());
        let dims = self.dims(values[0]);
        let mut acc = Tensor::zeros(dims);
        for (&v, &s) in values.iter().zip(&weights) {
            let x = self.value(v);
            if x.dims() != dims {
                return Err(TensorError::ShapeMismatch {
                    op: "softmax_weighted_sum",
                    left: dims,
                    right: x.dims(),
                });
            }
            for (a, &b) in acc.data_mut().iter_mut().zip(x.data()) {
                *a += s * b;
            }
        }
        let rg = self.tracked(logits) || values.iter().any(|&v| self.tracked(v));
        Ok(self.push(
            acc,
            Op::SoftmaxWeightedSum {
                values: values.to_vec(),
                logits,
                weights,
            },
            rg,
        ))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`. `logits` is
    /// (B, A, 1, 1); `one_hot` must have the same shape with exactly one 1 per row.
    pub fn softmax_cross_entropy(&mut self, logits: Var, one_hot: &Tensor) -> Result<Var> {
        let d = self.dims(logits);
        if d.height != 1 || d.width != 1 || one_hot.dims() != d {
            return Err(TensorError::ShapeMismatch {
                op: "softmax_cross_entropy",
                left: d,
                right: one_hot.dims(),
            });
        }
        let labels = one_hot_labels(one_hot)?;
        let z = self.value(logits).data();
        let a = d.channels;
        let mut probs = Vec::with_capacity(z.len());
        let mut loss = 0.0;
        for (row, &label) in z.chunks(a).zip(&labels) {
            let (p, lse) = softmax_with_lse(row);
            loss += lse - row[label];
            probs.extend(p);
        }
        loss /= d.batch as f64;
        let rg = self.tracked(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            },
            rg,
        ))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let value = Tensor::scalar(self.value(input).sum());
        let rg = self.tracked(input);
        self.push(value, Op::Sum { input }, rg)
    }

    /// Fingerprint of every discrete branch taken so far (channel-max winners,
    /// leaky-relu sides). Two evaluations with equal fingerprints lie on the
    /// same smooth piece of the loss.
    pub fn branch_signature(&self) -> u64 {
        let mut h = Fnv::new();
        for node in &self.nodes {
            match &node.op {
                Op::ChannelMax { arg, .. } => {
                    for &i in arg.indices() {
                        h.write(i as u64);
                    }
                }
                Op::LeakyRelu { input, .. } => {
                    for &x in self.nodes[input.0].value.data() {
                        h.write((x >= 0.0) as u64);
                    }
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let ld = self.dims(loss);
        if ld.len() != 1 {
            return Err(TensorError::Usage(format!(
                "backward needs a scalar loss, got {ld}"
            )));
        }
        if !self.tracked(loss) {
            return Err(TensorError::Usage(
                "backward on a value that depends on no tracked parameter".into(),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Conv { input, kernel } => {
                    let x = self.value(*input);
                    let k = self.value(*kernel);
                    if self.tracked(*kernel) {
                        let gw = conv_backward_weights(&g, x, k.dims());
                        accumulate(&mut grads, *kernel, gw);
                    }
                    if self.tracked(*input) {
                        let gx = conv_backward_input(&g, k, x.dims());
                        accumulate(&mut grads, *input, gx);
                    }
                }
                Op::ChannelMax { input, arg } => {
                    let d = self.dims(*input);
                    let plane = d.plane();
                    let mut gx = Tensor::zeros(d);
                    let gxd = gx.data_mut();
                    for b in 0..d.batch {
                        for p in 0..plane {
                            let c = arg.indices()[b * plane + p] as usize;
                            gxd[(b * d.channels + c) * plane + p] = g.data()[b * plane + p];
                        }
                    }
                    accumulate(&mut grads, *input, gx);
                }
                Op::Sigmoid { input } => {
                    let gx = node
                        .value
                        .zip_map(&g, "sigmoid'", |y, gy| gy * y * (1.0 - y))?;
                    accumulate(&mut grads, *input, gx);
                }
                Op::LeakyRelu { input, slope } => {
                    let s = *slope;
                    let gx = self.value(*input).zip_map(&g, "leaky_relu'", |x, gy| {
                        if x >= 0.0 {
                            gy
                        } else {
                            s * gy
                        }
                    })?;
                    accumulate(&mut grads, *input, gx);
                }
                Op::Add { a, b } => {
                    if self.tracked(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.tracked(*b) {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Hadamard { a, b } => {
                    if self.tracked(*a) {
                        let ga = g.zip_map(self.value(*b), "hadamard'", |x, y| x * y)?;
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.tracked(*b) {
                        let gb = g.zip_map(self.value(*a), "hadamard'", |x, y| x * y)?;
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Stack { a, b } => {
                    let ca = self.dims(*a).channels;
                    let cb = self.dims(*b).channels;
                    if self.tracked(*a) {
                        accumulate(&mut grads, *a, g.channel_range(0, ca)?);
                    }
                    if self.tracked(*b) {
                        accumulate(&mut grads, *b, g.channel_range(ca, cb)?);
                    }
                }
                Op::ChannelSlice { input, start } => {
                    let d = self.dims(*input);
                    let count = g.dims().channels;
                    let p = d.plane();
                    let mut gx = Tensor::zeros(d);
                    for n in 0..d.batch {
                        let dst = (n * d.channels + start) * p;
                        gx.data_mut()[dst..dst + count * p]
                            .copy_from_slice(&g.data()[n * count * p..][..count * p]);
                    }
                    accumulate(&mut grads, *input, gx);
                }
                Op::Gather { input, cells } => {
                    let d = self.dims(*input);
                    let mut gx = Tensor::zeros(d);
                    for (b, &(i, j)) in cells.iter().enumerate() {
                        for c in 0..d.channels {
                            *gx.at_mut(b, c, i, j) += g.at(b, c, 0, 0);
                        }
                    }
                    accumulate(&mut grads, *input, gx);
                }
                Op::SoftmaxWeightedSum {
                    values,
                    logits,
                    weights,
                } => {
                    let mut dots = Vec::with_capacity(values.len());
                    for (&v, &s) in values.iter().zip(weights) {
                        let x = self.value(v);
                        dots.push(
                            g.data()
                                .iter()
                                .zip(x.data())
                                .map(|(a, b)| a * b)
                                .sum::<f64>(),
                        );
                        if self.tracked(v) {
                            accumulate(&mut grads, v, g.map(|gy| s * gy));
                        }
                    }
                    if self.tracked(*logits) {
                        let mean: f64 = weights.iter().zip(&dots).map(|(s, d)| s * d).sum();
                        let gl: Vec<f64> = weights
                            .iter()
                            .zip(&dots)
                            .map(|(s, d)| s * (d - mean))
                            .collect();
                        accumulate(
                            &mut grads,
                            *logits,
                            Tensor::from_vec(self.dims(*logits), gl)?,
                        );
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    let d = self.dims(*logits);
                    let scale = g.data()[0] / d.batch as f64;
                    let mut gl = probs.clone();
                    for (b, &label) in labels.iter().enumerate() {
                        gl[b * d.channels + label] -= 1.0;
                    }
                    gl.iter_mut().for_each(|v| *v *= scale);
                    accumulate(&mut grads, *logits, Tensor::from_vec(d, gl)?);
                }
                Op::Sum { input } => {
                    let d = self.dims(*input);
                    accumulate(&mut grads, *input, Tensor::filled(d, g.data()[0]));
                }
            }
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn softmax_with_lse(row: &[f64]) -> (Vec<f64>, f64) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let lse = max + total.ln();
    (exps.into_iter().map(|e| e / total).collect(), lse)
}

pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    softmax_with_lse(row).0
}

fn one_hot_labels(one_hot: &Tensor) -> Result<Vec<usize>> {
    let a = one_hot.dims().channels;
    one_hot
        .data()
        .chunks(a)
        .enumerate()
        .map(|(b, row)| {
            let ones: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1.0)
                .map(|(i, _)| i)
                .collect();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones.len() == 1 && zeros == a - 1 {
                Ok(ones[0])
            } else {
                Err(TensorError::Validation(format!(
                    "label row {b} is not one-hot: {row:?}"
                )))
            }
        })
        .collect()
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Self(0xcbf29ce484222325)
    }

    fn write(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn channel_slice_routes_gradient_to_its_range() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_fn(Dims::new(2, 4, 2, 2), |b, c, i, j| {
            (b + c + i + j) as f64
        }));
        let s = tape.channel_slice(x, 1, 2).unwrap();
        assert_eq!(tape.value(s).at(1, 0, 1, 1), 4.0);
        let loss = tape.sum(s);
        let g = tape.backward(loss).unwrap();
        let gx = g.get(x).unwrap();
        for b in 0..2 {
            for c in 0..4 {
                let want = if (1..3).contains(&c) { 1.0 } else { 0.0 };
                assert!(gx.plane(b, c).iter().all(|&v| v == want));
            }
        }
        assert!(tape.channel_slice(x, 3, 2).is_err());
    }

    fn one_hot(batch: usize, labels: &[usize]) -> Tensor {
        Tensor::from_fn(Dims::new(batch, 8, 1, 1), |b, c, _, _| {
            (c == labels[b]) as u8 as f64
        })
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::filled(Dims::new(2, 3, 2, 2), 0.3));
        let loss = tape.sum(x);
        let g = tape.backward(loss).unwrap();
        assert!(g.get(x).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn channel_max_routes_to_winner_only() {
        let mut tape = Tape::new();
        let data = vec![1.0, 5.0, 3.0, 2.0, 0.0, 4.0];
        let x = tape.param(Tensor::from_vec(Dims::new(1, 3, 1, 2), data).unwrap());
        let (m, _) = tape.channel_max(x).unwrap();
        let loss = tape.sum(m);
        let g = tape.backward(loss).unwrap();
        // cell 0 winner channel 1 (3.0), cell 1 winner channel 0 (5.0)
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn leaky_relu_gradient_is_one_at_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::from_vec(Dims::new(1, 1, 1, 3), vec![-2.0, 0.0, 2.0]).unwrap());
        let y = tape.leaky_relu(x, 0.01);
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.01, 1.0, 1.0]);
    }

    #[test]
    fn backward_on_untracked_graph_is_usage_error() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(1.0));
        let loss = tape.sum(x);
        assert!(matches!(tape.backward(loss), Err(TensorError::Usage(_))));
    }

    #[test]
    fn backward_needs_scalar() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(Dims::new(1, 1, 2, 2)));
        assert!(matches!(tape.backward(x), Err(TensorError::Usage(_))));
    }

    #[test]
    fn cross_entropy_uniform_is_ln8() {
        let mut tape = Tape::new();
        let z = tape.param(Tensor::zeros(Dims::new(3, 8, 1, 1)));
        let loss = tape
            .softmax_cross_entropy(z, &one_hot(3, &[0, 4, 7]))
            .unwrap();
        assert!((tape.value(loss).data()[0] - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_saturates_to_zero() {
        let mut tape = Tape::new();
        let mut logits = Tensor::zeros(Dims::new(1, 8, 1, 1));
        *logits.at_mut(0, 5, 0, 0) = 100.0;
        let z = tape.param(logits);
        let loss = tape.softmax_cross_entropy(z, &one_hot(1, &[5])).unwrap();
        assert!(tape.value(loss).data()[0] < 1e-40);
    }

    #[test]
    fn cross_entropy_matches_direct_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let logits = Tensor::from_fn(Dims::new(4, 8, 1, 1), |_, _, _, _| rng.gen_range(-3.0..3.0));
        let labels = [2usize, 0, 7, 3];
        let mut expected = 0.0;
        for (b, &l) in labels.iter().enumerate() {
            let denom: f64 = (0..8).map(|c| logits.at(b, c, 0, 0).exp()).sum();
            expected += -(logits.at(b, l, 0, 0).exp() / denom).ln();
        }
        expected /= 4.0;
        let mut tape = Tape::new();
        let z = tape.param(logits);
        let loss = tape.softmax_cross_entropy(z, &one_hot(4, &labels)).unwrap();
        assert!((tape.value(loss).data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_non_one_hot() {
        let mut tape = Tape::new();
        let z = tape.param(Tensor::zeros(Dims::new(1, 8, 1, 1)));
        let mut bad = one_hot(1, &[2]);
        *bad.at_mut(0, 3, 0, 0) = 1.0;
        assert!(matches!(
            tape.softmax_cross_entropy(z, &bad),
            Err(TensorError::Validation(_))
        ));
        let half = Tensor::filled(Dims::new(1, 8, 1, 1), 0.125);
        assert!(tape.softmax_cross_entropy(z, &half).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let row: Vec<f64> = (0..8).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let total: f64 = softmax(&row).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gather_rejects_out_of_bounds() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(Dims::new(1, 8, 4, 4)));
        assert!(tape.gather_cells(x, &[(4, 0)]).is_err());
        assert!(tape.gather_cells(x, &[(1, 1), (0, 0)]).is_err());
        let y = tape.gather_cells(x, &[(3, 3)]).unwrap();
        assert_eq!(tape.dims(y), Dims::new(1, 8, 1, 1));
    }

    #[test]
    fn replaying_backward_is_bitwise_identical() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_fn(Dims::new(2, 2, 5, 5), |_, _, _, _| {
            rng.gen_range(-1.0..1.0)
        }));
        let w = tape.param(Tensor::from_fn(Dims::new(8, 2, 3, 3), |_, _, _, _| {
            rng.gen_range(-1.0..1.0)
        }));
        let q = tape.conv2d_same(x, w).unwrap();
        let (v, _) = tape.channel_max(q).unwrap();
        let s = tape.sigmoid(v);
        let loss = tape.sum(s);
        let g1 = tape.backward(loss).unwrap();
        let g2 = tape.backward(loss).unwrap();
        let bits = |g: &Gradients| {
            g.get(w)
                .unwrap()
                .data()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&g1), bits(&g2));
    }
}
