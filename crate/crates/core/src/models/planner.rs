use super::params::{param_layout, BoundGs, BoundParams};
use super::{ModelConfig, ModelError, ModelParams, Variant};
use crate::gridworld::{Action, Cell, GridMap, PlanningSample, GOAL_MARKER};
use crate::tensor::{
    finite_diff_check, Dims, FdConfig, FdEval, FdReport, Result as TResult, Tape, Tensor,
    TensorError, Var,
};

/// Input image for a batch of maps: channel 0 marks obstacles with 1,
/// channel 1 holds [`GOAL_MARKER`] at the goal.
pub fn encode_maps<'a>(maps: impl IntoIterator<Item = &'a GridMap>) -> Result<Tensor, ModelError> {
    let maps: Vec<&GridMap> = maps.into_iter().collect();
    let first = maps
        .first()
        .ok_or_else(|| ModelError::Input("empty batch".into()))?;
    let (h, w) = (first.height(), first.width());
    if let Some(m) = maps.iter().find(|m| (m.height(), m.width()) != (h, w)) {
        return Err(ModelError::Input(format!(
            "mixed map sizes in one batch: {h}x{w} and {}x{}",
            m.height(),
            m.width()
        )));
    }
    let dims = Dims::new(maps.len(), 2, h, w);
    let mut data = vec![0.0; dims.len()];
    for (b, m) in maps.iter().enumerate() {
        let base = dims.index(b, 0, 0, 0);
        for (idx, &blocked) in m.obstacles().iter().enumerate() {
            if blocked {
                data[base + idx] = 1.0;
            }
        }
        let (gr, gc) = m.goal();
        data[dims.index(b, 1, gr, gc)] = GOAL_MARKER;
    }
    Ok(Tensor::from_vec(dims, data)?)
}

/// Encoded batch: input image, agent cells, expert action indices.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub input: Tensor,
    pub agents: Vec<Cell>,
    pub labels: Vec<usize>,
}

impl EncodedBatch {
    pub fn new(samples: &[PlanningSample]) -> Result<Self, ModelError> {
        Self::from_refs(samples)
    }

    pub fn from_refs<'a>(
        samples: impl IntoIterator<Item = &'a PlanningSample>,
    ) -> Result<Self, ModelError> {
        let samples: Vec<&PlanningSample> = samples.into_iter().collect();
        let input = encode_maps(samples.iter().map(|s| &s.map))?;
        Ok(Self {
            input,
            agents: samples.iter().map(|s| s.agent).collect(),
            labels: samples.iter().map(|s| s.expert_action.index()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// (B, 8, 1, 1) one-hot targets.
    pub fn one_hot(&self) -> Tensor {
        let dims = Dims::new(self.len(), Action::COUNT, 1, 1);
        Tensor::from_fn(
            dims,
            |b, a, _, _| if self.labels[b] == a { 1.0 } else { 0.0 },
        )
    }
}

/// Output of the value-iteration block.
#[derive(Debug, Clone)]
pub struct ViOutput {
    /// V_1 ... V_k, each (B, 1, m, n).
    pub values: Vec<Var>,
    /// Q maps of the last sweep, (B, A, m, n).
    pub q_final: Var,
}

impl ViOutput {
    pub fn v_final(&self) -> Var {
        *self.values.last().expect("at least one sweep")
    }
}

/// `k` sweeps of `Q = conv(stack(R, V), W)`, `V = max_a Q` from `V_0 = 0`.
///
/// The reward half of the kernel sees the same `R` on every sweep, so its
/// contribution is computed once and the stacked convolution is split in two.
pub fn vi_module(
    tape: &mut Tape,
    reward: Var,
    kernel: Var,
    iterations: usize,
) -> TResult<ViOutput> {
    if iterations == 0 {
        return Err(TensorError::Validation(
            "vi_module needs at least one sweep".into(),
        ));
    }
    if tape.dims(kernel).channels != 2 || tape.dims(reward).channels != 1 {
        return Err(TensorError::ShapeMismatch {
            op: "vi_module",
            left: tape.dims(reward),
            right: tape.dims(kernel),
        });
    }
    let w_r = tape.channel_slice(kernel, 0, 1)?;
    let w_v = tape.channel_slice(kernel, 1, 1)?;
    let from_reward = tape.conv2d_same(reward, w_r)?;
    let mut q = from_reward;
    let mut values = Vec::with_capacity(iterations);
    for t in 0..iterations {
        if t > 0 {
            let prev = *values.last().expect("previous sweep");
            let from_value = tape.conv2d_same(prev, w_v)?;
            q = tape.add(from_reward, from_value)?;
        }
        values.push(tape.channel_max(q)?.0);
    }
    Ok(ViOutput { values, q_final: q })
}

/// Runs the gated cell over `V_1 ... V_k` from zero cell and hidden state;
/// returns the final hidden state.
pub fn gs_module(tape: &mut Tape, values: &[Var], gs: &BoundGs, slope: f64) -> TResult<Var> {
    let first = *values
        .first()
        .ok_or_else(|| TensorError::Validation("gs_module needs at least one value map".into()))?;
    let d = tape.dims(first);
    let mut h = tape.constant(Tensor::zeros(d));
    let mut c = tape.constant(Tensor::zeros(d));
    let gate = |tape: &mut Tape, v: Var, h: Var, w: Var, u: Var| -> TResult<Var> {
        let a = tape.conv2d_same(v, w)?;
        let b = tape.conv2d_same(h, u)?;
        tape.add(a, b)
    };
    for &v in values {
        let f_pre = gate(tape, v, h, gs.w_f, gs.u_f)?;
        let f = tape.sigmoid(f_pre);
        let i_pre = gate(tape, v, h, gs.w_i, gs.u_i)?;
        let i = tape.sigmoid(i_pre);
        let c_pre = gate(tape, v, h, gs.w_c, gs.u_c)?;
        let c_tilde = tape.leaky_relu(c_pre, slope);
        let o_pre = gate(tape, v, h, gs.w_o, gs.u_o)?;
        let o = tape.sigmoid(o_pre);
        let keep = tape.hadamard(f, c)?;
        let write = tape.hadamard(i, c_tilde)?;
        c = tape.add(keep, write)?;
        let act = tape.leaky_relu(c, slope);
        h = tape.hadamard(o, act)?;
    }
    Ok(h)
}

/// `sum_k softmax(logits)_k V_k`.
pub fn attention_summarize(tape: &mut Tape, values: &[Var], logits: Var) -> TResult<Var> {
    tape.softmax_weighted_sum(values, logits)
}

/// Per-cell Q maps fed to the action head, (B, A, m, n).
pub fn q_maps(
    tape: &mut Tape,
    cfg: &ModelConfig,
    p: &BoundParams,
    input: Var,
) -> Result<Var, ModelError> {
    let hidden = tape.conv2d_same(input, p.reward_hidden)?;
    let hidden = tape.leaky_relu(hidden, cfg.leaky_slope);
    let reward = tape.conv2d_same(hidden, p.reward_out)?;
    let vi = vi_module(tape, reward, p.vi_kernel, cfg.iterations)?;
    let summary = match cfg.variant {
        Variant::Vin => return Ok(vi.q_final),
        Variant::Virn => {
            let logits = p
                .attention
                .ok_or_else(|| ModelError::Params("missing attention logits".into()))?;
            attention_summarize(tape, &vi.values, logits)?
        }
        Variant::GsVin => {
            let gs =
                p.gs.ok_or_else(|| ModelError::Params("missing gate kernels".into()))?;
            gs_module(tape, &vi.values, &gs, cfg.leaky_slope)?
        }
    };
    let x = tape.stack_channels(reward, summary)?;
    Ok(tape.conv2d_same(x, p.vi_kernel)?)
}

/// Action logits at the agent cells, (B, 8, 1, 1).
pub fn forward(
    tape: &mut Tape,
    cfg: &ModelConfig,
    p: &BoundParams,
    input: Var,
    agents: &[Cell],
) -> Result<Var, ModelError> {
    let q = q_maps(tape, cfg, p, input)?;
    let at_agent = tape.gather_cells(q, agents)?;
    Ok(tape.conv2d_same(at_agent, p.fc)?)
}

/// Mean cross-entropy of a batch plus the tape it was recorded on.
pub struct LossGraph {
    pub tape: Tape,
    pub params: BoundParams,
    pub logits: Var,
    pub loss: Var,
}

pub fn loss_graph(
    cfg: &ModelConfig,
    params: &ModelParams,
    batch: &EncodedBatch,
) -> Result<LossGraph, ModelError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true);
    let input = tape.constant(batch.input.clone());
    let logits = forward(&mut tape, cfg, &bound, input, &batch.agents)?;
    let loss = tape.softmax_cross_entropy(logits, &batch.one_hot())?;
    Ok(LossGraph {
        tape,
        params: bound,
        logits,
        loss,
    })
}

/// Loss and per-parameter gradients (layout order) for one batch.
pub fn loss_and_grad(
    cfg: &ModelConfig,
    params: &ModelParams,
    batch: &EncodedBatch,
) -> Result<(f64, Vec<Tensor>), ModelError> {
    let g = loss_graph(cfg, params, batch)?;
    let grads = g.tape.backward(g.loss)?;
    let loss = g.tape.value(g.loss).data()[0];
    let out = g
        .params
        .vars()
        .into_iter()
        .map(|v| grads.get_or_zeros(v, g.tape.dims(v)))
        .collect();
    Ok((loss, out))
}

/// A configured planner ready for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Planner {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Planner {
    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self, ModelError> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self { config, params })
    }

    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let params = ModelParams::init(&config, seed)?;
        Ok(Self { config, params })
    }

    /// Action logits for each sample, (B, 8, 1, 1).
    pub fn logits(&self, batch: &EncodedBatch) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let input = tape.constant(batch.input.clone());
        let out = forward(&mut tape, &self.config, &p, input, &batch.agents)?;
        Ok(tape.value(out).clone())
    }

    /// Logits for every cell of one map at once, (1, 8, m, n).
    pub fn logits_map(&self, map: &GridMap) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let input = tape.constant(encode_maps([map])?);
        let q = q_maps(&mut tape, &self.config, &p, input)?;
        let out = tape.conv2d_same(q, p.fc)?;
        Ok(tape.value(out).clone())
    }

    /// Greedy action per sample (lowest index on ties).
    pub fn predict(&self, batch: &EncodedBatch) -> Result<Vec<Action>, ModelError> {
        let logits = self.logits(batch)?;
        Ok(logits
            .data()
            .chunks(Action::COUNT)
            .map(|row| Action::from_index(argmax(row)).expect("8 logits"))
            .collect())
    }
}

/// Index of the largest entry; first wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Finite-difference check of [`loss_and_grad`] on a batch.
pub fn check_gradients(
    cfg: &ModelConfig,
    params: &ModelParams,
    batch: &EncodedBatch,
    fd: FdConfig,
) -> Result<FdReport, ModelError> {
    let (_, analytic) = loss_and_grad(cfg, params, batch)?;
    let mut flat: Vec<Tensor> = params.tensors().into_iter().cloned().collect();
    let mut failed = None;
    let report = finite_diff_check(
        &mut flat,
        &analytic,
        |ts| {
            let eval = || -> Result<FdEval, ModelError> {
                let named = param_layout(cfg)
                    .into_iter()
                    .map(|(n, _)| n.to_string())
                    .zip(ts.iter().cloned())
                    .collect();
                let p = ModelParams::from_named(cfg, named)?;
                let g = loss_graph(cfg, &p, batch)?;
                Ok(FdEval {
                    loss: g.tape.value(g.loss).data()[0],
                    signature: g.tape.branch_signature(),
                })
            };
            eval().unwrap_or_else(|e| {
                failed = Some(e);
                FdEval {
                    loss: f64::NAN,
                    signature: 0,
                }
            })
        },
        fd,
    );
    match failed {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{tabular_vi_with, DatasetManifest, Dynamics, RewardModel};
    use crate::models::crafted::{move_kernel, spreading_kernel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(size: usize, maps: usize, seed: u64) -> Vec<PlanningSample> {
        let manifest = DatasetManifest::new(size, maps, seed);
        (0..maps)
            .flat_map(|i| crate::gridworld::generate_map_samples(&manifest, i).unwrap())
            .collect()
    }

    fn scaled(params: &mut ModelParams, s: f64) {
        for t in params.tensors_mut() {
            for x in t.data_mut() {
                *x *= s;
            }
        }
    }

    #[test]
    fn vi_block_matches_tabular_value_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let (h, w) = (rng.gen_range(4..12), rng.gen_range(4..12));
            let reward: Vec<f64> = (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gamma = 0.9;
            let k = 1 + trial;
            let mut tape = Tape::new();
            let r = tape.constant(Tensor::from_vec(Dims::new(1, 1, h, w), reward.clone()).unwrap());
            let kern = tape.constant(move_kernel(3, gamma).unwrap());
            let out = vi_module(&mut tape, r, kern, k).unwrap();
            let map = GridMap::empty(h, w, (0, 0)).unwrap();
            let oracle = tabular_vi_with(
                &map,
                &RewardModel::State(reward),
                Dynamics::OpenBorder,
                gamma,
                k,
                0.0,
            );
            assert_eq!(oracle.iterations, k);
            for (a, b) in tape.value(out.v_final()).data().iter().zip(&oracle.values) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn vi_support_grows_by_kernel_radius() {
        for f in [3, 5] {
            let mut tape = Tape::new();
            let r = tape.constant(Tensor::from_fn(Dims::new(1, 1, 15, 15), |_, _, i, j| {
                if (i, j) == (7, 7) {
                    1.0
                } else {
                    0.0
                }
            }));
            let kern = tape.constant(spreading_kernel(f).unwrap());
            let out = vi_module(&mut tape, r, kern, 2).unwrap();
            for (t, &v) in out.values.iter().enumerate() {
                let radius = (t + 1) * (f - 1) / 2;
                let vals = tape.value(v);
                for i in 0..15usize {
                    for j in 0..15usize {
                        let inside = i.abs_diff(7).max(j.abs_diff(7)) <= radius;
                        assert_eq!(vals.at(0, 0, i, j) > 0.0, inside, "f={f} t={t} ({i},{j})");
                    }
                }
            }
        }
    }

    /// Center taps of 3x3 gate kernels act as scalar weights on a 1x1 map.
    fn scalar_gs(values: &[f64], w: [f64; 8], slope: f64) -> f64 {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let lrelu = |x: f64| if x >= 0.0 { x } else { slope * x };
        let (mut h, mut c) = (0.0, 0.0);
        for &v in values {
            let f = sig(w[0] * v + w[1] * h);
            let i = sig(w[2] * v + w[3] * h);
            let ct = lrelu(w[4] * v + w[5] * h);
            let o = sig(w[6] * v + w[7] * h);
            c = f * c + i * ct;
            h = o * lrelu(c);
        }
        h
    }

    #[test]
    fn gated_cell_matches_scalar_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let w: [f64; 8] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            let seq: Vec<f64> = (0..rng.gen_range(1..6))
                .map(|_| rng.gen_range(-3.0..3.0))
                .collect();
            let mut tape = Tape::new();
            let vars: Vec<Var> = seq
                .iter()
                .map(|&v| tape.constant(Tensor::scalar(v)))
                .collect();
            let mut kern = |x: f64| {
                let mut t =
                    Tensor::from_fn(Dims::new(1, 1, 3, 3), |_, _, _, _| rng.gen_range(-5.0..5.0));
                *t.at_mut(0, 0, 1, 1) = x;
                tape.constant(t)
            };
            let gs = BoundGs {
                w_f: kern(w[0]),
                u_f: kern(w[1]),
                w_i: kern(w[2]),
                u_i: kern(w[3]),
                w_c: kern(w[4]),
                u_c: kern(w[5]),
                w_o: kern(w[6]),
                u_o: kern(w[7]),
            };
            let h = gs_module(&mut tape, &vars, &gs, 0.01).unwrap();
            let got = tape.value(h).data()[0];
            let want = scalar_gs(&seq, w, 0.01);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn gated_cell_single_step_closed_form() {
        // one step from zero state: h = sig(w_o v) * lrelu(sig(w_i v) * lrelu(w_c v))
        let v = 0.7;
        let w = [0.3, 9.0, -0.4, 9.0, 1.5, 9.0, 0.2, 9.0];
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let expect = sig(0.2 * v) * (sig(-0.4 * v) * (1.5 * v));
        assert!((scalar_gs(&[v], w, 0.01) - expect).abs() < 1e-15);
    }

    #[test]
    fn attention_extremes() {
        let mut tape = Tape::new();
        let vals: Vec<Var> = (0..3)
            .map(|t| tape.constant(Tensor::filled(Dims::new(1, 1, 2, 2), t as f64)))
            .collect();
        let uniform = tape.constant(Tensor::zeros(Dims::new(1, 3, 1, 1)));
        let s = attention_summarize(&mut tape, &vals, uniform).unwrap();
        assert!(tape
            .value(s)
            .data()
            .iter()
            .all(|&x| (x - 1.0).abs() < 1e-12));
        let sharp = tape
            .constant(Tensor::from_vec(Dims::new(1, 3, 1, 1), vec![-800.0, 0.0, 800.0]).unwrap());
        let s = attention_summarize(&mut tape, &vals, sharp).unwrap();
        assert!(tape
            .value(s)
            .data()
            .iter()
            .all(|&x| (x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn input_encoding() {
        let s = samples(8, 2, 1);
        let batch = EncodedBatch::new(&s[..3]).unwrap();
        assert_eq!(batch.input.dims(), Dims::new(3, 2, 8, 8));
        let m = &s[0].map;
        let (gr, gc) = m.goal();
        assert_eq!(batch.input.at(0, 1, gr, gc), GOAL_MARKER);
        assert_eq!(batch.input.plane(0, 1).iter().sum::<f64>(), GOAL_MARKER);
        assert_eq!(
            batch.input.plane(0, 0).iter().sum::<f64>(),
            m.obstacle_count() as f64
        );
        let other = samples(9, 1, 1);
        assert!(encode_maps([&s[0].map, &other[0].map]).is_err());
        assert!(encode_maps(std::iter::empty()).is_err());
    }

    #[test]
    fn logit_map_agrees_with_pointwise_forward() {
        let s = samples(8, 1, 5);
        for v in Variant::ALL {
            let planner = Planner::init(ModelConfig::new(v, 5, 3), 2).unwrap();
            let full = planner.logits_map(&s[0].map).unwrap();
            let same: Vec<_> = s.iter().filter(|x| x.map == s[0].map).cloned().collect();
            let batch = EncodedBatch::new(&same).unwrap();
            let pointwise = planner.logits(&batch).unwrap();
            for (b, &(i, j)) in batch.agents.iter().enumerate() {
                for a in 0..8 {
                    assert!((full.at(0, a, i, j) - pointwise.at(b, a, 0, 0)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn out_of_bounds_agent_is_an_error() {
        let s = samples(8, 1, 5);
        let planner = Planner::init(ModelConfig::new(Variant::Vin, 3, 2), 0).unwrap();
        let mut batch = EncodedBatch::new(&s[..1]).unwrap();
        batch.agents[0] = (8, 0);
        assert!(planner.logits(&batch).is_err());
    }

    #[test]
    fn every_parameter_receives_gradient() {
        let s = samples(8, 4, 9);
        let batch = EncodedBatch::new(&s).unwrap();
        for v in Variant::ALL {
            let cfg = ModelConfig::new(v, 5, 3);
            let mut p = ModelParams::init(&cfg, 4).unwrap();
            scaled(&mut p, 20.0);
            let (loss, grads) = loss_and_grad(&cfg, &p, &batch).unwrap();
            assert!(loss.is_finite());
            for ((name, _), g) in param_layout(&cfg).iter().zip(&grads) {
                assert!(
                    g.data().iter().any(|&x| x != 0.0),
                    "{v}: {name} has zero gradient"
                );
            }
        }
    }

    #[test]
    fn initial_loss_is_near_uniform() {
        let s = samples(8, 4, 2);
        let batch = EncodedBatch::new(&s).unwrap();
        for v in Variant::ALL {
            let cfg = ModelConfig::new(v, 5, 3);
            let (loss, _) =
                loss_and_grad(&cfg, &ModelParams::init(&cfg, 0).unwrap(), &batch).unwrap();
            assert!((loss - 8f64.ln()).abs() < 1e-3, "{v}: {loss}");
        }
    }

    #[test]
    fn finite_differences_agree_small() {
        let s = samples(8, 1, 6);
        let batch = EncodedBatch::new(&s[..3]).unwrap();
        for v in Variant::ALL {
            let mut cfg = ModelConfig::new(v, 3, 3);
            cfg.reward_hidden_channels = 6;
            let mut p = ModelParams::init(&cfg, 1).unwrap();
            scaled(&mut p, 30.0);
            let fd = FdConfig {
                samples: 80,
                ..FdConfig::default()
            };
            let report = check_gradients(&cfg, &p, &batch, fd).unwrap();
            assert!(report.passed, "{v}: {report:?}");
        }
    }
}
