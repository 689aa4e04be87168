//! Imitation training: cross-entropy against expert moves, RMSProp updates,
//! divergence detection and resumable state.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::PlanningSample;
use crate::models::{
    argmax, loss_graph, param_layout, Checkpoint, EncodedBatch, ModelConfig, ModelError,
    ModelParams,
};
use crate::tensor::Tensor;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("invalid training data: {0}")]
    Data(String),
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DivergenceRule {
    pub grad_norm_limit: f64,
    /// Epoch-mean loss above this multiple of the first epoch's median batch
    /// loss counts as a strike.
    pub loss_ratio: f64,
    /// Consecutive strikes that end the run.
    pub patience: usize,
}

impl Default for DivergenceRule {
    fn default() -> Self {
        Self {
            grad_norm_limit: 1e6,
            loss_ratio: 100.0,
            patience: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    /// Global-norm clipping threshold; off when `None`.
    pub grad_clip: Option<f64>,
    /// Seeds the weight initializer and the per-epoch shuffles.
    pub seed: u64,
    /// Samples per forward/backward pass inside a batch. Only affects speed
    /// and memory; chunk gradients are combined in a fixed order.
    pub chunk_size: usize,
    pub divergence: DivergenceRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            batch_size: 256,
            epochs: 30,
            rmsprop_decay: 0.9,
            rmsprop_eps: 1e-8,
            grad_clip: None,
            seed: 0,
            chunk_size: 32,
            divergence: DivergenceRule::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 || self.chunk_size == 0 {
            return bad("batch and chunk sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return bad(format!("decay {} must lie in [0, 1)", self.rmsprop_decay));
        }
        if !(self.rmsprop_eps.is_finite() && self.rmsprop_eps > 0.0) {
            return bad("rmsprop epsilon must be positive".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("clip threshold {c} must be positive"));
            }
        }
        let d = &self.divergence;
        if !(d.grad_norm_limit > 0.0 && d.loss_ratio > 0.0) || d.patience == 0 {
            return bad("divergence thresholds must be positive".into());
        }
        Ok(())
    }
}

/// RMSProp: `s = d s + (1 - d) g^2`, `w -= lr g / (sqrt(s) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub eps: f64,
    /// Running mean of squared gradients, one tensor per parameter tensor.
    pub sq: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(cfg: &TrainConfig, params: &ModelParams) -> Self {
        Self {
            learning_rate: cfg.learning_rate,
            decay: cfg.rmsprop_decay,
            eps: cfg.rmsprop_eps,
            sq: params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.dims()))
                .collect(),
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &[Tensor]) {
        let (lr, d, eps) = (self.learning_rate, self.decay, self.eps);
        for ((w, s), g) in params
            .tensors_mut()
            .into_iter()
            .zip(&mut self.sq)
            .zip(grads)
        {
            for ((w, s), &g) in w.data_mut().iter_mut().zip(s.data_mut()).zip(g.data()) {
                *s = d * *s + (1.0 - d) * g * g;
                *w -= lr * g / (s.sqrt() + eps);
            }
        }
    }
}

pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Tracks the three divergence triggers across a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceMonitor {
    pub rule: DivergenceRule,
    /// Median batch loss of the first epoch.
    pub baseline: Option<f64>,
    pub strikes: usize,
}

impl DivergenceMonitor {
    pub fn new(rule: DivergenceRule) -> Self {
        Self {
            rule,
            baseline: None,
            strikes: 0,
        }
    }

    /// Immediate triggers, checked on every batch.
    pub fn check_batch(&self, loss: f64, grad_norm: f64) -> Option<String> {
        if !loss.is_finite() {
            return Some(format!("non-finite loss {loss}"));
        }
        if !grad_norm.is_finite() || grad_norm > self.rule.grad_norm_limit {
            return Some(format!(
                "gradient norm {grad_norm:.3e} above {:.1e}",
                self.rule.grad_norm_limit
            ));
        }
        None
    }

    /// Slow trigger, checked once per epoch with that epoch's batch losses.
    pub fn end_epoch(&mut self, batch_losses: &[f64]) -> Option<String> {
        if batch_losses.is_empty() {
            return None;
        }
        let mean = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
        let Some(base) = self.baseline else {
            self.baseline = Some(median(batch_losses));
            return None;
        };
        if mean > self.rule.loss_ratio * base {
            self.strikes += 1;
        } else {
            self.strikes = 0;
        }
        (self.strikes >= self.rule.patience).then(|| {
            format!(
                "epoch-mean loss above {}x the first-epoch median ({base:.4}) for {} epochs",
                self.rule.loss_ratio, self.strikes
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Diverged { epoch: usize, reason: String },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Completed => "completed",
            RunStatus::Diverged { .. } => "diverged",
        }
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Fraction of training samples whose pre-update argmax matched the label.
    pub train_accuracy: f64,
    pub max_grad_norm: f64,
    pub batches: usize,
    /// Excluded from determinism comparisons.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_samples: usize,
    pub epochs: Vec<EpochRecord>,
    pub status: RunStatus,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub optimizer: RmsProp,
    pub monitor: DivergenceMonitor,
    pub record: RunRecord,
}

#[derive(Serialize, Deserialize)]
struct SavedState {
    monitor: DivergenceMonitor,
    record: RunRecord,
}

const SQ_PREFIX: &str = "opt.sq.";

impl TrainState {
    pub fn new(model: ModelConfig, train: TrainConfig) -> Result<Self, TrainError> {
        train.validate()?;
        let params = ModelParams::init(&model, train.seed)?;
        Ok(Self {
            optimizer: RmsProp::new(&train, &params),
            monitor: DivergenceMonitor::new(train.divergence.clone()),
            params,
            record: RunRecord {
                model,
                train,
                train_samples: 0,
                epochs: Vec::new(),
                status: RunStatus::Running,
            },
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.record.epochs.len()
    }

    pub fn is_finished(&self) -> bool {
        self.record.status != RunStatus::Running
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let model = &self.record.model;
        let mut ck = Checkpoint::new(model.clone(), self.params.clone());
        ck.extra = param_layout(model)
            .into_iter()
            .zip(&self.optimizer.sq)
            .map(|((name, _), t)| (format!("{SQ_PREFIX}{name}"), t.clone()))
            .collect();
        ck.state = serde_json::to_value(SavedState {
            monitor: self.monitor.clone(),
            record: self.record.clone(),
        })
        .expect("state serializes");
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, TrainError> {
        let saved: SavedState = serde_json::from_value(ck.state.clone()).map_err(|e| {
            TrainError::Resume(format!("checkpoint carries no training state: {e}"))
        })?;
        if saved.record.model != ck.config {
            return Err(TrainError::Resume(
                "model configuration differs from the run record".into(),
            ));
        }
        saved.record.train.validate()?;
        let sq = param_layout(&ck.config)
            .into_iter()
            .map(|(name, dims)| {
                let t = ck.extra(&format!("{SQ_PREFIX}{name}")).ok_or_else(|| {
                    TrainError::Resume(format!("missing optimizer state for {name}"))
                })?;
                if t.dims() != dims {
                    return Err(TrainError::Resume(format!(
                        "optimizer state for {name} has shape {}",
                        t.dims()
                    )));
                }
                Ok(t.clone())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut optimizer = RmsProp::new(&saved.record.train, &ck.params);
        optimizer.sq = sq;
        Ok(Self {
            params: ck.params.clone(),
            optimizer,
            monitor: saved.monitor,
            record: saved.record,
        })
    }
}

/// Mean loss, number of correct argmax predictions and mean gradients over
/// `samples`, evaluated `chunk` samples at a time.
pub struct BatchGradient {
    pub loss: f64,
    pub correct: usize,
    pub grads: Vec<Tensor>,
}

pub fn batch_gradient(
    model: &ModelConfig,
    params: &ModelParams,
    samples: &[&PlanningSample],
    chunk: usize,
) -> Result<BatchGradient, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Data("empty batch".into()));
    }
    let n = samples.len() as f64;
    let mut grads: Vec<Tensor> = params
        .tensors()
        .iter()
        .map(|t| Tensor::zeros(t.dims()))
        .collect();
    let (mut loss, mut correct) = (0.0, 0);
    for part in samples.chunks(chunk.max(1)) {
        let batch = EncodedBatch::from_refs(part.iter().copied())?;
        let g = loss_graph(model, params, &batch)?;
        let lg = g.tape.backward(g.loss).map_err(ModelError::from)?;
        let w = part.len() as f64 / n;
        loss += w * g.tape.value(g.loss).data()[0];
        let logits = g.tape.value(g.logits);
        correct += logits
            .data()
            .chunks(logits.dims().channels)
            .zip(&batch.labels)
            .filter(|(row, &label)| argmax(row) == label)
            .count();
        for (acc, v) in grads.iter_mut().zip(g.params.vars()) {
            if let Some(part_grad) = lg.get(v) {
                for (a, &b) in acc.data_mut().iter_mut().zip(part_grad.data()) {
                    *a += w * b;
                }
            }
        }
    }
    Ok(BatchGradient {
        loss,
        correct,
        grads,
    })
}

/// Deterministic sample order for `epoch` (0-based).
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + epoch as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

fn check_data(model: &ModelConfig, data: &[PlanningSample]) -> Result<(), TrainError> {
    let first = data
        .first()
        .ok_or_else(|| TrainError::Data("no training samples".into()))?;
    let size = (first.map.height(), first.map.width());
    if data.iter().any(|s| (s.map.height(), s.map.width()) != size) {
        return Err(TrainError::Data(
            "all samples must share one map size".into(),
        ));
    }
    model.validate()?;
    Ok(())
}

/// Runs epochs until `state` has `target_epochs` or stops. `on_epoch` sees the
/// state after every finished epoch (for logging and checkpointing).
pub fn run_epochs<F>(
    state: &mut TrainState,
    data: &[PlanningSample],
    target_epochs: usize,
    mut on_epoch: F,
) -> Result<(), TrainError>
where
    F: FnMut(&TrainState) -> Result<(), TrainError>,
{
    check_data(&state.record.model, data)?;
    if state.record.train_samples != 0 && state.record.train_samples != data.len() {
        return Err(TrainError::Resume(format!(
            "run started on {} samples, got {}",
            state.record.train_samples,
            data.len()
        )));
    }
    state.record.train_samples = data.len();
    let cfg = state.record.train.clone();
    let model = state.record.model.clone();
    while !state.is_finished() && state.epochs_done() < target_epochs {
        let epoch = state.epochs_done();
        let started = Instant::now();
        let order = epoch_order(cfg.seed, epoch, data.len());
        let mut losses = Vec::new();
        let (mut correct, mut max_norm) = (0usize, 0.0f64);
        let mut diverged = None;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&PlanningSample> = idx.iter().map(|&i| &data[i]).collect();
            let mut bg = batch_gradient(&model, &state.params, &batch, cfg.chunk_size)?;
            let norm = global_norm(&bg.grads);
            losses.push(bg.loss);
            correct += bg.correct;
            max_norm = max_norm.max(norm);
            if let Some(reason) = state.monitor.check_batch(bg.loss, norm) {
                diverged = Some(reason);
                break;
            }
            if let Some(c) = cfg.grad_clip {
                if norm > c {
                    let s = c / norm;
                    bg.grads
                        .iter_mut()
                        .for_each(|g| g.data_mut().iter_mut().for_each(|x| *x *= s));
                }
            }
            state.optimizer.step(&mut state.params, &bg.grads);
        }
        if diverged.is_none() {
            diverged = state.monitor.end_epoch(&losses);
        }
        let seen = (losses.len() * cfg.batch_size).min(data.len());
        state.record.epochs.push(EpochRecord {
            epoch: epoch + 1,
            mean_loss: losses.iter().sum::<f64>() / losses.len().max(1) as f64,
            train_accuracy: correct as f64 / seen.max(1) as f64,
            max_grad_norm: max_norm,
            batches: losses.len(),
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if let Some(reason) = diverged {
            state.record.status = RunStatus::Diverged {
                epoch: epoch + 1,
                reason,
            };
        } else if state.epochs_done() >= cfg.epochs {
            state.record.status = RunStatus::Completed;
        }
        on_epoch(state)?;
    }
    Ok(())
}

/// Fresh run for `train.epochs` epochs.
pub fn train(
    model: ModelConfig,
    train: TrainConfig,
    data: &[PlanningSample],
) -> Result<TrainState, TrainError> {
    let epochs = train.epochs;
    let mut state = TrainState::new(model, train)?;
    if epochs == 0 {
        state.record.status = RunStatus::Completed;
        return Ok(state);
    }
    run_epochs(&mut state, data, epochs, |_| Ok(()))?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{generate_map_samples, DatasetManifest};
    use crate::models::{decode_checkpoint, encode_checkpoint, loss_and_grad, Variant};

    fn data(size: usize, maps: usize, seed: u64) -> Vec<PlanningSample> {
        let m = DatasetManifest::new(size, maps, seed);
        (0..maps)
            .flat_map(|i| generate_map_samples(&m, i).unwrap())
            .collect()
    }

    fn small_model(v: Variant) -> ModelConfig {
        let mut c = ModelConfig::new(v, 3, 4);
        c.reward_hidden_channels = 16;
        c
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.learning_rate, c.batch_size, c.epochs), (0.002, 256, 30));
        assert_eq!(
            (c.rmsprop_decay, c.rmsprop_eps, c.grad_clip),
            (0.9, 1e-8, None)
        );
        assert!(c.validate().is_ok());
        let bad = TrainConfig {
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rmsprop_matches_hand_computation() {
        let model = ModelConfig::new(Variant::Vin, 3, 1);
        let mut p = ModelParams::zeros_like(&model).unwrap();
        let cfg = TrainConfig::default();
        let mut opt = RmsProp::new(&cfg, &p);
        let grads: Vec<Tensor> = p
            .tensors()
            .iter()
            .map(|t| Tensor::filled(t.dims(), 2.0))
            .collect();
        opt.step(&mut p, &grads);
        // s = 0.1 * 4 = 0.4; step = 0.002 * 2 / (sqrt(0.4) + 1e-8)
        let want = -0.002 * 2.0 / (0.4f64.sqrt() + 1e-8);
        assert!((p.vi_kernel.data()[0] - want).abs() < 1e-15);
        opt.step(&mut p, &grads);
        let s2: f64 = 0.9 * 0.4 + 0.1 * 4.0;
        let want2 = want - 0.002 * 2.0 / (s2.sqrt() + 1e-8);
        assert!((p.fc.data()[3] - want2).abs() < 1e-15);
    }

    #[test]
    fn median_and_monitor() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let mut m = DivergenceMonitor::new(DivergenceRule::default());
        assert!(m.check_batch(f64::NAN, 1.0).is_some());
        assert!(m.check_batch(1.0, 2e6).is_some());
        assert!(m.check_batch(1.0, f64::INFINITY).is_some());
        assert!(m.check_batch(1.0, 10.0).is_none());
        assert!(m.end_epoch(&[2.0, 2.0]).is_none());
        assert!(m.end_epoch(&[500.0]).is_none());
        assert!(m.end_epoch(&[500.0]).is_none());
        assert!(m.end_epoch(&[1.0]).is_none());
        assert_eq!(m.strikes, 0);
        for _ in 0..2 {
            assert!(m.end_epoch(&[201.0]).is_none());
        }
        assert!(m.end_epoch(&[201.0]).is_some());
    }

    #[test]
    fn chunked_gradient_equals_whole_batch() {
        let d = data(8, 3, 1);
        let refs: Vec<&PlanningSample> = d.iter().collect();
        let model = small_model(Variant::GsVin);
        let p = ModelParams::init(&model, 3).unwrap();
        let whole = batch_gradient(&model, &p, &refs, 1000).unwrap();
        let chunked = batch_gradient(&model, &p, &refs, 5).unwrap();
        let (l, g) = loss_and_grad(&model, &p, &EncodedBatch::new(&d).unwrap()).unwrap();
        assert!((whole.loss - l).abs() < 1e-14);
        assert!((chunked.loss - l).abs() < 1e-12);
        assert_eq!(whole.correct, chunked.correct);
        for (a, b) in chunked.grads.iter().zip(&g) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn small_step_decreases_loss() {
        let d = data(8, 4, 2);
        let refs: Vec<&PlanningSample> = d.iter().collect();
        for v in Variant::ALL {
            let model = small_model(v);
            let mut p = ModelParams::init(&model, 5).unwrap();
            let before = batch_gradient(&model, &p, &refs, 64).unwrap();
            for (w, g) in p.tensors_mut().into_iter().zip(&before.grads) {
                for (x, &gx) in w.data_mut().iter_mut().zip(g.data()) {
                    *x -= 1e-2 * gx;
                }
            }
            let after = batch_gradient(&model, &p, &refs, 64).unwrap();
            assert!(
                after.loss < before.loss,
                "{v}: {} -> {}",
                before.loss,
                after.loss
            );
        }
    }

    #[test]
    fn tiny_rmsprop_step_descends_on_single_samples() {
        let d = data(8, 20, 11);
        let cfg = TrainConfig {
            learning_rate: 1e-6,
            ..TrainConfig::default()
        };
        for v in Variant::ALL {
            let model = ModelConfig::for_map(v, 8, 8, 7, 1.0).unwrap();
            let p0 = ModelParams::init(&model, 3).unwrap();
            for s in d.iter().step_by(6).take(20) {
                let before = batch_gradient(&model, &p0, &[s], 1).unwrap();
                let mut p = p0.clone();
                RmsProp::new(&cfg, &p).step(&mut p, &before.grads);
                let after = batch_gradient(&model, &p, &[s], 1).unwrap();
                assert!(
                    after.loss < before.loss,
                    "{v}: {} -> {}",
                    before.loss,
                    after.loss
                );
            }
        }
    }

    #[test]
    fn epoch_order_is_a_seeded_permutation() {
        let a = epoch_order(3, 0, 50);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_eq!(a, epoch_order(3, 0, 50));
        assert_ne!(a, epoch_order(3, 1, 50));
        assert_ne!(a, epoch_order(4, 0, 50));
    }

    #[test]
    fn overfits_a_tiny_dataset() {
        let d = data(8, 4, 7);
        let cfg = TrainConfig {
            batch_size: 8,
            epochs: 100,
            learning_rate: 0.005,
            ..TrainConfig::default()
        };
        let state = train(small_model(Variant::GsVin), cfg, &d).unwrap();
        assert_eq!(state.record.status, RunStatus::Completed);
        let first = &state.record.epochs[0];
        let last = state.record.epochs.last().unwrap();
        assert!(
            last.mean_loss < 0.5 * first.mean_loss,
            "{} -> {}",
            first.mean_loss,
            last.mean_loss
        );
        assert!(last.train_accuracy > 0.8, "{}", last.train_accuracy);
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let d = data(8, 3, 3);
        let cfg = TrainConfig {
            batch_size: 5,
            epochs: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(small_model(Variant::Virn), cfg.clone(), &d).unwrap();
        let b = train(small_model(Variant::Virn), cfg, &d).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.optimizer, b.optimizer);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let d = data(8, 6, 4);
        let cfg = TrainConfig {
            learning_rate: 1e3,
            batch_size: 16,
            epochs: 10,
            ..TrainConfig::default()
        };
        let state = train(small_model(Variant::GsVin), cfg, &d).unwrap();
        assert!(
            state.record.status.is_diverged(),
            "{:?}",
            state.record.epochs
        );
    }

    #[test]
    fn resume_continues_the_same_trajectory() {
        let d = data(8, 3, 5);
        let cfg = TrainConfig {
            batch_size: 7,
            epochs: 4,
            seed: 2,
            ..TrainConfig::default()
        };
        let model = small_model(Variant::GsVin);
        let straight = train(model.clone(), cfg.clone(), &d).unwrap();

        let mut half = TrainState::new(model, cfg).unwrap();
        run_epochs(&mut half, &d, 2, |_| Ok(())).unwrap();
        let bytes = encode_checkpoint(&half.to_checkpoint());
        let mut resumed = TrainState::from_checkpoint(&decode_checkpoint(&bytes).unwrap()).unwrap();
        assert_eq!(resumed.epochs_done(), 2);
        run_epochs(&mut resumed, &d, 4, |_| Ok(())).unwrap();
        assert_eq!(resumed.params, straight.params);
        assert_eq!(resumed.record.status, RunStatus::Completed);
        let losses = |s: &TrainState| {
            s.record
                .epochs
                .iter()
                .map(|e| e.mean_loss)
                .collect::<Vec<_>>()
        };
        assert_eq!(losses(&resumed), losses(&straight));
    }

    #[test]
    fn resume_rejects_plain_weight_files() {
        let model = small_model(Variant::Vin);
        let ck = Checkpoint::new(model.clone(), ModelParams::init(&model, 0).unwrap());
        assert!(matches!(
            TrainState::from_checkpoint(&ck),
            Err(TrainError::Resume(_))
        ));
    }

    #[test]
    fn rejects_mixed_sizes_and_empty_data() {
        let mut d = data(8, 1, 1);
        d.extend(data(9, 1, 1));
        let model = small_model(Variant::Vin);
        assert!(matches!(
            train(model.clone(), TrainConfig::default(), &d),
            Err(TrainError::Data(_))
        ));
        assert!(matches!(
            train(model, TrainConfig::default(), &[]),
            Err(TrainError::Data(_))
        ));
    }
}
