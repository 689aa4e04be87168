use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use gsvin::evaluation::{evaluate, EvalReport};
use gsvin::gridworld::{build_dataset, encode_dataset, Dataset, Split, TEST_FILE, TRAIN_FILE};
use gsvin::models::{
    decode_checkpoint, encode_checkpoint, ModelConfig, ModelError, Planner, Variant,
};
use gsvin::training::{run_epochs, RunRecord, RunStatus, TrainConfig, TrainError, TrainState};
use serde::{Deserialize, Serialize};

use super::{absolute, load_split, parse_variant, set, DataFlags, DataSettings};
use crate::config::load_config;
use crate::out::OutDir;
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.gck";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub variant: Variant,
    pub kernel_size: usize,
    pub k_prime: f64,
    /// Overrides the heuristic iteration count.
    pub iterations: Option<usize>,
    pub reward_hidden_channels: usize,
    /// Directory with `train.gwds` / `test.gwds`; generated from `dataset`
    /// into `<out>/data` when absent.
    pub data: Option<PathBuf>,
    pub dataset: DataSettings,
    pub train: TrainConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            variant: Variant::GsVin,
            kernel_size: 7,
            k_prime: 1.0,
            iterations: None,
            reward_hidden_channels: 150,
            data: None,
            dataset: DataSettings::default(),
            train: TrainConfig::default(),
        }
    }
}

impl TrainSettings {
    pub fn model(&self, height: usize, width: usize) -> Result<ModelConfig, CliError> {
        let mut m =
            ModelConfig::for_map(self.variant, height, width, self.kernel_size, self.k_prime)?;
        set(&mut m.iterations, self.iterations);
        m.reward_hidden_channels = self.reward_hidden_channels;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML/JSON settings file (or a previous run's manifest.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    /// VI kernel size f.
    #[arg(long = "f", alias = "kernel-size")]
    pub kernel_size: Option<usize>,
    /// Iteration coefficient k'.
    #[arg(long)]
    pub k_prime: Option<f64>,
    /// Fixed iteration count, overriding the heuristic.
    #[arg(long = "k")]
    pub iterations: Option<usize>,
    /// Hidden channels of the reward network.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Dataset directory from `generate`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub data_flags: DataFlags,
    /// Seed for generated data.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Global gradient-norm clip (off by default).
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Initialization and shuffling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from `<out>/checkpoint.gck` if present.
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn resolve(args: &TrainArgs) -> Result<TrainSettings, CliError> {
    let mut s: TrainSettings = load_config(args.config.as_deref(), "train")?;
    set(&mut s.variant, args.variant);
    set(&mut s.kernel_size, args.kernel_size);
    set(&mut s.k_prime, args.k_prime);
    if args.iterations.is_some() {
        s.iterations = args.iterations;
    }
    set(&mut s.reward_hidden_channels, args.hidden);
    if let Some(d) = &args.data {
        s.data = Some(absolute(d)?);
    }
    args.data_flags.apply(&mut s.dataset);
    set(&mut s.dataset.seed, args.data_seed);
    let t = &mut s.train;
    set(&mut t.epochs, args.epochs);
    set(&mut t.learning_rate, args.lr);
    set(&mut t.batch_size, args.batch_size);
    set(&mut t.chunk_size, args.chunk_size);
    set(&mut t.seed, args.seed);
    if args.grad_clip.is_some() {
        t.grad_clip = args.grad_clip;
    }
    t.validate()?;
    Ok(s)
}

/// Final `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub status: String,
    pub epochs_completed: usize,
    pub final_loss: Option<f64>,
    pub record: RunRecord,
    /// Test-split scores; absent for diverged runs or an empty test split.
    pub test: Option<EvalReport>,
    pub checkpoint: String,
}

fn datasets(settings: &TrainSettings, out: &OutDir) -> Result<(Dataset, Dataset), CliError> {
    match &settings.data {
        Some(dir) => Ok((
            load_split(dir, Split::Train)?,
            load_split(dir, Split::Test)?,
        )),
        None => {
            let (train, test) = build_dataset(&settings.dataset.manifest()?)?;
            out.write(&format!("data/{TRAIN_FILE}"), &encode_dataset(&train))?;
            out.write(&format!("data/{TEST_FILE}"), &encode_dataset(&test))?;
            Ok((train, test))
        }
    }
}

fn resume_state(
    out: &OutDir,
    model: &ModelConfig,
    settings: &TrainSettings,
) -> Result<Option<TrainState>, CliError> {
    let path = out.path(CHECKPOINT_FILE)?;
    if !path.exists() {
        return Ok(None);
    }
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(path.display(), e))?;
    let mut state = TrainState::from_checkpoint(&decode_checkpoint(&bytes)?)?;
    let mut recorded = state.record.train.clone();
    recorded.epochs = settings.train.epochs;
    if state.record.model != *model || recorded != settings.train {
        return Err(CliError::Usage(format!(
            "{} was written with different settings; only --epochs may change on resume",
            path.display()
        )));
    }
    state.record.train.epochs = settings.train.epochs;
    if state.record.status == RunStatus::Completed && state.epochs_done() < settings.train.epochs {
        state.record.status = RunStatus::Running;
    }
    Ok(Some(state))
}

fn records_jsonl(record: &RunRecord) -> String {
    let mut text = String::new();
    for e in &record.epochs {
        let _ = writeln!(
            text,
            "{}",
            serde_json::to_string(e).expect("epoch record serializes")
        );
    }
    text
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let settings = resolve(&args)?;
    let out = OutDir::create(&args.out)?;
    let (train_set, test_set) = datasets(&settings, &out)?;
    let first = train_set
        .samples
        .first()
        .ok_or_else(|| CliError::Usage("training split is empty".into()))?;
    let model = settings.model(first.map.height(), first.map.width())?;
    let resumed = if args.resume {
        resume_state(&out, &model, &settings)?
    } else {
        None
    };
    let mut state = match resumed {
        Some(s) => {
            println!("resuming after epoch {}", s.epochs_done());
            s
        }
        None => TrainState::new(model.clone(), settings.train.clone())?,
    };
    if settings.train.epochs == 0 {
        state.record.status = RunStatus::Completed;
    }
    println!(
        "training {} f={} k={} on {} samples",
        model.variant,
        model.kernel_size,
        model.iterations,
        train_set.len()
    );
    let io_err = |e: CliError| TrainError::Model(ModelError::Io(e.to_string()));
    run_epochs(
        &mut state,
        &train_set.samples,
        settings.train.epochs,
        |st| {
            let e = st.record.epochs.last().expect("an epoch just finished");
            println!(
                "epoch {:>3} loss {:.5} train_acc {:.4} max_grad {:.3e} {:.1}s",
                e.epoch, e.mean_loss, e.train_accuracy, e.max_grad_norm, e.wall_seconds
            );
            out.write(RECORDS_FILE, records_jsonl(&st.record).as_bytes())
                .map_err(io_err)?;
            out.write(CHECKPOINT_FILE, &encode_checkpoint(&st.to_checkpoint()))
                .map_err(io_err)?;
            Ok(())
        },
    )?;
    out.write(RECORDS_FILE, records_jsonl(&state.record).as_bytes())?;
    out.write(CHECKPOINT_FILE, &encode_checkpoint(&state.to_checkpoint()))?;
    let test = if state.record.status.is_diverged() || test_set.is_empty() {
        None
    } else {
        Some(evaluate(
            &Planner::new(model.clone(), state.params.clone())?,
            &test_set.samples,
        )?)
    };
    let summary = TrainSummary {
        status: state.record.status.label().to_string(),
        epochs_completed: state.epochs_done(),
        final_loss: state.record.epochs.last().map(|e| e.mean_loss),
        record: state.record.clone(),
        test: test.clone(),
        checkpoint: CHECKPOINT_FILE.to_string(),
    };
    out.write_json(SUMMARY_FILE, &summary)?;
    out.write_manifest("train", &settings)?;
    match (&state.record.status, test) {
        (RunStatus::Diverged { epoch, reason }, _) => {
            println!("diverged at epoch {epoch}: {reason}")
        }
        (_, Some(r)) => println!(
            "test accuracy {:.4} success {:.4} traj_diff {}",
            r.accuracy,
            r.success_rate,
            r.traj_diff.map_or("n/a".to_string(), |t| format!("{t:.5}"))
        ),
        _ => println!("{}", state.record.status.label()),
    }
    Ok(())
}
