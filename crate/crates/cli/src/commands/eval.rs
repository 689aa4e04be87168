use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gsvin::evaluation::{evaluate, teacher_forced, EvalReport};
use gsvin::gridworld::{build_dataset, Split};
use gsvin::models::{load_checkpoint, Planner};
use serde::{Deserialize, Serialize};

use super::{absolute, load_split, set, DataFlags, DataSettings};
use crate::config::load_config;
use crate::out::OutDir;
use crate::CliError;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub checkpoint: Option<PathBuf>,
    /// Replay the A* expert instead of a checkpoint.
    pub expert: bool,
    pub data: Option<PathBuf>,
    pub split: SplitArg,
    /// Used when `data` is absent; generated in memory.
    pub dataset: DataSettings,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            checkpoint: None,
            expert: false,
            data: None,
            split: SplitArg::Test,
            dataset: DataSettings::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// TOML/JSON settings file (or a previous run's manifest.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint from `train`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Score oracle replay of the expert labels.
    #[arg(long)]
    pub expert: bool,
    /// Dataset directory from `generate`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    #[command(flatten)]
    pub data_flags: DataFlags,
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Also write report.json and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn resolve(args: &EvalArgs) -> Result<EvalSettings, CliError> {
    let mut s: EvalSettings = load_config(args.config.as_deref(), "eval")?;
    if let Some(c) = &args.checkpoint {
        s.checkpoint = Some(absolute(c)?);
    }
    s.expert |= args.expert;
    if let Some(d) = &args.data {
        s.data = Some(absolute(d)?);
    }
    set(&mut s.split, args.split);
    args.data_flags.apply(&mut s.dataset);
    set(&mut s.dataset.seed, args.data_seed);
    if s.expert == s.checkpoint.is_some() {
        return Err(CliError::Usage(
            "give exactly one of --checkpoint and --expert".into(),
        ));
    }
    Ok(s)
}

pub fn report(settings: &EvalSettings) -> Result<EvalReport, CliError> {
    let split = match settings.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let data = match &settings.data {
        Some(dir) => load_split(dir, split)?,
        None => {
            let (train, test) = build_dataset(&settings.dataset.manifest()?)?;
            if split == Split::Train {
                train
            } else {
                test
            }
        }
    };
    match &settings.checkpoint {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            Ok(evaluate(
                &Planner::new(ck.config, ck.params)?,
                &data.samples,
            )?)
        }
        None => Ok(teacher_forced(&data.samples)?),
    }
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let settings = resolve(&args)?;
    let r = report(&settings)?;
    let text = serde_json::to_string_pretty(&r).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{text}");
    if let Some(dir) = &args.out {
        let out = OutDir::create(dir)?;
        out.write_json(REPORT_FILE, &r)?;
        out.write_manifest("eval", &settings)?;
    }
    Ok(())
}
