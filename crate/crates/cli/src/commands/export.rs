use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use gsvin::evaluation::{accuracy_table, parse_csv, to_csv, SweepRow};
use serde::{Deserialize, Serialize};

use super::absolute;
use super::sweep::CSV_FILE;
use super::train::{TrainSummary, SUMMARY_FILE};
use crate::config::load_config;
use crate::out::OutDir;
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSettings {
    /// Directories searched recursively for train summaries and sweep CSVs.
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// TOML/JSON settings file (or a previous run's manifest.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run or sweep output directories.
    #[arg(long = "from")]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn find(dir: &Path, name: &str, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find(&p, name, found)?;
        } else if p.file_name().is_some_and(|f| f == name) {
            found.push(p);
        }
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "*".to_string(), |v| format!("{v:.6}"))
}

fn runs_csv(runs: &[(PathBuf, TrainSummary)]) -> String {
    let mut text = String::from(
        "source,variant,f,k,hidden,seed,epochs,status,final_loss,train_accuracy,test_accuracy,success_rate,traj_diff\n",
    );
    for (path, s) in runs {
        let m = &s.record.model;
        let t = s.test.as_ref();
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            path.display(),
            m.variant,
            m.kernel_size,
            m.iterations,
            m.reward_hidden_channels,
            s.record.train.seed,
            s.epochs_completed,
            s.status,
            opt(s.final_loss),
            opt(s.record.epochs.last().map(|e| e.train_accuracy)),
            opt(t.map(|r| r.accuracy)),
            opt(t.map(|r| r.success_rate)),
            opt(t.and_then(|r| r.traj_diff)),
        );
    }
    text
}

pub fn run(args: ExportArgs) -> Result<(), CliError> {
    let mut s: ExportSettings = load_config(args.config.as_deref(), "export")?;
    if !args.inputs.is_empty() {
        s.inputs = args
            .inputs
            .iter()
            .map(|p| absolute(p))
            .collect::<Result<_, _>>()?;
    }
    if s.inputs.is_empty() {
        return Err(CliError::Usage("nothing to export: pass --from DIR".into()));
    }
    let (mut summaries, mut csvs) = (Vec::new(), Vec::new());
    for dir in &s.inputs {
        find(dir, SUMMARY_FILE, &mut summaries)?;
        find(dir, CSV_FILE, &mut csvs)?;
    }
    let mut runs = Vec::new();
    for p in summaries {
        let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(p.display(), e))?;
        let summary: TrainSummary = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        runs.push((p, summary));
    }
    let mut rows: Vec<SweepRow> = Vec::new();
    for p in &csvs {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?;
        rows.extend(
            parse_csv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        );
    }
    let out = OutDir::create(&args.out)?;
    out.write("runs.csv", runs_csv(&runs).as_bytes())?;
    out.write("sweep.csv", to_csv(&rows).as_bytes())?;
    let table = accuracy_table(&rows);
    out.write("tables.txt", table.as_bytes())?;
    let mut md = String::from("# Report\n\n");
    let _ = writeln!(md, "- training runs: {}", runs.len());
    let _ = writeln!(md, "- sweep files: {} ({} cells)", csvs.len(), rows.len());
    let _ = writeln!(
        md,
        "- diverged: {} runs, {} cells",
        runs.iter().filter(|(_, r)| r.status == "diverged").count(),
        rows.iter().filter(|r| r.report.is_none()).count()
    );
    if !rows.is_empty() {
        let _ = write!(md, "\n## Sweep accuracy (%)\n\n```\n{table}```\n");
    }
    out.write("report.md", md.as_bytes())?;
    out.write_manifest("export", &s)?;
    println!(
        "exported {} runs and {} sweep cells -> {}",
        runs.len(),
        rows.len(),
        out.root().display()
    );
    Ok(())
}
