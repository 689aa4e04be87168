use std::path::PathBuf;

use clap::Args;
use gsvin::evaluation::{accuracy_table, csv_line, run_sweep, to_csv, SweepConfig, SweepRow};
use gsvin::gridworld::DensityRange;
use gsvin::models::Variant;
use serde::Serialize;

use super::{parse_density, parse_variant, set};
use crate::config::load_config;
use crate::out::OutDir;
use crate::CliError;

pub const CSV_FILE: &str = "sweep.csv";
pub const JSON_FILE: &str = "sweep.json";
pub const TABLE_FILE: &str = "table.txt";

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// TOML/JSON settings file (or a previous run's manifest.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    pub variants: Option<Vec<Variant>>,
    /// Map sides.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub f_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub kprime_list: Option<Vec<f64>>,
    /// One replicate per training seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub maps: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long, value_parser = parse_density)]
    pub density: Option<DensityRange>,
    /// Hidden channels of the reward network.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Cells trained concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn resolve(args: &SweepArgs) -> Result<SweepConfig, CliError> {
    let mut s: SweepConfig = load_config(args.config.as_deref(), "sweep")?;
    set(&mut s.variants, args.variants.clone());
    set(&mut s.sizes, args.sizes.clone());
    set(&mut s.kernel_sizes, args.f_list.clone());
    set(&mut s.k_primes, args.kprime_list.clone());
    set(&mut s.seeds, args.seeds.clone());
    set(&mut s.maps, args.maps);
    set(&mut s.data_seed, args.data_seed);
    set(&mut s.density, args.density);
    set(&mut s.hidden, args.hidden);
    set(&mut s.jobs, args.jobs);
    set(&mut s.train.epochs, args.epochs);
    set(&mut s.train.learning_rate, args.lr);
    set(&mut s.train.batch_size, args.batch_size);
    if args.grad_clip.is_some() {
        s.train.grad_clip = args.grad_clip;
    }
    s.validate()?;
    Ok(s)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config: &'a SweepConfig,
    cells: usize,
    diverged: usize,
    rows: &'a [SweepRow],
}

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    let cfg = resolve(&args)?;
    let out = OutDir::create(&args.out)?;
    println!("sweep: {} cells, {} at a time", cfg.cells().len(), cfg.jobs);
    let rows = run_sweep(&cfg, |row| println!("{}", csv_line(row)))?;
    let table = accuracy_table(&rows);
    out.write(CSV_FILE, to_csv(&rows).as_bytes())?;
    out.write_json(
        JSON_FILE,
        &SweepSummary {
            config: &cfg,
            cells: rows.len(),
            diverged: rows.iter().filter(|r| r.report.is_none()).count(),
            rows: &rows,
        },
    )?;
    out.write(TABLE_FILE, table.as_bytes())?;
    out.write_manifest("sweep", &cfg)?;
    print!("{table}");
    Ok(())
}
