use std::path::PathBuf;

use clap::Args;
use gsvin::gridworld::{build_dataset, encode_dataset, TEST_FILE, TRAIN_FILE};

use super::{set, DataFlags, DataSettings};
use crate::config::load_config;
use crate::out::OutDir;
use crate::CliError;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML/JSON settings file (or a previous run's manifest.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataFlags,
    /// Generation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn resolve(args: &GenerateArgs) -> Result<DataSettings, CliError> {
    let mut s: DataSettings = load_config(args.config.as_deref(), "generate")?;
    args.data.apply(&mut s);
    set(&mut s.seed, args.seed);
    s.manifest()?;
    Ok(s)
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let settings = resolve(&args)?;
    let (train, test) = build_dataset(&settings.manifest()?)?;
    let out = OutDir::create(&args.out)?;
    out.write(TRAIN_FILE, &encode_dataset(&train))?;
    out.write(TEST_FILE, &encode_dataset(&test))?;
    out.write_manifest("generate", &settings)?;
    println!(
        "generated {}x{} maps: {} train samples, {} test samples -> {}",
        settings.size,
        settings.size,
        train.len(),
        test.len(),
        out.root().display()
    );
    Ok(())
}
