use std::path::PathBuf;

use clap::{Args, ValueEnum};
use gsvin::checks::{
    determinism, gradient_fidelity, heuristic_table, oracle_closure, propagation_radius,
    vi_equivalence, CheckOutcome,
};
use gsvin::models::Variant;
use serde::{Deserialize, Serialize};

use super::set;
use crate::config::load_config;
use crate::out::OutDir;
use crate::CliError;

pub const RESULTS_FILE: &str = "selfcheck.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Finite differences against backprop for every variant.
    Gradient,
    /// Heuristic grid, tabular VI, A*/Dijkstra, oracle replay, propagation radius.
    Oracle,
    /// Generate, train and evaluate twice; compare bit for bit.
    Determinism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfcheckSettings {
    pub suites: Vec<Suite>,
    pub seed: u64,
    /// Parameters checked per variant.
    pub grad_samples: usize,
    /// Random maps for the tabular VI comparison.
    pub vi_maps: usize,
    /// Maps per size for the A*/Dijkstra comparison.
    pub oracle_maps: usize,
}

impl Default for SelfcheckSettings {
    fn default() -> Self {
        Self {
            suites: vec![Suite::Gradient, Suite::Oracle, Suite::Determinism],
            seed: 0,
            grad_samples: 200,
            vi_maps: 50,
            oracle_maps: 500,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// TOML/JSON settings file (or a previous run's manifest.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Suites to run (default: all).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub suite: Option<Vec<Suite>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub grad_samples: Option<usize>,
    #[arg(long)]
    pub vi_maps: Option<usize>,
    #[arg(long)]
    pub oracle_maps: Option<usize>,
    /// Also write selfcheck.json and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn outcomes(
    s: &SelfcheckSettings,
    mut report: impl FnMut(&CheckOutcome),
) -> Result<Vec<CheckOutcome>, CliError> {
    let mut all = Vec::new();
    let mut push = |o: CheckOutcome| {
        report(&o);
        all.push(o);
    };
    for suite in &s.suites {
        match suite {
            Suite::Gradient => {
                for v in Variant::ALL {
                    push(gradient_fidelity(v, s.grad_samples, s.seed)?);
                }
            }
            Suite::Oracle => {
                push(heuristic_table());
                push(vi_equivalence(s.vi_maps, 16, s.seed)?);
                push(oracle_closure(s.oracle_maps, &[8, 16, 32], s.seed)?);
                push(propagation_radius(32, &[3, 5, 7], &[1, 2, 3])?);
            }
            Suite::Determinism => push(determinism(s.seed)?),
        }
    }
    Ok(all)
}

pub fn run(args: SelfcheckArgs) -> Result<(), CliError> {
    let mut s: SelfcheckSettings = load_config(args.config.as_deref(), "selfcheck")?;
    set(&mut s.suites, args.suite);
    set(&mut s.seed, args.seed);
    set(&mut s.grad_samples, args.grad_samples);
    set(&mut s.vi_maps, args.vi_maps);
    set(&mut s.oracle_maps, args.oracle_maps);
    let results = outcomes(&s, |o| println!("{}", o.line()))?;
    if let Some(dir) = &args.out {
        let out = OutDir::create(dir)?;
        out.write_json(RESULTS_FILE, &results)?;
        out.write_manifest("selfcheck", &s)?;
    }
    let failed = results.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::Check(format!(
            "{failed} of {} checks failed",
            results.len()
        )));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}
