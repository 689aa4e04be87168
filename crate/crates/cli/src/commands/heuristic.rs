use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use gsvin::checks::heuristic_table;
use gsvin::models::{scaled_k, TABLE4_F, TABLE4_K_PRIME};
use serde::{Deserialize, Serialize};

use super::set;
use crate::config::load_config;
use crate::out::OutDir;
use crate::CliError;

pub const TABLE_FILE: &str = "k_table.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicSettings {
    pub size: usize,
    pub f_list: Vec<usize>,
    pub kprime_list: Vec<f64>,
}

impl Default for HeuristicSettings {
    fn default() -> Self {
        Self {
            size: 32,
            f_list: TABLE4_F.to_vec(),
            kprime_list: TABLE4_K_PRIME.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct HeuristicArgs {
    /// TOML/JSON settings file (or a previous run's manifest.json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Side of the square map.
    #[arg(long)]
    pub size: Option<usize>,
    /// Kernel sizes.
    #[arg(long, alias = "f", value_delimiter = ',')]
    pub f_list: Option<Vec<usize>>,
    /// Iteration coefficients.
    #[arg(long, value_delimiter = ',')]
    pub kprime_list: Option<Vec<f64>>,
    /// Check the built-in 32x32 reference grid; exit 3 on any mismatch.
    #[arg(long)]
    pub verify_table4: bool,
    /// Also write k_table.csv and manifest.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// k for every (k', f), rows by k'.
pub fn grid(s: &HeuristicSettings) -> Result<Vec<Vec<usize>>, CliError> {
    if s.f_list.is_empty() || s.kprime_list.is_empty() {
        return Err(CliError::Usage("need at least one f and one k'".into()));
    }
    s.kprime_list
        .iter()
        .map(|&kp| {
            s.f_list
                .iter()
                .map(|&f| Ok(scaled_k(s.size, s.size, f, kp)?))
                .collect()
        })
        .collect()
}

pub fn render(s: &HeuristicSettings, g: &[Vec<usize>]) -> String {
    let mut text = format!("iterations k for {0}x{0} (rows k', columns f)\n", s.size);
    let _ = write!(text, "{:>6}", "k'\\f");
    for f in &s.f_list {
        let _ = write!(text, "{f:>5}");
    }
    text.push('\n');
    for (kp, row) in s.kprime_list.iter().zip(g) {
        let _ = write!(text, "{kp:>6}");
        for k in row {
            let _ = write!(text, "{k:>5}");
        }
        text.push('\n');
    }
    text
}

fn csv(s: &HeuristicSettings, g: &[Vec<usize>]) -> String {
    let mut text = String::from("m,n,f,k_prime,k\n");
    for (kp, row) in s.kprime_list.iter().zip(g) {
        for (f, k) in s.f_list.iter().zip(row) {
            let _ = writeln!(text, "{0},{0},{f},{kp},{k}", s.size);
        }
    }
    text
}

pub fn run(args: HeuristicArgs) -> Result<(), CliError> {
    let mut s: HeuristicSettings = load_config(args.config.as_deref(), "heuristic")?;
    set(&mut s.size, args.size);
    set(&mut s.f_list, args.f_list);
    set(&mut s.kprime_list, args.kprime_list);
    let g = grid(&s)?;
    print!("{}", render(&s, &g));
    if let Some(dir) = &args.out {
        let out = OutDir::create(dir)?;
        out.write(TABLE_FILE, csv(&s, &g).as_bytes())?;
        out.write_manifest("heuristic", &s)?;
    }
    if args.verify_table4 {
        let outcome = heuristic_table();
        println!("{}", outcome.line());
        if !outcome.passed {
            return Err(CliError::Check("reference iteration grid mismatch".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_42_cells() {
        let s = HeuristicSettings::default();
        let g = grid(&s).unwrap();
        assert_eq!(g.len() * g[0].len(), 42);
        assert!(render(&s, &g).lines().count() == 8);
        assert_eq!(csv(&s, &g).lines().count(), 43);
    }

    #[test]
    fn rejects_tiny_kernels() {
        let s = HeuristicSettings {
            f_list: vec![1],
            ..HeuristicSettings::default()
        };
        assert!(matches!(grid(&s), Err(CliError::Usage(_))));
    }
}
