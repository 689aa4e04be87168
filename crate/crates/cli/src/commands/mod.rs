pub mod eval;
pub mod export;
pub mod generate;
pub mod heuristic;
pub mod selfcheck;
pub mod sweep;
pub mod train;

use std::path::{Path, PathBuf};

use clap::Args;
use gsvin::gridworld::{
    load_dataset, Dataset, DatasetManifest, DensityRange, Split, TEST_FILE, TRAIN_FILE,
};
use gsvin::models::Variant;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Dataset recipe shared by every subcommand that can generate data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    pub size: usize,
    pub maps: usize,
    pub pairs: usize,
    pub density: DensityRange,
    pub split_ratio: f64,
    pub seed: u64,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            size: 8,
            maps: 1000,
            pairs: 6,
            density: DensityRange::default(),
            split_ratio: 0.8,
            seed: 0,
        }
    }
}

impl DataSettings {
    pub fn manifest(&self) -> Result<DatasetManifest, CliError> {
        let mut m = DatasetManifest::new(self.size, self.maps, self.seed);
        m.pairs_per_map = self.pairs;
        m.density = self.density;
        m.split_ratio = self.split_ratio;
        m.validate()?;
        Ok(m)
    }
}

/// Dataset flags; `seed_flag` decides whether `--seed` or `--data-seed`
/// names the generation seed.
#[derive(Debug, Clone, Default, Args)]
pub struct DataFlags {
    /// Map side length.
    #[arg(long)]
    pub size: Option<usize>,
    /// Number of maps (split into train/test by map).
    #[arg(long)]
    pub maps: Option<usize>,
    /// Start/goal pairs per map.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Obstacle density: a value, or `min:max`.
    #[arg(long, value_parser = parse_density)]
    pub density: Option<DensityRange>,
    /// Fraction of maps in the training split.
    #[arg(long)]
    pub split_ratio: Option<f64>,
}

impl DataFlags {
    pub fn apply(&self, s: &mut DataSettings) {
        set(&mut s.size, self.size);
        set(&mut s.maps, self.maps);
        set(&mut s.pairs, self.pairs);
        set(&mut s.density, self.density);
        set(&mut s.split_ratio, self.split_ratio);
    }
}

pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

pub fn parse_density(s: &str) -> Result<DensityRange, String> {
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad density {x:?}"))
    };
    let range = match s.split_once(':') {
        Some((a, b)) => DensityRange::new(num(a)?, num(b)?),
        None => DensityRange::fixed(num(s)?),
    };
    range.map_err(|e| e.to_string())
}

pub fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse::<Variant>()
        .map_err(|_| format!("unknown variant {s:?} (VIN, VIRN, GSVIN)"))
}

/// Loads `train.gwds` / `test.gwds` from a dataset directory.
pub fn load_split(dir: &Path, split: Split) -> Result<Dataset, CliError> {
    let file = match split {
        Split::Train => TRAIN_FILE,
        Split::Test => TEST_FILE,
    };
    let path = dir.join(file);
    if !path.exists() {
        return Err(CliError::Usage(format!("{} not found", path.display())));
    }
    Ok(load_dataset(&path)?)
}

/// Absolute form of a user-supplied input path, so manifests stay valid from
/// any working directory.
pub fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| CliError::io(p.display(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_forms() {
        assert_eq!(
            parse_density("0.2").unwrap(),
            DensityRange::fixed(0.2).unwrap()
        );
        assert_eq!(
            parse_density("0.1:0.3").unwrap(),
            DensityRange::new(0.1, 0.3).unwrap()
        );
        assert!(parse_density("0.9").is_err());
        assert!(parse_density("x").is_err());
        assert!(parse_density("0.3:0.1").is_err());
    }

    #[test]
    fn data_flags_override_settings() {
        let mut s = DataSettings::default();
        DataFlags {
            maps: Some(7),
            ..DataFlags::default()
        }
        .apply(&mut s);
        assert_eq!(s.maps, 7);
        assert_eq!(s.size, 8);
    }
}
