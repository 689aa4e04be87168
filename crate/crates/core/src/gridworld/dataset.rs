//! Supervised path-finding samples and the `GWDS` dataset file.
//!
//! Layout (little-endian): magic `GWDS`, format version `u16`, a u32
//! length-prefixed UTF-8 JSON header (manifest plus split name), then one
//! record per sample:
//!
//! ```text
//! height u16, width u16,
//! obstacle bitmap: ceil(h*w/8) bytes, row-major, LSB-first within a byte,
//! goal (row u16, col u16), agent (row u16, col u16),
//! expert action u8, optimal length u32
//! ```
//!
//! and finally a CRC32 of every preceding byte.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{astar_shortest, generate_map, Action, Cell, DensityRange, GridError, GridMap};
use crate::codec::{open_frame, CodecError, Reader, Writer};

pub const DATASET_MAGIC: &str = "GWDS";
pub const DATASET_VERSION: u16 = 1;
pub const TRAIN_FILE: &str = "train.gwds";
pub const TEST_FILE: &str = "test.gwds";

/// One labelled state: the expert's first move from `agent` and the optimal
/// number of moves to the goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningSample {
    pub map: GridMap,
    pub agent: Cell,
    pub expert_action: Action,
    pub optimal_length: u32,
}

/// Labels `start` with the first move of the A* path.
pub fn label_sample(map: &GridMap, start: Cell) -> Result<PlanningSample, GridError> {
    if start == map.goal() {
        return Err(GridError::InvalidSample(format!(
            "agent {start:?} is on the goal"
        )));
    }
    let path = astar_shortest(map, start)?;
    Ok(PlanningSample {
        map: map.clone(),
        agent: start,
        expert_action: path.actions[0],
        optimal_length: path.length() as u32,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveCost {
    /// Every one of the eight moves costs 1.
    Unit,
}

/// Everything needed to regenerate a dataset bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u16,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub num_maps: usize,
    pub pairs_per_map: usize,
    pub density: DensityRange,
    pub split_ratio: f64,
    pub move_cost: MoveCost,
    pub corner_cutting: bool,
    /// Start/goal draws per pair before the whole map is regenerated.
    pub max_pair_retries: usize,
}

impl DatasetManifest {
    pub fn new(size: usize, num_maps: usize, seed: u64) -> Self {
        Self {
            format_version: DATASET_VERSION,
            seed,
            height: size,
            width: size,
            num_maps,
            pairs_per_map: 6,
            density: DensityRange::default(),
            split_ratio: 0.8,
            move_cost: MoveCost::Unit,
            corner_cutting: true,
            max_pair_retries: 50,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.format_version != DATASET_VERSION {
            return Err(GridError::Codec(CodecError::VersionMismatch {
                found: self.format_version,
                expected: DATASET_VERSION,
            }));
        }
        if self.num_maps == 0 || self.pairs_per_map == 0 {
            return Err(GridError::Generation(
                "need at least one map and one pair".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.split_ratio) {
            return Err(GridError::Generation(format!(
                "split ratio {} outside [0, 1]",
                self.split_ratio
            )));
        }
        if self.max_pair_retries == 0 {
            return Err(GridError::Generation(
                "max_pair_retries must be positive".into(),
            ));
        }
        if !self.corner_cutting {
            return Err(GridError::Generation(
                "only corner-cutting movement is implemented".into(),
            ));
        }
        DensityRange::new(self.density.min, self.density.max)?;
        if self.height < super::MIN_SIDE || self.width < super::MIN_SIDE {
            return Err(GridError::Generation(format!(
                "map {}x{} smaller than {m}x{m}",
                self.height,
                self.width,
                m = super::MIN_SIDE
            )));
        }
        if self.height > u16::MAX as usize || self.width > u16::MAX as usize {
            return Err(GridError::Generation("map side exceeds u16".into()));
        }
        Ok(())
    }

    /// Number of maps assigned to the training split.
    pub fn train_maps(&self) -> usize {
        (self.split_ratio * self.num_maps as f64).round() as usize
    }

    /// Independent stream per map: (seed, map index).
    pub fn map_rng(&self, map_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(map_index as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetHeader {
    manifest: DatasetManifest,
    split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub split: Split,
    pub samples: Vec<PlanningSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Samples for one map. Each pair draws a goal and a distinct agent cell
/// uniformly from the free cells; unreachable pairs are redrawn, and after
/// `max_pair_retries` failures the map itself is regenerated.
pub fn generate_map_samples(
    manifest: &DatasetManifest,
    map_index: usize,
) -> Result<Vec<PlanningSample>, GridError> {
    let mut rng = manifest.map_rng(map_index);
    'map: loop {
        let map = generate_map(manifest.height, manifest.width, manifest.density, &mut rng)?;
        let free: Vec<Cell> = map.free_cells().collect();
        let mut samples = Vec::with_capacity(manifest.pairs_per_map);
        for _ in 0..manifest.pairs_per_map {
            let mut labelled = None;
            for _ in 0..manifest.max_pair_retries {
                let goal = free[rng.gen_range(0..free.len())];
                let agent = loop {
                    let a = free[rng.gen_range(0..free.len())];
                    if a != goal {
                        break a;
                    }
                };
                let with_goal = map.with_goal(goal)?;
                match label_sample(&with_goal, agent) {
                    Ok(s) => {
                        labelled = Some(s);
                        break;
                    }
                    Err(GridError::Unreachable { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            match labelled {
                Some(s) => samples.push(s),
                None => continue 'map,
            }
        }
        return Ok(samples);
    }
}

/// Generates both splits. Maps `0..train_maps` go to training and the rest to
/// test, so no map appears in both.
pub fn build_dataset(manifest: &DatasetManifest) -> Result<(Dataset, Dataset), GridError> {
    manifest.validate()?;
    let per_map: Vec<Vec<PlanningSample>> = (0..manifest.num_maps)
        .into_par_iter()
        .map(|i| generate_map_samples(manifest, i))
        .collect::<Result<_, _>>()?;
    let cut = manifest.train_maps();
    let mut train = Vec::with_capacity(cut * manifest.pairs_per_map);
    let mut test = Vec::new();
    for (i, samples) in per_map.into_iter().enumerate() {
        if i < cut {
            train.extend(samples);
        } else {
            test.extend(samples);
        }
    }
    Ok((
        Dataset {
            manifest: manifest.clone(),
            split: Split::Train,
            samples: train,
        },
        Dataset {
            manifest: manifest.clone(),
            split: Split::Test,
            samples: test,
        },
    ))
}

pub fn encode_dataset(dataset: &Dataset) -> Vec<u8> {
    let mut w = Writer::with_magic(DATASET_MAGIC);
    w.u16(DATASET_VERSION);
    let header = DatasetHeader {
        manifest: dataset.manifest.clone(),
        split: dataset.split,
    };
    w.string(&serde_json::to_string(&header).expect("header serializes"));
    for s in &dataset.samples {
        let map = &s.map;
        w.u16(map.height() as u16);
        w.u16(map.width() as u16);
        let mut bitmap = vec![0u8; map.cells().div_ceil(8)];
        for (i, &o) in map.obstacles().iter().enumerate() {
            if o {
                bitmap[i / 8] |= 1 << (i % 8);
            }
        }
        w.bytes(&bitmap);
        w.u16(map.goal().0 as u16);
        w.u16(map.goal().1 as u16);
        w.u16(s.agent.0 as u16);
        w.u16(s.agent.1 as u16);
        w.u8(s.expert_action as u8);
        w.u32(s.optimal_length);
    }
    w.finish()
}

fn malformed(detail: impl Into<String>) -> GridError {
    GridError::Codec(CodecError::Malformed {
        what: "dataset",
        detail: detail.into(),
    })
}

/// Parses a `GWDS` byte stream. Never panics on arbitrary input.
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset, GridError> {
    let body = open_frame(bytes, DATASET_MAGIC)?;
    let mut r = Reader::new(body);
    let version = r.u16()?;
    if version != DATASET_VERSION {
        return Err(CodecError::VersionMismatch {
            found: version,
            expected: DATASET_VERSION,
        }
        .into());
    }
    let header: DatasetHeader = serde_json::from_str(r.string("dataset header")?)
        .map_err(|e| malformed(format!("header: {e}")))?;
    let mut samples = Vec::new();
    while r.remaining() > 0 {
        let height = r.u16()? as usize;
        let width = r.u16()? as usize;
        let cells = height * width;
        let bitmap = r.take(cells.div_ceil(8))?;
        let obstacles: Vec<bool> = (0..cells)
            .map(|i| bitmap[i / 8] >> (i % 8) & 1 == 1)
            .collect();
        let goal = (r.u16()? as usize, r.u16()? as usize);
        let agent = (r.u16()? as usize, r.u16()? as usize);
        let action = r.u8()?;
        let optimal_length = r.u32()?;
        let map =
            GridMap::new(height, width, obstacles, goal).map_err(|e| malformed(e.to_string()))?;
        if !map.is_free(agent) || agent == goal {
            return Err(malformed(format!(
                "agent {agent:?} is not a free non-goal cell"
            )));
        }
        let expert_action = Action::from_index(action as usize)
            .ok_or_else(|| malformed(format!("action {action}")))?;
        if optimal_length == 0 {
            return Err(malformed("zero optimal length for a non-goal agent"));
        }
        samples.push(PlanningSample {
            map,
            agent,
            expert_action,
            optimal_length,
        });
    }
    Ok(Dataset {
        manifest: header.manifest,
        split: header.split,
        samples,
    })
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), GridError> {
    fs::write(path, encode_dataset(dataset))
        .map_err(|e| GridError::Io(format!("{}: {e}", path.display())))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, GridError> {
    let bytes = fs::read(path).map_err(|e| GridError::Io(format!("{}: {e}", path.display())))?;
    decode_dataset(&bytes)
}

/// Builds both splits and writes `train.gwds` / `test.gwds` into `dir`.
pub fn write_splits(
    dir: &Path,
    manifest: &DatasetManifest,
) -> Result<(PathBuf, PathBuf), GridError> {
    let (train, test) = build_dataset(manifest)?;
    fs::create_dir_all(dir).map_err(|e| GridError::Io(format!("{}: {e}", dir.display())))?;
    let (tp, vp) = (dir.join(TRAIN_FILE), dir.join(TEST_FILE));
    write_dataset(&tp, &train)?;
    write_dataset(&vp, &test)?;
    Ok((tp, vp))
}
