//! Grid-world path-finding: maps, expert labels, reference solvers and the
//! dataset file format.

mod action;
mod astar;
mod dataset;
mod map;
pub mod oracle;

pub use action::Action;
pub use astar::{astar_shortest, chebyshev, ShortestPath};
pub use dataset::{
    build_dataset, decode_dataset, encode_dataset, generate_map_samples, label_sample,
    load_dataset, write_dataset, write_splits, Dataset, DatasetManifest, MoveCost, PlanningSample,
    Split, DATASET_MAGIC, DATASET_VERSION, TEST_FILE, TRAIN_FILE,
};
pub use map::{generate_map, DensityRange, GridMap, MIN_SIDE};
pub use oracle::{distance_field, tabular_vi, tabular_vi_with, Dynamics, RewardModel, ValueGrid};

use crate::codec::CodecError;

/// (row, col).
pub type Cell = (usize, usize);

/// Value of the goal cell in the goal input channel.
pub const GOAL_MARKER: f64 = 10.0;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("map generation failed: {0}")]
    Generation(String),
    #[error("goal {goal:?} unreachable from {start:?}")]
    Unreachable { start: Cell, goal: Cell },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}
