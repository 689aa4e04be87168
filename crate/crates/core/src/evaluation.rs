//! Policy evaluation (one-step accuracy, greedy rollouts) and grid sweeps over
//! variant, kernel size and iteration coefficient.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gridworld::{
    astar_shortest, build_dataset, Action, Cell, DatasetManifest, DensityRange, GridError, GridMap,
    PlanningSample,
};
use crate::models::{argmax, encode_maps, q_maps, ModelConfig, ModelError, Planner, Variant};
use crate::tensor::{Tape, TensorError};
use crate::training::{train, RunStatus, TrainConfig, TrainError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("invalid evaluation setup: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// A deterministic map-conditioned policy: one action per cell.
pub trait Policy: Sync {
    /// Row-major action for every cell of `map`; entries on obstacles are
    /// never read.
    fn action_table(&self, map: &GridMap) -> Result<Vec<Action>, EvalError>;

    fn action_tables(&self, maps: &[&GridMap]) -> Result<Vec<Vec<Action>>, EvalError> {
        maps.iter().map(|m| self.action_table(m)).collect()
    }
}

/// Greedy argmax of a trained planner.
impl Policy for Planner {
    fn action_table(&self, map: &GridMap) -> Result<Vec<Action>, EvalError> {
        Ok(self.action_tables(&[map])?.pop().expect("one map"))
    }

    fn action_tables(&self, maps: &[&GridMap]) -> Result<Vec<Vec<Action>>, EvalError> {
        if maps.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let input = tape.constant(encode_maps(maps.iter().copied())?);
        let q = q_maps(&mut tape, &self.config, &p, input)?;
        let logits = tape.conv2d_same(q, p.fc).map_err(ModelError::from)?;
        let l = tape.value(logits);
        let d = l.dims();
        Ok((0..d.batch)
            .map(|b| {
                (0..d.plane())
                    .map(|cell| {
                        let row: Vec<f64> = (0..d.channels).map(|a| l.plane(b, a)[cell]).collect();
                        Action::from_index(argmax(&row)).expect("8 logits")
                    })
                    .collect()
            })
            .collect())
    }
}

/// Follows the A* expert from every cell.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpertPolicy;

impl Policy for ExpertPolicy {
    fn action_table(&self, map: &GridMap) -> Result<Vec<Action>, EvalError> {
        Ok((0..map.cells())
            .map(|idx| {
                let cell = map.cell_at(idx);
                if !map.is_free(cell) || cell == map.goal() {
                    return Action::N;
                }
                astar_shortest(map, cell)
                    .ok()
                    .and_then(|p| p.actions.first().copied())
                    .unwrap_or(Action::N)
            })
            .collect())
    }
}

/// Adapter for closures `(map, cell) -> action`.
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: Fn(&GridMap, Cell) -> Action + Sync,
{
    fn action_table(&self, map: &GridMap) -> Result<Vec<Action>, EvalError> {
        Ok((0..map.cells())
            .map(|i| (self.0)(map, map.cell_at(i)))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rollout {
    pub success: bool,
    /// Moves taken, including blocked ones.
    pub steps: usize,
    pub path: Vec<Cell>,
}

/// Default episode budget: one step per cell.
pub fn step_budget(map: &GridMap) -> usize {
    map.height() * map.width()
}

/// Greedy walk from `start` using `table`. A move into an obstacle or off the
/// map leaves the agent in place but still costs a step.
pub fn rollout(map: &GridMap, start: Cell, table: &[Action], budget: usize) -> Rollout {
    rollout_with(map, start, budget, |cell| table[map.index(cell)])
}

/// [`rollout`] with the action chosen by `policy` at each visited cell.
pub fn rollout_with<F>(map: &GridMap, start: Cell, budget: usize, mut policy: F) -> Rollout
where
    F: FnMut(Cell) -> Action,
{
    let mut pos = start;
    let mut path = vec![pos];
    let mut steps = 0;
    while pos != map.goal() && steps < budget {
        pos = map.step(pos, policy(pos));
        path.push(pos);
        steps += 1;
    }
    Rollout {
        success: pos == map.goal(),
        steps,
        path,
    }
}

/// `(len - opt) / opt` for one successful episode.
pub fn relative_excess(steps: usize, optimal: u32) -> f64 {
    (steps as f64 - optimal as f64) / optimal.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    /// One rollout per sample.
    pub episodes: usize,
    pub successes: usize,
    /// Step budget of the largest map evaluated.
    pub step_budget: usize,
    /// Fraction of samples where the policy's move equals the expert's.
    pub accuracy: f64,
    /// Fraction of rollouts that reach the goal within the step budget.
    pub success_rate: f64,
    /// Mean `(len - opt) / opt` over successful rollouts; `None` when none succeed.
    pub traj_diff: Option<f64>,
    /// Mean `len - opt` over successful rollouts.
    pub traj_diff_abs: Option<f64>,
}

/// Maps evaluated per batched inference call.
const EVAL_BATCH: usize = 128;

#[derive(Default)]
struct Tally {
    samples: usize,
    correct: usize,
    successes: usize,
    budget: usize,
    rel: f64,
    abs: f64,
}

impl Tally {
    fn add(&mut self, s: &PlanningSample, chosen: Action, r: &Rollout, budget: usize) {
        self.samples += 1;
        self.budget = self.budget.max(budget);
        if chosen == s.expert_action {
            self.correct += 1;
        }
        if r.success {
            self.successes += 1;
            self.rel += relative_excess(r.steps, s.optimal_length);
            self.abs += r.steps as f64 - s.optimal_length as f64;
        }
    }

    fn report(&self) -> EvalReport {
        let n = self.samples as f64;
        let mean = |x: f64| (self.successes > 0).then(|| x / self.successes as f64);
        EvalReport {
            samples: self.samples,
            episodes: self.samples,
            successes: self.successes,
            step_budget: self.budget,
            accuracy: self.correct as f64 / n,
            success_rate: self.successes as f64 / n,
            traj_diff: mean(self.rel),
            traj_diff_abs: mean(self.abs),
        }
    }
}

pub fn evaluate(policy: &dyn Policy, samples: &[PlanningSample]) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Config("no evaluation samples".into()));
    }
    let mut tally = Tally::default();
    for chunk in samples.chunks(EVAL_BATCH) {
        let maps: Vec<&GridMap> = chunk.iter().map(|s| &s.map).collect();
        let tables = policy.action_tables(&maps)?;
        for (s, table) in chunk.iter().zip(&tables) {
            if table.len() != s.map.cells() {
                return Err(EvalError::Config(format!(
                    "policy returned {} actions for a {}-cell map",
                    table.len(),
                    s.map.cells()
                )));
            }
            let budget = step_budget(&s.map);
            let r = rollout(&s.map, s.agent, table, budget);
            tally.add(s, table[s.map.index(s.agent)], &r, budget);
        }
    }
    Ok(tally.report())
}

/// Scores oracle replay: every rollout step executes the A* expert's move
/// from the current cell.
pub fn teacher_forced(samples: &[PlanningSample]) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Config("no evaluation samples".into()));
    }
    let expert = |map: &GridMap, cell: Cell| -> Result<Action, EvalError> {
        let path = astar_shortest(map, cell)?;
        path.actions
            .first()
            .copied()
            .ok_or_else(|| EvalError::Config(format!("no expert move at {cell:?}")))
    };
    let rows: Vec<Result<(Action, Rollout, usize), EvalError>> = samples
        .par_iter()
        .map(|s| {
            let first = expert(&s.map, s.agent)?;
            let mut failure = None;
            let budget = step_budget(&s.map);
            let r = rollout_with(&s.map, s.agent, budget, |cell| {
                expert(&s.map, cell).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    Action::N
                })
            });
            match failure {
                Some(e) => Err(e),
                None => Ok((first, r, budget)),
            }
        })
        .collect();
    let mut tally = Tally::default();
    for (s, row) in samples.iter().zip(rows) {
        let (first, r, budget) = row?;
        tally.add(s, first, &r, budget);
    }
    Ok(tally.report())
}

/// Grid of training runs. Every cell trains on the train split of its map
/// size and is scored on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub variants: Vec<Variant>,
    pub sizes: Vec<usize>,
    pub kernel_sizes: Vec<usize>,
    pub k_primes: Vec<f64>,
    /// Training seeds; one replicate per seed.
    pub seeds: Vec<u64>,
    pub maps: usize,
    pub data_seed: u64,
    pub density: DensityRange,
    /// Hidden channels of the reward network.
    pub hidden: usize,
    pub train: TrainConfig,
    /// Cells trained concurrently.
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            variants: vec![Variant::Vin, Variant::Virn, Variant::GsVin],
            sizes: vec![8],
            kernel_sizes: vec![3, 5, 7],
            k_primes: vec![1.0],
            seeds: vec![0],
            maps: 5000,
            data_seed: 0,
            density: DensityRange::default(),
            hidden: 150,
            train: TrainConfig::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub variant: Variant,
    pub size: usize,
    pub kernel_size: usize,
    pub k_prime: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub m: usize,
    pub n: usize,
    pub f: usize,
    pub k_prime: f64,
    pub k: usize,
    pub status: String,
    /// `None` when the run diverged.
    pub report: Option<EvalReport>,
    pub seed: u64,
    pub wall_seconds: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let empty = self.variants.is_empty()
            || self.sizes.is_empty()
            || self.kernel_sizes.is_empty()
            || self.k_primes.is_empty()
            || self.seeds.is_empty();
        if empty {
            return Err(EvalError::Config(
                "every sweep axis needs at least one value".into(),
            ));
        }
        if self.jobs == 0 || self.hidden == 0 || self.maps == 0 {
            return Err(EvalError::Config(
                "jobs, hidden and maps must be at least 1".into(),
            ));
        }
        for &s in &self.sizes {
            for &f in &self.kernel_sizes {
                for &kp in &self.k_primes {
                    ModelConfig::for_map(Variant::Vin, s, s, f, kp)?;
                }
            }
        }
        self.train.validate()?;
        Ok(())
    }

    /// Cells in output order: size, variant, f, k', seed.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &size in &self.sizes {
            for &variant in &self.variants {
                for &kernel_size in &self.kernel_sizes {
                    for &k_prime in &self.k_primes {
                        for &seed in &self.seeds {
                            out.push(SweepCell {
                                variant,
                                size,
                                kernel_size,
                                k_prime,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn manifest(&self, size: usize) -> DatasetManifest {
        let mut m = DatasetManifest::new(size, self.maps, self.data_seed);
        m.density = self.density;
        m
    }
}

/// Trains and scores one cell on prepared splits.
pub fn run_cell(
    cell: &SweepCell,
    hidden: usize,
    train_cfg: &TrainConfig,
    train_set: &[PlanningSample],
    test_set: &[PlanningSample],
) -> Result<SweepRow, EvalError> {
    let started = Instant::now();
    let mut model = ModelConfig::for_map(
        cell.variant,
        cell.size,
        cell.size,
        cell.kernel_size,
        cell.k_prime,
    )?;
    model.reward_hidden_channels = hidden;
    let k = model.iterations;
    let cfg = TrainConfig {
        seed: cell.seed,
        ..train_cfg.clone()
    };
    let state = train(model.clone(), cfg, train_set)?;
    let report = match state.record.status {
        RunStatus::Diverged { .. } => None,
        _ => Some(evaluate(&Planner::new(model, state.params)?, test_set)?),
    };
    Ok(SweepRow {
        variant: cell.variant,
        m: cell.size,
        n: cell.size,
        f: cell.kernel_size,
        k_prime: cell.k_prime,
        k,
        status: state.record.status.label().to_string(),
        report,
        seed: cell.seed,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs every cell, at most `jobs` at a time. Rows come back in
/// [`SweepConfig::cells`] order whatever the scheduling.
pub fn run_sweep<F>(cfg: &SweepConfig, on_row: F) -> Result<Vec<SweepRow>, EvalError>
where
    F: Fn(&SweepRow) + Sync,
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| EvalError::Config(format!("thread pool: {e}")))?;
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let (train_set, test_set) = build_dataset(&cfg.manifest(size))?;
        let cells: Vec<SweepCell> = cfg.cells().into_iter().filter(|c| c.size == size).collect();
        let done: Vec<Result<SweepRow, EvalError>> = pool.install(|| {
            cells
                .par_iter()
                .map(|c| {
                    let row = run_cell(
                        c,
                        cfg.hidden,
                        &cfg.train,
                        &train_set.samples,
                        &test_set.samples,
                    )?;
                    on_row(&row);
                    Ok(row)
                })
                .collect()
        });
        for r in done {
            rows.push(r?);
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str =
    "variant,m,n,f,k_prime,k,status,accuracy,success_rate,traj_diff,seed,wall_seconds";

fn metric(x: Option<f64>) -> String {
    x.map_or_else(|| "*".to_string(), |v| format!("{v:.6}"))
}

/// One CSV line; diverged cells show `*` for every metric.
pub fn csv_line(row: &SweepRow) -> String {
    let r = row.report.as_ref();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
        row.variant,
        row.m,
        row.n,
        row.f,
        row.k_prime,
        row.k,
        row.status,
        metric(r.map(|r| r.accuracy)),
        metric(r.map(|r| r.success_rate)),
        metric(r.and_then(|r| r.traj_diff)),
        row.seed,
        row.wall_seconds
    )
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

/// Parses [`to_csv`] output back into rows. The CSV carries no sample
/// counts, so parsed reports have zero `samples`, `episodes`, `successes` and
/// `step_budget`, and no absolute trajectory difference.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>, EvalError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(EvalError::Config("sweep CSV header missing".into())),
    }
    lines
        .map(|(i, l)| {
            parse_csv_line(l).map_err(|e| EvalError::Config(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn parse_csv_line(line: &str) -> Result<SweepRow, String> {
    let cols: Vec<&str> = line.trim().split(',').collect();
    if cols.len() != 12 {
        return Err(format!("expected 12 columns, found {}", cols.len()));
    }
    fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
        s.parse().map_err(|_| format!("bad {what} {s:?}"))
    }
    let opt = |s: &str, what: &str| -> Result<Option<f64>, String> {
        if s == "*" {
            Ok(None)
        } else {
            num::<f64>(s, what).map(Some)
        }
    };
    let variant: Variant = cols[0]
        .parse()
        .map_err(|_| format!("bad variant {:?}", cols[0]))?;
    let status = cols[6].to_string();
    if !["completed", "diverged", "running"].contains(&status.as_str()) {
        return Err(format!("bad status {status:?}"));
    }
    let accuracy = opt(cols[7], "accuracy")?;
    let success = opt(cols[8], "success_rate")?;
    let traj = opt(cols[9], "traj_diff")?;
    let report = match (accuracy, success) {
        (Some(accuracy), Some(success_rate)) => Some(EvalReport {
            samples: 0,
            episodes: 0,
            successes: 0,
            step_budget: 0,
            accuracy,
            success_rate,
            traj_diff: traj,
            traj_diff_abs: None,
        }),
        (None, None) => None,
        _ => return Err("accuracy and success_rate must both be present or both be *".into()),
    };
    Ok(SweepRow {
        variant,
        m: num(cols[1], "m")?,
        n: num(cols[2], "n")?,
        f: num(cols[3], "f")?,
        k_prime: num(cols[4], "k_prime")?,
        k: num(cols[5], "k")?,
        status,
        report,
        seed: num(cols[10], "seed")?,
        wall_seconds: num(cols[11], "wall_seconds")?,
    })
}

/// Accuracy grid per map size: one row per (variant, f), one column per k'.
/// Cells show the seed mean in percent, followed by `±` half the min-max
/// spread when there are several seeds; `*` if any replicate diverged. The
/// iteration count used by each column is listed under the grid.
pub fn accuracy_table(rows: &[SweepRow]) -> String {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.m).collect();
    sizes.dedup();
    let mut out = String::new();
    for size in sizes {
        let here: Vec<&SweepRow> = rows.iter().filter(|r| r.m == size).collect();
        let mut kps: Vec<f64> = Vec::new();
        let mut keys: Vec<(Variant, usize)> = Vec::new();
        for r in &here {
            if !kps.contains(&r.k_prime) {
                kps.push(r.k_prime);
            }
            if !keys.contains(&(r.variant, r.f)) {
                keys.push((r.variant, r.f));
            }
        }
        let _ = writeln!(out, "{size}x{size} accuracy (mean over seeds)");
        let _ = write!(out, "{:<8}{:>4}", "variant", "f");
        for kp in &kps {
            let _ = write!(out, "{:>14}", format!("k'={kp}"));
        }
        out.push('\n');
        for (v, f) in keys {
            let _ = write!(out, "{:<8}{:>4}", v.name(), f);
            for kp in &kps {
                let cell: Vec<&&SweepRow> = here
                    .iter()
                    .filter(|r| r.variant == v && r.f == f && r.k_prime == *kp)
                    .collect();
                let accs: Vec<f64> = cell
                    .iter()
                    .filter_map(|r| r.report.as_ref())
                    .map(|r| 100.0 * r.accuracy)
                    .collect();
                let text = if cell.is_empty() {
                    "-".to_string()
                } else if accs.len() < cell.len() {
                    "*".to_string()
                } else {
                    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                    let (lo, hi) = accs
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                            (a.min(x), b.max(x))
                        });
                    if accs.len() > 1 {
                        format!("{mean:.2}±{:.2}", (hi - lo) / 2.0)
                    } else {
                        format!("{mean:.2}")
                    }
                };
                let _ = write!(out, "{text:>14}");
            }
            out.push('\n');
        }
        let mut fs: Vec<usize> = here.iter().map(|r| r.f).collect();
        fs.sort_unstable();
        fs.dedup();
        let _ = writeln!(out, "iterations k");
        for f in fs {
            let _ = write!(out, "{:<8}{:>4}", "", f);
            for kp in &kps {
                let k = here
                    .iter()
                    .find(|r| r.f == f && r.k_prime == *kp)
                    .map(|r| r.k);
                let _ = write!(out, "{:>14}", k.map_or("-".to_string(), |k| k.to_string()));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::generate_map_samples;

    fn samples(size: usize, maps: usize, seed: u64) -> Vec<PlanningSample> {
        let m = DatasetManifest::new(size, maps, seed);
        (0..maps)
            .flat_map(|i| generate_map_samples(&m, i).unwrap())
            .collect()
    }

    #[test]
    fn expert_rollouts_are_optimal() {
        let s = samples(12, 20, 3);
        let report = evaluate(&ExpertPolicy, &s).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.success_rate, 1.0);
        assert_eq!(report.traj_diff, Some(0.0));
        assert_eq!(report.traj_diff_abs, Some(0.0));
    }

    #[test]
    fn teacher_forcing_replays_optimal_paths() {
        let s = samples(16, 30, 4);
        let report = teacher_forced(&s).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.success_rate, 1.0);
        assert_eq!(report.traj_diff, Some(0.0));
        assert_eq!(report.successes, s.len());
        assert_eq!(report.step_budget, 256);
    }

    #[test]
    fn csv_parses_back() {
        let rows = vec![
            row(Variant::GsVin, 1.0, Some(0.875)),
            row(Variant::Vin, 0.5, None),
        ];
        let parsed = parse_csv(&to_csv(&rows)).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].report.as_ref().unwrap().accuracy, 0.875);
        assert!(parsed[1].report.is_none());
        assert_eq!(to_csv(&parsed), to_csv(&rows));
        assert!(parse_csv("variant,m\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\nVIN,8,8,3")).is_err());
    }

    proptest::proptest! {
        #[test]
        fn csv_parser_never_panics(text in ".{0,300}") {
            let _ = parse_csv(&format!("{CSV_HEADER}\n{text}"));
            let _ = parse_csv(&text);
        }
    }

    #[test]
    fn blocked_moves_cost_a_step() {
        let map = GridMap::empty(4, 4, (0, 3)).unwrap();
        let mut table = vec![Action::E; 16];
        table[map.index((0, 0))] = Action::N;
        let r = rollout(&map, (0, 0), &table, 16);
        assert!(!r.success);
        assert_eq!(r.steps, 16);
        assert!(r.path.iter().all(|&c| c == (0, 0)));
        let r = rollout(&map, (0, 1), &table, 16);
        assert!(r.success);
        assert_eq!(r.steps, 2);
    }

    #[test]
    fn budget_is_respected_and_goal_start_is_free() {
        let map = GridMap::empty(5, 5, (4, 4)).unwrap();
        let table = vec![Action::SE; 25];
        assert_eq!(rollout(&map, (0, 0), &table, 3).steps, 3);
        assert!(!rollout(&map, (0, 0), &table, 3).success);
        assert!(rollout(&map, (0, 0), &table, 4).success);
        let at_goal = rollout(&map, (4, 4), &table, 0);
        assert!(at_goal.success && at_goal.steps == 0);
    }

    #[test]
    fn detour_policy_metrics() {
        // walking west forever only reaches goals that lie due west
        let s: Vec<PlanningSample> = samples(8, 30, 1)
            .into_iter()
            .filter(|s| s.map.obstacle_count() > 0)
            .take(12)
            .collect();
        let wander = FnPolicy(|_: &GridMap, _: Cell| Action::W);
        let r = evaluate(&wander, &s).unwrap();
        assert!(r.success_rate < 1.0);
        if let Some(t) = r.traj_diff {
            assert!(t >= 0.0);
        }
        assert_eq!(relative_excess(6, 4), 0.5);
    }

    #[test]
    fn planner_tables_match_pointwise_predictions() {
        let s = samples(8, 3, 2);
        let planner = Planner::init(ModelConfig::new(Variant::GsVin, 5, 3), 1).unwrap();
        let batch = crate::models::EncodedBatch::new(&s).unwrap();
        let predicted = planner.predict(&batch).unwrap();
        let maps: Vec<&GridMap> = s.iter().map(|x| &x.map).collect();
        let tables = planner.action_tables(&maps).unwrap();
        for ((x, t), p) in s.iter().zip(&tables).zip(predicted) {
            assert_eq!(t[x.map.index(x.agent)], p);
        }
        let single = planner.action_table(&s[0].map).unwrap();
        assert_eq!(single, tables[0]);
    }

    #[test]
    fn label_blind_random_policy_scores_one_in_eight() {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let s = samples(8, 1000, 9);
        let coin = FnPolicy(|m: &GridMap, c: Cell| {
            let mut h = DefaultHasher::new();
            (m.obstacles(), m.goal(), c).hash(&mut h);
            Action::from_index((h.finish() % 8) as usize).unwrap()
        });
        let r = evaluate(&coin, &s).unwrap();
        let sigma = (0.125 * 0.875 / s.len() as f64).sqrt();
        assert!((r.accuracy - 0.125).abs() < 4.0 * sigma, "{}", r.accuracy);
    }

    #[test]
    fn empty_evaluation_set_is_an_error() {
        assert!(matches!(
            evaluate(&ExpertPolicy, &[]),
            Err(EvalError::Config(_))
        ));
    }

    #[test]
    fn sweep_iterations_at_32_match_the_reference_grid() {
        use crate::models::{TABLE4_F, TABLE4_K, TABLE4_K_PRIME};
        let cfg = SweepConfig {
            variants: vec![Variant::GsVin],
            sizes: vec![32],
            kernel_sizes: TABLE4_F.to_vec(),
            k_primes: TABLE4_K_PRIME.to_vec(),
            ..SweepConfig::default()
        };
        cfg.validate().unwrap();
        let cells = cfg.cells();
        assert_eq!(cells.len(), 42);
        for c in cells {
            let k = ModelConfig::for_map(c.variant, 32, 32, c.kernel_size, c.k_prime)
                .unwrap()
                .iterations;
            let fi = TABLE4_F.iter().position(|&f| f == c.kernel_size).unwrap();
            let ki = TABLE4_K_PRIME.iter().position(|&x| x == c.k_prime).unwrap();
            assert_eq!(k, TABLE4_K[ki][fi], "f={} k'={}", c.kernel_size, c.k_prime);
        }
    }

    proptest::proptest! {
        #[test]
        fn sweep_iterations_are_monotone(size in 2usize..80, fh in 1usize..10, kp in 0.1f64..4.0) {
            let f = 2 * fh + 1;
            let k = |f: usize, kp: f64| ModelConfig::for_map(Variant::Vin, size, size, f, kp).unwrap().iterations;
            proptest::prop_assert!(k(f, 2.0 * kp) >= k(f, kp));
            proptest::prop_assert!(k(f + 2, kp) <= k(f, kp));
        }
    }

    fn row(variant: Variant, kp: f64, acc: Option<f64>) -> SweepRow {
        SweepRow {
            variant,
            m: 8,
            n: 8,
            f: 3,
            k_prime: kp,
            k: 6,
            status: if acc.is_some() {
                "completed"
            } else {
                "diverged"
            }
            .into(),
            report: acc.map(|a| EvalReport {
                samples: 10,
                episodes: 10,
                successes: 5,
                step_budget: 64,
                accuracy: a,
                success_rate: 0.5,
                traj_diff: Some(0.25),
                traj_diff_abs: Some(1.0),
            }),
            seed: 0,
            wall_seconds: 1.5,
        }
    }

    #[test]
    fn csv_marks_diverged_cells() {
        let csv = to_csv(&[
            row(Variant::Vin, 1.0, Some(0.9)),
            row(Variant::GsVin, 0.5, None),
        ]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "VIN,8,8,3,1,6,completed,0.900000,0.500000,0.250000,0,1.500"
        );
        assert_eq!(lines[2], "GSVIN,8,8,3,0.5,6,diverged,*,*,*,0,1.500");
        for l in &lines {
            assert_eq!(l.split(',').count(), 12);
        }
    }

    #[test]
    fn table_pivots_and_stars() {
        let t = accuracy_table(&[
            row(Variant::Vin, 0.5, Some(0.8)),
            row(Variant::Vin, 1.0, Some(0.9)),
            row(Variant::GsVin, 0.5, Some(0.7)),
            row(Variant::GsVin, 1.0, None),
        ]);
        assert!(t.contains("k'=0.5") && t.contains("k'=1"));
        let gs = t.lines().find(|l| l.starts_with("GSVIN")).unwrap();
        assert!(gs.contains("70.00") && gs.trim_end().ends_with('*'), "{gs}");
    }

    #[test]
    fn sweep_validation() {
        let mut c = SweepConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.cells().len(), 9);
        c.kernel_sizes = vec![1];
        assert!(c.validate().is_err());
        c.kernel_sizes = vec![3];
        c.seeds.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn tiny_sweep_is_schedule_independent() {
        let mut c = SweepConfig {
            variants: vec![Variant::Vin, Variant::GsVin],
            kernel_sizes: vec![3],
            k_primes: vec![0.5],
            seeds: vec![0, 1],
            maps: 10,
            ..SweepConfig::default()
        };
        c.train.epochs = 1;
        c.train.batch_size = 16;
        let strip = |rows: Vec<SweepRow>| {
            rows.into_iter()
                .map(|r| (r.variant, r.seed, r.report))
                .collect::<Vec<_>>()
        };
        let one = strip(run_sweep(&c, |_| {}).unwrap());
        c.jobs = 3;
        let many = strip(run_sweep(&c, |_| {}).unwrap());
        assert_eq!(one, many);
        assert_eq!(one.len(), 4);
    }

    #[test]
    fn forced_divergence_is_starred() {
        let mut c = SweepConfig {
            variants: vec![Variant::GsVin],
            kernel_sizes: vec![3],
            maps: 10,
            hidden: 4,
            ..SweepConfig::default()
        };
        c.train.epochs = 8;
        c.train.batch_size = 8;
        c.train.learning_rate = 1e3;
        let rows = run_sweep(&c, |_| {}).unwrap();
        assert_eq!(rows[0].status, "diverged");
        assert!(rows[0].report.is_none());
        let csv = to_csv(&rows);
        let line = csv.lines().nth(1).unwrap();
        assert!(line.contains(",diverged,*,*,*,"), "{line}");
        assert!(accuracy_table(&rows).contains('*'));
    }
}
