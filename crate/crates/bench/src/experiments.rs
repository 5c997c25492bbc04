//! Experiment protocols: initial-condition grid, rollout-budget sweep,
//! single episodes and bound tabulation.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mpt_core::control::steady_state_error_bound;
use mpt_core::mdp::MdpSpec;
use mpt_core::pushcar::{self, write_trajectory_csv, PushCarModel};
use mpt_core::runner::{run_episode, EpisodeRecord, EpisodeSettings, Environment};
use mpt_core::State;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, PlannerKind};
use crate::seeds::derive_seed;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeJob {
    pub planner: PlannerKind,
    pub initial_state: [f64; 5],
    /// Rollouts per planning step.
    pub budget: usize,
    pub seed: u64,
}

/// Run one episode with freshly built planner, controller and estimator.
/// Returns an error message when the episode cannot be trusted: it aborted,
/// or a planner step spent a rollout budget other than `job.budget`.
pub fn run_job(config: &ExperimentConfig, job: &EpisodeJob) -> Result<EpisodeRecord, String> {
    let model = PushCarModel::new(config.env.clone()).map_err(|e| e.to_string())?;
    let reward = model.reward();
    let mdp = MdpSpec::new(
        model.state_bounds(),
        pushcar::action_bounds(),
        config.search.gamma,
        config.action_set(job.planner),
        &model,
        &reward,
    )
    .map_err(|e| e.to_string())?
    .with_constraint(&model);
    let (disturbance, mut estimator) = config.disturbance.build().map_err(|e| e.to_string())?;
    let env = Environment {
        dynamics: &model,
        disturbance: &*disturbance,
    };
    let mut planner = config.build_planner(job.planner, job.budget).map_err(|e| e.to_string())?;
    let mut controller = config.controller.build().map_err(|e| e.to_string())?;
    let mut record = run_episode(
        &State::from_row_slice(&job.initial_state),
        &mdp,
        &env,
        planner.as_mut(),
        &mut controller,
        estimator.as_mut(),
        EpisodeSettings {
            steps: config.episode.steps,
            tau: config.episode.tau(),
            seed: job.seed,
        },
    );
    record.config_hash = config.hash();
    if let Some(reason) = &record.aborted {
        return Err(format!("episode aborted: {reason}"));
    }
    if let Some(step) = record.steps.iter().find(|s| s.rollouts != job.budget as u64) {
        return Err(format!(
            "rollout budget mismatch at step {}: {} used, {} allotted",
            step.k, step.rollouts, job.budget
        ));
    }
    Ok(record)
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))
}

fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    // write-then-rename so an interrupted run never leaves a torn file
    let tmp = path.with_extension("json.tmp");
    let mut file = BufWriter::new(File::create(&tmp).map_err(io_err(&tmp))?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n").map_err(io_err(&tmp))?;
    file.flush().map_err(io_err(&tmp))?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// Result of one grid cell for one planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub planner: PlannerKind,
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub values: Vec<f64>,
    pub errors: Vec<String>,
    pub config_hash: String,
}

impl CellResult {
    pub fn flagged(&self) -> bool {
        !self.errors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerSummary {
    pub planner: PlannerKind,
    pub workspace_average: f64,
    pub cells: usize,
    pub flagged_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOutcome {
    pub config_hash: String,
    pub summaries: Vec<PlannerSummary>,
    pub cells: Vec<CellResult>,
}

impl GridOutcome {
    pub fn flagged(&self) -> bool {
        self.cells.iter().any(CellResult::flagged)
    }

    pub fn average(&self, planner: PlannerKind) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.planner == planner)
            .map(|s| s.workspace_average)
    }
}

fn run_cell(config: &ExperimentConfig, planner: PlannerKind, index: usize, cell: (usize, usize, f64, f64)) -> CellResult {
    let (i, j, x, y) = cell;
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for trial in 0..config.grid.seeds_per_cell {
        let job = EpisodeJob {
            planner,
            initial_state: [x, y, 0.0, 0.0, 0.0],
            budget: config.search.iterations,
            seed: derive_seed(config.seed, &[index as u64, trial as u64]),
        };
        match run_job(config, &job) {
            Ok(record) => values.push(record.cumulative_value),
            Err(e) => {
                log::warn!("{} cell ({x}, {y}) trial {trial}: {e}", planner.name());
                errors.push(format!("trial {trial}: {e}"));
            }
        }
    }
    CellResult {
        planner,
        i,
        j,
        x,
        y,
        values,
        errors,
        config_hash: config.hash(),
    }
}

/// Every grid cell for every planner. Finished cells are stored under
/// `output_dir/cells/` and reused on a rerun with the same config.
pub fn run_grid(config: &ExperimentConfig, workers: usize) -> Result<GridOutcome, ExperimentError> {
    let out = &config.output_dir;
    let cell_dir = out.join("cells");
    create_dir(&cell_dir)?;
    let hash = config.hash();
    let cells = config.grid.cells();
    let jobs: Vec<(PlannerKind, usize)> = config
        .planners
        .iter()
        .flat_map(|p| (0..cells.len()).map(move |c| (p.kind, c)))
        .collect();

    let results: Vec<Result<CellResult, ExperimentError>> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(planner, index)| {
                let (i, j, _, _) = cells[index];
                let path = cell_dir.join(format!("{}_{i}_{j}.json", planner.name()));
                if let Ok(text) = fs::read_to_string(&path) {
                    match serde_json::from_str::<CellResult>(&text) {
                        Ok(done) if done.config_hash == hash => return Ok(done),
                        _ => log::info!("recomputing stale cell file {}", path.display()),
                    }
                }
                let result = run_cell(config, planner, index, cells[index]);
                write_json(&path, &result)?;
                Ok(result)
            })
            .collect()
    });
    let cells_out = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut writer = csv::Writer::from_path(out.join("grid.csv"))?;
    writer.write_record(["planner", "x", "y", "mean_value", "std", "seeds", "flagged"])?;
    for c in &cells_out {
        let (mean, std) = mean_std(&c.values);
        writer.write_record([
            c.planner.name().to_string(),
            fmt(c.x),
            fmt(c.y),
            fmt(mean),
            fmt(std),
            c.values.len().to_string(),
            (c.flagged() as u8).to_string(),
        ])?;
    }
    writer.flush().map_err(io_err(out))?;

    let summaries = config
        .planners
        .iter()
        .map(|p| {
            let mine: Vec<&CellResult> = cells_out.iter().filter(|c| c.planner == p.kind).collect();
            let means: Vec<f64> = mine
                .iter()
                .filter(|c| !c.values.is_empty())
                .map(|c| mean_std(&c.values).0)
                .collect();
            PlannerSummary {
                planner: p.kind,
                workspace_average: mean_std(&means).0,
                cells: mine.len(),
                flagged_cells: mine.iter().filter(|c| c.flagged()).count(),
            }
        })
        .collect();
    let outcome = GridOutcome {
        config_hash: hash,
        summaries,
        cells: cells_out,
    };
    write_json(
        &out.join("grid_summary.json"),
        &serde_json::json!({ "config_hash": outcome.config_hash, "planners": outcome.summaries }),
    )?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub planner: PlannerKind,
    pub l: usize,
    pub mean_value: f64,
    pub std: f64,
    pub trials: usize,
    pub flagged: usize,
}

/// Every planner at every rollout budget from the sweep's initial state.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<Vec<SweepRow>, ExperimentError> {
    let out = &config.output_dir;
    create_dir(out)?;
    let spec = &config.sweep;
    let jobs: Vec<EpisodeJob> = config
        .planners
        .iter()
        .flat_map(|p| {
            spec.l_values.iter().flat_map(move |&l| {
                (0..spec.trials).map(move |trial| EpisodeJob {
                    planner: p.kind,
                    initial_state: spec.initial_state,
                    budget: l,
                    seed: derive_seed(config.seed, &[l as u64, trial as u64]),
                })
            })
        })
        .collect();
    let results: Vec<Result<f64, String>> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|job| run_job(config, job).map(|r| r.cumulative_value))
            .collect()
    });

    let mut rows = Vec::new();
    for p in &config.planners {
        for &l in &spec.l_values {
            let mut values = Vec::new();
            let mut flagged = 0;
            for (job, result) in jobs.iter().zip(&results) {
                if job.planner != p.kind || job.budget != l {
                    continue;
                }
                match result {
                    Ok(v) => values.push(*v),
                    Err(e) => {
                        log::warn!("{} L={l}: {e}", p.kind.name());
                        flagged += 1;
                    }
                }
            }
            let (mean_value, std) = mean_std(&values);
            rows.push(SweepRow {
                planner: p.kind,
                l,
                mean_value,
                std,
                trials: values.len(),
                flagged,
            });
        }
    }

    let mut writer = csv::Writer::from_path(out.join("sweep.csv"))?;
    writer.write_record(["planner", "L", "mean_value", "std", "trials", "flagged"])?;
    for r in &rows {
        writer.write_record([
            r.planner.name().to_string(),
            r.l.to_string(),
            fmt(r.mean_value),
            fmt(r.std),
            r.trials.to_string(),
            r.flagged.to_string(),
        ])?;
    }
    writer.flush().map_err(io_err(out))?;
    Ok(rows)
}

/// One episode per planner from `episode.initial_state`, with the full
/// per-step log, trajectory and summary written out.
pub fn run_single(config: &ExperimentConfig) -> Result<Vec<Result<EpisodeRecord, String>>, ExperimentError> {
    let out = &config.output_dir;
    create_dir(out)?;
    let mut records = Vec::new();
    for p in &config.planners {
        let job = EpisodeJob {
            planner: p.kind,
            initial_state: config.episode.initial_state,
            budget: config.search.iterations,
            seed: derive_seed(config.seed, &[0]),
        };
        let result = run_job(config, &job);
        if let Ok(record) = &result {
            let name = p.kind.name();
            let path = out.join(format!("{name}_steps.csv"));
            record.write_csv(BufWriter::new(File::create(&path).map_err(io_err(&path))?)).map_err(io_err(&path))?;
            let path = out.join(format!("{name}_trajectory.csv"));
            write_trajectory_csv(record, BufWriter::new(File::create(&path).map_err(io_err(&path))?))
                .map_err(io_err(&path))?;
            write_json(&out.join(format!("{name}_summary.json")), &record.summary())?;
        }
        records.push(result);
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub depth: u32,
    pub eta: f64,
    pub eps: f64,
    pub alpha: f64,
    pub bound: f64,
}

/// Steady-state tracking bound over the configured `(K, eta, eps)` grid.
pub fn run_bounds(config: &ExperimentConfig) -> Result<Vec<BoundRow>, ExperimentError> {
    let spec = &config.bounds;
    if !(spec.alpha >= 0.0 && spec.alpha < 1.0) || !(spec.m_lower > 0.0) || spec.m_upper < spec.m_lower {
        return Err(ConfigError::Invalid("bounds need 0 <= alpha < 1 and 0 < m_lower <= m_upper".into()).into());
    }
    let mut rows = Vec::new();
    for &eta in &spec.etas {
        for &eps in &spec.eps {
            for &depth in &spec.depths {
                rows.push(BoundRow {
                    depth,
                    eta,
                    eps,
                    alpha: spec.alpha,
                    bound: steady_state_error_bound(depth, eta, eps, spec.alpha, spec.m_lower, spec.m_upper),
                });
            }
        }
    }
    let out = &config.output_dir;
    create_dir(out)?;
    let mut writer = csv::Writer::from_path(out.join("bounds.csv"))?;
    writer.write_record(["K", "eta", "eps", "alpha", "bound"])?;
    for r in &rows {
        writer.write_record([r.depth.to_string(), fmt(r.eta), fmt(r.eps), fmt(r.alpha), fmt(r.bound)])?;
    }
    writer.flush().map_err(io_err(out))?;
    Ok(rows)
}
