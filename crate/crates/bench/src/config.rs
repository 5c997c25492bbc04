//! Experiment configuration: one JSON document per run.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mpt_core::baselines::CemParams;
use mpt_core::control::{ContractionController, ControlError, ControllerParams, LinearizationPoint};
use mpt_core::disturbance::{ConstantDisturbance, DisturbanceModel, DriftingDisturbance, NoDisturbance, OracleEstimator};
use mpt_core::mdp::{ActionSet, DisturbanceEstimator, ZeroEstimator};
use mpt_core::planner::{CemPlanner, PlanError, Planner, TreePlanner};
use mpt_core::pushcar::{self, EnvParams};
use mpt_core::{SearchParams, State};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Grid,
    Sweep,
    Single,
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlannerKind {
    #[serde(rename = "mpt")]
    Mpt,
    #[serde(rename = "uct")]
    Uct,
    #[serde(rename = "cem")]
    Cem,
    #[serde(rename = "cem-reuse")]
    CemReuse,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mpt => "mpt",
            Self::Uct => "uct",
            Self::Cem => "cem",
            Self::CemReuse => "cem-reuse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    #[serde(rename = "type")]
    pub kind: PlannerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Rollouts per planning step (`L`), shared by every planner.
    pub iterations: usize,
    pub branching: usize,
    pub depth: usize,
    pub exploration: f64,
    pub gamma: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            branching: 7,
            depth: 10,
            exploration: 3.0,
            gamma: 0.9,
        }
    }
}

impl SearchConfig {
    pub fn params(&self, iterations: usize) -> SearchParams {
        SearchParams {
            iterations,
            branching: self.branching,
            depth: self.depth,
            exploration: self.exploration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CemConfig {
    pub iterations: usize,
    pub elite_frac: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            elite_frac: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Diagonal of `Q` over `feedback_states`.
    pub q: Vec<f64>,
    /// Diagonal of `R`.
    pub r: Vec<f64>,
    pub jacobian_step: f64,
    pub feedback_states: Vec<usize>,
    pub linearize_at: LinearizationPoint,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            q: vec![1.0, 1.0, 0.5],
            r: vec![1.0, 1.0],
            jacobian_step: 1e-6,
            feedback_states: vec![0, 1, 2],
            linearize_at: LinearizationPoint::Desired,
        }
    }
}

impl ControllerConfig {
    pub fn build(&self) -> Result<ContractionController, ControlError> {
        let params = ControllerParams::diagonal(&self.q, &self.r, self.jacobian_step)?;
        ContractionController::new(
            params,
            pushcar::action_bounds(),
            Some(self.feedback_states.clone()),
            self.linearize_at,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub steps: usize,
    /// Reset threshold; `null` disables resets.
    pub tau: Option<f64>,
    /// Start state for `single` runs.
    pub initial_state: [f64; 5],
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            tau: Some(0.5),
            initial_state: [-1.5, -0.5, 0.0, 0.0, 0.0],
        }
    }
}

impl EpisodeConfig {
    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub resolution: usize,
    pub seeds_per_cell: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x: [-2.5, 1.5],
            y: [-2.0, 2.0],
            resolution: 5,
            seeds_per_cell: 10,
        }
    }
}

impl GridSpec {
    /// Evenly spaced including both ends; a single point sits mid-range.
    pub fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (range[0] + range[1])];
        }
        (0..n)
            .map(|i| range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Cells in row-major order `(i, j, x, y)`.
    pub fn cells(&self) -> Vec<(usize, usize, f64, f64)> {
        let xs = Self::axis(self.x, self.resolution);
        let ys = Self::axis(self.y, self.resolution);
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                out.push((i, j, x, y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub l_values: Vec<usize>,
    pub trials: usize,
    pub initial_state: [f64; 5],
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            l_values: vec![50, 100, 150, 200, 300, 400],
            trials: 30,
            initial_state: [-1.5, -0.5, 0.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    pub depths: Vec<u32>,
    pub etas: Vec<f64>,
    pub eps: Vec<f64>,
    pub alpha: f64,
    pub m_lower: f64,
    pub m_upper: f64,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            depths: vec![5, 10, 20],
            etas: vec![0.0, 0.01],
            eps: vec![0.0, 0.05],
            alpha: 0.5,
            m_lower: 1.0,
            m_upper: 1.0,
        }
    }
}

/// True disturbance in the simulated world and the estimator the planner
/// uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceConfig {
    #[default]
    None,
    /// Constant additive offset; the planner plans on the nominal model.
    Constant { offset: Vec<f64> },
    /// Speed-scaled sinusoidal drift, with an oracle estimator that is off
    /// by `estimate_offset`.
    Drifting {
        base: Vec<f64>,
        amplitude: Vec<f64>,
        period: f64,
        estimate_offset: Vec<f64>,
    },
}

impl DisturbanceConfig {
    pub fn build(&self) -> Result<(Arc<dyn DisturbanceModel>, Box<dyn DisturbanceEstimator>), ConfigError> {
        let dim = pushcar::STATE_DIM;
        let check = |v: &[f64], what: &str| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{what} must have {dim} entries")))
            }
        };
        Ok(match self {
            Self::None => (Arc::new(NoDisturbance::new(dim)), Box::new(ZeroEstimator::new(dim))),
            Self::Constant { offset } => {
                check(offset, "constant offset")?;
                (
                    Arc::new(ConstantDisturbance {
                        offset: State::from_row_slice(offset),
                    }),
                    Box::new(ZeroEstimator::new(dim)),
                )
            }
            Self::Drifting {
                base,
                amplitude,
                period,
                estimate_offset,
            } => {
                check(base, "base")?;
                check(amplitude, "amplitude")?;
                check(estimate_offset, "estimate_offset")?;
                if !(*period > 0.0) {
                    return Err(ConfigError::Invalid("period must be > 0".into()));
                }
                let model: Arc<dyn DisturbanceModel> = Arc::new(DriftingDisturbance {
                    base: base.clone(),
                    amplitude: amplitude.clone(),
                    period: *period,
                    scale_input: Some(0),
                });
                let estimator = OracleEstimator::new(model.clone(), State::from_row_slice(estimate_offset));
                (model, Box::new(estimator))
            }
        })
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub planners: Vec<PlannerConfig>,
    #[serde(default)]
    pub env: EnvParams,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub cem: CemConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.into()));
        self.env.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.experiment != ExperimentKind::Bounds && self.planners.is_empty() {
            return invalid("at least one planner is required");
        }
        if !(0.0..1.0).contains(&self.search.gamma) {
            return invalid("search.gamma must lie in [0, 1)");
        }
        self.search
            .params(self.search.iterations)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.episode.steps == 0 {
            return invalid("episode.steps must be >= 1");
        }
        if self.episode.tau.is_some_and(|t| !(t >= 0.0)) {
            return invalid("episode.tau must be >= 0");
        }
        if self.grid.resolution == 0 || self.grid.seeds_per_cell == 0 {
            return invalid("grid.resolution and grid.seeds_per_cell must be >= 1");
        }
        if self.experiment == ExperimentKind::Sweep && (self.sweep.l_values.is_empty() || self.sweep.trials == 0) {
            return invalid("sweep needs at least one L value and one trial");
        }
        if self.sweep.l_values.contains(&0) {
            return invalid("sweep L values must be >= 1");
        }
        self.controller.build().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.disturbance.build()?;
        for p in &self.planners {
            self.build_planner(p.kind, self.search.iterations)
                .map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.kind.name())))?;
        }
        Ok(())
    }

    /// Short SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }

    pub fn cem_params(&self, budget: usize) -> CemParams {
        CemParams::for_budget(
            budget,
            self.cem.iterations,
            self.cem.elite_frac,
            self.search.depth,
            &pushcar::action_bounds(),
        )
    }

    /// A fresh planner spending `budget` rollouts per step.
    pub fn build_planner(&self, kind: PlannerKind, budget: usize) -> Result<Box<dyn Planner>, PlanError> {
        Ok(match kind {
            PlannerKind::Mpt => Box::new(TreePlanner::new(self.search.params(budget), true)?),
            PlannerKind::Uct => Box::new(TreePlanner::new(self.search.params(budget), false)?),
            PlannerKind::Cem => Box::new(CemPlanner::new(self.cem_params(budget), false)?),
            PlannerKind::CemReuse => Box::new(CemPlanner::new(self.cem_params(budget), true)?),
        })
    }

    /// Tree planners pick from the discrete set; CEM works on the box.
    pub fn action_set(&self, kind: PlannerKind) -> ActionSet {
        match kind {
            PlannerKind::Mpt | PlannerKind::Uct => {
                ActionSet::discrete(pushcar::discrete_actions(), &pushcar::action_bounds()).expect("static action set")
            }
            PlannerKind::Cem | PlannerKind::CemReuse => ActionSet::ContinuousBox,
        }
    }
}
