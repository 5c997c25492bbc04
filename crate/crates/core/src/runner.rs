//! The receding-horizon loop: plan on the carried tree, track the plan's
//! first step with the feedback controller, advance the real system, update
//! the disturbance estimate, trim the tree and check for a reset.

use std::io::Write;

use rand::SeedableRng;
use serde::Serialize;

use crate::control::{ContractionController, MetricBounds};
use crate::disturbance::{add_disturbance, DisturbanceModel};
use crate::mdp::{Action, DisturbanceEstimator, DynamicsModel, EstimatedDynamics, MdpSpec, State};
use crate::planner::{Planner, SimRng};

/// The simulated real system: nominal dynamics plus the true disturbance.
pub struct Environment<'a> {
    pub dynamics: &'a dyn DynamicsModel,
    pub disturbance: &'a dyn DisturbanceModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// Measured `x_k`.
    pub state: State,
    /// `x^d_k`.
    pub desired_state: State,
    /// `u^d_{k+1}`.
    pub desired_action: Action,
    /// Applied `u_{k+1}`.
    pub action: Action,
    /// `R(x_{k+1}, u_{k+1})`, zero once the system leaves `X`.
    pub reward: f64,
    pub root_visits: u64,
    pub reused_visits: u64,
    /// The tree was replaced by a fresh root after this step.
    pub reset: bool,
    /// Transition mode of the real step (contact flag for the push task).
    pub mode: u32,
    /// The controller applied `u^d` open loop.
    pub fallback: bool,
    pub rollouts: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub steps: Vec<StepRecord>,
    pub cumulative_value: f64,
    pub config_hash: String,
    pub rng_seed: u64,
    /// Set when the episode stopped early on an error.
    pub aborted: Option<String>,
    /// The real system left the admissible set.
    pub terminated: bool,
    /// Metric envelope of the controller at the end of the episode.
    pub metric: MetricBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub cumulative_value: f64,
    pub steps: usize,
    pub resets: usize,
    pub mean_reused_visits: f64,
    pub aborted: Option<String>,
    pub terminated: bool,
    pub config_hash: String,
    pub rng_seed: u64,
}

impl EpisodeRecord {
    pub fn resets(&self) -> usize {
        self.steps.iter().filter(|s| s.reset).count()
    }

    pub fn summary(&self) -> EpisodeSummary {
        let n = self.steps.len();
        EpisodeSummary {
            cumulative_value: self.cumulative_value,
            steps: n,
            resets: self.resets(),
            mean_reused_visits: if n == 0 {
                0.0
            } else {
                self.steps.iter().map(|s| s.reused_visits as f64).sum::<f64>() / n as f64
            },
            aborted: self.aborted.clone(),
            terminated: self.terminated,
            config_hash: self.config_hash.clone(),
            rng_seed: self.rng_seed,
        }
    }

    /// One row per step: `k`, then `x`, `xd`, `ud`, `u` component-wise, then
    /// the scalar columns.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let Some(first) = self.steps.first() else {
            return writeln!(out, "k,reward,root_n,reused_n,reset,mode,fallback");
        };
        let mut header = vec!["k".to_string()];
        for (prefix, dim) in [
            ("x", first.state.len()),
            ("xd", first.desired_state.len()),
            ("ud", first.desired_action.len()),
            ("u", first.action.len()),
        ] {
            header.extend((0..dim).map(|i| format!("{prefix}{i}")));
        }
        header.extend(["reward", "root_n", "reused_n", "reset", "mode", "fallback"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for s in &self.steps {
            let mut row = vec![s.k.to_string()];
            for v in [&s.state, &s.desired_state, &s.desired_action, &s.action] {
                row.extend(v.iter().map(|c| c.to_string()));
            }
            row.extend([
                s.reward.to_string(),
                s.root_visits.to_string(),
                s.reused_visits.to_string(),
                (s.reset as u8).to_string(),
                s.mode.to_string(),
                (s.fallback as u8).to_string(),
            ]);
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_summary_json<W: Write>(&self, out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(out, &self.summary()).map_err(std::io::Error::other)
    }
}

/// Undiscounted sum of the realized rewards.
pub fn realized_value(record: &EpisodeRecord) -> f64 {
    record.steps.iter().map(|s| s.reward).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSettings {
    pub steps: usize,
    /// Reset threshold on `||root state - measured state||`.
    pub tau: f64,
    pub seed: u64,
}

/// Run one episode. `mdp.dynamics` is the nominal model; the planner and
/// controller see it corrected by `estimator`, the real system is `env`.
pub fn run_episode(
    initial_state: &State,
    mdp: &MdpSpec<'_>,
    env: &Environment<'_>,
    planner: &mut dyn Planner,
    controller: &mut ContractionController,
    estimator: &mut dyn DisturbanceEstimator,
    settings: EpisodeSettings,
) -> EpisodeRecord {
    let mut rng = SimRng::seed_from_u64(settings.seed);
    let mut record = EpisodeRecord {
        steps: Vec::with_capacity(settings.steps),
        cumulative_value: 0.0,
        config_hash: String::new(),
        rng_seed: settings.seed,
        aborted: None,
        terminated: false,
        metric: MetricBounds::default(),
    };
    let mut x = initial_state.clone();
    let begun = {
        let f_hat = EstimatedDynamics {
            nominal: mdp.dynamics,
            estimator: &*estimator,
        };
        planner.begin(&x, &mdp.with_dynamics(&f_hat))
    };
    if let Err(e) = begun {
        record.aborted = Some(e.to_string());
        return record;
    }

    for k in 0..settings.steps {
        // plan and control against F_hat_k
        let (plan, control, predicted) = {
            let f_hat = EstimatedDynamics {
                nominal: mdp.dynamics,
                estimator: &*estimator,
            };
            let planning = mdp.with_dynamics(&f_hat);
            let plan = match planner.plan(&x, &planning, &mut rng) {
                Ok(plan) => plan,
                Err(e) => {
                    record.aborted = Some(format!("step {k}: {e}"));
                    break;
                }
            };
            let control = controller.compute(&x, &plan.desired_state, &plan.desired_action, &f_hat);
            let predicted = f_hat.step(&x, &control.action);
            (plan, control, predicted)
        };

        let u = control.action;
        let next = match env.dynamics.step(&x, &u) {
            Ok(nominal) => env.dynamics.canonicalize(add_disturbance(&nominal, env.disturbance, &x, &u, k)),
            Err(e) => {
                record.aborted = Some(format!("step {k}: {e}"));
                break;
            }
        };
        let mode = env.dynamics.mode(&x, &u);
        if let Ok(predicted) = &predicted {
            estimator.update(&next, predicted, &u, k);
        }

        let admissible = next.iter().all(|v| v.is_finite()) && mdp.admissible(&next);
        let reward = if admissible {
            match mdp.reward.reward(&next, &u) {
                Ok(r) => r,
                Err(e) => {
                    record.aborted = Some(format!("step {k}: {e}"));
                    break;
                }
            }
        } else {
            0.0
        };

        let reset = if admissible {
            let f_hat = EstimatedDynamics {
                nominal: mdp.dynamics,
                estimator: &*estimator,
            };
            match planner.advance(&next, &mdp.with_dynamics(&f_hat), settings.tau) {
                Ok(reset) => reset,
                Err(e) => {
                    record.aborted = Some(format!("step {k}: {e}"));
                    false
                }
            }
        } else {
            false
        };

        record.steps.push(StepRecord {
            k,
            state: x,
            desired_state: plan.desired_state,
            desired_action: plan.desired_action,
            action: u,
            reward,
            root_visits: plan.root_visits,
            reused_visits: plan.reused_visits,
            reset,
            mode,
            fallback: control.fallback.is_some(),
            rollouts: plan.rollouts,
        });
        record.cumulative_value += reward;
        x = next;
        if !admissible {
            record.terminated = true;
            break;
        }
        if record.aborted.is_some() {
            break;
        }
    }

    record.metric = controller.metric_bounds();
    record
}
