//! True disturbances applied by the simulated world, and an oracle estimator
//! with a known accuracy.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mdp::{Action, DisturbanceEstimator, State};

/// Additive disturbance `d(x, u, k)` on the successor state.
pub trait DisturbanceModel: Send + Sync {
    fn disturbance(&self, x: &State, u: &Action, k: usize) -> State;
}

/// `x_{k+1} = F_nom(x_k, u_k) + d(x_k, u_k, k)`.
pub fn add_disturbance(nominal_next: &State, model: &dyn DisturbanceModel, x: &State, u: &Action, k: usize) -> State {
    nominal_next + model.disturbance(x, u, k)
}

#[derive(Debug, Clone)]
pub struct NoDisturbance {
    dim: usize,
}

impl NoDisturbance {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl DisturbanceModel for NoDisturbance {
    fn disturbance(&self, _x: &State, _u: &Action, _k: usize) -> State {
        State::zeros(self.dim)
    }
}

#[derive(Debug, Clone)]
pub struct ConstantDisturbance {
    pub offset: State,
}

impl DisturbanceModel for ConstantDisturbance {
    fn disturbance(&self, _x: &State, _u: &Action, _k: usize) -> State {
        self.offset.clone()
    }
}

/// `s(u) (base + amplitude sin(2 pi k / period))`, where `s(u) = |u[i]|` for
/// an optional scaling input `i` and 1 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftingDisturbance {
    pub base: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub period: f64,
    /// Input whose magnitude scales the disturbance (the car's speed).
    pub scale_input: Option<usize>,
}

impl DriftingDisturbance {
    fn scale(&self, u: &Action) -> f64 {
        self.scale_input.map_or(1.0, |i| u[i].abs())
    }

    /// Bound on `||d(x, u, k+1) - d(x, u, k)||` given `s(u) <= max_scale`,
    /// from `|sin a - sin b| <= |a - b|`.
    pub fn drift_bound(&self, max_scale: f64) -> f64 {
        let amp = self.amplitude.iter().map(|a| a * a).sum::<f64>().sqrt();
        max_scale * amp * 2.0 * PI / self.period
    }

    /// Bound on `||d||` given `s(u) <= max_scale`.
    pub fn magnitude_bound(&self, max_scale: f64) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        max_scale * (norm(&self.base) + norm(&self.amplitude))
    }
}

impl DisturbanceModel for DriftingDisturbance {
    fn disturbance(&self, _x: &State, u: &Action, k: usize) -> State {
        let phase = (2.0 * PI * k as f64 / self.period).sin();
        let s = self.scale(u);
        State::from_iterator(
            self.base.len(),
            self.base.iter().zip(&self.amplitude).map(|(b, a)| s * (b + a * phase)),
        )
    }
}

/// Knows the true disturbance model but reports it with a fixed offset, so
/// `||d - d_hat|| = ||offset||` everywhere. It lags by design: after the real
/// step at time `k` it predicts the disturbance of step `k + 1`.
#[derive(Clone)]
pub struct OracleEstimator {
    model: Arc<dyn DisturbanceModel>,
    offset: State,
    time: usize,
}

impl OracleEstimator {
    pub fn new(model: Arc<dyn DisturbanceModel>, offset: State) -> Self {
        Self { model, offset, time: 0 }
    }

    pub fn accuracy(&self) -> f64 {
        self.offset.norm()
    }
}

impl DisturbanceEstimator for OracleEstimator {
    fn update(&mut self, _observed: &State, _predicted: &State, _action: &Action, time: usize) {
        self.time = time + 1;
    }

    fn estimate(&self, x: &State, u: &Action) -> State {
        self.model.disturbance(x, u, self.time) + &self.offset
    }
}
