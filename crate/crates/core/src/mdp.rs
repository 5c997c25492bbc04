//! Decision-problem abstraction shared by every planner and environment.
//!
//! A problem is a discounted MDP over real vector states and actions: a
//! state box `X`, an action box `U`, a deterministic dynamics model, a
//! bounded reward, a discount factor and a terminal value estimate. The
//! planners only ever see the problem through [`MdpSpec`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

pub type State = DVector<f64>;
pub type Action = DVector<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("non-finite state component at index {0}")]
    NonFiniteState(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("all {0} actions have already been expanded")]
    ActionsExhausted(usize),
    #[error("invalid problem definition: {0}")]
    Invalid(String),
    #[error("dynamics failure: {0}")]
    Dynamics(String),
}

/// Axis-aligned box. Infinite limits are allowed (e.g. for headings).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, MdpError> {
        if lower.len() != upper.len() {
            return Err(MdpError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(MdpError::Invalid("box has zero dimensions".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(MdpError::Invalid(format!(
                    "empty interval [{lo}, {hi}] on axis {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    /// Symmetric box `[-limit_i, limit_i]`.
    pub fn symmetric(limits: &[f64]) -> Result<Self, MdpError> {
        Self::new(limits.iter().map(|l| -l).collect(), limits.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi)),
        )
    }

    /// Per-axis width `upper - lower`.
    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .collect()
    }

    /// Uniform sample; every axis must be finite.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower.iter().zip(&self.upper).map(|(lo, hi)| {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..=*hi)
                }
            }),
        )
    }
}

/// Deterministic transition model `x' = F(x, u)`.
pub trait DynamicsModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;

    fn step(&self, x: &State, u: &Action) -> Result<State, MdpError>;

    /// Analytic Jacobians `(dF/dx, dF/du)`, when the model has them. Callers
    /// fall back to finite differences on `None`.
    fn jacobians(&self, _x: &State, _u: &Action) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    /// Discrete mode of the transition taken from `(x, u)` (0 for smooth
    /// models). Finite-difference stencils never straddle a mode change.
    fn mode(&self, _x: &State, _u: &Action) -> u32 {
        0
    }

    /// `x - reference`, with any angular components wrapped.
    fn state_error(&self, x: &State, reference: &State) -> State {
        x - reference
    }

    /// Bring a state produced outside `step` (e.g. by an additive
    /// disturbance) back to canonical coordinates, such as wrapped angles.
    fn canonicalize(&self, x: State) -> State {
        x
    }
}

/// Online estimate of the unknown additive disturbance.
pub trait DisturbanceEstimator: Send + Sync {
    fn update(&mut self, observed: &State, predicted: &State, action: &Action, time: usize);
    fn estimate(&self, x: &State, u: &Action) -> State;
}

/// Estimator that always returns zero, i.e. plans on the nominal model.
#[derive(Debug, Clone)]
pub struct ZeroEstimator {
    dim: usize,
}

impl ZeroEstimator {
    pub fn new(state_dim: usize) -> Self {
        Self { dim: state_dim }
    }
}

impl DisturbanceEstimator for ZeroEstimator {
    fn update(&mut self, _observed: &State, _predicted: &State, _action: &Action, _time: usize) {}

    fn estimate(&self, _x: &State, _u: &Action) -> State {
        State::zeros(self.dim)
    }
}

/// The planning model `F_nom + d_hat`.
pub struct EstimatedDynamics<'a> {
    pub nominal: &'a dyn DynamicsModel,
    pub estimator: &'a dyn DisturbanceEstimator,
}

impl DynamicsModel for EstimatedDynamics<'_> {
    fn state_dim(&self) -> usize {
        self.nominal.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.nominal.action_dim()
    }

    fn step(&self, x: &State, u: &Action) -> Result<State, MdpError> {
        let mut next = self.nominal.step(x, u)?;
        next += self.estimator.estimate(x, u);
        Ok(self.nominal.canonicalize(next))
    }

    fn mode(&self, x: &State, u: &Action) -> u32 {
        self.nominal.mode(x, u)
    }

    fn state_error(&self, x: &State, reference: &State) -> State {
        self.nominal.state_error(x, reference)
    }

    fn canonicalize(&self, x: State) -> State {
        self.nominal.canonicalize(x)
    }
}

pub trait RewardFn: Send + Sync {
    /// Reward for arriving in `x` by applying `u`.
    fn reward(&self, x: &State, u: &Action) -> Result<f64, MdpError>;
}

/// Terminal value estimate `V_hat`.
pub trait ValueEstimate: Send + Sync {
    fn value(&self, x: &State) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroValue;

impl ValueEstimate for ZeroValue {
    fn value(&self, _x: &State) -> f64 {
        0.0
    }
}

/// Membership in the admissible set `X` beyond the state box (obstacles,
/// workspace geometry).
pub trait StateConstraint: Send + Sync {
    fn admissible(&self, x: &State) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    Discrete(Vec<Action>),
    ContinuousBox,
}

impl ActionSet {
    /// Discrete set; every action must lie in `bounds` and appear once.
    pub fn discrete(actions: Vec<Action>, bounds: &BoxBounds) -> Result<Self, MdpError> {
        if actions.is_empty() {
            return Err(MdpError::Invalid("empty discrete action set".into()));
        }
        for (i, a) in actions.iter().enumerate() {
            if !bounds.contains(a) {
                return Err(MdpError::Invalid(format!("action {i} lies outside the action bounds")));
            }
            if actions[..i].iter().any(|b| b == a) {
                return Err(MdpError::Invalid(format!("action {i} is a duplicate")));
            }
        }
        Ok(Self::Discrete(actions))
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            Self::Discrete(a) => Some(a.len()),
            Self::ContinuousBox => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn get(&self, index: usize) -> Option<&Action> {
        match self {
            Self::Discrete(a) => a.get(index),
            Self::ContinuousBox => None,
        }
    }
}

/// Draws uniformly among the action indices not in `visited`.
pub fn sample_action_unvisited<R: Rng + ?Sized>(
    actions: &ActionSet,
    visited: &[usize],
    rng: &mut R,
) -> Result<usize, MdpError> {
    let n = match actions {
        ActionSet::Discrete(a) => a.len(),
        ActionSet::ContinuousBox => {
            return Err(MdpError::Invalid(
                "sampling without replacement needs a discrete action set".into(),
            ))
        }
    };
    let unvisited: Vec<usize> = (0..n).filter(|i| !visited.contains(i)).collect();
    if unvisited.is_empty() {
        return Err(MdpError::ActionsExhausted(n));
    }
    Ok(unvisited[rng.random_range(0..unvisited.len())])
}

/// `sum_k gamma^(k-1) r_k` with `k` starting at 1.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// Outcome of one simulated transition.
#[derive(Debug, Clone)]
pub struct Transition {
    pub next: State,
    pub reward: f64,
    /// The successor left `X`; it earns zero reward and is never expanded.
    pub terminal: bool,
}

/// The problem tuple plus terminal value estimate.
#[derive(Clone)]
pub struct MdpSpec<'a> {
    pub state_bounds: BoxBounds,
    pub action_bounds: BoxBounds,
    pub gamma: f64,
    pub actions: ActionSet,
    pub dynamics: &'a dyn DynamicsModel,
    pub reward: &'a dyn RewardFn,
    pub value_estimate: &'a dyn ValueEstimate,
    pub constraint: Option<&'a dyn StateConstraint>,
}

impl<'a> MdpSpec<'a> {
    pub fn new(
        state_bounds: BoxBounds,
        action_bounds: BoxBounds,
        gamma: f64,
        actions: ActionSet,
        dynamics: &'a dyn DynamicsModel,
        reward: &'a dyn RewardFn,
    ) -> Result<Self, MdpError> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(MdpError::Invalid(format!("discount {gamma} outside [0, 1)")));
        }
        if state_bounds.dim() != dynamics.state_dim() {
            return Err(MdpError::DimensionMismatch {
                expected: dynamics.state_dim(),
                got: state_bounds.dim(),
            });
        }
        if action_bounds.dim() != dynamics.action_dim() {
            return Err(MdpError::DimensionMismatch {
                expected: dynamics.action_dim(),
                got: action_bounds.dim(),
            });
        }
        if let ActionSet::Discrete(list) = &actions {
            if list.iter().any(|a| !action_bounds.contains(a)) {
                return Err(MdpError::Invalid("discrete action outside the action bounds".into()));
            }
        }
        Ok(Self {
            state_bounds,
            action_bounds,
            gamma,
            actions,
            dynamics,
            reward,
            value_estimate: &ZeroValue,
            constraint: None,
        })
    }

    pub fn with_value_estimate(mut self, value: &'a dyn ValueEstimate) -> Self {
        self.value_estimate = value;
        self
    }

    pub fn with_constraint(mut self, constraint: &'a dyn StateConstraint) -> Self {
        self.constraint = Some(constraint);
        self
    }

    /// Same problem with the dynamics swapped (e.g. for the current `F_hat`).
    pub fn with_dynamics<'b>(&'b self, dynamics: &'b dyn DynamicsModel) -> MdpSpec<'b> {
        MdpSpec {
            state_bounds: self.state_bounds.clone(),
            action_bounds: self.action_bounds.clone(),
            gamma: self.gamma,
            actions: self.actions.clone(),
            dynamics,
            reward: self.reward,
            value_estimate: self.value_estimate,
            constraint: self.constraint,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.dynamics.action_dim()
    }

    pub fn admissible(&self, x: &State) -> bool {
        self.state_bounds.contains(x) && self.constraint.is_none_or(|c| c.admissible(x))
    }

    /// Step the dynamics and score the successor.
    pub fn transition(&self, x: &State, u: &Action) -> Result<Transition, MdpError> {
        let next = self.dynamics.step(x, u)?;
        check_finite(&next)?;
        if next.len() != self.state_dim() {
            return Err(MdpError::DimensionMismatch {
                expected: self.state_dim(),
                got: next.len(),
            });
        }
        if self.admissible(&next) {
            let reward = self.reward.reward(&next, u)?;
            Ok(Transition {
                next,
                reward,
                terminal: false,
            })
        } else {
            Ok(Transition {
                next,
                reward: 0.0,
                terminal: true,
            })
        }
    }
}

pub fn check_finite(x: &DVector<f64>) -> Result<(), MdpError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(MdpError::NonFiniteState(i)),
        None => Ok(()),
    }
}
