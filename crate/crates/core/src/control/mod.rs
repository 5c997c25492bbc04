//! Locally linearized Riccati tracking controller and its contraction
//! analysis.
//!
//! At every step the planning model is linearized about the desired pair,
//! the DARE gives a metric `M` and gain `K`, and the applied input is
//! `u = u_d - K (x - x_d)`. The closed loop contracts in the metric `M` at
//! rate `sqrt(1 - lambda_min(Q) / m_upper)`, which feeds the error bounds in
//! [`bounds`].

pub mod bounds;
pub mod dare;
pub mod jacobian;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Action, BoxBounds, DynamicsModel, State};

pub use bounds::{
    contraction_rate, contraction_slack, steady_state_error_bound, tracking_error_bound, verify_contraction,
    DisturbanceBoundParams, MetricBounds,
};
pub use dare::{dare_residual, feedback_gain, solve_dare, solve_dare_recursion};
pub use jacobian::jacobians_fd;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{0} is singular")]
    Singular(&'static str),
    #[error("DARE did not converge: {0}")]
    NoConvergence(&'static str),
    #[error("DARE solution is not positive definite")]
    NotPositiveDefinite,
    #[error("DARE residual {0:e} above tolerance")]
    Residual(f64),
    #[error("closed loop is not strictly stable (spectral radius {0})")]
    NotStabilizing(f64),
    #[error("lambda_min(Q) = {lambda_min_q} exceeds m_upper = {m_upper}")]
    InconsistentBounds { lambda_min_q: f64, m_upper: f64 },
    #[error("finite-difference Jacobian failed: {0}")]
    Jacobian(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    /// State cost over the fed-back coordinates.
    pub q: DMatrix<f64>,
    /// Input cost.
    pub r: DMatrix<f64>,
    pub jacobian_step: f64,
}

impl ControllerParams {
    pub fn diagonal(q: &[f64], r: &[f64], jacobian_step: f64) -> Result<Self, ControlError> {
        let params = Self {
            q: DMatrix::from_diagonal(&DVector::from_row_slice(q)),
            r: DMatrix::from_diagonal(&DVector::from_row_slice(r)),
            jacobian_step,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if self.q.clone().cholesky().is_none() || self.r.clone().cholesky().is_none() {
            return Err(ControlError::NotPositiveDefinite);
        }
        if !(self.jacobian_step > 0.0) {
            return Err(ControlError::Shape("jacobian_step must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub m: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub a_cl: DMatrix<f64>,
    pub alpha: f64,
    pub m_lower: f64,
    pub m_upper: f64,
}

impl RiccatiSolution {
    pub fn solve(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) -> Result<Self, ControlError> {
        let m = solve_dare(a, b, q, r)?;
        let gain = feedback_gain(a, b, &m, r)?;
        let a_cl = a - b * &gain;
        let eig = m.clone().symmetric_eigen().eigenvalues;
        let (m_lower, m_upper) = (eig.min(), eig.max());
        let alpha = contraction_rate(q, m_upper)?;
        Ok(Self {
            m,
            gain,
            a_cl,
            alpha,
            m_lower,
            m_upper,
        })
    }
}

/// `u_d - K (x - x_d)`, clamped to the action bounds.
pub fn control_law(x: &State, x_d: &State, u_d: &Action, riccati: &RiccatiSolution, bounds: &BoxBounds) -> Action {
    bounds.clamp(&(u_d - &riccati.gain * (x - x_d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearizationPoint {
    /// `(x_d, u_d)`.
    #[default]
    Desired,
    /// `(x, u_d)`.
    Measured,
}

#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub action: Action,
    pub solution: Option<RiccatiSolution>,
    /// Set when no Riccati solution existed at the linearization point and
    /// the desired input was applied open loop.
    pub fallback: Option<ControlError>,
}

/// The tracking controller used in the receding-horizon loop.
#[derive(Debug, Clone)]
pub struct ContractionController {
    params: ControllerParams,
    action_bounds: BoxBounds,
    /// State coordinates under feedback; `None` means all of them.
    feedback_states: Option<Vec<usize>>,
    linearize_at: LinearizationPoint,
    metric: MetricBounds,
    fallbacks: u64,
}

impl ContractionController {
    pub fn new(
        params: ControllerParams,
        action_bounds: BoxBounds,
        feedback_states: Option<Vec<usize>>,
        linearize_at: LinearizationPoint,
    ) -> Result<Self, ControlError> {
        params.validate()?;
        if params.r.nrows() != action_bounds.dim() {
            return Err(ControlError::Shape("R must match the action dimension".into()));
        }
        if let Some(idx) = &feedback_states {
            if idx.len() != params.q.nrows() {
                return Err(ControlError::Shape("Q must match the fed-back state count".into()));
            }
        }
        Ok(Self {
            params,
            action_bounds,
            feedback_states,
            linearize_at,
            metric: MetricBounds::default(),
            fallbacks: 0,
        })
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    /// Eigenvalue envelope of every metric computed so far.
    pub fn metric_bounds(&self) -> MetricBounds {
        self.metric
    }

    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    /// Linearize `model` and solve for the metric and gain, restricted to the
    /// fed-back coordinates.
    pub fn linearize(&self, model: &dyn DynamicsModel, x: &State, u: &Action) -> Result<RiccatiSolution, ControlError> {
        let (a, b) = jacobians_fd(model, x, u, self.params.jacobian_step)?;
        let (a, b) = match &self.feedback_states {
            Some(idx) => (a.select_rows(idx).select_columns(idx), b.select_rows(idx)),
            None => (a, b),
        };
        if a.nrows() != self.params.q.nrows() {
            return Err(ControlError::Shape("Q must match the state dimension".into()));
        }
        RiccatiSolution::solve(&a, &b, &self.params.q, &self.params.r)
    }

    pub fn compute(&mut self, x: &State, x_d: &State, u_d: &Action, model: &dyn DynamicsModel) -> ControlOutput {
        let point = match self.linearize_at {
            LinearizationPoint::Desired => x_d,
            LinearizationPoint::Measured => x,
        };
        match self.linearize(model, point, u_d) {
            Ok(solution) => {
                self.metric.observe(solution.m_lower, solution.m_upper);
                let error = model.state_error(x, x_d);
                let error = match &self.feedback_states {
                    Some(idx) => error.select_rows(idx),
                    None => error,
                };
                let action = self.action_bounds.clamp(&(u_d - &solution.gain * error));
                ControlOutput {
                    action,
                    solution: Some(solution),
                    fallback: None,
                }
            }
            Err(e) => {
                self.fallbacks += 1;
                log::debug!("controller falling back to open loop: {e}");
                ControlOutput {
                    action: self.action_bounds.clamp(u_d),
                    solution: None,
                    fallback: Some(e),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_solution(k: f64) -> RiccatiSolution {
        let one = DMatrix::from_element(1, 1, 1.0);
        RiccatiSolution {
            m: one.clone(),
            gain: DMatrix::from_element(1, 1, k),
            a_cl: one,
            alpha: 0.5,
            m_lower: 1.0,
            m_upper: 1.0,
        }
    }

    #[test]
    fn control_law_examples() {
        let bounds = BoxBounds::symmetric(&[0.42]).unwrap();
        let sol = scalar_solution(0.618);
        let x = State::from_element(1, 2.0);
        let u_d = Action::from_element(1, 0.1);
        assert_eq!(control_law(&x, &x, &u_d, &sol, &bounds), u_d);
        let u = control_law(&State::from_element(1, 1.0), &State::zeros(1), &Action::zeros(1), &sol, &BoxBounds::symmetric(&[1.0]).unwrap());
        assert!((u[0] + 0.618).abs() < 1e-15);
        let u = control_law(&State::from_element(1, -5.0), &State::zeros(1), &Action::zeros(1), &sol, &bounds);
        assert_eq!(u[0], 0.42);
    }

    #[test]
    fn riccati_solution_contracts() {
        let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.2, 0.0, 0.9]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::identity(1, 1);
        let sol = RiccatiSolution::solve(&a, &b, &q, &r).unwrap();
        assert!(sol.m_lower >= 1.0 - 1e-12);
        assert!(verify_contraction(&sol.a_cl, &sol.m, sol.alpha));
    }
}
