//! Contraction rate, contraction check and tracking-error bounds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ControlError;

/// Slack allowed on the largest eigenvalue of `A_cl' M A_cl - alpha^2 M`.
pub const CONTRACTION_SLACK: f64 = 1e-8;

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.max()
}

/// `sqrt(1 - lambda_min(Q) / m_upper)`.
pub fn contraction_rate(q: &DMatrix<f64>, m_upper: f64) -> Result<f64, ControlError> {
    let lambda = min_eigenvalue(q);
    if !(m_upper > 0.0) || lambda > m_upper {
        return Err(ControlError::InconsistentBounds { lambda_min_q: lambda, m_upper });
    }
    Ok((1.0 - lambda / m_upper).max(0.0).sqrt())
}

/// Largest eigenvalue of `A_cl' M A_cl - alpha^2 M`.
pub fn contraction_slack(a_cl: &DMatrix<f64>, m: &DMatrix<f64>, alpha: f64) -> f64 {
    let mut lhs = a_cl.transpose() * m * a_cl - m * (alpha * alpha);
    let t = lhs.transpose();
    lhs = (lhs + t) * 0.5;
    max_eigenvalue(&lhs)
}

pub fn verify_contraction(a_cl: &DMatrix<f64>, m: &DMatrix<f64>, alpha: f64) -> bool {
    contraction_slack(a_cl, m, alpha) <= CONTRACTION_SLACK
}

/// Error ball of a contracting closed loop driven by `||sigma|| <= sigma_bar`:
/// `alpha^k c e0 + sigma_bar / (1 - alpha) c (1 - alpha^k)`, `c = sqrt(m_upper / m_lower)`.
pub fn tracking_error_bound(k: u32, e0: f64, sigma_bar: f64, alpha: f64, m_lower: f64, m_upper: f64) -> f64 {
    let c = (m_upper / m_lower).sqrt();
    let decay = alpha.powi(k as i32);
    decay * c * e0 + sigma_bar / (1.0 - alpha) * c * (1.0 - decay)
}

/// Steady-state tracking error with tree reuse:
/// `sqrt(m_upper / m_lower) ((K + 1) eta + eps) / (1 - alpha)`.
pub fn steady_state_error_bound(depth: u32, eta: f64, eps_est: f64, alpha: f64, m_lower: f64, m_upper: f64) -> f64 {
    (m_upper / m_lower).sqrt() * ((depth as f64 + 1.0) * eta + eps_est) / (1.0 - alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceBoundParams {
    /// Per-step drift of the disturbance.
    pub eta: f64,
    /// Accuracy of the disturbance estimate.
    pub eps_est: f64,
    /// Magnitude bound of the disturbance.
    pub sigma_bar: f64,
}

impl DisturbanceBoundParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        if [self.eta, self.eps_est, self.sigma_bar].iter().all(|v| *v >= 0.0) {
            Ok(())
        } else {
            Err(ControlError::Shape("disturbance bounds must be nonnegative".into()))
        }
    }
}

/// Running envelope of metric eigenvalues over the desired states visited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBounds {
    pub m_lower: f64,
    pub m_upper: f64,
    pub samples: u64,
}

impl Default for MetricBounds {
    fn default() -> Self {
        Self {
            m_lower: f64::INFINITY,
            m_upper: 0.0,
            samples: 0,
        }
    }
}

impl MetricBounds {
    pub fn observe(&mut self, m_lower: f64, m_upper: f64) {
        self.m_lower = self.m_lower.min(m_lower);
        self.m_upper = self.m_upper.max(m_upper);
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &MetricBounds) {
        if other.samples > 0 {
            self.m_lower = self.m_lower.min(other.m_lower);
            self.m_upper = self.m_upper.max(other.m_upper);
            self.samples += other.samples;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    pub fn condition(&self) -> f64 {
        (self.m_upper / self.m_lower).sqrt()
    }
}
