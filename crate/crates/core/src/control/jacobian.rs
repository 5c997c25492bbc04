use nalgebra::DMatrix;

use super::ControlError;
use crate::mdp::{Action, DynamicsModel, State};

/// Jacobians `(dF/dx, dF/du)` at `(x, u)`.
///
/// Uses the model's analytic Jacobians when it has them. Otherwise central
/// differences with step `h`; a side of the stencil whose transition mode
/// differs from the base point's is dropped in favour of a one-sided
/// difference, so contact switches do not pollute the derivative.
pub fn jacobians_fd(
    dynamics: &dyn DynamicsModel,
    x: &State,
    u: &Action,
    h: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ControlError> {
    if let Some(ab) = dynamics.jacobians(x, u) {
        return Ok(ab);
    }
    if !(h > 0.0) {
        return Err(ControlError::Shape(format!("finite-difference step {h} must be > 0")));
    }
    let n = dynamics.state_dim();
    let m = dynamics.action_dim();
    let base_mode = dynamics.mode(x, u);
    let base = step(dynamics, x, u)?;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);

    for i in 0..n {
        let column = stencil(dynamics, &base, base_mode, h, |delta| {
            let mut xp = x.clone();
            xp[i] += delta;
            (xp, u.clone())
        })?;
        a.set_column(i, &column);
    }
    for i in 0..m {
        let column = stencil(dynamics, &base, base_mode, h, |delta| {
            let mut up = u.clone();
            up[i] += delta;
            (x.clone(), up)
        })?;
        b.set_column(i, &column);
    }
    Ok((a, b))
}

fn step(dynamics: &dyn DynamicsModel, x: &State, u: &Action) -> Result<State, ControlError> {
    let next = dynamics
        .step(x, u)
        .map_err(|e| ControlError::Jacobian(e.to_string()))?;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::Jacobian("non-finite perturbed state".into()));
    }
    Ok(next)
}

fn stencil(
    dynamics: &dyn DynamicsModel,
    base: &State,
    base_mode: u32,
    h: f64,
    perturb: impl Fn(f64) -> (State, Action),
) -> Result<State, ControlError> {
    let (xp, up) = perturb(h);
    let (xm, um) = perturb(-h);
    let plus_ok = dynamics.mode(&xp, &up) == base_mode;
    let minus_ok = dynamics.mode(&xm, &um) == base_mode;
    let fp = step(dynamics, &xp, &up)?;
    let fm = step(dynamics, &xm, &um)?;
    Ok(match (plus_ok, minus_ok) {
        (true, true) => (fp - fm) / (2.0 * h),
        (false, true) => (base - fm) / h,
        // forward difference also covers the both-sides-switch case
        _ => (fp - base) / h,
    })
}
