//! Discrete algebraic Riccati equation
//!
//! `M = A'MA - A'MB (R + B'MB)^-1 B'MA + Q`
//!
//! solved with the structured doubling algorithm and polished with a few
//! plain Riccati recursion steps. The recursion alone is also exposed; it is
//! slower but needs nothing beyond the equation itself.

use nalgebra::DMatrix;

use super::ControlError;

pub const DARE_TOLERANCE: f64 = 1e-12;
pub const DARE_RESIDUAL_LIMIT: f64 = 1e-9;
const MAX_DOUBLING_STEPS: usize = 100;
pub const MAX_RECURSION_STEPS: usize = 100_000;
/// Closed-loop spectral radius must stay below `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

fn check_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<(), ControlError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(ControlError::Shape(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    Ok(())
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn relative_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    (new - old).norm() / new.norm().max(f64::MIN_POSITIVE)
}

/// One step of the Riccati recursion `M <- A'MA - A'MB (R + B'MB)^-1 B'MA + Q`.
pub fn riccati_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ControlError> {
    let mb = m * b;
    let s = r + b.transpose() * &mb;
    let btma = mb.transpose() * a;
    let gain = s.lu().solve(&btma).ok_or(ControlError::Singular("R + B'MB"))?;
    let mut next = a.transpose() * m * a - btma.transpose() * gain + q;
    symmetrize(&mut next);
    Ok(next)
}

/// Relative residual `||A'MA - A'MB (R + B'MB)^-1 B'MA + Q - M|| / ||M||`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> f64 {
    match riccati_step(a, b, q, r, m) {
        Ok(next) => (next - m).norm() / m.norm().max(f64::MIN_POSITIVE),
        Err(_) => f64::INFINITY,
    }
}

/// Fixed-point Riccati recursion from `M_0 = Q`.
pub fn solve_dare_recursion(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ControlError> {
    check_shapes(a, b, q, r)?;
    let mut m = q.clone();
    for _ in 0..MAX_RECURSION_STEPS {
        let next = riccati_step(a, b, q, r, &m)?;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(ControlError::NoConvergence("Riccati recursion diverged"));
        }
        let change = relative_change(&next, &m);
        m = next;
        if change <= DARE_TOLERANCE {
            return finish(a, b, q, r, m);
        }
    }
    Err(ControlError::NoConvergence("Riccati recursion hit the iteration limit"))
}

/// Solve the DARE. Fails when (A, B) is not stabilizable or (A, Q^1/2) not
/// detectable, which shows up as divergence or a missed residual target.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ControlError> {
    check_shapes(a, b, q, r)?;
    let n = a.nrows();
    let identity = DMatrix::<f64>::identity(n, n);
    let r_inv_bt = r
        .clone()
        .lu()
        .solve(&b.transpose())
        .ok_or(ControlError::Singular("R"))?;
    let mut ak = a.clone();
    let mut gk = b * r_inv_bt;
    symmetrize(&mut gk);
    let mut hk = q.clone();
    let mut converged = false;
    for _ in 0..MAX_DOUBLING_STEPS {
        let w = (&identity + &gk * &hk).lu();
        let w_inv_a = w.solve(&ak).ok_or(ControlError::Singular("I + GH"))?;
        let w_inv_g = w.solve(&gk).ok_or(ControlError::Singular("I + GH"))?;
        let a_next = &ak * &w_inv_a;
        let mut g_next = &gk + &ak * w_inv_g * ak.transpose();
        let mut h_next = &hk + ak.transpose() * &hk * &w_inv_a;
        symmetrize(&mut g_next);
        symmetrize(&mut h_next);
        if !h_next.iter().all(|v| v.is_finite()) || !a_next.iter().all(|v| v.is_finite()) {
            return Err(ControlError::NoConvergence("doubling iteration diverged"));
        }
        let change = relative_change(&h_next, &hk);
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if change <= DARE_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ControlError::NoConvergence("doubling iteration hit the step limit"));
    }
    for _ in 0..3 {
        hk = riccati_step(a, b, q, r, &hk)?;
    }
    finish(a, b, q, r, hk)
}

fn finish(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    mut m: DMatrix<f64>,
) -> Result<DMatrix<f64>, ControlError> {
    symmetrize(&mut m);
    if m.clone().cholesky().is_none() {
        return Err(ControlError::NotPositiveDefinite);
    }
    let residual = dare_residual(a, b, q, r, &m);
    if !(residual <= DARE_RESIDUAL_LIMIT) {
        return Err(ControlError::Residual(residual));
    }
    // a marginal mode (e.g. an uncontrollable unit eigenvalue) can leave a
    // tiny relative residual on a huge M, so check that M actually stabilizes
    let a_cl = a - b * feedback_gain(a, b, &m, r)?;
    let radius = a_cl.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(radius < 1.0 - STABILITY_MARGIN) {
        return Err(ControlError::NotStabilizing(radius));
    }
    Ok(m)
}

/// `K = (R + B'MB)^-1 B'MA`.
pub fn feedback_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    m: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ControlError> {
    let mb = m * b;
    let s = r + b.transpose() * &mb;
    s.lu()
        .solve(&(mb.transpose() * a))
        .ok_or(ControlError::Singular("R + B'MB"))
}
