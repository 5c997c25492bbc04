//! Planar push task: a kinematic bicycle car pushing a disk-shaped barrel.
//!
//! State `[x, y, theta, x_o, y_o]`, input `[V, delta]`. The car moves by
//! bicycle kinematics; the barrel has no momentum and only moves when the
//! car's footprint would overlap it, in which case it takes the
//! minimum-displacement position that restores non-penetration. For one
//! disk against one convex polygon that projection is the solution of the
//! contact complementarity problem: the barrel either stays put or ends up
//! exactly touching the car.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Action, BoxBounds, DynamicsModel, MdpError, RewardFn, State, StateConstraint};
use crate::runner::EpisodeRecord;

pub const MAX_SPEED: f64 = 1.0;
pub const MAX_STEER: f64 = 0.42;
pub const STATE_DIM: usize = 5;
pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("barrel trapped: no non-penetrating position found (signed distance {0})")]
    Trapped(f64),
    #[error("invalid environment parameters: {0}")]
    Invalid(String),
    #[error("non-finite state")]
    NonFinite,
}

impl From<EnvError> for MdpError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::NonFinite => MdpError::NonFiniteState(0),
            other => MdpError::Dynamics(other.to_string()),
        }
    }
}

/// Wrap to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarBarrelState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub x_o: f64,
    pub y_o: f64,
}

impl CarBarrelState {
    pub fn new(x: f64, y: f64, theta: f64, x_o: f64, y_o: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            x_o,
            y_o,
        }
    }

    pub fn from_vector(v: &State) -> Result<Self, EnvError> {
        if v.len() != STATE_DIM || v.iter().any(|c| !c.is_finite()) {
            return Err(EnvError::NonFinite);
        }
        Ok(Self::new(v[0], v[1], v[2], v[3], v[4]))
    }

    pub fn to_vector(&self) -> State {
        State::from_row_slice(&[self.x, self.y, self.theta, self.x_o, self.y_o])
    }

    pub fn pose(&self) -> CarPose {
        CarPose {
            x: self.x,
            y: self.y,
            theta: self.theta,
        }
    }

    pub fn barrel(&self) -> [f64; 2] {
        [self.x_o, self.y_o]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarAction {
    pub v: f64,
    pub delta: f64,
}

impl CarAction {
    pub fn to_vector(self) -> Action {
        Action::from_row_slice(&[self.v, self.delta])
    }

    pub fn from_vector(u: &Action) -> Self {
        Self { v: u[0], delta: u[1] }
    }
}

/// `(V, delta) in {(0, 0), (+-1, 0), (+-1, +-0.42)}`.
pub fn discrete_actions() -> Vec<Action> {
    [
        (0.0, 0.0),
        (MAX_SPEED, 0.0),
        (-MAX_SPEED, 0.0),
        (MAX_SPEED, MAX_STEER),
        (MAX_SPEED, -MAX_STEER),
        (-MAX_SPEED, MAX_STEER),
        (-MAX_SPEED, -MAX_STEER),
    ]
    .iter()
    .map(|&(v, delta)| CarAction { v, delta }.to_vector())
    .collect()
}

pub fn action_bounds() -> BoxBounds {
    BoxBounds::symmetric(&[MAX_SPEED, MAX_STEER]).expect("static bounds")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Workspace {
    pub fn diagonal(&self) -> f64 {
        (self.x[1] - self.x[0]).hypot(self.y[1] - self.y[0])
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvParams {
    pub dt: f64,
    pub wheelbase: f64,
    /// Convex car footprint in the body frame, counter-clockwise.
    pub car_polygon: Vec<[f64; 2]>,
    pub barrel_radius: f64,
    pub obstacles: Vec<Obstacle>,
    pub workspace: Workspace,
    pub goal: [f64; 2],
    /// Reward normalizer `D`; the workspace diagonal when unset.
    pub reward_normalizer: Option<f64>,
    pub contact_tol: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            dt: 0.2,
            wheelbase: 0.3,
            // 0.4 x 0.3 body with a chamfered nose; flat 0.2 m pushing face
            car_polygon: vec![
                [-0.2, -0.15],
                [0.15, -0.15],
                [0.2, -0.1],
                [0.2, 0.1],
                [0.15, 0.15],
                [-0.2, 0.15],
            ],
            barrel_radius: 0.15,
            obstacles: Vec::new(),
            workspace: Workspace {
                x: [-3.0, 5.0],
                y: [-3.0, 3.0],
            },
            goal: [4.0, 0.0],
            // initial barrel-to-goal distance, so the starting reward is 0.1
            reward_normalizer: Some(4.0),
            contact_tol: 1e-6,
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.dt > 0.0 && self.wheelbase > 0.0 && self.barrel_radius > 0.0) {
            return Err(EnvError::Invalid("dt, wheelbase and barrel_radius must be > 0".into()));
        }
        if self.workspace.x[0] >= self.workspace.x[1] || self.workspace.y[0] >= self.workspace.y[1] {
            return Err(EnvError::Invalid("empty workspace".into()));
        }
        if self.reward_normalizer.is_some_and(|d| !(d > 0.0)) {
            return Err(EnvError::Invalid("reward normalizer must be > 0".into()));
        }
        let poly = &self.car_polygon;
        if poly.len() < 3 {
            return Err(EnvError::Invalid("car polygon needs at least 3 vertices".into()));
        }
        for i in 0..poly.len() {
            let (a, b, c) = (poly[i], poly[(i + 1) % poly.len()], poly[(i + 2) % poly.len()]);
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross <= 0.0 {
                return Err(EnvError::Invalid("car polygon must be convex and counter-clockwise".into()));
            }
        }
        Ok(())
    }

    pub fn normalizer(&self) -> f64 {
        self.reward_normalizer.unwrap_or_else(|| self.workspace.diagonal())
    }

    pub fn car_vertices(&self, pose: CarPose) -> Vec<[f64; 2]> {
        let (s, c) = pose.theta.sin_cos();
        self.car_polygon
            .iter()
            .map(|p| [pose.x + c * p[0] - s * p[1], pose.y + s * p[0] + c * p[1]])
            .collect()
    }
}

/// Bicycle kinematics, heading wrapped.
pub fn car_step(state: &CarBarrelState, action: CarAction, params: &EnvParams) -> CarPose {
    let (s, c) = state.theta.sin_cos();
    CarPose {
        x: state.x + params.dt * action.v * c,
        y: state.y + params.dt * action.v * s,
        theta: wrap_angle(state.theta + params.dt * action.v / params.wheelbase * action.delta.tan()),
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Signed distance from `p` to a convex CCW polygon (negative inside),
/// with the closest boundary point and the outward normal there.
fn polygon_distance(p: [f64; 2], vertices: &[[f64; 2]]) -> (f64, [f64; 2], [f64; 2]) {
    let n = vertices.len();
    let mut max_side = f64::NEG_INFINITY;
    let mut max_edge = 0;
    let mut best = (f64::INFINITY, p, [0.0, 0.0]);
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let e = sub(b, a);
        let len = norm(e);
        let normal = [e[1] / len, -e[0] / len];
        let side = dot(normal, sub(p, a));
        if side > max_side {
            max_side = side;
            max_edge = i;
        }
        let t = (dot(sub(p, a), e) / (len * len)).clamp(0.0, 1.0);
        let q = [a[0] + t * e[0], a[1] + t * e[1]];
        let d = norm(sub(p, q));
        if d < best.0 {
            best = (d, q, normal);
        }
    }
    if max_side <= 0.0 {
        let a = vertices[max_edge];
        let e = sub(vertices[(max_edge + 1) % n], a);
        let len = norm(e);
        let normal = [e[1] / len, -e[0] / len];
        let q = [p[0] - max_side * normal[0], p[1] - max_side * normal[1]];
        return (max_side, q, normal);
    }
    let (d, q, edge_normal) = best;
    let dir = if d > 0.0 {
        [(p[0] - q[0]) / d, (p[1] - q[1]) / d]
    } else {
        edge_normal
    };
    (d, q, dir)
}

/// Signed distance between the barrel disk and the car footprint.
pub fn signed_distance(barrel: [f64; 2], pose: CarPose, params: &EnvParams) -> f64 {
    polygon_distance(barrel, &params.car_vertices(pose)).0 - params.barrel_radius
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactOutcome {
    pub barrel: [f64; 2],
    pub active: bool,
}

/// Minimum-displacement barrel position that does not penetrate the car at
/// `car_next`; unchanged when there is no overlap.
pub fn contact_resolve(barrel_prev: [f64; 2], car_next: CarPose, params: &EnvParams) -> Result<ContactOutcome, EnvError> {
    let vertices = params.car_vertices(car_next);
    let r = params.barrel_radius;
    let (dist, _closest, normal) = polygon_distance(barrel_prev, &vertices);
    if dist - r >= 0.0 {
        return Ok(ContactOutcome {
            barrel: barrel_prev,
            active: false,
        });
    }
    // push out along the normal until the gap closes exactly
    let push = r - dist;
    let barrel = [barrel_prev[0] + push * normal[0], barrel_prev[1] + push * normal[1]];
    let gap = polygon_distance(barrel, &vertices).0 - r;
    if !barrel.iter().all(|v| v.is_finite()) || gap < -params.contact_tol {
        return Err(EnvError::Trapped(gap));
    }
    Ok(ContactOutcome { barrel, active: true })
}

/// Car kinematics followed by contact resolution.
pub fn env_step(state: &CarBarrelState, action: CarAction, params: &EnvParams) -> Result<(CarBarrelState, bool), EnvError> {
    let pose = car_step(state, action, params);
    let contact = contact_resolve(state.barrel(), pose, params)?;
    Ok((
        CarBarrelState {
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
            x_o: contact.barrel[0],
            y_o: contact.barrel[1],
        },
        contact.active,
    ))
}

/// True iff the car or barrel overlaps an obstacle (open sets) or leaves the
/// workspace.
pub fn collision_check(state: &CarBarrelState, params: &EnvParams) -> bool {
    let vertices = params.car_vertices(state.pose());
    if vertices.iter().any(|&v| !params.workspace.contains(v)) {
        return true;
    }
    let (bx, by, r) = (state.x_o, state.y_o, params.barrel_radius);
    let ws = &params.workspace;
    if bx - r < ws.x[0] || bx + r > ws.x[1] || by - r < ws.y[0] || by + r > ws.y[1] {
        return true;
    }
    params.obstacles.iter().any(|o| {
        polygon_distance(o.center, &vertices).0 < o.radius || norm(sub(o.center, [bx, by])) < o.radius + r
    })
}

/// `0.1 + 0.9 (1 - dist(barrel, goal) / D)`, clamped to `[0, 1]`.
pub fn reward_eval(state: &State, goal: [f64; 2], normalizer: f64) -> Result<f64, MdpError> {
    crate::mdp::check_finite(state)?;
    let dist = (state[3] - goal[0]).hypot(state[4] - goal[1]);
    Ok((0.1 + 0.9 * (1.0 - dist / normalizer)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushReward {
    pub goal: [f64; 2],
    pub normalizer: f64,
}

impl RewardFn for PushReward {
    fn reward(&self, x: &State, _u: &Action) -> Result<f64, MdpError> {
        reward_eval(x, self.goal, self.normalizer)
    }
}

/// The push task as a [`DynamicsModel`] and admissible-set constraint.
#[derive(Debug, Clone)]
pub struct PushCarModel {
    params: EnvParams,
}

impl PushCarModel {
    pub fn new(params: EnvParams) -> Result<Self, EnvError> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn reward(&self) -> PushReward {
        PushReward {
            goal: self.params.goal,
            normalizer: self.params.normalizer(),
        }
    }

    /// Workspace on the positions, `[-pi, pi]` on the heading.
    pub fn state_bounds(&self) -> BoxBounds {
        let ws = &self.params.workspace;
        BoxBounds::new(
            vec![ws.x[0], ws.y[0], -PI, ws.x[0], ws.y[0]],
            vec![ws.x[1], ws.y[1], PI, ws.x[1], ws.y[1]],
        )
        .expect("validated workspace")
    }
}

impl DynamicsModel for PushCarModel {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn step(&self, x: &State, u: &Action) -> Result<State, MdpError> {
        let state = CarBarrelState::from_vector(x)?;
        let (next, _) = env_step(&state, CarAction::from_vector(u), &self.params)?;
        Ok(next.to_vector())
    }

    fn mode(&self, x: &State, u: &Action) -> u32 {
        let Ok(state) = CarBarrelState::from_vector(x) else {
            return 0;
        };
        let pose = car_step(&state, CarAction::from_vector(u), &self.params);
        (signed_distance(state.barrel(), pose, &self.params) < 0.0) as u32
    }

    fn state_error(&self, x: &State, reference: &State) -> State {
        let mut e = x - reference;
        e[2] = wrap_angle(e[2]);
        e
    }

    fn canonicalize(&self, mut x: State) -> State {
        x[2] = wrap_angle(x[2]);
        x
    }
}

impl StateConstraint for PushCarModel {
    fn admissible(&self, x: &State) -> bool {
        CarBarrelState::from_vector(x).is_ok_and(|s| !collision_check(&s, &self.params))
    }
}

/// Analytic Jacobians of the car part of the dynamics (no contact).
pub fn car_jacobians(state: &CarBarrelState, action: CarAction, params: &EnvParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let (s, c) = state.theta.sin_cos();
    let dt = params.dt;
    let mut a = DMatrix::identity(STATE_DIM, STATE_DIM);
    a[(0, 2)] = -dt * action.v * s;
    a[(1, 2)] = dt * action.v * c;
    let mut b = DMatrix::zeros(STATE_DIM, ACTION_DIM);
    b[(0, 0)] = dt * c;
    b[(1, 0)] = dt * s;
    b[(2, 0)] = dt * action.delta.tan() / params.wheelbase;
    b[(2, 1)] = dt * action.v / (params.wheelbase * action.delta.cos().powi(2));
    (a, b)
}

/// Trajectory log: `k,x,y,theta,x_o,y_o,V,delta,reward,contact_flag`, one
/// row per executed step with the state before the step.
pub fn write_trajectory_csv<W: Write>(record: &EpisodeRecord, mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,x,y,theta,x_o,y_o,V,delta,reward,contact_flag")?;
    for row in &record.steps {
        let x = &row.state;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.k, x[0], x[1], x[2], x[3], x[4], row.action[0], row.action[1], row.reward, row.mode
        )?;
    }
    Ok(())
}

impl From<&CarBarrelState> for DVector<f64> {
    fn from(s: &CarBarrelState) -> Self {
        s.to_vector()
    }
}
