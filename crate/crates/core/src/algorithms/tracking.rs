use serde::{Deserialize, Serialize};

use super::check_weights;
use crate::local_solvers::{linear_min_oracle, project_polytope};
use crate::problems::AggregativeProblem;
use crate::{Error, Result, Vector};

/// Broadcast of the tracking schemes: aggregate tracker `s_i` and gradient
/// tracker `y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerMsg {
    pub s: Vector,
    pub y: Vector,
}

/// Iterates of projected aggregative tracking for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatState {
    pub x: Vector,
    pub s_tracker: Vector,
    pub y_tracker: Vector,
}

/// Iterates of Frank-Wolfe with gradient tracking for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwState {
    pub x: Vector,
    pub s_tracker: Vector,
    pub y_tracker: Vector,
    pub round: usize,
}

impl PatState {
    pub fn message(&self) -> TrackerMsg {
        TrackerMsg { s: self.s_tracker.clone(), y: self.y_tracker.clone() }
    }
}

impl FwState {
    pub fn message(&self) -> TrackerMsg {
        TrackerMsg { s: self.s_tracker.clone(), y: self.y_tracker.clone() }
    }
}

/// `x0 = P_X(0)`, `s0 = phi_i(x0)`, `y0 = grad_2 f_i(x0, s0)`.
fn tracking_start(problem: &AggregativeProblem, i: usize) -> Result<(Vector, Vector, Vector)> {
    let r = &problem.robots[i];
    let x = project_polytope(&Vector::zeros(r.dim()), &r.set)?;
    let s = r.aggregation(&x);
    let y = problem.grad_sigma(i, &x, &s);
    Ok((x, s, y))
}

pub fn pat_init(problem: &AggregativeProblem, i: usize) -> Result<PatState> {
    let (x, s_tracker, y_tracker) = tracking_start(problem, i)?;
    Ok(PatState { x, s_tracker, y_tracker })
}

pub fn fw_init(problem: &AggregativeProblem, i: usize) -> Result<FwState> {
    let (x, s_tracker, y_tracker) = tracking_start(problem, i)?;
    Ok(FwState { x, s_tracker, y_tracker, round: 0 })
}

/// Local descent direction `grad_1 f_i(x, s) + grad phi_i(x) y`.
fn direction(problem: &AggregativeProblem, i: usize, x: &Vector, s: &Vector, y: &Vector) -> Vector {
    problem.grad_x(i, x, s) + problem.robots[i].phi_jacobian_t(y)
}

/// Mixing and innovation shared by both schemes.
fn track(
    problem: &AggregativeProblem,
    i: usize,
    inbox: &[(f64, &TrackerMsg)],
    x: &Vector,
    s: &Vector,
    x_next: &Vector,
) -> (Vector, Vector) {
    let r = &problem.robots[i];
    let d = problem.agg_dim;
    let (mut s_mix, mut y_mix) = (Vector::zeros(d), Vector::zeros(d));
    for (w, m) in inbox {
        s_mix += &m.s * *w;
        y_mix += &m.y * *w;
    }
    let s_next = s_mix + r.aggregation(x_next) - r.aggregation(x);
    let y_next = y_mix + problem.grad_sigma(i, x_next, &s_next) - problem.grad_sigma(i, x, s);
    (s_next, y_next)
}

fn check_finite(v: &Vector, what: &str) -> Result<()> {
    if v.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} is not finite")))
    }
}

/// One round of projected aggregative tracking for robot `i`. `inbox` holds
/// `(a_ij, (s_j, y_j))` including the robot's own entry.
pub fn pat_step(
    state: &PatState,
    inbox: &[(f64, &TrackerMsg)],
    gamma: f64,
    delta: f64,
    problem: &AggregativeProblem,
    i: usize,
) -> Result<(PatState, TrackerMsg)> {
    check_weights(inbox)?;
    if !(gamma > 0.0) || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Parameter("need gamma > 0 and delta in (0, 1]".into()));
    }
    let r = &problem.robots[i];
    let dir = direction(problem, i, &state.x, &state.s_tracker, &state.y_tracker);
    check_finite(&dir, "descent direction")?;
    let x_tilde = project_polytope(&(&state.x - dir * gamma), &r.set)?;
    let x = &state.x + (x_tilde - &state.x) * delta;
    let (s_tracker, y_tracker) = track(problem, i, inbox, &state.x, &state.s_tracker, &x);
    check_finite(&y_tracker, "gradient tracker")?;
    let next = PatState { x, s_tracker, y_tracker };
    let msg = next.message();
    Ok((next, msg))
}

/// One round of Frank-Wolfe with gradient tracking for robot `i`.
pub fn fw_step(
    state: &FwState,
    inbox: &[(f64, &TrackerMsg)],
    gamma: f64,
    problem: &AggregativeProblem,
    i: usize,
) -> Result<(FwState, TrackerMsg)> {
    check_weights(inbox)?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Parameter("Frank-Wolfe step must lie in [0, 1]".into()));
    }
    let r = &problem.robots[i];
    let dir = direction(problem, i, &state.x, &state.s_tracker, &state.y_tracker);
    check_finite(&dir, "descent direction")?;
    let z = linear_min_oracle(&dir, &r.set)?;
    let x = &state.x * (1.0 - gamma) + z * gamma;
    let (s_tracker, y_tracker) = track(problem, i, inbox, &state.x, &state.s_tracker, &x);
    check_finite(&y_tracker, "gradient tracker")?;
    let next = FwState { x, s_tracker, y_tracker, round: state.round + 1 };
    let msg = next.message();
    Ok((next, msg))
}
