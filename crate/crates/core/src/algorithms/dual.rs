use serde::{Deserialize, Serialize};

use super::check_weights;
use crate::local_solvers::{solve_lp, LpStatus};
use crate::problems::ConstraintCoupledProblem;
use crate::{Error, Result, Vector};

/// Iterates of distributed dual decomposition for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualDecompState {
    /// Step-weighted running average of the Lagrangian minimizers.
    pub x_running: Vector,
    /// Latest Lagrangian minimizer.
    pub x_hat: Vector,
    pub mu: Vector,
    /// Sum of the step sizes used so far.
    pub step_weight_sum: f64,
}

/// Starts from the zero-cost LP point of `X_i` and `mu = 0`.
pub fn dd_init(problem: &ConstraintCoupledProblem, i: usize) -> Result<DualDecompState> {
    let r = &problem.robots[i];
    let sol = solve_lp(&Vector::zeros(r.dim()), &r.set)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Infeasible(format!("local set of robot {i} is empty")));
    }
    Ok(DualDecompState {
        x_running: sol.x.clone(),
        x_hat: sol.x,
        mu: Vector::zeros(problem.coupling_dim),
        step_weight_sum: 0.0,
    })
}

/// One round for robot `i`. `inbox` holds `(a_ij, mu_j)` including the
/// robot's own entry.
///
/// The multiplier update is the closed form of the proximal ascent step,
/// `mu+ = max(0, v + gamma g_i(x_hat))`; rows flagged as equalities carry a
/// free multiplier and skip the clipping.
pub fn dd_step(
    state: &DualDecompState,
    inbox: &[(f64, &Vector)],
    gamma: f64,
    problem: &ConstraintCoupledProblem,
    i: usize,
) -> Result<(DualDecompState, Vector)> {
    check_weights(inbox)?;
    if !(gamma > 0.0) {
        return Err(Error::Parameter("step size must be positive".into()));
    }
    let v = inbox
        .iter()
        .fold(Vector::zeros(problem.coupling_dim), |acc, (w, mu)| acc + *mu * *w);
    let x_hat = problem.lagrangian_argmin(i, &v)?;
    let g = problem.robots[i].coupling(&x_hat);
    let mut mu = &v + &g * gamma;
    for (m, eq) in mu.iter_mut().zip(&problem.equality) {
        if !eq {
            *m = m.max(0.0);
        }
    }
    let total = state.step_weight_sum + gamma;
    let x_running = &state.x_running + (&x_hat - &state.x_running) * (gamma / total);
    let next = DualDecompState {
        x_running,
        x_hat,
        mu: mu.clone(),
        step_weight_sum: total,
    };
    Ok((next, mu))
}
