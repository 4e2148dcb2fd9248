//! Small dense solvers called inside every algorithm iteration.
//!
//! Problem sizes in this crate stay in the low hundreds of variables, so
//! everything here is dense: a bounded-variable primal simplex with Bland's
//! rule, a primal active-set QP, best-first branch and bound, and scalar
//! proximal operators.

mod lexmin;
mod milp;
mod polytope;
mod prox;
mod qp;
mod simplex;

pub use lexmin::{lex_min_recovery, LexMinResult};
pub use milp::{solve_milp_bb, solve_milp_bb_with_budget, IntegralityMask, DEFAULT_NODE_BUDGET};
pub use polytope::Polytope;
pub use prox::{prox_scalar, ScalarFn};
pub use qp::{project_polytope, solve_qp};
pub use simplex::{linear_min_oracle, solve_lp};

use serde::{Deserialize, Serialize};

use crate::{Matrix, Vector};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// KKT residual tolerance for optimal returns.
pub const KKT_TOL: f64 = 1e-8;
/// Distance to the nearest integer accepted as integral.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an LP, QP or MILP solve.
///
/// Multipliers follow the Lagrangian `c'x + l'(A x - b) + v'(E x - e) - zl'(x - lo) + zu'(x - up)`,
/// so inequality and bound multipliers are nonnegative at an optimum. They are
/// empty unless `status` is optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vector,
    pub objective: f64,
    pub ineq_multipliers: Vector,
    pub eq_multipliers: Vector,
    pub lower_multipliers: Vector,
    pub upper_multipliers: Vector,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus) -> Self {
        LpSolution {
            status,
            x: Vector::zeros(0),
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            ineq_multipliers: Vector::zeros(0),
            eq_multipliers: Vector::zeros(0),
            lower_multipliers: Vector::zeros(0),
            upper_multipliers: Vector::zeros(0),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Largest KKT violation of `sol` for `min 1/2 x'Qx + c'x` over `p`
/// (pass `q = None` for an LP): stationarity, primal and dual feasibility,
/// and complementary slackness, each in the infinity norm.
pub fn kkt_residual(q: Option<&Matrix>, c: &Vector, p: &Polytope, sol: &LpSolution) -> f64 {
    let x = &sol.x;
    let mut grad = c.clone();
    if let Some(q) = q {
        grad += q * x;
    }
    if p.n_ineq() > 0 {
        grad += p.a_ineq.transpose() * &sol.ineq_multipliers;
    }
    if p.n_eq() > 0 {
        grad += p.a_eq.transpose() * &sol.eq_multipliers;
    }
    grad -= &sol.lower_multipliers;
    grad += &sol.upper_multipliers;
    let mut worst = grad.amax();
    worst = worst.max(p.violation(x));
    for m in sol
        .ineq_multipliers
        .iter()
        .chain(sol.lower_multipliers.iter())
        .chain(sol.upper_multipliers.iter())
    {
        worst = worst.max(-m);
    }
    if p.n_ineq() > 0 {
        let slack = &p.b_ineq - &p.a_ineq * x;
        for (l, s) in sol.ineq_multipliers.iter().zip(slack.iter()) {
            worst = worst.max((l * s).abs());
        }
    }
    for j in 0..p.dim() {
        let zl = sol.lower_multipliers[j];
        let zu = sol.upper_multipliers[j];
        if zl != 0.0 {
            worst = worst.max((zl * (x[j] - p.lower[j])).abs());
        }
        if zu != 0.0 {
            worst = worst.max((zu * (p.upper[j] - x[j])).abs());
        }
    }
    worst
}

/// Componentwise clamp of `x` into `[lower, upper]`.
pub fn project_box(x: &Vector, lower: &[f64], upper: &[f64]) -> Vector {
    Vector::from_iterator(
        x.len(),
        x.iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (lo, up))| v.max(*lo).min(*up)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn box_projection_examples() {
        assert_eq!(project_box(&v(&[2.0, -1.0]), &[0.0; 2], &[1.0; 2]), v(&[1.0, 0.0]));
        assert_eq!(project_box(&v(&[0.2, 0.7]), &[0.0; 2], &[1.0; 2]), v(&[0.2, 0.7]));
        assert_eq!(
            project_box(&v(&[0.5, 3.0, -7.0]), &[0.0; 3], &[1.0; 3]),
            v(&[0.5, 1.0, 0.0])
        );
    }

    #[test]
    fn box_projection_is_idempotent() {
        let lo = [-1.0, 0.0, 2.0];
        let up = [1.0, 0.5, 3.0];
        let once = project_box(&v(&[5.0, -2.0, 2.5]), &lo, &up);
        assert_eq!(project_box(&once, &lo, &up), once);
    }
}
