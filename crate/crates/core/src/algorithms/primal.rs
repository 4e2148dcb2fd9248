use serde::{Deserialize, Serialize};

use crate::local_solvers::{lex_min_recovery, solve_lp, LpStatus, Polytope};
use crate::problems::MilpProblem;
use crate::{Error, Result, Vector};

/// Iterates of primal decomposition for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDecompState {
    pub y_alloc: Vector,
    /// Coupling-row multipliers of the penalized relaxation at `y_alloc`.
    pub mu: Vector,
    /// Relaxed local solution that produced `mu`.
    pub x_relaxed: Vector,
    /// Penalty variable `v_i` of the same solve.
    pub violation: f64,
    pub round: usize,
}

/// `100 (1 + max_i ||c_i||_inf)`.
pub fn default_penalty(problem: &MilpProblem) -> f64 {
    let cmax = problem
        .robots
        .iter()
        .map(|r| r.c.amax())
        .fold(0.0, f64::max);
    100.0 * (1.0 + cmax)
}

/// `(b - sigma_ft) / N` for every robot.
pub fn equal_split(problem: &MilpProblem) -> Vec<Vector> {
    let share = (&problem.b - &problem.sigma_ft) / problem.n_robots() as f64;
    vec![share; problem.n_robots()]
}

struct Relaxed {
    x: Vector,
    v: f64,
    mu: Vector,
}

/// `min c'x + M v` s.t. `A x <= y + v 1`, `x` in the LP relaxation of `X_i`,
/// `v >= 0`; returns the coupling-row multipliers.
fn penalized_relaxation(problem: &MilpProblem, i: usize, y: &Vector, m: f64) -> Result<Relaxed> {
    let r = &problem.robots[i];
    let n = r.set.dim();
    let s = problem.coupling_dim();
    let mut p = Polytope::product([&r.set, &Polytope::boxed(vec![0.0], vec![f64::INFINITY])?]);
    let first = p.n_ineq();
    for k in 0..s {
        let mut row: Vec<f64> = r.a.row(k).iter().copied().collect();
        row.push(-1.0);
        p.push_ineq(&row, y[k])?;
    }
    let cost = r.c.clone().push(m);
    let sol = solve_lp(&cost, &p)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "penalized relaxation of robot {i} returned {:?}",
            sol.status
        )));
    }
    Ok(Relaxed {
        x: sol.x.rows(0, n).into_owned(),
        v: sol.x[n],
        mu: sol.ineq_multipliers.rows(first, s).into_owned(),
    })
}

/// Takes the caller's allocation `y0` and computes the multiplier it
/// induces, so the first exchange already carries round-0 multipliers.
pub fn pd_init(problem: &MilpProblem, i: usize, y0: Vector, penalty: f64) -> Result<PrimalDecompState> {
    if y0.len() != problem.coupling_dim() {
        return Err(Error::Dimension("initial allocation length".into()));
    }
    if !(penalty > 0.0) {
        return Err(Error::Parameter("penalty must be positive".into()));
    }
    let rel = penalized_relaxation(problem, i, &y0, penalty)?;
    Ok(PrimalDecompState {
        y_alloc: y0,
        mu: rel.mu,
        x_relaxed: rel.x,
        violation: rel.v,
        round: 0,
    })
}

/// One round for robot `i`. `neighbors` holds `mu_j` of this round's
/// neighbors, excluding the robot itself.
///
/// The allocation moves by `alpha * sum_j (mu_i - mu_j)`; the multiplier for
/// the next exchange is then recomputed at the new allocation.
pub fn pd_step(
    state: &PrimalDecompState,
    neighbors: &[&Vector],
    alpha: f64,
    problem: &MilpProblem,
    i: usize,
    penalty: f64,
) -> Result<(PrimalDecompState, Vector)> {
    if !(alpha > 0.0) {
        return Err(Error::Parameter("step size must be positive".into()));
    }
    let mut y = state.y_alloc.clone();
    for mu_j in neighbors {
        y += (&state.mu - *mu_j) * alpha;
    }
    let rel = penalized_relaxation(problem, i, &y, penalty)?;
    let next = PrimalDecompState {
        y_alloc: y,
        mu: rel.mu.clone(),
        x_relaxed: rel.x,
        violation: rel.v,
        round: state.round + 1,
    };
    Ok((next, rel.mu))
}

/// Mixed-integer solution of robot `i` from its final allocation: the
/// smallest uniform violation of `A_i x <= y_i` first, then the cost.
pub fn pd_finalize(state: &PrimalDecompState, problem: &MilpProblem, i: usize) -> Result<Vector> {
    let r = &problem.robots[i];
    Ok(lex_min_recovery(&r.c, &r.a, &state.y_alloc, &r.set, &r.mask)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_solvers::IntegralityMask;
    use crate::problems::MilpRobot;
    use crate::Matrix;

    fn pair() -> MilpProblem {
        let robot = MilpRobot {
            c: Vector::from_element(1, -1.0),
            a: Matrix::from_element(1, 1, 1.0),
            set: Polytope::unit_box(1),
            mask: IntegralityMask::all(1),
        };
        MilpProblem {
            robots: vec![robot.clone(), robot],
            b: Vector::from_element(1, 1.0),
            sigma_ft: Vector::from_element(1, 0.0),
        }
    }

    #[test]
    fn tight_allocation_prices_the_resource() {
        let p = pair();
        let s = pd_init(&p, 0, Vector::from_element(1, 0.5), 10.0).unwrap();
        // one unit of allocation is worth the unit reward
        assert!((s.mu[0] - 1.0).abs() < 1e-12);
        assert!((s.x_relaxed[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slack_allocation_has_zero_price_and_freezes() {
        let p = pair();
        let s = pd_init(&p, 0, Vector::from_element(1, 3.0), 10.0).unwrap();
        assert_eq!(s.mu[0], 0.0);
        let zero = Vector::zeros(1);
        let (next, _) = pd_step(&s, &[&zero], 0.1, &p, 0, 10.0).unwrap();
        assert_eq!(next.y_alloc, s.y_alloc);
    }

    #[test]
    fn antisymmetric_exchange() {
        let p = pair();
        let mut a = pd_init(&p, 0, Vector::from_element(1, 0.7), 10.0).unwrap();
        let mut b = pd_init(&p, 1, Vector::from_element(1, 0.3), 10.0).unwrap();
        a.mu = Vector::from_element(1, 1.0);
        b.mu = Vector::from_element(1, 0.0);
        let (a1, _) = pd_step(&a, &[&b.mu], 0.1, &p, 0, 10.0).unwrap();
        let (b1, _) = pd_step(&b, &[&a.mu], 0.1, &p, 1, 10.0).unwrap();
        assert!((a1.y_alloc[0] - 0.8).abs() < 1e-15);
        assert!((b1.y_alloc[0] - 0.2).abs() < 1e-15);
        assert!((a1.y_alloc[0] + b1.y_alloc[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn isolated_robot_keeps_allocation() {
        let p = pair();
        let s = pd_init(&p, 0, Vector::from_element(1, 0.2), 10.0).unwrap();
        let (next, _) = pd_step(&s, &[], 0.1, &p, 0, 10.0).unwrap();
        assert_eq!(next.y_alloc, s.y_alloc);
        assert_eq!(next.round, 1);
    }

    #[test]
    fn finalize_returns_integral_point() {
        let p = pair();
        let s = pd_init(&p, 0, Vector::from_element(1, 0.5), 10.0).unwrap();
        let x = pd_finalize(&s, &p, 0).unwrap();
        assert_eq!(x[0], 0.0);
        let s = pd_init(&p, 0, Vector::from_element(1, 1.0), 10.0).unwrap();
        assert_eq!(pd_finalize(&s, &p, 0).unwrap()[0], 1.0);
    }

    #[test]
    fn default_penalty_scales_with_costs() {
        assert_eq!(default_penalty(&pair()), 200.0);
        let split = equal_split(&pair());
        assert_eq!(split, vec![Vector::from_element(1, 0.5); 2]);
    }
}
