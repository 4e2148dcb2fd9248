//! Centralized reference solvers.
//!
//! Each oracle solves the whole problem in one place and reports how far the
//! returned point is from certified optimality. Distributed runs are scored
//! against these solutions, which are persisted as JSON fixtures keyed by
//! the problem hash.

mod enumerate;
mod fixtures;
mod hungarian;

pub use enumerate::{enumerate_milp, ENUMERATION_LIMIT_BITS};
pub use fixtures::FixtureStore;
pub use hungarian::hungarian;

use serde::{Deserialize, Serialize};

use crate::local_solvers::{
    kkt_residual, project_polytope, solve_lp, solve_milp_bb, solve_qp, LpStatus, Polytope,
};
use crate::problems::{AggregativeProblem, ConstraintCoupledProblem, Problem};
use crate::{Error, Matrix, Result, Vector};

/// Default stopping tolerance of the aggregative oracle.
pub const AGG_TOL: f64 = 1e-10;
const AGG_MAX_ITERS: usize = 500_000;

/// Reference optimum of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    /// Hash of the problem this solves; empty when not yet attached.
    #[serde(default)]
    pub problem_hash: String,
    /// All robots' variables stacked in robot order.
    pub x_star: Vector,
    pub f_star: f64,
    pub method: String,
    /// KKT residual, projected-gradient residual or enumeration gap.
    pub residual: f64,
}

impl OracleSolution {
    /// Splits `x_star` into per-robot blocks of the given sizes.
    pub fn split(&self, dims: &[usize]) -> Result<Vec<Vector>> {
        if dims.iter().sum::<usize>() != self.x_star.len() {
            return Err(Error::Dimension("oracle solution does not match the robots".into()));
        }
        let mut k = 0;
        Ok(dims
            .iter()
            .map(|d| {
                let v = self.x_star.rows(k, *d).into_owned();
                k += d;
                v
            })
            .collect())
    }
}

/// Runs the oracle suited to the problem family and attaches the hash.
pub fn solve(problem: &Problem) -> Result<OracleSolution> {
    let mut sol = match problem {
        Problem::ConstraintCoupled(p) => solve_cc_centralized(p)?,
        Problem::Milp(p) => enumerate_milp(p)?,
        Problem::Aggregative(p) => solve_agg_centralized(p, AGG_TOL)?,
    };
    sol.problem_hash = problem.hash()?;
    Ok(sol)
}

/// Product of the local sets with the coupling rows appended.
fn coupled_polytope(problem: &ConstraintCoupledProblem) -> Result<Polytope> {
    let mut p = Polytope::product(problem.robots.iter().map(|r| &r.set));
    let total = problem.total_dim();
    let rhs = problem
        .robots
        .iter()
        .fold(Vector::zeros(problem.coupling_dim), |acc, r| acc + &r.share);
    for k in 0..problem.coupling_dim {
        let mut row = vec![0.0; total];
        let mut col = 0;
        for r in &problem.robots {
            for j in 0..r.dim() {
                row[col + j] = r.h[(k, j)];
            }
            col += r.dim();
        }
        if problem.equality[k] {
            p.push_eq(&row, rhs[k])?;
        } else {
            p.push_ineq(&row, rhs[k])?;
        }
    }
    Ok(p)
}

/// Solves the constraint-coupled program as one LP, QP or, when masks are
/// present on a linear problem, one MILP.
pub fn solve_cc_centralized(problem: &ConstraintCoupledProblem) -> Result<OracleSolution> {
    problem.validate()?;
    let p = coupled_polytope(problem)?;
    let n = problem.total_dim();
    let c = Vector::from_iterator(
        n,
        problem.robots.iter().flat_map(|r| r.cost.linear_part().iter().copied()),
    );
    let quadratic = problem.robots.iter().any(|r| r.cost.hessian().is_some());
    let q = quadratic.then(|| {
        let mut q = Matrix::zeros(n, n);
        let mut k = 0;
        for r in &problem.robots {
            if let Some(h) = r.cost.hessian() {
                q.view_mut((k, k), (r.dim(), r.dim())).copy_from(h);
            }
            k += r.dim();
        }
        q
    });
    let (sol, method) = if problem.is_mixed_integer() {
        if quadratic {
            return Err(Error::Parameter(
                "mixed-integer quadratic problems have no oracle".into(),
            ));
        }
        let mask = crate::local_solvers::IntegralityMask(
            problem
                .robots
                .iter()
                .flat_map(|r| match &r.mask {
                    Some(m) => m.0.clone(),
                    None => vec![false; r.dim()],
                })
                .collect(),
        );
        (solve_milp_bb(&c, &p, &mask)?, "milp_bb")
    } else if let Some(q) = &q {
        (solve_qp(q, &c, &p)?, "qp")
    } else {
        (solve_lp(&c, &p)?, "lp")
    };
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible("coupled problem is infeasible".into())),
        LpStatus::Unbounded => return Err(Error::Unbounded("coupled problem is unbounded".into())),
    }
    let residual = if method == "milp_bb" { 0.0 } else { kkt_residual(q.as_ref(), &c, &p, &sol) };
    let xs = split_by(&sol.x, problem.robots.iter().map(|r| r.dim()));
    Ok(OracleSolution {
        problem_hash: String::new(),
        f_star: problem.cost(&xs),
        x_star: sol.x,
        method: method.into(),
        residual,
    })
}

fn split_by(x: &Vector, dims: impl Iterator<Item = usize>) -> Vec<Vector> {
    let mut k = 0;
    dims.map(|d| {
        let v = x.rows(k, d).into_owned();
        k += d;
        v
    })
    .collect()
}

fn project_all(problem: &AggregativeProblem, x: &Vector) -> Result<Vector> {
    let parts = problem.split(x);
    let projected: Result<Vec<Vector>> = problem
        .robots
        .iter()
        .zip(&parts)
        .map(|(r, v)| project_polytope(v, &r.set))
        .collect();
    Ok(AggregativeProblem::stack(&projected?))
}

/// `||x - P(x - grad F(x))||_inf`.
pub fn projected_gradient_residual(problem: &AggregativeProblem, x: &Vector) -> Result<f64> {
    let g = AggregativeProblem::stack(&problem.full_gradient(&problem.split(x)));
    Ok((project_all(problem, &(x - g))? - x).amax())
}

/// Spectral projected gradient with a non-monotone backtracking line search,
/// stopped once the projected-gradient residual drops to `tol`.
pub fn solve_agg_centralized(problem: &AggregativeProblem, tol: f64) -> Result<OracleSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    const MEMORY: usize = 10;
    const ARMIJO: f64 = 1e-4;
    let (a_min, a_max) = (1e-12, 1e12);
    let f = |x: &Vector| problem.cost(&problem.split(x));
    let grad = |x: &Vector| AggregativeProblem::stack(&problem.full_gradient(&problem.split(x)));

    let n = problem.dims().iter().sum();
    let mut x = project_all(problem, &Vector::zeros(n))?;
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut history = vec![fx];
    let first = project_all(problem, &(&x - &g))? - &x;
    let mut alpha = if first.amax() > 0.0 { (1.0 / first.amax()).clamp(a_min, a_max) } else { 1.0 };

    for _ in 0..AGG_MAX_ITERS {
        let residual = (project_all(problem, &(&x - &g))? - &x).amax();
        if residual <= tol {
            return Ok(OracleSolution {
                problem_hash: String::new(),
                x_star: x,
                f_star: fx,
                method: "projected_gradient".into(),
                residual,
            });
        }
        let d = project_all(problem, &(&x - &g * alpha))? - &x;
        let slope = g.dot(&d);
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // rounding in f near the optimum would otherwise stall the search
        let noise = 1e-14 * (1.0 + f_ref.abs());
        let mut lambda = 1.0;
        let (x_new, f_new) = loop {
            let cand = &x + &d * lambda;
            let fc = f(&cand);
            if fc <= f_ref + ARMIJO * lambda * slope + noise {
                break (cand, fc);
            }
            lambda *= 0.5;
            if lambda < 1e-30 {
                return Err(Error::Numeric("line search failed in the aggregative oracle".into()));
            }
        };
        let g_new = grad(&x_new);
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        alpha = if sy > 0.0 { (s.norm_squared() / sy).clamp(a_min, a_max) } else { a_max };
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push(fx);
        if history.len() > MEMORY {
            history.remove(0);
        }
    }
    Err(Error::Resource {
        message: format!("aggregative oracle did not reach {tol} in {AGG_MAX_ITERS} iterations"),
        incumbent: Some(x),
    })
}
