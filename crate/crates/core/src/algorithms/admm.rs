use serde::{Deserialize, Serialize};

use crate::local_solvers::{prox_scalar, solve_qp, ScalarFn};
use crate::problems::AggregativeProblem;
use crate::{Error, Result, Vector};

/// Default ceiling for the box radius `M_i`.
pub const DEFAULT_BOX_CEILING: f64 = 1_152_921_504_606_846_976.0; // 2^60

const BOX_ACTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub rho: f64,
    pub xi: f64,
    /// Starting box radius `M_i`.
    #[serde(default = "default_box")]
    pub box_init: f64,
    #[serde(default = "default_ceiling")]
    pub box_ceiling: f64,
}

fn default_box() -> f64 {
    1.0
}

fn default_ceiling() -> f64 {
    DEFAULT_BOX_CEILING
}

impl AdmmParams {
    pub fn new(rho: f64, xi: f64) -> Self {
        AdmmParams { rho, xi, box_init: default_box(), box_ceiling: DEFAULT_BOX_CEILING }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.xi > 0.0) {
            return Err(Error::Config("ADMM needs rho > 0 and xi > 0".into()));
        }
        if !(self.box_init > 0.0 && self.box_ceiling >= self.box_init) {
            return Err(Error::Config("ADMM box radius must be positive and below its ceiling".into()));
        }
        Ok(())
    }
}

/// Iterates of dual consensus ADMM for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub p: Vector,
    pub s: Vector,
    pub y: Vector,
    pub z: Vector,
    pub x: Vector,
    /// Box radius `M_i`; only ever doubles.
    pub box_bound: f64,
}

/// All multipliers start at zero, `x` at the zero-cost point of `X_i`.
pub fn admm_init(problem: &AggregativeProblem, i: usize, params: &AdmmParams) -> Result<AdmmState> {
    params.validate()?;
    let r = &problem.robots[i];
    let m = problem.agg_dim;
    let x = crate::local_solvers::project_polytope(&Vector::zeros(r.dim()), &r.set)?;
    Ok(AdmmState {
        p: Vector::zeros(m),
        s: Vector::zeros(m),
        y: Vector::zeros(m),
        z: Vector::zeros(m),
        x,
        box_bound: params.box_init,
    })
}

/// One round for robot `i`. `neighbors` holds `y_j` of this round's
/// neighbors, excluding the robot itself.
///
/// The problem is read as `sum_i f_i(x_i) + g(sigma)` with `f_i` the local
/// quadratic part, `g` the aggregate term times the total weight and
/// `Q_i = phi_i`. With `c = xi + 2 rho d_i`:
///
/// ```text
/// p+ = p + rho sum_j (y - y_j)
/// s+ = s + xi (y - z)
/// r  = rho sum_j (y + y_j) + xi z - p+ - s+
/// x+ = argmin_{x in X_i, |x|_inf <= M} f_i(x) + |Q x + r|^2 / (2c)
/// y+ = (Q x+ + r) / c
/// z+ = s+ / xi + y+ - prox_{(xi/N) g}(s+ + xi y+) / xi
/// ```
///
/// `M` doubles until no coordinate of `x+` sits on the box.
pub fn admm_step(
    state: &AdmmState,
    neighbors: &[&Vector],
    params: &AdmmParams,
    problem: &AggregativeProblem,
    g: &[ScalarFn],
    i: usize,
) -> Result<(AdmmState, Vector)> {
    let r = &problem.robots[i];
    let (rho, xi) = (params.rho, params.xi);
    let n_robots = problem.n_robots() as f64;
    let d = neighbors.len() as f64;
    let c = xi + 2.0 * rho * d;
    if g.len() != problem.agg_dim {
        return Err(Error::Dimension("aggregate function arity".into()));
    }

    let mut p = state.p.clone();
    let mut pair_sum = Vector::zeros(problem.agg_dim);
    for y_j in neighbors {
        p += (&state.y - *y_j) * rho;
        pair_sum += &state.y + *y_j;
    }
    let s = &state.s + (&state.y - &state.z) * xi;
    let rr = pair_sum * rho + &state.z * xi - &p - &s;

    let qt = r.phi.transpose();
    let hess = &r.p + &qt * &r.phi / c;
    let lin = &r.q + &qt * &rr / c;
    let mut m = state.box_bound;
    let x = loop {
        let mut set = r.set.clone();
        for j in 0..set.dim() {
            set.lower[j] = set.lower[j].max(-m);
            set.upper[j] = set.upper[j].min(m);
        }
        let sol = solve_qp(&hess, &lin, &set)?;
        let on_box = sol.x.iter().any(|v| v.abs() >= m - BOX_ACTIVE_TOL);
        if !on_box {
            break sol.x;
        }
        m *= 2.0;
        if m > params.box_ceiling {
            return Err(Error::Divergence(format!(
                "box radius of robot {i} passed its ceiling {}",
                params.box_ceiling
            )));
        }
    };

    let y = (&r.phi * &x + &rr) / c;
    let lambda = xi / n_robots;
    let mut z = Vector::zeros(problem.agg_dim);
    for k in 0..problem.agg_dim {
        let u = prox_scalar(&g[k], lambda, s[k] + xi * y[k])?;
        z[k] = s[k] / xi + y[k] - u / xi;
    }
    if !(y.iter().chain(z.iter()).all(|v| v.is_finite())) {
        return Err(Error::Numeric(format!("ADMM iterates of robot {i} are not finite")));
    }
    let next = AdmmState { p, s, y: y.clone(), z, x, box_bound: m };
    Ok((next, y))
}
