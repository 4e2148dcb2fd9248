use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::local_solvers::{
    linear_min_oracle, solve_lp, solve_qp, IntegralityMask, LpStatus, Polytope,
};
use crate::{Error, Matrix, Result, Vector};

/// Local cost of one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalCost {
    /// `c'x`
    Linear { c: Vector },
    /// `1/2 x'Qx + c'x`, `Q` symmetric PSD
    Quadratic { q: Matrix, c: Vector },
}

impl LocalCost {
    pub fn dim(&self) -> usize {
        match self {
            LocalCost::Linear { c } | LocalCost::Quadratic { c, .. } => c.len(),
        }
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        match self {
            LocalCost::Linear { c } => c.dot(x),
            LocalCost::Quadratic { q, c } => 0.5 * x.dot(&(q * x)) + c.dot(x),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            LocalCost::Linear { c } => c.clone(),
            LocalCost::Quadratic { q, c } => q * x + c,
        }
    }

    pub fn linear_part(&self) -> &Vector {
        match self {
            LocalCost::Linear { c } | LocalCost::Quadratic { c, .. } => c,
        }
    }

    pub fn hessian(&self) -> Option<&Matrix> {
        match self {
            LocalCost::Linear { .. } => None,
            LocalCost::Quadratic { q, .. } => Some(q),
        }
    }
}

/// Robot `i` of a constraint-coupled program: cost `f_i`, affine coupling
/// `g_i(x) = H_i x - share_i` and local set `X_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcRobot {
    pub cost: LocalCost,
    pub h: Matrix,
    pub share: Vector,
    pub set: Polytope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<IntegralityMask>,
}

impl CcRobot {
    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn coupling(&self, x: &Vector) -> Vector {
        &self.h * x - &self.share
    }
}

/// `min sum_i f_i(x_i)` s.t. `sum_i g_i(x_i) <= 0` (or `= 0` on rows flagged
/// in `equality`), `x_i in X_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCoupledProblem {
    pub robots: Vec<CcRobot>,
    pub coupling_dim: usize,
    pub equality: Vec<bool>,
    /// Total resource `b = sum_i share_i`, when the problem was built from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<Vector>,
}

impl ConstraintCoupledProblem {
    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() {
            return Err(Error::Parameter("problem has no robots".into()));
        }
        let s = self.coupling_dim;
        if self.equality.len() != s {
            return Err(Error::Dimension("equality flags vs coupling dimension".into()));
        }
        for (i, r) in self.robots.iter().enumerate() {
            r.set.validate()?;
            let n = r.dim();
            if r.cost.dim() != n || r.h.nrows() != s || r.h.ncols() != n || r.share.len() != s {
                return Err(Error::Dimension(format!("robot {i} data is inconsistent")));
            }
            if let LocalCost::Quadratic { q, .. } = &r.cost {
                if q.nrows() != n || q.ncols() != n {
                    return Err(Error::Dimension(format!("robot {i} Hessian shape")));
                }
            }
            if let Some(m) = &r.mask {
                if m.len() != n {
                    return Err(Error::Dimension(format!("robot {i} integrality mask")));
                }
            }
        }
        Ok(())
    }

    pub fn is_mixed_integer(&self) -> bool {
        self.robots
            .iter()
            .any(|r| r.mask.as_ref().is_some_and(|m| m.count() > 0))
    }

    pub fn total_dim(&self) -> usize {
        self.robots.iter().map(|r| r.dim()).sum()
    }

    pub fn cost(&self, xs: &[Vector]) -> f64 {
        self.robots.iter().zip(xs).map(|(r, x)| r.cost.eval(x)).sum()
    }

    pub fn coupling_sum(&self, xs: &[Vector]) -> Vector {
        self.robots
            .iter()
            .zip(xs)
            .fold(Vector::zeros(self.coupling_dim), |acc, (r, x)| acc + r.coupling(x))
    }

    /// Euclidean norm of the positive part of `sum_i g_i` (absolute value on
    /// equality rows).
    pub fn coupling_violation(&self, xs: &[Vector]) -> f64 {
        let g = self.coupling_sum(xs);
        g.iter()
            .zip(&self.equality)
            .map(|(v, eq)| if *eq { v.abs() } else { v.max(0.0) })
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `argmin_{x in X_i} f_i(x) + v' g_i(x)`.
    pub fn lagrangian_argmin(&self, i: usize, v: &Vector) -> Result<Vector> {
        let r = &self.robots[i];
        let c = r.cost.linear_part() + r.h.transpose() * v;
        match r.cost.hessian() {
            None => {
                let sol = solve_lp(&c, &r.set)?;
                match sol.status {
                    LpStatus::Optimal => Ok(sol.x),
                    LpStatus::Unbounded => Err(Error::Unbounded(format!(
                        "Lagrangian of robot {i} is unbounded below"
                    ))),
                    LpStatus::Infeasible => {
                        Err(Error::Infeasible(format!("local set of robot {i} is empty")))
                    }
                }
            }
            Some(q) => Ok(solve_qp(q, &c, &r.set)?.x),
        }
    }
}

/// One robot of a mixed-integer program with linear coupling `A_i x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpRobot {
    pub c: Vector,
    pub a: Matrix,
    pub set: Polytope,
    pub mask: IntegralityMask,
}

/// `min sum_i c_i'x_i` s.t. `sum_i A_i x_i <= b`, `x_i in P_i` with integral
/// masked coordinates. `sigma_ft` is the restriction used by primal
/// decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem {
    pub robots: Vec<MilpRobot>,
    pub b: Vector,
    pub sigma_ft: Vector,
}

impl MilpProblem {
    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn coupling_dim(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() {
            return Err(Error::Parameter("problem has no robots".into()));
        }
        let s = self.b.len();
        if self.sigma_ft.len() != s {
            return Err(Error::Dimension("restriction length".into()));
        }
        if self.sigma_ft.iter().any(|v| *v < 0.0) {
            return Err(Error::Parameter("restriction must be nonnegative".into()));
        }
        for (i, r) in self.robots.iter().enumerate() {
            r.set.validate()?;
            let n = r.set.dim();
            if r.c.len() != n || r.a.nrows() != s || r.a.ncols() != n || r.mask.len() != n {
                return Err(Error::Dimension(format!("robot {i} data is inconsistent")));
            }
        }
        Ok(())
    }

    pub fn cost(&self, xs: &[Vector]) -> f64 {
        self.robots.iter().zip(xs).map(|(r, x)| r.c.dot(x)).sum()
    }

    pub fn coupling_lhs(&self, xs: &[Vector]) -> Vector {
        self.robots
            .iter()
            .zip(xs)
            .fold(Vector::zeros(self.b.len()), |acc, (r, x)| acc + &r.a * x)
    }

    /// Whether every `x_i` lies in `X_i` (integrality included) and the
    /// coupling rows hold, both up to `tol`.
    pub fn is_feasible(&self, xs: &[Vector], tol: f64) -> bool {
        let local = self.robots.iter().zip(xs).all(|(r, x)| {
            r.set.contains(x, tol)
                && (0..x.len())
                    .filter(|&j| r.mask.is_integer(j))
                    .all(|j| (x[j] - x[j].round()).abs() <= tol)
        });
        local && (self.coupling_lhs(xs) - &self.b).iter().all(|v| *v <= tol)
    }

    /// Restriction `S * max_i range_i` with `range_i` the largest spread of a
    /// row of `A_i x_i` over `P_i`, which dominates the integrality gap any
    /// single robot can add to a coupling row.
    pub fn worst_case_restriction(&self) -> Result<Vector> {
        let s = self.b.len();
        let mut worst = 0.0f64;
        for r in &self.robots {
            for k in 0..s {
                let row = r.a.row(k).transpose();
                let hi = linear_min_oracle(&(-&row), &r.set)?;
                let lo = linear_min_oracle(&row, &r.set)?;
                worst = worst.max(row.dot(&hi) - row.dot(&lo));
            }
        }
        Ok(Vector::from_element(s, s as f64 * worst))
    }
}

/// Random all-binary MILP with `n_robots` robots, `s` coupling rows and up to
/// `max_dim` binaries per robot. `b` is set so the restricted relaxation has
/// Slater margin `zeta` at a random point of `P_1 x ... x P_N`.
pub fn random_milp(n_robots: usize, s: usize, max_dim: usize, zeta: f64, seed: u64) -> Result<MilpProblem> {
    if n_robots == 0 || s == 0 || max_dim == 0 || zeta <= 0.0 {
        return Err(Error::Parameter("random MILP needs positive sizes and margin".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut robots = Vec::with_capacity(n_robots);
    let mut anchor_lhs = Vector::zeros(s);
    for _ in 0..n_robots {
        let n = rng.random_range(2..=max_dim.max(2));
        let c = Vector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
        let a = Matrix::from_fn(s, n, |_, _| rng.random_range(0.0..5.0));
        let mut set = Polytope::unit_box(n);
        // at most two items per robot, so local choices interact
        set.push_ineq(&vec![1.0; n], 2.0)?;
        // a fractional interior point of P_i
        let anchor = Vector::from_element(n, 1.0 / (n as f64 + 1.0));
        anchor_lhs += &a * &anchor;
        robots.push(MilpRobot { c, a, set, mask: IntegralityMask::all(n) });
    }
    let mut p = MilpProblem {
        robots,
        b: Vector::zeros(s),
        sigma_ft: Vector::zeros(s),
    };
    let sigma = p.worst_case_restriction()?.add_scalar(zeta);
    p.b = &sigma + anchor_lhs.add_scalar(zeta);
    p.sigma_ft = sigma;
    Ok(p)
}
