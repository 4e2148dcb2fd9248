use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::local_solvers::{Polytope, ScalarFn};
use crate::{Error, Matrix, Result, Vector};

/// Shared term `h(sigma)` of the aggregative costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregateTerm {
    /// `||sigma - target||^2`
    SquaredDistance { target: Vector },
    /// `exp(sigma - shift)`, one-dimensional aggregate
    ExpShifted { shift: f64 },
}

impl AggregateTerm {
    pub fn eval(&self, sigma: &Vector) -> f64 {
        match self {
            AggregateTerm::SquaredDistance { target } => (sigma - target).norm_squared(),
            AggregateTerm::ExpShifted { shift } => (sigma[0] - shift).exp(),
        }
    }

    pub fn gradient(&self, sigma: &Vector) -> Vector {
        match self {
            AggregateTerm::SquaredDistance { target } => 2.0 * (sigma - target),
            AggregateTerm::ExpShifted { shift } => Vector::from_element(1, (sigma[0] - shift).exp()),
        }
    }

    pub fn hessian(&self, sigma: &Vector) -> Matrix {
        let d = sigma.len();
        match self {
            AggregateTerm::SquaredDistance { .. } => 2.0 * Matrix::identity(d, d),
            AggregateTerm::ExpShifted { shift } => Matrix::from_element(1, 1, (sigma[0] - shift).exp()),
        }
    }

    /// The term as a sum of scalar functions of the aggregate components,
    /// scaled by `w`.
    pub fn componentwise(&self, w: f64) -> Vec<ScalarFn> {
        match self {
            AggregateTerm::SquaredDistance { target } => target
                .iter()
                .map(|t| ScalarFn::Quadratic { a: 2.0 * w, b: -2.0 * w * t, c: w * t * t })
                .collect(),
            AggregateTerm::ExpShifted { shift } => vec![ScalarFn::ExpShifted { k: w, shift: *shift }],
        }
    }
}

/// Robot `i` of an aggregative program:
/// `f_i(x, sigma) = 1/2 x'Px + q'x + constant + weight * h(sigma)` and
/// `phi_i(x) = L x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggRobot {
    pub p: Matrix,
    pub q: Vector,
    pub constant: f64,
    pub weight: f64,
    pub phi: Matrix,
    pub set: Polytope,
}

impl AggRobot {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn aggregation(&self, x: &Vector) -> Vector {
        &self.phi * x
    }

    /// `grad phi_i(x) y = L' y`.
    pub fn phi_jacobian_t(&self, y: &Vector) -> Vector {
        self.phi.transpose() * y
    }

    pub fn local_part(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x) + self.constant
    }
}

/// `min sum_i f_i(x_i, sigma(x))` with `sigma(x) = sum_i phi_i(x_i) / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregativeProblem {
    pub robots: Vec<AggRobot>,
    pub agg_dim: usize,
    pub term: AggregateTerm,
}

impl AggregativeProblem {
    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() {
            return Err(Error::Parameter("problem has no robots".into()));
        }
        let d = self.agg_dim;
        match &self.term {
            AggregateTerm::SquaredDistance { target } if target.len() != d => {
                return Err(Error::Dimension("aggregate target length".into()))
            }
            AggregateTerm::ExpShifted { .. } if d != 1 => {
                return Err(Error::Dimension("exp term needs a scalar aggregate".into()))
            }
            _ => {}
        }
        for (i, r) in self.robots.iter().enumerate() {
            r.set.validate()?;
            let n = r.dim();
            if r.p.nrows() != n
                || r.p.ncols() != n
                || r.phi.nrows() != d
                || r.phi.ncols() != n
                || r.set.dim() != n
            {
                return Err(Error::Dimension(format!("robot {i} data is inconsistent")));
            }
            if r.weight < 0.0 {
                return Err(Error::Parameter(format!("robot {i} has negative weight")));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.robots.iter().map(|r| r.dim()).collect()
    }

    pub fn sigma(&self, xs: &[Vector]) -> Vector {
        let n = self.n_robots() as f64;
        self.robots
            .iter()
            .zip(xs)
            .fold(Vector::zeros(self.agg_dim), |acc, (r, x)| acc + r.aggregation(x))
            / n
    }

    pub fn local_cost(&self, i: usize, x: &Vector, sigma: &Vector) -> f64 {
        let r = &self.robots[i];
        r.local_part(x) + r.weight * self.term.eval(sigma)
    }

    /// `grad_1 f_i(x, sigma)`.
    pub fn grad_x(&self, i: usize, x: &Vector, _sigma: &Vector) -> Vector {
        let r = &self.robots[i];
        &r.p * x + &r.q
    }

    /// `grad_2 f_i(x, sigma)`.
    pub fn grad_sigma(&self, i: usize, _x: &Vector, sigma: &Vector) -> Vector {
        self.robots[i].weight * self.term.gradient(sigma)
    }

    pub fn cost(&self, xs: &[Vector]) -> f64 {
        let s = self.sigma(xs);
        (0..self.n_robots()).map(|i| self.local_cost(i, &xs[i], &s)).sum()
    }

    /// Gradient of the global cost with respect to each `x_i`.
    pub fn full_gradient(&self, xs: &[Vector]) -> Vec<Vector> {
        let s = self.sigma(xs);
        let n = self.n_robots() as f64;
        let total: Vector = (0..self.n_robots())
            .map(|i| self.grad_sigma(i, &xs[i], &s))
            .fold(Vector::zeros(self.agg_dim), |a, b| a + b);
        (0..self.n_robots())
            .map(|i| self.grad_x(i, &xs[i], &s) + self.robots[i].phi_jacobian_t(&total) / n)
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.robots.iter().map(|r| r.weight).sum()
    }

    /// The splitting `sum_i f_i(x_i) + g(sigma)` used by dual consensus ADMM.
    pub fn admm_form(&self) -> AdmmForm {
        AdmmForm {
            g: self.term.componentwise(self.total_weight()),
        }
    }

    pub fn stack(xs: &[Vector]) -> Vector {
        let data: Vec<f64> = xs.iter().flat_map(|x| x.iter().copied()).collect();
        Vector::from_vec(data)
    }

    pub fn split(&self, x: &Vector) -> Vec<Vector> {
        let mut out = Vec::with_capacity(self.n_robots());
        let mut k = 0;
        for r in &self.robots {
            out.push(x.rows(k, r.dim()).into_owned());
            k += r.dim();
        }
        out
    }

    /// Largest relative error of the analytic `grad_1`, `grad_2` and
    /// `grad phi` against central differences with step `1e-6`, over
    /// `points` random points of the local sets.
    pub fn gradient_audit(&self, points: usize, seed: u64) -> f64 {
        const H: f64 = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        let mut worst = 0.0f64;
        for _ in 0..points {
            let xs: Vec<Vector> = self.robots.iter().map(|r| random_point(&r.set, &mut rng)).collect();
            let sigma = self.sigma(&xs);
            for (i, r) in self.robots.iter().enumerate() {
                let x = &xs[i];
                let g1 = self.grad_x(i, x, &sigma);
                for k in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += H;
                    xm[k] -= H;
                    // the aggregate term is constant in x at fixed sigma and is left
                    // out so its magnitude cannot swamp the difference
                    let fd = (r.local_part(&xp) - r.local_part(&xm)) / (2.0 * H);
                    worst = worst.max(rel(g1[k], fd));
                    let phi_fd = (r.aggregation(&xp) - r.aggregation(&xm)) / (2.0 * H);
                    for c in 0..self.agg_dim {
                        worst = worst.max(rel(r.phi[(c, k)], phi_fd[c]));
                    }
                }
                let g2 = self.grad_sigma(i, x, &sigma);
                for c in 0..self.agg_dim {
                    let mut sp = sigma.clone();
                    let mut sm = sigma.clone();
                    sp[c] += H;
                    sm[c] -= H;
                    let fd = r.weight * (self.term.eval(&sp) - self.term.eval(&sm)) / (2.0 * H);
                    worst = worst.max(rel(g2[c], fd));
                }
            }
        }
        worst
    }
}

/// `g(sigma) = sum_c g_c(sigma_c)` for the ADMM splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmForm {
    pub g: Vec<ScalarFn>,
}

/// Uniform point of a bounded box, or a point inside a general polytope
/// obtained from a random convex combination of box samples projected back.
pub(crate) fn random_point(set: &Polytope, rng: &mut ChaCha8Rng) -> Vector {
    let n = set.dim();
    let raw = Vector::from_fn(n, |j, _| {
        let (lo, up) = (set.lower[j], set.upper[j]);
        match (lo.is_finite(), up.is_finite()) {
            (true, true) => rng.random_range(lo..=up),
            (true, false) => lo + rng.random_range(0.0..10.0),
            (false, true) => up - rng.random_range(0.0..10.0),
            (false, false) => rng.random_range(-10.0..10.0),
        }
    });
    if set.is_box() {
        raw
    } else {
        crate::local_solvers::project_polytope(&raw, set).unwrap_or(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> AggregativeProblem {
        let robot = |p: f64, q: f64| AggRobot {
            p: Matrix::from_element(1, 1, p),
            q: Vector::from_element(1, q),
            constant: 0.0,
            weight: 0.5,
            phi: Matrix::from_element(1, 1, 2.0),
            set: Polytope::boxed(vec![-1.0], vec![3.0]).unwrap(),
        };
        AggregativeProblem {
            robots: vec![robot(1.0, -1.0), robot(4.0, 2.0)],
            agg_dim: 1,
            term: AggregateTerm::ExpShifted { shift: 1.0 },
        }
    }

    #[test]
    fn sigma_and_cost() {
        let p = toy();
        p.validate().unwrap();
        let xs = [Vector::from_element(1, 1.0), Vector::from_element(1, 0.0)];
        assert_eq!(p.sigma(&xs)[0], 1.0);
        // 0.5 - 1 + 0 + 2 * 0.5 * e^0
        assert!((p.cost(&xs) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_gradient_matches_differences() {
        let p = toy();
        let xs = vec![Vector::from_element(1, 0.3), Vector::from_element(1, -0.2)];
        let g = p.full_gradient(&xs);
        for i in 0..2 {
            let mut xp = xs.clone();
            let mut xm = xs.clone();
            xp[i][0] += 1e-6;
            xm[i][0] -= 1e-6;
            let fd = (p.cost(&xp) - p.cost(&xm)) / 2e-6;
            assert!((g[i][0] - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn audit_passes_on_toy() {
        assert!(toy().gradient_audit(20, 1) <= 1e-5);
    }

    #[test]
    fn componentwise_squared_distance() {
        let t = AggregateTerm::SquaredDistance { target: Vector::from_row_slice(&[1.0, -2.0]) };
        let parts = t.componentwise(3.0);
        let s = Vector::from_row_slice(&[0.5, 0.25]);
        let sum: f64 = parts.iter().zip(s.iter()).map(|(g, v)| g.eval(*v)).sum();
        assert!((sum - 3.0 * t.eval(&s)).abs() < 1e-12);
    }
}
