//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use swarm_opt::local_solvers::Polytope;
use swarm_opt::netsim::{compute_metrics, write_metrics_csv, MetricsRow, RoundTrace};
use swarm_opt::oracle::OracleSolution;
use swarm_opt::problems::{GaussianQoS, Problem};
use swarm_opt::{Matrix, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// Box `[-5, 5]^n` cut by `m` random half-spaces (and optionally one
/// hyperplane) through a common interior point, so it is never empty.
pub fn random_polytope(rng: &mut ChaCha8Rng, n: usize, m: usize, with_eq: bool) -> Polytope {
    let mut p = Polytope::boxed(vec![-5.0; n], vec![5.0; n]).unwrap();
    let x0 = uniform_vec(rng, n, -2.0, 2.0);
    for _ in 0..m {
        let a = uniform_vec(rng, n, -1.0, 1.0);
        let b = a.dot(&x0) + rng.random_range(0.1..2.0);
        p.push_ineq(a.as_slice(), b).unwrap();
    }
    if with_eq {
        let a = uniform_vec(rng, n, -1.0, 1.0);
        p.push_eq(a.as_slice(), a.dot(&x0)).unwrap();
    }
    p
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Every vertex of a bounded polytope: each choice of `n` linearly
/// independent tight constraints (equalities always among them) whose
/// intersection is feasible.
pub fn vertices(p: &Polytope) -> Vec<Vector> {
    let n = p.dim();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if p.lower[j].is_finite() {
            rows.push((e.clone(), p.lower[j]));
        }
        if p.upper[j].is_finite() {
            rows.push((e, p.upper[j]));
        }
    }
    for i in 0..p.n_ineq() {
        rows.push(((0..n).map(|j| p.a_ineq[(i, j)]).collect(), p.b_ineq[i]));
    }
    let eqs: Vec<(Vec<f64>, f64)> =
        (0..p.n_eq()).map(|i| ((0..n).map(|j| p.a_eq[(i, j)]).collect(), p.b_eq[i])).collect();
    if eqs.len() > n {
        return Vec::new();
    }
    let mut out: Vec<Vector> = Vec::new();
    for pick in combinations(rows.len(), n - eqs.len()) {
        let chosen: Vec<&(Vec<f64>, f64)> = eqs.iter().chain(pick.iter().map(|&i| &rows[i])).collect();
        let a = Matrix::from_fn(n, n, |r, c| chosen[r].0[c]);
        let b = Vector::from_fn(n, |r, _| chosen[r].1);
        let lu = a.full_piv_lu();
        if lu.determinant().abs() < 1e-10 {
            continue;
        }
        let Some(x) = lu.solve(&b) else { continue };
        if p.violation(&x) <= 1e-9 && !out.iter().any(|v| (v - &x).amax() < 1e-9) {
            out.push(x);
        }
    }
    out
}

/// Minimum of `c'x` over the vertices.
pub fn lp_by_vertices(c: &Vector, p: &Polytope) -> Option<(f64, Vector)> {
    vertices(p)
        .into_iter()
        .map(|v| (c.dot(&v), v))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// `max_{v in P} (y - x)'(v - x)`: nonpositive exactly when `x` is the
/// projection of `y` onto `P`.
pub fn projection_vi_residual(y: &Vector, x: &Vector, p: &Polytope) -> f64 {
    let d = y - x;
    vertices(p).iter().map(|v| d.dot(&(v - x))).fold(f64::NEG_INFINITY, f64::max).max(0.0)
}

/// Brute-force minimum of `c'x` over binary `x` in `P`.
pub fn binary_exhaustive(c: &Vector, p: &Polytope) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    for bits in 0u32..(1 << n) {
        let x = Vector::from_fn(n, |j, _| f64::from((bits >> j) & 1));
        if p.violation(&x) <= 1e-9 {
            let v = c.dot(&x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}

/// Brute-force assignment over all permutations.
pub fn brute_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    fn rec(i: usize, cost: &[Vec<f64>], used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut (Vec<usize>, f64)) {
        if i == cost.len() {
            let v: f64 = cur.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
            if v < best.1 {
                *best = (cur.clone(), v);
            }
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(i + 1, cost, used, cur, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    rec(0, cost, &mut vec![false; cost.len()], &mut Vec::new(), &mut best);
    best
}

fn log_density_2d(x: &Vector, mean: &Vector, cov: &Matrix) -> f64 {
    let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
    let d0 = x[0] - mean[0];
    let d1 = x[1] - mean[1];
    // explicit inverse of a 2x2 matrix
    let q = (cov[(1, 1)] * d0 * d0 - (cov[(0, 1)] + cov[(1, 0)]) * d0 * d1 + cov[(0, 0)] * d1 * d1) / det;
    -0.5 * q - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln()
}

/// Sample mean of `ln p(X) - ln q(X)` for `X ~ p`, plus the weight ratio.
pub fn kl_monte_carlo(p: &GaussianQoS, q: &GaussianQoS, samples: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    // lower-triangular square root of a 2x2 covariance
    let l00 = p.cov[(0, 0)].sqrt();
    let l10 = p.cov[(1, 0)] / l00;
    let l11 = (p.cov[(1, 1)] - l10 * l10).sqrt();
    let mut acc = 0.0;
    for _ in 0..samples {
        let z0: f64 = r.sample(StandardNormal);
        let z1: f64 = r.sample(StandardNormal);
        let x = Vector::from_vec(vec![p.mean[0] + l00 * z0, p.mean[1] + l10 * z0 + l11 * z1]);
        acc += log_density_2d(&x, &p.mean, &p.cov) - log_density_2d(&x, &q.mean, &q.cov);
    }
    acc / samples as f64 + (p.weight / q.weight).ln()
}

/// Random positive definite planar Gaussian.
pub fn random_gaussian(rng: &mut ChaCha8Rng) -> GaussianQoS {
    let theta = rng.random_range(0.0..std::f64::consts::PI);
    let lam = Matrix::from_diagonal(&Vector::from_vec(vec![rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)]));
    let rot = swarm_opt::problems::rotation(theta);
    let cov = &rot * lam * rot.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    GaussianQoS::new(uniform_vec(rng, 2, -1.0, 1.0), cov, rng.random_range(0.2..1.0)).unwrap()
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

/// Metrics of a trace and their CSV bytes.
pub fn metrics_csv(trace: &[RoundTrace], problem: &Problem, oracle: Option<&OracleSolution>) -> (Vec<MetricsRow>, Vec<u8>) {
    let rows = compute_metrics(trace, problem, oracle).unwrap();
    let mut buf = Vec::new();
    write_metrics_csv(&rows, &mut buf).unwrap();
    (rows, buf)
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    Vector::from_fn(x.len(), |k, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// Largest `|a - b| / max(1, |a|, |b|)` over the entries.
pub fn rel_err(a: &Vector, b: &Vector) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
