//! Gaussian quality-of-service profiles and their divergence costs.

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector};

/// `weight * N(mean, cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianQoS {
    pub mean: Vector,
    pub cov: Matrix,
    pub weight: f64,
}

impl GaussianQoS {
    pub fn new(mean: Vector, cov: Matrix, weight: f64) -> Result<Self> {
        let g = GaussianQoS { mean, cov, weight };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.mean.len();
        if self.cov.nrows() != k || self.cov.ncols() != k {
            return Err(Error::Dimension("covariance does not match the mean".into()));
        }
        if (&self.cov - self.cov.transpose()).amax() > 1e-12 * self.cov.amax().max(1.0) {
            return Err(Error::Parameter("covariance is not symmetric".into()));
        }
        if !(self.weight > 0.0) {
            return Err(Error::Parameter("weight must be positive".into()));
        }
        Ok(())
    }
}

/// Rotation of the plane by `theta`.
pub fn rotation(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `KL(N(mu_p, S_p) || N(mu_q, S_q)) + ln(pi_p / omega_q)`.
///
/// The log-ratio of the weights is zero for equal weights, in which case the
/// value is the ordinary divergence.
pub fn kl_gaussian(p: &GaussianQoS, q: &GaussianQoS) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    let k = p.mean.len();
    if q.mean.len() != k {
        return Err(Error::Dimension("Gaussians live in different spaces".into()));
    }
    let chol_p = p
        .cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("first covariance is not positive definite".into()))?;
    let chol_q = q
        .cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("second covariance is not positive definite".into()))?;
    let logdet = |l: &Matrix| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let trace = chol_q.solve(&p.cov).trace();
    let diff = &q.mean - &p.mean;
    let maha = diff.dot(&chol_q.solve(&diff));
    let kl = 0.5 * (trace + maha - k as f64 + logdet(&chol_q.l()) - logdet(&chol_p.l()));
    Ok(kl + (p.weight / q.weight).ln())
}

/// `c_ij = kl_gaussian(cluster_j, robot_i)`.
pub fn qos_assignment_costs(robots: &[GaussianQoS], clusters: &[GaussianQoS]) -> Result<Vec<Vec<f64>>> {
    if robots.len() != clusters.len() {
        return Err(Error::Dimension("robots and clusters must be equally many".into()));
    }
    robots
        .iter()
        .map(|r| clusters.iter().map(|c| kl_gaussian(c, r)).collect())
        .collect()
}

/// Divergence from `cluster` to a planar robot profile `R(theta) diag(lambda) R(theta)'`
/// placed on the cluster mean, at the orientation `theta` that minimizes it.
///
/// Only the trace term depends on `theta`, and it is a sinusoid in `2 theta`,
/// so three evaluations fix it exactly. Returns the cost and the orientation.
pub fn aligned_kl(cluster: &GaussianQoS, lambda: [f64; 2], weight: f64) -> Result<(f64, f64)> {
    if cluster.mean.len() != 2 {
        return Err(Error::Dimension("aligned placement is planar".into()));
    }
    let profile = |theta: f64| {
        let r = rotation(theta);
        GaussianQoS {
            mean: cluster.mean.clone(),
            cov: &r * Matrix::from_diagonal(&Vector::from_row_slice(&lambda)) * r.transpose(),
            weight,
        }
    };
    let f = |theta: f64| kl_gaussian(cluster, &profile(theta));
    let (f0, f45, f90) = (f(0.0)?, f(std::f64::consts::FRAC_PI_4)?, f(std::f64::consts::FRAC_PI_2)?);
    let mid = 0.5 * (f0 + f90);
    let a = 0.5 * (f0 - f90);
    let b = f45 - mid;
    let theta = 0.5 * (-b).atan2(-a);
    Ok((mid - a.hypot(b), theta))
}

/// Target clusters of the four-robot service-matching study, each with
/// weight 1/4.
pub fn sample_clusters() -> Vec<GaussianQoS> {
    let means = [[0.0, 0.0], [2.0 / 3.0, 2.0 / 3.0], [-2.0 / 3.0, -2.0 / 3.0], [1.0 / 3.0, -1.0 / 3.0]];
    let vars = [[0.3, 0.4], [0.6, 0.8], [0.1, 0.5], [0.8, 0.2]];
    means
        .iter()
        .zip(vars)
        .map(|(m, s)| GaussianQoS {
            mean: Vector::from_row_slice(m),
            cov: Matrix::from_diagonal(&Vector::from_row_slice(&s)),
            weight: 0.25,
        })
        .collect()
}

/// Principal variances of the four robot profiles; every robot has weight 1/4.
pub fn sample_robot_profiles() -> Vec<[f64; 2]> {
    vec![[1.0, 2.0], [3.0, 1.5], [1.5, 2.5], [1.0, 2.0]]
}

/// Cost table of the service-matching study: robot `i` placed on cluster
/// `j` with its best orientation.
pub fn sample_qos_costs() -> Result<Vec<Vec<f64>>> {
    let clusters = sample_clusters();
    sample_robot_profiles()
        .iter()
        .map(|l| clusters.iter().map(|c| aligned_kl(c, *l, 0.25).map(|r| r.0)).collect())
        .collect()
}
