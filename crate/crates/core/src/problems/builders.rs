//! Builders for the robotics use cases.
//!
//! Pickup-and-delivery routing maps onto the constraint-coupled shape with
//! `f_i` the travelled distance of robot `i`, `g_i` the request-covering
//! rows and `X_i` the robot's flow, precedence, time-window and capacity
//! constraints. Those local constraint groups are not written out in closed
//! form by the source model, so no builder is provided for it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::aggregative::{AggRobot, AggregateTerm, AggregativeProblem};
use super::coupled::{CcRobot, ConstraintCoupledProblem, LocalCost};
use crate::local_solvers::Polytope;
use crate::{Error, Matrix, Result, Vector};

/// Task assignment with `cost[i][j]` the cost of robot `i` taking task `j`.
///
/// Robot `i` owns one variable per allowed task. The local set is the unit
/// simplex over those variables and the coupling `H_i x_i - 1/N` holds with
/// equality, so every task is covered exactly once.
pub fn build_task_assignment(
    cost: &[Vec<f64>],
    allowed: Option<&[Vec<bool>]>,
) -> Result<ConstraintCoupledProblem> {
    let n = cost.len();
    if n == 0 || cost.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("cost table must be square and nonempty".into()));
    }
    if let Some(a) = allowed {
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("allowed-pair mask must match the cost table".into()));
        }
    }
    let ok = |i: usize, j: usize| allowed.is_none_or(|a| a[i][j]);
    for j in 0..n {
        if !(0..n).any(|i| ok(i, j)) {
            return Err(Error::Infeasible(format!("task {j} has no allowed robot")));
        }
    }
    let mut robots = Vec::with_capacity(n);
    for (i, row) in cost.iter().enumerate() {
        let tasks: Vec<usize> = (0..n).filter(|&j| ok(i, j)).collect();
        if tasks.is_empty() {
            return Err(Error::Infeasible(format!("robot {i} has no allowed task")));
        }
        let k = tasks.len();
        let c = Vector::from_iterator(k, tasks.iter().map(|&j| row[j]));
        let mut h = Matrix::zeros(n, k);
        for (col, &j) in tasks.iter().enumerate() {
            h[(j, col)] = 1.0;
        }
        let mut set = Polytope::unit_box(k);
        set.push_eq(&vec![1.0; k], 1.0)?;
        robots.push(CcRobot {
            cost: LocalCost::Linear { c },
            h,
            share: Vector::from_element(n, 1.0 / n as f64),
            set,
            mask: None,
        });
    }
    Ok(ConstraintCoupledProblem {
        robots,
        coupling_dim: n,
        equality: vec![true; n],
        resource: Some(Vector::from_element(n, 1.0)),
    })
}

/// Task picked by each robot: the allowed task whose variable is largest,
/// provided it exceeds one half.
pub fn decode_assignment(problem: &ConstraintCoupledProblem, xs: &[Vector]) -> Vec<Option<usize>> {
    problem
        .robots
        .iter()
        .zip(xs)
        .map(|(r, x)| {
            let (col, v) = x
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (k, v)| if *v > b.1 { (k, *v) } else { b });
            if v > 0.5 {
                (0..r.h.nrows()).find(|&j| r.h[(j, col)] == 1.0)
            } else {
                None
            }
        })
        .collect()
}

/// Uniform `[0, 1)` cost table for `n` robots and tasks.
pub fn random_cost_table(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Data of the battery-charging schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PevData {
    pub horizon: usize,
    /// Slot length in hours.
    pub dt: f64,
    /// Price of each slot.
    pub price: Vec<f64>,
    /// Maximum power drawn by the whole fleet in any slot.
    pub p_max: f64,
    pub robots: Vec<PevRobot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PevRobot {
    pub power: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub e_init: f64,
    pub e_ref: f64,
}

impl PevData {
    /// Random fleet from fixed uniform ranges (all values in kW, kWh, hours):
    /// power in `[3, 5]`, capacity in `[20, 30]`, initial charge in
    /// `[0.2, 0.5]` of capacity, target charge in `[0.55, 0.8]` of capacity,
    /// slot prices in `[19, 35]`, slots of 20 minutes, fleet limit `2N`.
    pub fn random(n: usize, horizon: usize, seed: u64) -> PevData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let price = (0..horizon).map(|_| rng.random_range(19.0..35.0)).collect();
        let robots = (0..n)
            .map(|_| {
                let power = rng.random_range(3.0..5.0);
                let e_max = rng.random_range(20.0..30.0);
                let e_init = e_max * rng.random_range(0.2..0.5);
                let e_ref = e_max * rng.random_range(0.55..0.8);
                PevRobot { power, e_min: 0.0, e_max, e_init, e_ref }
            })
            .collect();
        PevData { horizon, dt: 1.0 / 3.0, price, p_max: 2.0 * n as f64, robots }
    }
}

/// Charging schedule as a constraint-coupled LP.
///
/// `x_i = (e_i^0, ..., e_i^T, u_i^0, ..., u_i^{T-1})`, cost `P_i C_u' u_i`,
/// local set given by the initial charge, the state recursion, the capacity
/// limits, the final-charge requirement and `u_i in [0, 1]`; coupling
/// `P_i u_i - P_max / N <= 0` per slot.
pub fn build_pev_charging(data: &PevData) -> Result<ConstraintCoupledProblem> {
    let t = data.horizon;
    let n_r = data.robots.len();
    if t == 0 || n_r == 0 || data.price.len() != t || data.dt <= 0.0 {
        return Err(Error::Parameter("charging data needs a horizon, prices and robots".into()));
    }
    let dim = 2 * t + 1;
    let mut robots = Vec::with_capacity(n_r);
    for (i, r) in data.robots.iter().enumerate() {
        if !(r.power > 0.0 && r.e_min <= r.e_init && r.e_init <= r.e_max && r.e_ref <= r.e_max) {
            return Err(Error::Parameter(format!("robot {i} battery data out of range")));
        }
        if r.e_init + r.power * data.dt * (t as f64) < r.e_ref {
            return Err(Error::Infeasible(format!("robot {i} cannot reach its target charge")));
        }
        let mut c = Vector::zeros(dim);
        for k in 0..t {
            c[t + 1 + k] = r.power * data.price[k];
        }
        let mut lower = vec![r.e_min; t + 1];
        let mut upper = vec![r.e_max; t + 1];
        lower[t] = r.e_min.max(r.e_ref);
        lower.extend(std::iter::repeat_n(0.0, t));
        upper.extend(std::iter::repeat_n(1.0, t));
        let mut set = Polytope::boxed(lower, upper)?;
        let mut init = vec![0.0; dim];
        init[0] = 1.0;
        set.push_eq(&init, r.e_init)?;
        for k in 0..t {
            let mut row = vec![0.0; dim];
            row[k + 1] = 1.0;
            row[k] = -1.0;
            row[t + 1 + k] = -r.power * data.dt;
            set.push_eq(&row, 0.0)?;
        }
        let mut h = Matrix::zeros(t, dim);
        for k in 0..t {
            h[(k, t + 1 + k)] = r.power;
        }
        robots.push(CcRobot {
            cost: LocalCost::Linear { c },
            h,
            share: Vector::from_element(t, data.p_max / n_r as f64),
            set,
            mask: None,
        });
    }
    Ok(ConstraintCoupledProblem {
        robots,
        coupling_dim: t,
        equality: vec![false; t],
        resource: Some(Vector::from_element(t, data.p_max)),
    })
}

/// Target surveillance: robot `i` stays near intruder `r_i` while the
/// weighted barycenter `sum_i beta_i x_i / N` stays near the target `r0`.
///
/// Along each axis the robot is confined between the intruder (kept at
/// distance `eps_c`) and the target.
pub fn build_target_surveillance(
    r0: &Vector,
    intruders: &[Vector],
    w: &[f64],
    beta: &[f64],
    eps: &Vector,
) -> Result<AggregativeProblem> {
    let n = intruders.len();
    let d = r0.len();
    if n == 0 || w.len() != n || beta.len() != n || eps.len() != d {
        return Err(Error::Dimension("surveillance data lengths differ".into()));
    }
    if w.iter().chain(beta).any(|v| *v <= 0.0) || eps.iter().any(|v| *v <= 0.0) {
        return Err(Error::Parameter("weights and tolerances must be positive".into()));
    }
    let mut robots = Vec::with_capacity(n);
    for (i, ri) in intruders.iter().enumerate() {
        if ri.len() != d {
            return Err(Error::Dimension(format!("intruder {i} position")));
        }
        let mut lower = vec![0.0; d];
        let mut upper = vec![0.0; d];
        for c in 0..d {
            if ri[c] <= r0[c] {
                lower[c] = ri[c] + eps[c];
                upper[c] = r0[c];
            } else {
                lower[c] = r0[c];
                upper[c] = ri[c] - eps[c];
            }
            if lower[c] > upper[c] {
                return Err(Error::Infeasible(format!(
                    "robot {i} has an empty interval on axis {c}"
                )));
            }
        }
        robots.push(AggRobot {
            p: 2.0 * w[i] * Matrix::identity(d, d),
            q: -2.0 * w[i] * ri,
            constant: w[i] * ri.norm_squared(),
            weight: 1.0,
            phi: beta[i] * Matrix::identity(d, d),
            set: Polytope::boxed(lower, upper)?,
        });
    }
    Ok(AggregativeProblem {
        robots,
        agg_dim: d,
        term: AggregateTerm::SquaredDistance { target: r0.clone() },
    })
}

/// Random surveillance instance around the origin: intruders at
/// `±U[1, 10]` on each planar axis, unit weights and gains, `eps_c = 0.5`.
pub fn random_surveillance(n: usize, seed: u64) -> Result<AggregativeProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intruders: Vec<Vector> = (0..n)
        .map(|_| {
            Vector::from_fn(2, |_, _| {
                let m = rng.random_range(1.0..10.0);
                if rng.random::<bool>() { m } else { -m }
            })
        })
        .collect();
    build_target_surveillance(
        &Vector::zeros(2),
        &intruders,
        &vec![1.0; n],
        &vec![1.0; n],
        &Vector::from_element(2, 0.5),
    )
}

/// Parameters of the soft-budget resource allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceData {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub budget: f64,
    pub x_max: f64,
}

impl ResourceData {
    /// `q_i ~ U[1, 10]`, `r_i ~ U[-100, 0]`, budget 100, `x_max` 100.
    pub fn random(n: usize, seed: u64) -> ResourceData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for _ in 0..n {
            q.push(rng.random_range(1.0..=10.0));
            r.push(rng.random_range(-100.0..=0.0));
        }
        ResourceData { q, r, budget: 100.0, x_max: 100.0 }
    }
}

/// Resource allocation with utilities `1/2 q_i^2 x_i^2 + r_i x_i` and the
/// soft budget penalty `exp(sum_i x_i - B)` split evenly over the robots.
pub fn build_resource_allocation(data: &ResourceData) -> Result<AggregativeProblem> {
    let n = data.q.len();
    if n == 0 || data.r.len() != n {
        return Err(Error::Dimension("q and r must have the same nonzero length".into()));
    }
    if data.q.iter().any(|v| *v <= 0.0) || data.x_max <= 0.0 {
        return Err(Error::Parameter("q_i and x_max must be positive".into()));
    }
    let robots = (0..n)
        .map(|i| {
            Ok(AggRobot {
                p: Matrix::from_element(1, 1, data.q[i] * data.q[i]),
                q: Vector::from_element(1, data.r[i]),
                constant: 0.0,
                weight: 1.0 / n as f64,
                phi: Matrix::from_element(1, 1, n as f64),
                set: Polytope::boxed(vec![0.0], vec![data.x_max])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregativeProblem {
        robots,
        agg_dim: 1,
        term: AggregateTerm::ExpShifted { shift: data.budget },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_solvers::{solve_lp, LpStatus};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn task_assignment_shapes() {
        let p = build_task_assignment(&[vec![1.0, 2.0], vec![3.0, 1.0]], None).unwrap();
        p.validate().unwrap();
        assert_eq!(p.coupling_dim, 2);
        let xs = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        assert_eq!(p.coupling_violation(&xs), 0.0);
        assert_eq!(p.cost(&xs), 2.0);
        assert_eq!(decode_assignment(&p, &xs), vec![Some(0), Some(1)]);
    }

    #[test]
    fn restricted_pairs_and_uncoverable_task() {
        let allowed = vec![vec![true, false], vec![true, true]];
        let p = build_task_assignment(&[vec![1.0, 9.0], vec![2.0, 3.0]], Some(&allowed)).unwrap();
        assert_eq!(p.robots[0].dim(), 1);
        let xs = [v(&[1.0]), v(&[0.0, 1.0])];
        assert_eq!(decode_assignment(&p, &xs), vec![Some(0), Some(1)]);
        let blocked = vec![vec![true, false], vec![true, false]];
        assert!(matches!(
            build_task_assignment(&[vec![1.0, 9.0], vec![2.0, 3.0]], Some(&blocked)),
            Err(Error::Infeasible(_))
        ));
    }

    fn single_pev(e_init: f64, e_ref: f64) -> PevData {
        PevData {
            horizon: 6,
            dt: 0.5,
            price: vec![2.0; 6],
            p_max: 1e6,
            robots: vec![PevRobot { power: 4.0, e_min: 0.0, e_max: 30.0, e_init, e_ref }],
        }
    }

    #[test]
    fn pev_single_robot_flat_price() {
        let data = single_pev(5.0, 12.0);
        let p = build_pev_charging(&data).unwrap();
        p.validate().unwrap();
        let r = &p.robots[0];
        let sol = solve_lp(r.cost.linear_part(), &r.set).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // price * (E_ref - E_init) / dt
        assert!((sol.objective - 2.0 * 7.0 / 0.5).abs() < 1e-9);
    }

    #[test]
    fn pev_no_charge_needed() {
        let p = build_pev_charging(&single_pev(12.0, 12.0)).unwrap();
        let r = &p.robots[0];
        let sol = solve_lp(r.cost.linear_part(), &r.set).unwrap();
        assert!(sol.objective.abs() < 1e-12);
    }

    #[test]
    fn pev_unreachable_target() {
        assert!(matches!(
            build_pev_charging(&single_pev(0.0, 29.0)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn pev_state_recursion_is_exact() {
        let data = PevData::random(3, 24, 4);
        let p = build_pev_charging(&data).unwrap();
        for (r, d) in p.robots.iter().zip(&data.robots) {
            let t = data.horizon;
            let mut x = Vector::zeros(2 * t + 1);
            x[0] = d.e_init;
            for k in 0..t {
                x[t + 1 + k] = 0.9;
                x[k + 1] = x[k] + d.power * data.dt * 0.9;
            }
            let residual = (&r.set.a_eq * &x - &r.set.b_eq).amax();
            assert!(residual <= 1e-12);
        }
    }

    #[test]
    fn random_pev_instances_are_reachable() {
        for seed in 0..20 {
            build_pev_charging(&PevData::random(5, 24, seed)).unwrap();
        }
    }

    #[test]
    fn surveillance_boxes_and_gradients() {
        let r0 = v(&[0.0, 0.0, 0.0]);
        let intruders = vec![v(&[2.0, -2.0, 1.0]), v(&[-3.0, 1.0, 2.0])];
        let eps = v(&[0.1, 0.1, 0.1]);
        let p = build_target_surveillance(&r0, &intruders, &[1.0, 2.0], &[1.0, 0.5], &eps).unwrap();
        p.validate().unwrap();
        assert_eq!(p.robots[0].set.lower, vec![0.0, -1.9, 0.0]);
        assert_eq!(p.robots[0].set.upper, vec![1.9, 0.0, 0.9]);
        assert!(p.gradient_audit(50, 3) <= 1e-5);
        let x = v(&[1.0, -1.0, 0.5]);
        let s = v(&[0.2, 0.1, -0.3]);
        assert_eq!(p.grad_x(0, &x, &s), 2.0 * (&x - &intruders[0]));
        assert_eq!(p.grad_sigma(0, &x, &s), 2.0 * (&s - &r0));
    }

    #[test]
    fn surveillance_empty_interval() {
        let r0 = v(&[0.0]);
        let err = build_target_surveillance(&r0, &[v(&[0.05])], &[1.0], &[1.0], &v(&[0.1]));
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn resource_allocation_shapes() {
        let data = ResourceData::random(10, 5);
        assert!(data.q.iter().all(|q| (1.0..=10.0).contains(q)));
        assert!(data.r.iter().all(|r| (-100.0..=0.0).contains(r)));
        let p = build_resource_allocation(&data).unwrap();
        p.validate().unwrap();
        let xs: Vec<Vector> = (0..10).map(|i| v(&[i as f64])).collect();
        assert_eq!(p.sigma(&xs)[0], 45.0);
        assert!(p.gradient_audit(50, 8) <= 1e-5);
    }

    #[test]
    fn random_surveillance_is_seeded() {
        let a = random_surveillance(4, 7).unwrap();
        assert_eq!(a, random_surveillance(4, 7).unwrap());
        assert_ne!(a, random_surveillance(4, 8).unwrap());
        assert_eq!(a.robots.len(), 4);
        assert!(a.gradient_audit(10, 1) <= 1e-5);
    }
}
