use crate::local_solvers::{solve_lp, LpStatus, Polytope, FEAS_TOL};
use crate::problems::MilpProblem;
use crate::{Error, Result, Vector};

use super::OracleSolution;

/// Largest number of bits of integer choices the enumeration accepts.
pub const ENUMERATION_LIMIT_BITS: f64 = 20.0;

/// Integer choices of one robot, each with the robot's contribution when the
/// robot has no continuous coordinates.
struct Choices {
    points: Vec<Vector>,
    pure: bool,
}

fn robot_choices(problem: &MilpProblem, i: usize) -> Result<Choices> {
    let r = &problem.robots[i];
    let n = r.set.dim();
    let ints: Vec<usize> = (0..n).filter(|&j| r.mask.is_integer(j)).collect();
    let mut ranges = Vec::with_capacity(ints.len());
    for &j in &ints {
        let (lo, up) = (r.set.lower[j], r.set.upper[j]);
        if !(lo.is_finite() && up.is_finite()) {
            return Err(Error::Resource {
                message: format!("integer coordinate {j} of robot {i} is unbounded"),
                incumbent: None,
            });
        }
        ranges.push((lo.ceil() as i64, up.floor() as i64));
    }
    let pure = ints.len() == n;
    let mut points = Vec::new();
    let mut current: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|(lo, up)| lo > up) {
        return Ok(Choices { points, pure });
    }
    loop {
        let mut x = Vector::zeros(n);
        for (k, &j) in ints.iter().enumerate() {
            x[j] = current[k] as f64;
        }
        if !pure || r.set.contains(&x, FEAS_TOL) {
            points.push(x);
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == current.len() {
                return Ok(Choices { points, pure });
            }
            if current[k] < ranges[k].1 {
                current[k] += 1;
                break;
            }
            current[k] = ranges[k].0;
            k += 1;
        }
    }
}

/// Exact optimum of a small mixed-integer program by scanning every integer
/// assignment and solving an LP over the continuous coordinates when there
/// are any. Refuses problems with more than 2^20 integer assignments.
pub fn enumerate_milp(problem: &MilpProblem) -> Result<OracleSolution> {
    problem.validate()?;
    let mut bits = 0.0;
    for (i, r) in problem.robots.iter().enumerate() {
        for j in 0..r.set.dim() {
            if r.mask.is_integer(j) {
                let (lo, up) = (r.set.lower[j], r.set.upper[j]);
                if !(lo.is_finite() && up.is_finite()) {
                    return Err(Error::Resource {
                        message: format!("integer coordinate {j} of robot {i} is unbounded"),
                        incumbent: None,
                    });
                }
                bits += ((up.floor() - lo.ceil()).max(0.0) + 1.0).log2();
            }
        }
    }
    if bits > ENUMERATION_LIMIT_BITS {
        return Err(Error::Resource {
            message: format!("{bits:.1} bits of integer choices exceed the enumeration limit"),
            incumbent: None,
        });
    }
    let choices: Vec<Choices> = (0..problem.n_robots())
        .map(|i| robot_choices(problem, i))
        .collect::<Result<_>>()?;
    let all_pure = choices.iter().all(|c| c.pure);
    let full = if all_pure { None } else { Some(full_polytope(problem)?) };

    let mut best: Option<(f64, Vec<Vector>)> = None;
    let mut idx = vec![0usize; choices.len()];
    if choices.iter().any(|c| c.points.is_empty()) {
        return Err(Error::Infeasible("a robot has no integer point in its set".into()));
    }
    loop {
        let xs: Vec<Vector> = idx.iter().zip(&choices).map(|(k, c)| c.points[*k].clone()).collect();
        let candidate = match &full {
            None => {
                let lhs = problem.coupling_lhs(&xs);
                if (lhs - &problem.b).iter().all(|v| *v <= FEAS_TOL) {
                    Some((problem.cost(&xs), xs))
                } else {
                    None
                }
            }
            Some(p) => continuous_completion(problem, p, &xs)?,
        };
        if let Some((f, xs)) = candidate {
            if best.as_ref().is_none_or(|(fb, _)| f < *fb) {
                best = Some((f, xs));
            }
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                let (f_star, xs) = best.ok_or_else(|| {
                    Error::Infeasible("no integer assignment satisfies the coupling".into())
                })?;
                let x_star = Vector::from_iterator(
                    xs.iter().map(|x| x.len()).sum(),
                    xs.iter().flat_map(|x| x.iter().copied()),
                );
                return Ok(OracleSolution {
                    problem_hash: String::new(),
                    x_star,
                    f_star,
                    method: "enumeration".into(),
                    residual: 0.0,
                });
            }
            idx[k] += 1;
            if idx[k] < choices[k].points.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn full_polytope(problem: &MilpProblem) -> Result<Polytope> {
    let mut p = Polytope::product(problem.robots.iter().map(|r| &r.set));
    let total = p.dim();
    for k in 0..problem.coupling_dim() {
        let mut row = vec![0.0; total];
        let mut col = 0;
        for r in &problem.robots {
            for j in 0..r.set.dim() {
                row[col + j] = r.a[(k, j)];
            }
            col += r.set.dim();
        }
        p.push_ineq(&row, problem.b[k])?;
    }
    Ok(p)
}

/// Best continuous completion with the integer coordinates fixed.
fn continuous_completion(
    problem: &MilpProblem,
    full: &Polytope,
    xs: &[Vector],
) -> Result<Option<(f64, Vec<Vector>)>> {
    let mut p = full.clone();
    let mut c = Vec::with_capacity(p.dim());
    let mut col = 0;
    for (r, x) in problem.robots.iter().zip(xs) {
        for j in 0..r.set.dim() {
            if r.mask.is_integer(j) {
                p.lower[col + j] = x[j];
                p.upper[col + j] = x[j];
            }
            c.push(r.c[j]);
        }
        col += r.set.dim();
    }
    let sol = solve_lp(&Vector::from_vec(c), &p)?;
    match sol.status {
        LpStatus::Optimal => {
            let mut out = Vec::with_capacity(xs.len());
            let mut k = 0;
            for r in &problem.robots {
                out.push(sol.x.rows(k, r.set.dim()).into_owned());
                k += r.set.dim();
            }
            Ok(Some((sol.objective, out)))
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Unbounded("continuous completion is unbounded".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_solvers::{solve_milp_bb, IntegralityMask};
    use crate::problems::{random_milp, MilpRobot};
    use crate::Matrix;

    fn stacked(problem: &MilpProblem) -> (Vector, Polytope, IntegralityMask) {
        let p = full_polytope(problem).unwrap();
        let c = Vector::from_iterator(p.dim(), problem.robots.iter().flat_map(|r| r.c.iter().copied()));
        let mask = IntegralityMask(problem.robots.iter().flat_map(|r| r.mask.0.clone()).collect());
        (c, p, mask)
    }

    #[test]
    fn matches_branch_and_bound() {
        for seed in 0..5 {
            let prob = random_milp(2, 2, 3, 0.3, seed).unwrap();
            let e = enumerate_milp(&prob).unwrap();
            let (c, p, mask) = stacked(&prob);
            let bb = solve_milp_bb(&c, &p, &mask).unwrap();
            assert!((e.f_star - bb.objective).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn infeasible_coupling() {
        let robot = MilpRobot {
            c: Vector::from_element(1, 1.0),
            a: Matrix::from_element(1, 1, -1.0),
            set: Polytope::unit_box(1),
            mask: IntegralityMask::all(1),
        };
        let p = MilpProblem {
            robots: vec![robot],
            b: Vector::from_element(1, -2.0),
            sigma_ft: Vector::zeros(1),
        };
        assert!(matches!(enumerate_milp(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn single_robot_without_coupling_pressure() {
        let mut set = Polytope::unit_box(3);
        set.push_ineq(&[1.0, 1.0, 1.0], 2.0).unwrap();
        let robot = MilpRobot {
            c: Vector::from_row_slice(&[-3.0, -1.0, -2.0]),
            a: Matrix::zeros(1, 3),
            set,
            mask: IntegralityMask::all(3),
        };
        let p = MilpProblem { robots: vec![robot], b: Vector::zeros(1), sigma_ft: Vector::zeros(1) };
        let sol = enumerate_milp(&p).unwrap();
        assert_eq!(sol.f_star, -5.0);
        assert_eq!(sol.x_star, Vector::from_row_slice(&[1.0, 0.0, 1.0]));
    }

    #[test]
    fn mixed_continuous_completion() {
        // x0 binary, x1 in [0, 1] continuous, x0 + x1 <= 1.5, min -x0 - x1
        let robot = MilpRobot {
            c: Vector::from_row_slice(&[-1.0, -1.0]),
            a: Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            set: Polytope::unit_box(2),
            mask: IntegralityMask(vec![true, false]),
        };
        let p = MilpProblem { robots: vec![robot], b: Vector::from_element(1, 1.5), sigma_ft: Vector::zeros(1) };
        let sol = enumerate_milp(&p).unwrap();
        assert!((sol.f_star + 1.5).abs() < 1e-12);
        assert_eq!(sol.x_star[0], 1.0);
    }

    #[test]
    fn refuses_large_problems() {
        let robot = MilpRobot {
            c: Vector::zeros(21),
            a: Matrix::zeros(1, 21),
            set: Polytope::unit_box(21),
            mask: IntegralityMask::all(21),
        };
        let p = MilpProblem { robots: vec![robot], b: Vector::zeros(1), sigma_ft: Vector::zeros(1) };
        assert!(matches!(enumerate_milp(&p), Err(Error::Resource { .. })));
    }
}
