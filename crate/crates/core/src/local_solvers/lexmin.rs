//! Two-tier recovery: smallest uniform violation of `A x <= y` first, then cost.

use serde::{Deserialize, Serialize};

use super::{solve_milp_bb, IntegralityMask, LpStatus, Polytope};
use crate::{Error, Matrix, Result, Vector};

const RHO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexMinResult {
    pub x: Vector,
    /// `max(0, max_s (A x - y)_s)` at the returned `x`.
    pub rho: f64,
    /// Optimal value of the first tier.
    pub rho_star: f64,
}

fn lifted(a: &Matrix, y: &Vector, p: &Polytope) -> Result<Polytope> {
    let n = p.dim();
    let s = a.nrows();
    if a.ncols() != n || y.len() != s {
        return Err(Error::Dimension("coupling block does not match the local set".into()));
    }
    let mut out = Polytope::product([p, &Polytope::boxed(vec![0.0], vec![f64::INFINITY])?]);
    for r in 0..s {
        let mut row: Vec<f64> = a.row(r).iter().copied().collect();
        row.push(-1.0);
        out.push_ineq(&row, y[r])?;
    }
    Ok(out)
}

/// Minimizes `rho >= 0` subject to `A x <= y + rho 1`, `x` in `p` with the
/// masked coordinates integral; then, with `rho` capped at the optimum plus
/// a `1e-9` slack, minimizes `c'x`.
pub fn lex_min_recovery(
    c: &Vector,
    a: &Matrix,
    y: &Vector,
    p: &Polytope,
    mask: &IntegralityMask,
) -> Result<LexMinResult> {
    let n = p.dim();
    let mut q = lifted(a, y, p)?;
    let lmask = mask.extended(1);

    let mut rho_cost = Vector::zeros(n + 1);
    rho_cost[n] = 1.0;
    let stage1 = solve_milp_bb(&rho_cost, &q, &lmask)?;
    if stage1.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "lex-min first tier returned {:?}",
            stage1.status
        )));
    }
    let rho_star = stage1.x[n].max(0.0);

    q.upper[n] = rho_star + RHO_SLACK;
    let cost = c.clone().push(0.0);
    let stage2 = solve_milp_bb(&cost, &q, &lmask)?;
    if stage2.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "lex-min second tier returned {:?}",
            stage2.status
        )));
    }
    let x = stage2.x.rows(0, n).into_owned();
    let rho = if a.nrows() == 0 {
        0.0
    } else {
        (a * &x - y).max().max(0.0)
    };
    Ok(LexMinResult { x, rho, rho_star })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn inactive_penalty_gives_local_optimum() {
        let p = Polytope::unit_box(2);
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let r = lex_min_recovery(&v(&[-1.0, 2.0]), &a, &v(&[10.0]), &p, &IntegralityMask::all(2))
            .unwrap();
        assert_eq!(r.rho_star, 0.0);
        assert_eq!(r.x, v(&[1.0, 0.0]));
    }

    #[test]
    fn single_robot_two_cases() {
        let p = Polytope::unit_box(1);
        let a = Matrix::from_row_slice(1, 1, &[1.0]);
        let r = lex_min_recovery(&v(&[1.0]), &a, &v(&[-1.0]), &p, &IntegralityMask::all(1))
            .unwrap();
        assert_eq!(r.rho_star, 1.0);
        assert_eq!(r.x, v(&[0.0]));
        assert_eq!(r.rho, 1.0);
    }

    #[test]
    fn matches_lexicographic_enumeration() {
        // two binaries, two coupling rows
        let p = Polytope::unit_box(2);
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        let y = v(&[1.5, 0.5]);
        let c = v(&[-3.0, -1.0]);
        let r = lex_min_recovery(&c, &a, &y, &p, &IntegralityMask::all(2)).unwrap();

        let mut best: Option<(f64, f64, Vector)> = None;
        for bits in 0..4u32 {
            let x = v(&[(bits & 1) as f64, ((bits >> 1) & 1) as f64]);
            let rho = (&a * &x - &y).max().max(0.0);
            let cost = c.dot(&x);
            let better = match &best {
                None => true,
                Some((br, bc, _)) => rho < br - 1e-12 || (rho <= br + 1e-12 && cost < *bc),
            };
            if better {
                best = Some((rho, cost, x));
            }
        }
        let (br, bc, _) = best.unwrap();
        assert!((r.rho - br).abs() <= 1e-9);
        assert!((c.dot(&r.x) - bc).abs() <= 1e-12);
    }
}
