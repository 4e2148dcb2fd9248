//! Primal active-set method for convex QPs over a polytope.
//!
//! Every constraint (rows and finite bounds) becomes a row `a'x <= b` or
//! `a'x = b`. The method starts from a phase-1 vertex and takes null-space
//! Newton steps, adding the first blocking constraint or dropping the one
//! with the most negative multiplier.

use nalgebra::{SymmetricEigen, SVD};

use super::{project_box, solve_lp, LpSolution, LpStatus, Polytope, FEAS_TOL};
use crate::{Error, Matrix, Result, Vector};

const PSD_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-11;

#[derive(Clone, Copy, PartialEq)]
enum Origin {
    Ineq(usize),
    Eq(usize),
    Lower(usize),
    Upper(usize),
    Fixed(usize),
}

struct Row {
    a: Vector,
    b: f64,
    eq: bool,
    origin: Origin,
}

fn collect_rows(p: &Polytope) -> Vec<Row> {
    let n = p.dim();
    let mut rows = Vec::new();
    for r in 0..p.n_eq() {
        rows.push(Row {
            a: p.a_eq.row(r).transpose(),
            b: p.b_eq[r],
            eq: true,
            origin: Origin::Eq(r),
        });
    }
    for j in 0..n {
        let e = Vector::from_fn(n, |k, _| if k == j { 1.0 } else { 0.0 });
        if p.lower[j] == p.upper[j] {
            rows.push(Row { a: e, b: p.upper[j], eq: true, origin: Origin::Fixed(j) });
            continue;
        }
        if p.lower[j].is_finite() {
            rows.push(Row { a: -&e, b: -p.lower[j], eq: false, origin: Origin::Lower(j) });
        }
        if p.upper[j].is_finite() {
            rows.push(Row { a: e, b: p.upper[j], eq: false, origin: Origin::Upper(j) });
        }
    }
    for r in 0..p.n_ineq() {
        rows.push(Row {
            a: p.a_ineq.row(r).transpose(),
            b: p.b_ineq[r],
            eq: false,
            origin: Origin::Ineq(r),
        });
    }
    rows
}

fn working_matrix(rows: &[Row], w: &[usize], n: usize) -> Matrix {
    Matrix::from_fn(w.len(), n, |i, j| rows[w[i]].a[j])
}

/// Orthonormal basis of `{ p : A p = 0 }` as columns.
fn null_space(a: &Matrix) -> Matrix {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Matrix::identity(n, n);
    }
    // pad to square so the SVD returns a full V
    let mut sq = Matrix::zeros(n.max(a.nrows()), n);
    sq.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = SVD::new(sq, false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max().max(1.0);
    let cols: Vec<Vector> = (0..n)
        .filter(|&k| svd.singular_values[k] <= RANK_TOL * smax)
        .map(|k| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&cols)
    }
}

fn independent_of(a: &Matrix, row: &Vector) -> bool {
    if a.nrows() == 0 {
        return row.norm() > RANK_TOL;
    }
    let z = null_space(a);
    (z.transpose() * row).norm() > 1e-9 * row.norm().max(1.0)
}

fn check_psd(q: &Matrix) -> Result<()> {
    let scale = q.amax().max(1.0);
    if (q - q.transpose()).amax() > PSD_TOL * scale {
        return Err(Error::Parameter("QP Hessian is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(q.clone());
    if eig.eigenvalues.min() < -PSD_TOL * scale {
        return Err(Error::Parameter(format!(
            "QP Hessian has negative eigenvalue {:.3e}",
            eig.eigenvalues.min()
        )));
    }
    Ok(())
}

/// Minimizes `1/2 x'Qx + c'x` over `p` for symmetric PSD `Q`.
///
/// Returns `Error::Infeasible` for an empty polytope and `Error::Unbounded`
/// when a zero-curvature descent ray never meets a constraint.
pub fn solve_qp(q: &Matrix, c: &Vector, p: &Polytope) -> Result<LpSolution> {
    p.validate()?;
    let n = p.dim();
    if q.nrows() != n || q.ncols() != n || c.len() != n {
        return Err(Error::Dimension(format!("QP data does not match R^{n}")));
    }
    check_psd(q)?;

    let start = solve_lp(&Vector::zeros(n), p)?;
    if start.status != LpStatus::Optimal {
        return Err(Error::Infeasible("QP feasible set is empty".into()));
    }
    let mut x = start.x;
    let rows = collect_rows(p);
    let scale_q = q.amax().max(1.0);

    let mut w: Vec<usize> = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        let active = row.eq || (row.a.dot(&x) - row.b).abs() <= FEAS_TOL * (1.0 + row.b.abs());
        if active && independent_of(&working_matrix(&rows, &w, n), &row.a) {
            w.push(k);
        }
    }
    w.sort_unstable();

    let max_iter = 1000 + 50 * (n + rows.len());
    for _ in 0..max_iter {
        let g = q * &x + c;
        let aw = working_matrix(&rows, &w, n);
        let z = null_space(&aw);

        let mut step: Option<(Vector, bool)> = None;
        if z.ncols() > 0 {
            let rg = z.transpose() * &g;
            let h = z.transpose() * q * &z;
            let eig = SymmetricEigen::new(h);
            let mut newton = Vector::zeros(z.ncols());
            let mut ray = None;
            let gscale = g.amax().max(1.0);
            for k in 0..z.ncols() {
                let v = eig.eigenvectors.column(k);
                let proj = v.dot(&rg);
                if eig.eigenvalues[k] <= PSD_TOL * scale_q {
                    if proj.abs() > 1e-12 * gscale && ray.is_none() {
                        ray = Some(-proj.signum() * v);
                    }
                } else {
                    newton -= (proj / eig.eigenvalues[k]) * v;
                }
            }
            let (d, is_ray) = match ray {
                Some(r) => (&z * r, true),
                None => (&z * newton, false),
            };
            if is_ray || d.amax() > 1e-13 * (1.0 + x.amax()) {
                step = Some((d, is_ray));
            }
        }

        match step {
            Some((d, is_ray)) => {
                let mut alpha = if is_ray { f64::INFINITY } else { 1.0 };
                let mut block = None;
                for (k, row) in rows.iter().enumerate() {
                    if w.contains(&k) {
                        continue;
                    }
                    let ad = row.a.dot(&d);
                    if ad <= 1e-14 * row.a.amax().max(1.0) * d.amax() {
                        continue;
                    }
                    let ratio = ((row.b - row.a.dot(&x)) / ad).max(0.0);
                    if ratio < alpha - 1e-14 * (1.0 + alpha.abs())
                        || (block.is_none() && ratio <= alpha)
                    {
                        alpha = ratio;
                        block = Some(k);
                    }
                }
                if alpha.is_infinite() {
                    return Err(Error::Unbounded("QP objective unbounded below".into()));
                }
                x += alpha * d;
                if let Some(k) = block {
                    w.push(k);
                    w.sort_unstable();
                }
            }
            None => {
                let lam = multipliers(&aw, &g)?;
                let mut worst: Option<(usize, f64)> = None;
                for (i, &k) in w.iter().enumerate() {
                    if rows[k].eq {
                        continue;
                    }
                    let threshold = -1e-10 * g.amax().max(1.0);
                    if lam[i] < threshold && worst.is_none_or(|(_, v)| lam[i] < v) {
                        worst = Some((i, lam[i]));
                    }
                }
                match worst {
                    Some((i, _)) => {
                        w.remove(i);
                    }
                    None => {
                        let (x, lam) = polish(q, c, p, &rows, &w, x, lam);
                        return Ok(assemble(q, c, p, &rows, &w, x, &lam));
                    }
                }
            }
        }
    }
    Err(Error::Resource {
        message: format!("active-set QP exceeded {max_iter} iterations"),
        incumbent: Some(x),
    })
}

/// Least-squares solution of `A_W' lam = -g`.
fn multipliers(aw: &Matrix, g: &Vector) -> Result<Vector> {
    if aw.nrows() == 0 {
        return Ok(Vector::zeros(0));
    }
    let svd = SVD::new(aw.transpose(), true, true);
    svd.solve(&(-g), RANK_TOL)
        .map_err(|e| Error::Numeric(format!("multiplier solve failed: {e}")))
}

/// One direct solve of the KKT system on the final working set, which
/// removes the drift the incremental steps leave behind. Kept only if it
/// stays feasible.
fn polish(q: &Matrix, c: &Vector, p: &Polytope, rows: &[Row], w: &[usize], x: Vector, lam: Vector) -> (Vector, Vector) {
    let n = p.dim();
    let m = w.len();
    let mut k = Matrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(q);
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&-c);
    for (i, &r) in w.iter().enumerate() {
        for j in 0..n {
            k[(n + i, j)] = rows[r].a[j];
            k[(j, n + i)] = rows[r].a[j];
        }
        rhs[n + i] = rows[r].b;
    }
    let Some(sol) = k.full_piv_lu().solve(&rhs) else { return (x, lam) };
    let xp = sol.rows(0, n).into_owned();
    let lp = sol.rows(n, m).into_owned();
    let tol = 1e-10 * (q * &xp + c).amax().max(1.0);
    let signs_ok = w.iter().zip(lp.iter()).all(|(&r, l)| rows[r].eq || *l >= -tol);
    if xp.iter().all(|v| v.is_finite()) && p.violation(&xp) <= FEAS_TOL && signs_ok {
        (xp, lp)
    } else {
        (x, lam)
    }
}

fn assemble(
    q: &Matrix,
    c: &Vector,
    p: &Polytope,
    rows: &[Row],
    w: &[usize],
    x: Vector,
    lam: &Vector,
) -> LpSolution {
    let n = p.dim();
    let mut sol = LpSolution {
        status: LpStatus::Optimal,
        objective: 0.5 * x.dot(&(q * &x)) + c.dot(&x),
        x,
        ineq_multipliers: Vector::zeros(p.n_ineq()),
        eq_multipliers: Vector::zeros(p.n_eq()),
        lower_multipliers: Vector::zeros(n),
        upper_multipliers: Vector::zeros(n),
    };
    for (i, &k) in w.iter().enumerate() {
        let l = lam[i];
        match rows[k].origin {
            Origin::Ineq(r) => sol.ineq_multipliers[r] = l.max(0.0),
            Origin::Eq(r) => sol.eq_multipliers[r] = l,
            Origin::Lower(j) => sol.lower_multipliers[j] = l.max(0.0),
            Origin::Upper(j) => sol.upper_multipliers[j] = l.max(0.0),
            Origin::Fixed(j) => {
                if l >= 0.0 {
                    sol.upper_multipliers[j] = l;
                } else {
                    sol.lower_multipliers[j] = -l;
                }
            }
        }
    }
    // active bounds hold exactly, not up to step rounding
    for &k in w {
        match rows[k].origin {
            Origin::Lower(j) => sol.x[j] = p.lower[j],
            Origin::Upper(j) | Origin::Fixed(j) => sol.x[j] = p.upper[j],
            _ => {}
        }
    }
    for j in 0..n {
        sol.x[j] = sol.x[j].clamp(p.lower[j], p.upper[j]);
    }
    sol.objective = 0.5 * sol.x.dot(&(q * &sol.x)) + c.dot(&sol.x);
    sol
}

/// Euclidean projection of `x` onto `p`.
pub fn project_polytope(x: &Vector, p: &Polytope) -> Result<Vector> {
    if x.len() != p.dim() {
        return Err(Error::Dimension("point and polytope dimensions differ".into()));
    }
    if p.is_box() {
        p.validate()?;
        return Ok(project_box(x, &p.lower, &p.upper));
    }
    let n = p.dim();
    Ok(solve_qp(&Matrix::identity(n, n), &(-x), p)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_solvers::{kkt_residual, KKT_TOL};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn unconstrained_minimizer() {
        let q = Matrix::identity(2, 2);
        let c = v(&[-1.0, -1.0]);
        let p = Polytope::free(2);
        let sol = solve_qp(&q, &c, &p).unwrap();
        assert_abs_diff_eq!(sol.x, v(&[1.0, 1.0]), epsilon = 1e-12);
    }

    #[test]
    fn halfspace_projection_of_origin() {
        let q = Matrix::identity(2, 2);
        let p = Polytope::free(2)
            .with_ineq(Matrix::from_row_slice(1, 2, &[-1.0, 0.0]), v(&[-2.0]))
            .unwrap();
        let c = Vector::zeros(2);
        let sol = solve_qp(&q, &c, &p).unwrap();
        assert_abs_diff_eq!(sol.x, v(&[2.0, 0.0]), epsilon = 1e-12);
        assert!(kkt_residual(Some(&q), &c, &p, &sol) <= KKT_TOL);
    }

    #[test]
    fn clamped_diagonal() {
        let q = Matrix::from_diagonal(&v(&[1.0, 4.0]));
        let c = v(&[-1.0, -4.0]);
        let p = Polytope::boxed(vec![0.0; 2], vec![0.5; 2]).unwrap();
        let sol = solve_qp(&q, &c, &p).unwrap();
        assert_abs_diff_eq!(sol.x, v(&[0.5, 0.5]), epsilon = 1e-12);
        assert!(kkt_residual(Some(&q), &c, &p, &sol) <= KKT_TOL);
    }

    #[test]
    fn projection_examples() {
        let simplex = Polytope::unit_simplex(2);
        assert_abs_diff_eq!(
            project_polytope(&v(&[2.0, 2.0]), &simplex).unwrap(),
            v(&[0.5, 0.5]),
            epsilon = 1e-12
        );
        let mut tri = Polytope::free(2);
        tri.lower = vec![0.0, 0.0];
        tri.push_ineq(&[1.0, 1.0], 1.0).unwrap();
        assert_abs_diff_eq!(
            project_polytope(&v(&[0.2, 0.3]), &tri).unwrap(),
            v(&[0.2, 0.3]),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            project_polytope(&v(&[3.0, 0.0]), &tri).unwrap(),
            v(&[1.0, 0.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let q = Matrix::from_diagonal(&v(&[1.0, -1.0]));
        let err = solve_qp(&q, &Vector::zeros(2), &Polytope::unit_box(2)).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            solve_qp(&asym, &Vector::zeros(2), &Polytope::unit_box(2)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn linear_objective_unbounded_ray() {
        let q = Matrix::zeros(2, 2);
        let mut p = Polytope::free(2);
        p.lower = vec![0.0, 0.0];
        let err = solve_qp(&q, &v(&[-1.0, 0.0]), &p).unwrap_err();
        assert!(matches!(err, Error::Unbounded(_)));
    }

    #[test]
    fn infeasible_polytope() {
        let mut p = Polytope::unit_box(1);
        p.push_ineq(&[1.0], -1.0).unwrap();
        assert!(matches!(
            project_polytope(&v(&[0.5]), &p),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn fixed_coordinate_multiplier() {
        // min 1/2 x^2 - 3 x with x fixed at 1: multiplier pushes down
        let q = Matrix::identity(1, 1);
        let c = v(&[-3.0]);
        let p = Polytope::boxed(vec![1.0], vec![1.0]).unwrap();
        let sol = solve_qp(&q, &c, &p).unwrap();
        assert_eq!(sol.x[0], 1.0);
        assert_abs_diff_eq!(sol.upper_multipliers[0], 2.0, epsilon = 1e-12);
        assert!(kkt_residual(Some(&q), &c, &p, &sol) <= KKT_TOL);
    }

    fn random_polytope() -> impl Strategy<Value = Polytope> {
        (2usize..5, 0usize..4, prop::collection::vec(-1.0f64..1.0, 40)).prop_map(
            |(n, m, data)| {
                let mut p = Polytope::boxed(vec![-1.0; n], vec![1.0; n]).unwrap();
                for r in 0..m {
                    let row: Vec<f64> = (0..n).map(|j| data[(r * n + j) % data.len()]).collect();
                    // rows pass through a point inside the box, so the set is nonempty
                    p.push_ineq(&row, 0.3 + data[(r + 17) % data.len()].abs()).unwrap();
                }
                p
            },
        )
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            p in random_polytope(),
            a in prop::collection::vec(-3.0f64..3.0, 4),
            b in prop::collection::vec(-3.0f64..3.0, 4),
        ) {
            let n = p.dim();
            let xa = Vector::from_row_slice(&a[..n]);
            let xb = Vector::from_row_slice(&b[..n]);
            let pa = project_polytope(&xa, &p).unwrap();
            let pb = project_polytope(&xb, &p).unwrap();
            prop_assert!(p.contains(&pa, 1e-9));
            let again = project_polytope(&pa, &p).unwrap();
            prop_assert!((&again - &pa).norm() <= 1e-9);
            prop_assert!((&pa - &pb).norm() <= (&xa - &xb).norm() + 1e-9);
            let id = Matrix::identity(n, n);
            let sol = solve_qp(&id, &(-&xa), &p).unwrap();
            prop_assert!(kkt_residual(Some(&id), &(-&xa), &p, &sol) <= KKT_TOL);
        }
    }
}
