mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use swarm_opt::local_solvers::{
    kkt_residual, project_polytope, solve_lp, solve_milp_bb, solve_qp, IntegralityMask, LpStatus, Polytope,
};
use swarm_opt::{Matrix, Vector};

#[test]
fn lp_matches_vertex_enumeration() {
    let mut r = rng(1);
    for k in 0..60 {
        let n = r.random_range(2..=4);
        let m = r.random_range(1..=4);
        let p = random_polytope(&mut r, n, m, k % 3 == 0);
        let c = uniform_vec(&mut r, n, -3.0, 3.0);
        let sol = solve_lp(&c, &p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let (best, _) = lp_by_vertices(&c, &p).unwrap();
        assert!((sol.objective - best).abs() <= 1e-8, "case {k}: {} vs {best}", sol.objective);
        assert!(kkt_residual(None, &c, &p, &sol) <= 1e-8);
    }
}

#[test]
fn binary_milp_matches_exhaustive_search() {
    let mut r = rng(2);
    for _ in 0..30 {
        let n = r.random_range(4..=10);
        let mut p = Polytope::unit_box(n);
        let a = uniform_vec(&mut r, n, 0.0, 5.0);
        p.push_ineq(a.as_slice(), a.sum() * 0.4).unwrap();
        let c = uniform_vec(&mut r, n, -10.0, 10.0);
        let bb = solve_milp_bb(&c, &p, &IntegralityMask::all(n)).unwrap();
        assert_eq!(bb.objective, binary_exhaustive(&c, &p).unwrap());
    }
}

#[test]
fn projection_satisfies_variational_inequality() {
    let mut r = rng(3);
    for k in 0..100 {
        let n = r.random_range(2..=4);
        let m = r.random_range(1..=4);
        let p = random_polytope(&mut r, n, m, k % 4 == 0);
        let y = uniform_vec(&mut r, n, -10.0, 10.0);
        let x = project_polytope(&y, &p).unwrap();
        assert!(p.violation(&x) <= 1e-9);
        assert!(projection_vi_residual(&y, &x, &p) <= 1e-8, "case {k}");
        let q = Matrix::identity(n, n);
        let sol = solve_qp(&q, &-&y, &p).unwrap();
        assert!(kkt_residual(Some(&q), &-&y, &p, &sol) <= 1e-8, "case {k}");
    }
}

#[test]
fn points_inside_project_to_themselves() {
    let p = Polytope::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let y = Vector::from_vec(vec![0.3, -0.2]);
    assert!((project_polytope(&y, &p).unwrap() - &y).amax() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_no_farther_than_any_vertex(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let n = r.random_range(2..=3);
        let p = random_polytope(&mut r, n, 2, false);
        let y = uniform_vec(&mut r, n, -8.0, 8.0);
        let x = project_polytope(&y, &p).unwrap();
        let d = (&y - &x).norm();
        for v in vertices(&p) {
            prop_assert!(d <= (&y - v).norm() + 1e-9);
        }
    }
}
