//! Bounded-variable primal simplex on a dense tableau.
//!
//! Columns are `[structural | one slack per inequality row | artificials]`.
//! Nonbasic columns rest at a finite bound (or at zero when free). Entering
//! and leaving columns follow Bland's rule, lowest index first, which keeps
//! degenerate problems from cycling and makes every solve reproducible.

use super::{LpSolution, LpStatus, Polytope, FEAS_TOL};
use crate::{Error, Result, Vector};

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rest {
    Lower,
    Upper,
    Zero,
    Basic,
}

struct Tableau {
    m: usize,
    cols: usize,
    /// Row-major `m x cols`, always equal to `B^{-1} [A | I_slack | art]`.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    rest: Vec<Rest>,
    basis: Vec<usize>,
    /// Column that formed the identity in row `r` at start, and its sign.
    init_col: Vec<usize>,
    init_sign: Vec<f64>,
    can_enter: Vec<bool>,
    rc: Vec<f64>,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(p: &Polytope) -> Tableau {
        let n = p.dim();
        let mi = p.n_ineq();
        let me = p.n_eq();
        let m = mi + me;

        let mut lower: Vec<f64> = p.lower.clone();
        let mut upper: Vec<f64> = p.upper.clone();
        let mut x = vec![0.0; n];
        let mut rest = vec![Rest::Zero; n];
        for j in 0..n {
            if lower[j].is_finite() {
                x[j] = lower[j];
                rest[j] = Rest::Lower;
            } else if upper[j].is_finite() {
                x[j] = upper[j];
                rest[j] = Rest::Upper;
            }
        }
        lower.extend(std::iter::repeat_n(0.0, mi));
        upper.extend(std::iter::repeat_n(f64::INFINITY, mi));
        x.extend(std::iter::repeat_n(0.0, mi));
        rest.extend(std::iter::repeat_n(Rest::Lower, mi));

        // residuals with every structural column at its resting value
        let mut residual = Vec::with_capacity(m);
        for r in 0..mi {
            let ax: f64 = (0..n).map(|j| p.a_ineq[(r, j)] * x[j]).sum();
            residual.push(p.b_ineq[r] - ax);
        }
        for r in 0..me {
            let ax: f64 = (0..n).map(|j| p.a_eq[(r, j)] * x[j]).sum();
            residual.push(p.b_eq[r] - ax);
        }

        let mut art_rows = Vec::new();
        let mut init_col = vec![0; m];
        let mut init_sign = vec![1.0; m];
        for r in 0..m {
            if r < mi && residual[r] >= 0.0 {
                init_col[r] = n + r;
            } else {
                init_sign[r] = if residual[r] >= 0.0 { 1.0 } else { -1.0 };
                art_rows.push(r);
            }
        }
        let n_art = art_rows.len();
        let cols = n + mi + n_art;
        for (k, &r) in art_rows.iter().enumerate() {
            init_col[r] = n + mi + k;
        }
        lower.extend(std::iter::repeat_n(0.0, n_art));
        upper.extend(std::iter::repeat_n(f64::INFINITY, n_art));
        x.extend(std::iter::repeat_n(0.0, n_art));
        rest.extend(std::iter::repeat_n(Rest::Lower, n_art));

        let mut t = vec![0.0; m * cols];
        for r in 0..m {
            let row = &mut t[r * cols..(r + 1) * cols];
            for j in 0..n {
                row[j] = if r < mi { p.a_ineq[(r, j)] } else { p.a_eq[(r - mi, j)] };
            }
            if r < mi {
                row[n + r] = 1.0;
            }
            let sign = init_sign[r];
            if init_col[r] >= n + mi {
                row[init_col[r]] = sign;
            }
            // B is diagonal with entries +-1, so B^{-1} just flips the row sign
            if sign < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
        }

        let mut basis = vec![0; m];
        for r in 0..m {
            let c = init_col[r];
            basis[r] = c;
            rest[c] = Rest::Basic;
            x[c] = residual[r].abs();
        }

        let mut can_enter = vec![true; cols];
        for j in 0..cols {
            if upper[j] - lower[j] <= 0.0 {
                can_enter[j] = false;
            }
        }

        Tableau {
            m,
            cols,
            t,
            lower,
            upper,
            x,
            rest,
            basis,
            init_col,
            init_sign,
            can_enter,
            rc: vec![0.0; cols],
            pivots: 0,
        }
    }

    fn price(&mut self, cost: &[f64]) {
        for j in 0..self.cols {
            let mut v = cost[j];
            for r in 0..self.m {
                v -= cost[self.basis[r]] * self.t[r * self.cols + j];
            }
            self.rc[j] = v;
        }
        for &b in &self.basis {
            self.rc[b] = 0.0;
        }
    }

    fn entering(&self) -> Option<(usize, f64)> {
        (0..self.cols).find_map(|j| {
            if !self.can_enter[j] {
                return None;
            }
            let rc = self.rc[j];
            match self.rest[j] {
                Rest::Lower if rc < -COST_TOL => Some((j, 1.0)),
                Rest::Upper if rc > COST_TOL => Some((j, -1.0)),
                Rest::Zero if rc.abs() > COST_TOL => Some((j, -rc.signum())),
                _ => None,
            }
        })
    }

    fn run(&mut self, cost: &[f64], max_pivots: usize) -> Result<Outcome> {
        self.price(cost);
        loop {
            let Some((j, dir)) = self.entering() else {
                return Ok(Outcome::Optimal);
            };
            if self.pivots >= max_pivots {
                return Err(Error::Resource {
                    message: format!("simplex exceeded {max_pivots} iterations"),
                    incumbent: None,
                });
            }
            self.pivots += 1;

            let flip = self.upper[j] - self.lower[j];
            let mut theta = f64::INFINITY;
            let mut leave: Option<usize> = None;
            for r in 0..self.m {
                let alpha = dir * self.t[r * self.cols + j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[r];
                let ratio = if alpha > 0.0 {
                    if !self.lower[b].is_finite() {
                        continue;
                    }
                    (self.x[b] - self.lower[b]) / alpha
                } else {
                    if !self.upper[b].is_finite() {
                        continue;
                    }
                    (self.upper[b] - self.x[b]) / (-alpha)
                };
                let ratio = ratio.max(0.0);
                let better = match leave {
                    None => true,
                    Some(lr) => {
                        ratio < theta - 1e-12 * (1.0 + theta.abs())
                            || (ratio <= theta + 1e-12 * (1.0 + theta.abs())
                                && b < self.basis[lr])
                    }
                };
                if better {
                    theta = ratio;
                    leave = Some(r);
                }
            }

            if flip.is_finite() && (leave.is_none() || flip <= theta) {
                self.shift(j, dir, flip);
                self.rest[j] = if dir > 0.0 { Rest::Upper } else { Rest::Lower };
                self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                continue;
            }
            let Some(r) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.shift(j, dir, theta);
            let b = self.basis[r];
            let alpha = dir * self.t[r * self.cols + j];
            if alpha > 0.0 {
                self.rest[b] = Rest::Lower;
                self.x[b] = self.lower[b];
            } else {
                self.rest[b] = Rest::Upper;
                self.x[b] = self.upper[b];
            }
            self.pivot(r, j);
        }
    }

    fn shift(&mut self, j: usize, dir: f64, step: f64) {
        if step == 0.0 {
            return;
        }
        self.x[j] += dir * step;
        for r in 0..self.m {
            let a = self.t[r * self.cols + j];
            if a != 0.0 {
                self.x[self.basis[r]] -= dir * a * step;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + j];
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= piv;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for row in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let f = row[j];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        }
        let f = self.rc[j];
        if f != 0.0 {
            for (v, p) in self.rc.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
        }
        self.rc[j] = 0.0;
        self.basis[r] = j;
        self.rest[j] = Rest::Basic;
    }

    /// `y_r = c_B' B^{-1} e_r`, read from the columns that started as identity.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|r| {
                let c = self.init_col[r];
                let s: f64 = (0..self.m)
                    .map(|k| cost[self.basis[k]] * self.t[k * self.cols + c])
                    .sum();
                s * self.init_sign[r]
            })
            .collect()
    }
}

/// Minimizes `c'x` over `p`.
///
/// Infeasible and unbounded problems are reported through
/// [`LpSolution::status`]; an `Err` only signals an exhausted pivot budget.
pub fn solve_lp(c: &Vector, p: &Polytope) -> Result<LpSolution> {
    p.validate()?;
    let n = p.dim();
    if c.len() != n {
        return Err(Error::Dimension(format!(
            "cost has length {} for a polytope in R^{n}",
            c.len()
        )));
    }
    let mi = p.n_ineq();
    let mut tab = Tableau::build(p);
    let max_pivots = 50_000 + 200 * (tab.m + tab.cols);

    let n_art = tab.cols - n - mi;
    if n_art > 0 {
        let mut phase1 = vec![0.0; tab.cols];
        phase1[n + mi..].iter_mut().for_each(|v| *v = 1.0);
        tab.run(&phase1, max_pivots)?;
        let infeas: f64 = tab.x[n + mi..].iter().sum();
        let scale = 1.0
            + p.b_ineq.iter().chain(p.b_eq.iter()).fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > FEAS_TOL * scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        for j in n + mi..tab.cols {
            tab.upper[j] = 0.0;
            tab.can_enter[j] = false;
            if tab.rest[j] != Rest::Basic {
                tab.x[j] = 0.0;
            }
        }
    }

    let mut cost = vec![0.0; tab.cols];
    cost[..n].copy_from_slice(c.as_slice());
    if let Outcome::Unbounded = tab.run(&cost, max_pivots)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }

    let mut x = Vector::from_column_slice(&tab.x[..n]);
    // snap nonbasic structurals exactly onto their bounds
    for j in 0..n {
        match tab.rest[j] {
            Rest::Lower => x[j] = p.lower[j],
            Rest::Upper => x[j] = p.upper[j],
            _ => {}
        }
    }

    let y = tab.duals(&cost);
    let ineq_multipliers = Vector::from_iterator(mi, (0..mi).map(|r| (-y[r]).max(0.0)));
    let eq_multipliers = Vector::from_iterator(p.n_eq(), (mi..tab.m).map(|r| -y[r]));

    // reduced costs of structural columns become bound multipliers
    let mut reduced = c.clone();
    if mi > 0 {
        reduced += p.a_ineq.transpose() * &ineq_multipliers;
    }
    if p.n_eq() > 0 {
        reduced += p.a_eq.transpose() * &eq_multipliers;
    }
    let mut lower_multipliers = Vector::zeros(n);
    let mut upper_multipliers = Vector::zeros(n);
    for j in 0..n {
        let d = reduced[j];
        if tab.rest[j] == Rest::Basic || tab.rest[j] == Rest::Zero {
            continue;
        }
        if d >= 0.0 && p.lower[j].is_finite() && (x[j] - p.lower[j]).abs() <= FEAS_TOL {
            lower_multipliers[j] = d;
        } else if d < 0.0 && p.upper[j].is_finite() && (p.upper[j] - x[j]).abs() <= FEAS_TOL {
            upper_multipliers[j] = -d;
        }
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: c.dot(&x),
        x,
        ineq_multipliers,
        eq_multipliers,
        lower_multipliers,
        upper_multipliers,
    })
}

/// Vertex minimizer of `d'z` over a compact polytope.
pub fn linear_min_oracle(d: &Vector, p: &Polytope) -> Result<Vector> {
    if p.is_box() {
        if !p.is_bounded_box() {
            return Err(Error::Unbounded("linear minimization over an unbounded box".into()));
        }
        // same vertex the simplex would pick: flip to the upper bound only on
        // strictly negative cost
        return Ok(Vector::from_iterator(
            d.len(),
            d.iter()
                .enumerate()
                .map(|(j, v)| if *v < -COST_TOL { p.upper[j] } else { p.lower[j] }),
        ));
    }
    let sol = solve_lp(d, p)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.x),
        LpStatus::Unbounded => Err(Error::Unbounded("linear minimization oracle".into())),
        LpStatus::Infeasible => Err(Error::Infeasible("linear minimization oracle".into())),
    }
}
