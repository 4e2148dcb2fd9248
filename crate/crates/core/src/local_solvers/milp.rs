//! Best-first branch and bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{solve_lp, LpSolution, LpStatus, Polytope, INT_TOL};
use crate::{Error, Result, Vector};

pub const DEFAULT_NODE_BUDGET: usize = 200_000;

/// Marks which coordinates must take integer values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntegralityMask(pub Vec<bool>);

impl IntegralityMask {
    pub fn none(n: usize) -> Self {
        IntegralityMask(vec![false; n])
    }

    pub fn all(n: usize) -> Self {
        IntegralityMask(vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_integer(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    /// Mask extended with `extra` continuous coordinates.
    pub fn extended(&self, extra: usize) -> Self {
        let mut v = self.0.clone();
        v.extend(std::iter::repeat_n(false, extra));
        IntegralityMask(v)
    }
}

struct Node {
    bound: f64,
    order: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: reverse so the smallest bound, then the oldest node, pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.order.cmp(&self.order))
    }
}

fn most_fractional(x: &Vector, mask: &IntegralityMask) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..x.len() {
        if !mask.is_integer(j) {
            continue;
        }
        let frac = x[j] - x[j].floor();
        let dist = frac.min(1.0 - frac);
        if dist > INT_TOL && best.is_none_or(|(_, d)| dist > d + 1e-12) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Minimizes `c'x` over `p` with the masked coordinates integral.
pub fn solve_milp_bb(c: &Vector, p: &Polytope, mask: &IntegralityMask) -> Result<LpSolution> {
    solve_milp_bb_with_budget(c, p, mask, DEFAULT_NODE_BUDGET)
}

/// As [`solve_milp_bb`], failing with `Error::Resource` (carrying the best
/// incumbent, if any) after `budget` LP relaxations.
pub fn solve_milp_bb_with_budget(
    c: &Vector,
    p: &Polytope,
    mask: &IntegralityMask,
    budget: usize,
) -> Result<LpSolution> {
    if mask.len() != p.dim() {
        return Err(Error::Dimension(format!(
            "integrality mask has length {} for R^{}",
            mask.len(),
            p.dim()
        )));
    }
    let mut work = p.clone();
    // integer coordinates only take values in the rounded-in box
    for j in 0..p.dim() {
        if mask.is_integer(j) {
            work.lower[j] = (work.lower[j] - INT_TOL).ceil();
            work.upper[j] = (work.upper[j] + INT_TOL).floor();
            if work.lower[j] > work.upper[j] {
                return Ok(LpSolution::without_point(LpStatus::Infeasible));
            }
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        order: 0,
        lower: work.lower.clone(),
        upper: work.upper.clone(),
    });
    let mut created = 1;
    let mut solved = 0;
    let mut incumbent: Option<LpSolution> = None;

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - 1e-9 * (1.0 + inc.objective.abs()) {
                break;
            }
        }
        if solved >= budget {
            return Err(Error::Resource {
                message: format!("branch and bound exceeded {budget} nodes"),
                incumbent: incumbent.map(|s| s.x),
            });
        }
        solved += 1;
        work.lower = node.lower;
        work.upper = node.upper;
        let sol = solve_lp(c, &work)?;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if solved == 1 {
                    return Ok(LpSolution::without_point(LpStatus::Unbounded));
                }
                return Err(Error::Unbounded(
                    "relaxation unbounded below a bounded root".into(),
                ));
            }
            LpStatus::Optimal => {}
        }
        if let Some(inc) = &incumbent {
            if sol.objective >= inc.objective - 1e-9 * (1.0 + inc.objective.abs()) {
                continue;
            }
        }
        match most_fractional(&sol.x, mask) {
            None => {
                let mut sol = sol;
                for j in 0..sol.x.len() {
                    if mask.is_integer(j) {
                        sol.x[j] = sol.x[j].round();
                    }
                }
                sol.objective = c.dot(&sol.x);
                incumbent = Some(sol);
            }
            Some(j) => {
                let v = sol.x[j];
                let mut down_upper = work.upper.clone();
                down_upper[j] = v.floor();
                heap.push(Node {
                    bound: sol.objective,
                    order: created,
                    lower: work.lower.clone(),
                    upper: down_upper,
                });
                let mut up_lower = work.lower.clone();
                up_lower[j] = v.ceil();
                heap.push(Node {
                    bound: sol.objective,
                    order: created + 1,
                    lower: up_lower,
                    upper: work.upper.clone(),
                });
                created += 2;
            }
        }
    }
    Ok(incumbent.unwrap_or_else(|| LpSolution::without_point(LpStatus::Infeasible)))
}
