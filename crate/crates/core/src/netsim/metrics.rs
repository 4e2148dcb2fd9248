use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::RoundTrace;
use crate::oracle::OracleSolution;
use crate::problems::Problem;
use crate::{Error, Result, Vector};

pub const METRICS_HEADER: [&str; 5] =
    ["t", "cost_error", "coupling_violation", "consensus_error", "opt_error"];

/// One row of the metrics table. The oracle-based columns are empty when no
/// reference solution was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: usize,
    pub cost_error: Option<f64>,
    pub coupling_violation: f64,
    pub consensus_error: f64,
    pub opt_error: Option<f64>,
}

fn stack(xs: &[Vector]) -> Vector {
    Vector::from_iterator(xs.iter().map(|x| x.len()).sum(), xs.iter().flat_map(|x| x.iter().copied()))
}

/// Cost, violation and global vector of a primal estimate.
fn evaluate(problem: &Problem, xs: &[Vector]) -> (f64, f64) {
    match problem {
        Problem::ConstraintCoupled(p) => (p.cost(xs), p.coupling_violation(xs)),
        Problem::Milp(p) => {
            let excess = p.coupling_lhs(xs) - &p.b;
            let viol = excess.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
            (p.cost(xs), viol)
        }
        Problem::Aggregative(p) => (p.cost(xs), 0.0),
    }
}

/// Metrics of every recorded round:
/// `cost_error = |f(x) - f*| / max(1, |f*|)`, the norm of the positive part
/// of the coupling, the consensus spread, and `||x - x*|| / ||x*||`
/// (absolute when `x* = 0`).
pub fn compute_metrics(
    trace: &[RoundTrace],
    problem: &Problem,
    oracle: Option<&OracleSolution>,
) -> Result<Vec<MetricsRow>> {
    let n = problem.n_robots();
    trace
        .iter()
        .map(|r| {
            if r.x.len() != n {
                return Err(Error::Dimension(format!("round {} has {} robots", r.t, r.x.len())));
            }
            let (cost, viol) = evaluate(problem, &r.x);
            let x = stack(&r.x);
            let (cost_error, opt_error) = match oracle {
                Some(o) => {
                    if o.x_star.len() != x.len() {
                        return Err(Error::Dimension("oracle solution size".into()));
                    }
                    let denom = o.x_star.norm();
                    let diff = (&x - &o.x_star).norm();
                    (
                        Some((cost - o.f_star).abs() / o.f_star.abs().max(1.0)),
                        Some(if denom > 0.0 { diff / denom } else { diff }),
                    )
                }
                None => (None, None),
            };
            Ok(MetricsRow {
                t: r.t,
                cost_error,
                coupling_violation: viol,
                consensus_error: r.consensus_spread,
                opt_error,
            })
        })
        .collect()
}

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the table with the fixed header. Floats use the shortest
/// representation that reads back exactly.
pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for r in rows {
        out.write_record([
            r.t.to_string(),
            field(r.cost_error),
            r.coupling_violation.to_string(),
            r.consensus_error.to_string(),
            field(r.opt_error),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<MetricsRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != METRICS_HEADER {
        return Err(Error::Config(format!("unexpected metrics header {header:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Config(format!("bad number {s:?} in metrics")))
    };
    let opt = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
    rd.records()
        .map(|rec| {
            let rec = rec?;
            Ok(MetricsRow {
                t: rec[0].parse().map_err(|_| Error::Config("bad round index".into()))?,
                cost_error: opt(&rec[1])?,
                coupling_violation: num(&rec[2])?,
                consensus_error: num(&rec[3])?,
                opt_error: opt(&rec[4])?,
            })
        })
        .collect()
}

/// One JSON object per recorded round.
pub fn write_trace_jsonl<W: Write>(trace: &[RoundTrace], mut w: W) -> Result<()> {
    for r in trace {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_resource_allocation, ResourceData};

    fn problem() -> Problem {
        Problem::Aggregative(build_resource_allocation(&ResourceData::random(2, 1)).unwrap())
    }

    fn record(t: usize, x: [f64; 2]) -> RoundTrace {
        RoundTrace {
            t,
            x: vec![Vector::from_element(1, x[0]), Vector::from_element(1, x[1])],
            consensus_spread: 0.5,
            sigma: None,
            alloc_sum: None,
            tracker_means: None,
            states: None,
        }
    }

    #[test]
    fn optimum_scores_zero() {
        let p = problem();
        let sol = crate::oracle::solve(&p).unwrap();
        let xs = sol.split(&[1, 1]).unwrap();
        let rows = compute_metrics(&[record(0, [xs[0][0], xs[1][0]])], &p, Some(&sol)).unwrap();
        assert_eq!(rows[0].opt_error, Some(0.0));
        assert_eq!(rows[0].cost_error, Some(0.0));
        assert_eq!(rows[0].coupling_violation, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let p = problem();
        let rows = compute_metrics(&[record(0, [0.1, 0.2]), record(3, [1.0 / 3.0, 2.0])], &p, None).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,cost_error,coupling_violation,consensus_error,opt_error\n"));
        assert_eq!(read_metrics_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn jsonl_has_one_line_per_round() {
        let mut buf = Vec::new();
        write_trace_jsonl(&[record(0, [0.0, 0.0]), record(1, [1.0, 1.0])], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: RoundTrace = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        assert_eq!(back.t, 1);
    }
}
