//! The five distributed algorithms as pure per-robot transition functions.
//!
//! Every step function takes the robot's current state, the messages it
//! received this round and the round's parameters, and returns the next
//! state together with the message it broadcasts. Nothing else is touched,
//! so the engine may advance all robots of a round in any order.
//!
//! | algorithm | state | message |
//! |---|---|---|
//! | dual decomposition | [`DualDecompState`] | multiplier `mu_i` |
//! | primal decomposition | [`PrimalDecompState`] | multiplier `mu_i` |
//! | projected aggregative tracking | [`PatState`] | trackers `(s_i, y_i)` |
//! | Frank-Wolfe with tracking | [`FwState`] | trackers `(s_i, y_i)` |
//! | dual consensus ADMM | [`AdmmState`] | dual estimate `y_i` |
//!
//! Weighted inboxes list `(a_ij, message_j)` and include the robot's own
//! message with weight `a_ii`. Unweighted inboxes list neighbor messages only.

mod admm;
mod dual;
mod primal;
mod tracking;

pub use admm::{admm_init, admm_step, AdmmParams, AdmmState, DEFAULT_BOX_CEILING};
pub use dual::{dd_init, dd_step, DualDecompState};
pub use primal::{default_penalty, equal_split, pd_finalize, pd_init, pd_step, PrimalDecompState};
pub use tracking::{fw_init, fw_step, pat_init, pat_step, FwState, PatState, TrackerMsg};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Step-size sequence indexed by the round `t = 0, 1, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `value` every round.
    Constant { value: f64 },
    /// `scale / (t + 1)`.
    Harmonic { scale: f64 },
    /// `scale / sqrt(t)`, with `t = 0` treated as `t = 1`.
    InvSqrt { scale: f64 },
}

impl StepSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant { value } => value,
            StepSchedule::Harmonic { scale } => scale / (t as f64 + 1.0),
            StepSchedule::InvSqrt { scale } => scale / (t.max(1) as f64).sqrt(),
        }
    }

    fn first(&self) -> f64 {
        self.at(0)
    }

    /// Rejects schedules that are not positive and non-increasing, and, when
    /// `cap` is given, schedules that ever exceed it.
    pub fn validate(&self, cap: Option<f64>) -> Result<()> {
        let v = self.first();
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("step schedule {self:?} must start positive and finite")));
        }
        if let Some(c) = cap {
            if v > c {
                return Err(Error::Config(format!("step schedule {self:?} exceeds {c}")));
            }
        }
        // closed forms are monotone, but the check is cheap and guards edits
        let mut prev = v;
        for t in 1..1000 {
            let cur = self.at(t);
            if cur > prev || cur <= 0.0 {
                return Err(Error::Config(format!("step schedule {self:?} is not non-increasing")));
            }
            prev = cur;
        }
        Ok(())
    }

    /// Whether the sequence sums to infinity while its squares stay summable.
    pub fn is_square_summable(&self) -> bool {
        matches!(self, StepSchedule::Harmonic { .. })
    }
}

fn check_weights<T>(inbox: &[(f64, T)]) -> Result<()> {
    let total: f64 = inbox.iter().map(|(w, _)| *w).sum();
    if inbox.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("inbox weights sum to {total}, expected 1")));
    }
    Ok(())
}
