//! Problem instances: constraint-coupled programs, mixed-integer programs
//! with linear coupling, and aggregative programs, plus builders for the
//! task-assignment, battery-charging, surveillance and resource-allocation
//! use cases.

mod aggregative;
mod builders;
mod coupled;
mod qos;

pub use aggregative::{AdmmForm, AggRobot, AggregateTerm, AggregativeProblem};
pub use builders::{
    build_pev_charging, build_resource_allocation, build_target_surveillance,
    build_task_assignment, decode_assignment, random_cost_table, random_surveillance, PevData, PevRobot, ResourceData,
};
pub use coupled::{
    random_milp, CcRobot, ConstraintCoupledProblem, LocalCost, MilpProblem, MilpRobot,
};
pub use qos::{
    aligned_kl, kl_gaussian, sample_clusters, sample_qos_costs, sample_robot_profiles,
    qos_assignment_costs, rotation, GaussianQoS,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Result;

/// Any problem the engine can run, tagged for JSON documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Problem {
    ConstraintCoupled(ConstraintCoupledProblem),
    Milp(MilpProblem),
    Aggregative(AggregativeProblem),
}

impl Problem {
    pub fn n_robots(&self) -> usize {
        match self {
            Problem::ConstraintCoupled(p) => p.n_robots(),
            Problem::Milp(p) => p.n_robots(),
            Problem::Aggregative(p) => p.n_robots(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Problem::ConstraintCoupled(p) => p.validate(),
            Problem::Milp(p) => p.validate(),
            Problem::Aggregative(p) => p.validate(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Problem = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    /// SHA-256 of the canonical JSON encoding, as lowercase hex.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_stable_hash() {
        let p = Problem::Aggregative(build_resource_allocation(&ResourceData::random(4, 2)).unwrap());
        let back = Problem::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.hash().unwrap(), p.hash().unwrap());
        let other = Problem::Aggregative(build_resource_allocation(&ResourceData::random(4, 3)).unwrap());
        assert_ne!(other.hash().unwrap(), p.hash().unwrap());
    }

    #[test]
    fn charging_problem_round_trip() {
        let p = Problem::ConstraintCoupled(build_pev_charging(&PevData::random(2, 24, 1)).unwrap());
        assert_eq!(Problem::from_json(&p.to_json().unwrap()).unwrap(), p);
    }
}
