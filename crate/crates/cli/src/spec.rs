use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use swarm_opt::graph_kit::{build_erdos_renyi, Topology, TopologySchedule};
use swarm_opt::netsim::{AlgorithmConfig, RunConfig};
use swarm_opt::problems::{
    build_pev_charging, build_resource_allocation, build_task_assignment, random_cost_table,
    random_surveillance, PevData, Problem, ResourceData,
};
use swarm_opt::{Error, Result};

fn default_horizon() -> usize {
    24
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Problem generator, seeded per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// Uniform `[0, 1)` costs, `n` robots and `n` tasks.
    TaskAssignment { n: usize },
    /// Battery charging over `horizon` 20-minute slots.
    Pev {
        n: usize,
        #[serde(default = "default_horizon")]
        horizon: usize,
    },
    Surveillance { n: usize },
    ResourceAllocation { n: usize },
    /// A fixed problem given inline; the seed only affects the graph.
    Custom { problem: Problem },
}

impl Scenario {
    pub fn tag(&self) -> &'static str {
        match self {
            Scenario::TaskAssignment { .. } => "task_assignment",
            Scenario::Pev { .. } => "pev",
            Scenario::Surveillance { .. } => "surveillance",
            Scenario::ResourceAllocation { .. } => "resource_allocation",
            Scenario::Custom { .. } => "custom",
        }
    }

    pub fn n_robots(&self) -> usize {
        match self {
            Scenario::TaskAssignment { n }
            | Scenario::Pev { n, .. }
            | Scenario::Surveillance { n }
            | Scenario::ResourceAllocation { n } => *n,
            Scenario::Custom { problem } => problem.n_robots(),
        }
    }

    /// Algorithms each scenario accepts; custom problems defer to the family.
    fn allows(&self, alg: &AlgorithmConfig) -> bool {
        use AlgorithmConfig::*;
        match self {
            Scenario::TaskAssignment { .. } | Scenario::Pev { .. } => {
                matches!(alg, DualDecomposition { .. })
            }
            Scenario::Surveillance { .. } | Scenario::ResourceAllocation { .. } => {
                matches!(alg, ProjectedTracking { .. } | FrankWolfe { .. } | DualConsensusAdmm(_))
            }
            Scenario::Custom { .. } => true,
        }
    }

    pub fn build(&self, seed: u64) -> Result<Problem> {
        Ok(match self {
            Scenario::TaskAssignment { n } => {
                Problem::ConstraintCoupled(build_task_assignment(&random_cost_table(*n, seed), None)?)
            }
            Scenario::Pev { n, horizon } => {
                Problem::ConstraintCoupled(build_pev_charging(&PevData::random(*n, *horizon, seed))?)
            }
            Scenario::Surveillance { n } => Problem::Aggregative(random_surveillance(*n, seed)?),
            Scenario::ResourceAllocation { n } => {
                Problem::Aggregative(build_resource_allocation(&ResourceData::random(*n, seed))?)
            }
            Scenario::Custom { problem } => problem.clone(),
        })
    }
}

/// Communication graph; random graphs take the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    ErdosRenyi { p: f64 },
    Complete,
    Ring,
    Path,
    Schedule { schedule: TopologySchedule },
}

impl TopologySpec {
    pub fn build(&self, n: usize, seed: u64) -> Result<TopologySchedule> {
        let fixed = |topology: Topology| TopologySchedule::Static { topology };
        Ok(match self {
            TopologySpec::ErdosRenyi { p } => fixed(build_erdos_renyi(n, *p, seed)?),
            TopologySpec::Complete => fixed(Topology::complete(n)?),
            TopologySpec::Ring => fixed(Topology::ring(n)?),
            TopologySpec::Path => fixed(Topology::path(n)?),
            TopologySpec::Schedule { schedule } => schedule.clone(),
        })
    }
}

/// One experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub algorithms: Vec<AlgorithmConfig>,
    pub topology: TopologySpec,
    pub rounds: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("spec does not parse: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("spec lists no algorithm".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("spec lists no seed".into()));
        }
        let mut names: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("each algorithm may appear once".into()));
        }
        if self.scenario.n_robots() == 0 {
            return Err(Error::Config("scenario needs at least one robot".into()));
        }
        for alg in &self.algorithms {
            if !self.scenario.allows(alg) {
                return Err(Error::Config(format!(
                    "{} does not apply to the {} scenario; task_assignment and pev take \
                     dual_decomposition, surveillance and resource_allocation take \
                     projected_tracking, frank_wolfe or dual_consensus_admm",
                    alg.name(),
                    self.scenario.tag()
                )));
            }
            alg.validate()?;
        }
        if let Scenario::Custom { problem } = &self.scenario {
            for alg in &self.algorithms {
                alg.check_compatible(problem)?;
            }
        }
        self.run_config(&self.algorithms[0], TopologySchedule::SeededRandom {
            n: self.scenario.n_robots(),
            p: 1.0,
            seed: 0,
        })
        .validate()
    }

    pub fn run_config(&self, alg: &AlgorithmConfig, topology: TopologySchedule) -> RunConfig {
        let mut cfg = RunConfig::new(alg.clone(), topology, self.rounds);
        cfg.cadence = self.cadence;
        cfg
    }
}
