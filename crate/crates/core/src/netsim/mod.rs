//! Deterministic synchronous round engine.
//!
//! Round `t` delivers every robot's latest broadcast along the round-`t`
//! topology, advances all robots with their pure step functions, and keeps
//! a trace of the rounds selected by the metric cadence. Conservation audits
//! run on every round, recorded or not, and abort the run when they drift.

mod metrics;

pub use metrics::{
    compute_metrics, read_metrics_csv, write_metrics_csv, write_trace_jsonl, MetricsRow,
    METRICS_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    admm_init, admm_step, dd_init, dd_step, default_penalty, equal_split, fw_init, fw_step,
    pat_init, pat_step, pd_finalize, pd_init, pd_step, AdmmParams, AdmmState, DualDecompState,
    FwState, PatState, PrimalDecompState, StepSchedule, TrackerMsg,
};
use crate::graph_kit::{metropolis_weights, Topology, TopologySchedule, WeightMatrix};
use crate::local_solvers::ScalarFn;
use crate::problems::{AggregativeProblem, ConstraintCoupledProblem, MilpProblem, Problem};
use crate::{Error, Result, Vector};

/// Algorithm and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmConfig {
    DualDecomposition {
        gamma: StepSchedule,
    },
    PrimalDecomposition {
        alpha: StepSchedule,
        /// Penalty `M` on the relaxation; defaults to `100 (1 + max ||c_i||_inf)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        penalty: Option<f64>,
        /// Initial allocations; defaults to the equal split of `b - sigma_ft`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Vec<Vector>>,
    },
    ProjectedTracking {
        gamma: f64,
        delta: f64,
    },
    FrankWolfe {
        gamma: StepSchedule,
    },
    DualConsensusAdmm(AdmmParams),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::DualDecomposition { .. } => "dual_decomposition",
            AlgorithmConfig::PrimalDecomposition { .. } => "primal_decomposition",
            AlgorithmConfig::ProjectedTracking { .. } => "projected_tracking",
            AlgorithmConfig::FrankWolfe { .. } => "frank_wolfe",
            AlgorithmConfig::DualConsensusAdmm(_) => "dual_consensus_admm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::DualDecomposition { gamma } => gamma.validate(None),
            AlgorithmConfig::PrimalDecomposition { alpha, penalty, .. } => {
                alpha.validate(None)?;
                match penalty {
                    Some(m) if !(*m > 0.0) => Err(Error::Config("penalty must be positive".into())),
                    _ => Ok(()),
                }
            }
            AlgorithmConfig::ProjectedTracking { gamma, delta } => {
                if !(*gamma > 0.0) || !(*delta > 0.0 && *delta < 1.0) {
                    return Err(Error::Config("tracking needs gamma > 0 and delta in (0, 1)".into()));
                }
                Ok(())
            }
            AlgorithmConfig::FrankWolfe { gamma } => gamma.validate(Some(1.0)),
            AlgorithmConfig::DualConsensusAdmm(p) => p.validate(),
        }
    }

    /// Whether the algorithm applies to the problem family.
    pub fn check_compatible(&self, problem: &Problem) -> Result<()> {
        let ok = matches!(
            (self, problem),
            (AlgorithmConfig::DualDecomposition { .. }, Problem::ConstraintCoupled(_))
                | (AlgorithmConfig::PrimalDecomposition { .. }, Problem::Milp(_))
                | (AlgorithmConfig::ProjectedTracking { .. }, Problem::Aggregative(_))
                | (AlgorithmConfig::FrankWolfe { .. }, Problem::Aggregative(_))
                | (AlgorithmConfig::DualConsensusAdmm(_), Problem::Aggregative(_))
        );
        if ok {
            Ok(())
        } else {
            let family = match problem {
                Problem::ConstraintCoupled(_) => "constraint-coupled",
                Problem::Milp(_) => "mixed-integer",
                Problem::Aggregative(_) => "aggregative",
            };
            Err(Error::Config(format!("{} does not apply to {family} problems", self.name())))
        }
    }
}

fn default_audit_tol() -> f64 {
    1e-9
}

/// Everything a run needs besides the problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub algorithm: AlgorithmConfig,
    pub topology: TopologySchedule,
    pub rounds: usize,
    /// Record every `cadence` rounds; defaults to 1 up to 1000 rounds and to
    /// `ceil(T / 1000)` beyond.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<usize>,
    /// Keep full per-robot states in the trace.
    #[serde(default)]
    pub record_states: bool,
    /// Relative tolerance of the conservation audits.
    #[serde(default = "default_audit_tol")]
    pub audit_tol: f64,
}

impl RunConfig {
    pub fn new(algorithm: AlgorithmConfig, topology: TopologySchedule, rounds: usize) -> Self {
        RunConfig {
            algorithm,
            topology,
            rounds,
            cadence: None,
            record_states: false,
            audit_tol: default_audit_tol(),
        }
    }

    pub fn effective_cadence(&self) -> usize {
        match self.cadence {
            Some(c) => c.max(1),
            None if self.rounds <= 1000 => 1,
            None => self.rounds.div_ceil(1000),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("a run needs at least one round".into()));
        }
        if self.cadence == Some(0) {
            return Err(Error::Config("cadence must be positive".into()));
        }
        if !(self.audit_tol > 0.0) {
            return Err(Error::Config("audit tolerance must be positive".into()));
        }
        self.topology.validate()?;
        self.algorithm.validate()
    }
}

/// Final per-robot states of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "robots", rename_all = "snake_case")]
pub enum RobotStates {
    Dual(Vec<DualDecompState>),
    Primal(Vec<PrimalDecompState>),
    Pat(Vec<PatState>),
    Fw(Vec<FwState>),
    Admm(Vec<AdmmState>),
}

/// Network means of the two trackers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerMeans {
    pub s: Vector,
    pub y: Vector,
}

/// One recorded round. `t = 0` is the initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub t: usize,
    /// Primal estimate of every robot: the running average for dual
    /// decomposition, the relaxed solution for primal decomposition, the
    /// iterate otherwise.
    pub x: Vec<Vector>,
    /// Largest pairwise distance of the exchanged consensus quantity.
    pub consensus_spread: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alloc_sum: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker_means: Option<TrackerMeans>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<RobotStates>,
}

/// Largest conservation errors seen over all rounds, in absolute terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// `||mean_i s_i - sigma(x)||`.
    pub tracker_s: f64,
    /// `||mean_i y_i - mean_i grad_2 f_i(x_i, s_i)||`.
    pub tracker_y: f64,
    /// `||sum_i y_i - (b - sigma_ft)||_inf`.
    pub allocation: f64,
}

impl AuditReport {
    fn absorb(&mut self, o: &AuditReport) {
        self.tracker_s = self.tracker_s.max(o.tracker_s);
        self.tracker_y = self.tracker_y.max(o.tracker_y);
        self.allocation = self.allocation.max(o.allocation);
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub states: RobotStates,
    pub trace: Vec<RoundTrace>,
    pub audit: AuditReport,
    /// Mixed-integer solutions recovered after the last round (primal
    /// decomposition only).
    pub recovered: Option<Vec<Vector>>,
}

impl RunOutput {
    /// Primal estimate after the last round.
    pub fn final_x(&self) -> &[Vector] {
        &self.trace.last().expect("trace always holds the last round").x
    }
}

/// Topology and weights of one round.
struct RoundNet {
    topo: Topology,
    weights: WeightMatrix,
}

impl RoundNet {
    fn build(topo: Topology) -> Result<Self> {
        let weights = metropolis_weights(&topo)?;
        Ok(RoundNet { topo, weights })
    }
}

struct Network<'a> {
    schedule: &'a TopologySchedule,
    fixed: Vec<RoundNet>,
}

impl<'a> Network<'a> {
    fn new(schedule: &'a TopologySchedule, n: usize) -> Result<Self> {
        if schedule.n_robots() != n {
            return Err(Error::Config(format!(
                "topology has {} robots, problem has {n}",
                schedule.n_robots()
            )));
        }
        let fixed = match schedule {
            TopologySchedule::Static { topology } => vec![RoundNet::build(topology.clone())?],
            TopologySchedule::Periodic { topologies } => topologies
                .iter()
                .map(|t| RoundNet::build(t.clone()))
                .collect::<Result<_>>()?,
            TopologySchedule::SeededRandom { .. } => Vec::new(),
        };
        Ok(Network { schedule, fixed })
    }

    fn at(&self, t: usize) -> Result<std::borrow::Cow<'_, RoundNet>> {
        if self.fixed.is_empty() {
            Ok(std::borrow::Cow::Owned(RoundNet::build(self.schedule.at(t)?.into_owned())?))
        } else {
            Ok(std::borrow::Cow::Borrowed(&self.fixed[t % self.fixed.len()]))
        }
    }
}

impl Clone for RoundNet {
    fn clone(&self) -> Self {
        RoundNet { topo: self.topo.clone(), weights: self.weights.clone() }
    }
}

/// `(a_ij, message_j)` for robot `i`, own entry first.
fn weighted_inbox<'m, M>(net: &RoundNet, msgs: &'m [M], i: usize) -> Result<Vec<(f64, &'m M)>> {
    let mut inbox = vec![(net.weights.get(i, i), &msgs[i])];
    for (j, w) in net.weights.row_neighbors(i) {
        if !net.topo.has_edge(j, i) {
            return Err(Error::Internal(format!("weight ({i}, {j}) has no matching arc")));
        }
        inbox.push((w, &msgs[j]));
    }
    Ok(inbox)
}

fn neighbor_inbox<'m, M>(net: &RoundNet, msgs: &'m [M], i: usize) -> Vec<&'m M> {
    net.topo.in_neighbors(i).into_iter().map(|j| &msgs[j]).collect()
}

fn max_spread<'v>(vs: impl Iterator<Item = &'v Vector> + Clone) -> f64 {
    let mut worst = 0.0f64;
    for (a, va) in vs.clone().enumerate() {
        for vb in vs.clone().skip(a + 1) {
            worst = worst.max((va - vb).norm());
        }
    }
    worst
}

/// Per-round bookkeeping of one algorithm.
trait Machine {
    type State: Clone;
    type Msg: Clone;
    const WEIGHTED: bool;
    const NEEDS_UNDIRECTED: bool;

    fn init(&self, i: usize) -> Result<Self::State>;
    fn message(&self, s: &Self::State) -> Self::Msg;
    fn step_weighted(&self, _s: &Self::State, _inbox: &[(f64, &Self::Msg)], _t: usize, _i: usize) -> Result<(Self::State, Self::Msg)> {
        unreachable!("machine takes unweighted inboxes")
    }
    fn step_plain(&self, _s: &Self::State, _inbox: &[&Self::Msg], _t: usize, _i: usize) -> Result<(Self::State, Self::Msg)> {
        unreachable!("machine takes weighted inboxes")
    }
    fn primal(&self, s: &Self::State) -> Vector;
    fn consensus(&self, s: &Self::State) -> Vector;
    fn wrap(states: Vec<Self::State>) -> RobotStates;
    /// Audit values, their hard-fail scales, and the summary vectors.
    fn audit(&self, states: &[Self::State], xs: &[Vector]) -> (AuditReport, AuditReport, Summary);
}

#[derive(Default)]
struct Summary {
    sigma: Option<Vector>,
    alloc_sum: Option<Vector>,
    tracker_means: Option<TrackerMeans>,
}

fn drive<M: Machine>(m: &M, n: usize, cfg: &RunConfig) -> Result<(Vec<M::State>, Vec<RoundTrace>, AuditReport)> {
    let net = Network::new(&cfg.topology, n)?;
    let cadence = cfg.effective_cadence();
    let mut states: Vec<M::State> = (0..n)
        .map(|i| m.init(i).map_err(|e| e.at_round(0)))
        .collect::<Result<_>>()?;
    let mut msgs: Vec<M::Msg> = states.iter().map(|s| m.message(s)).collect();
    let mut trace = Vec::new();
    let mut worst = AuditReport::default();
    // rounding left by an earlier large term never cancels, so the scale only grows
    let mut peak = AuditReport::default();

    let mut observe = |t: usize, states: &[M::State], trace: &mut Vec<RoundTrace>| -> Result<()> {
        let xs: Vec<Vector> = states.iter().map(|s| m.primal(s)).collect();
        let (audit, scale, summary) = m.audit(states, &xs);
        peak.absorb(&scale);
        let tol = cfg.audit_tol;
        if audit.tracker_s > tol * peak.tracker_s
            || audit.tracker_y > tol * peak.tracker_y
            || audit.allocation > tol * peak.allocation
        {
            return Err(Error::Numeric(format!("conservation audit failed: {audit:?}")).at_round(t));
        }
        worst.absorb(&audit);
        if t % cadence == 0 || t == cfg.rounds {
            let cons: Vec<Vector> = states.iter().map(|s| m.consensus(s)).collect();
            trace.push(RoundTrace {
                t,
                x: xs,
                consensus_spread: max_spread(cons.iter()),
                sigma: summary.sigma,
                alloc_sum: summary.alloc_sum,
                tracker_means: summary.tracker_means,
                states: cfg.record_states.then(|| M::wrap(states.to_vec())),
            });
        }
        Ok(())
    };
    observe(0, &states, &mut trace)?;

    for t in 0..cfg.rounds {
        let round = net.at(t).map_err(|e| e.at_round(t + 1))?;
        if M::NEEDS_UNDIRECTED && !round.topo.is_undirected() {
            return Err(Error::UnsupportedTopology("this algorithm needs undirected rounds".into()).at_round(t + 1));
        }
        let mut next_states = Vec::with_capacity(n);
        let mut next_msgs = Vec::with_capacity(n);
        for i in 0..n {
            let (s, msg) = if M::WEIGHTED {
                let inbox = weighted_inbox(&round, &msgs, i)?;
                m.step_weighted(&states[i], &inbox, t, i)
            } else {
                let inbox = neighbor_inbox(&round, &msgs, i);
                m.step_plain(&states[i], &inbox, t, i)
            }
            .map_err(|e| e.at_round(t + 1))?;
            next_states.push(s);
            next_msgs.push(msg);
        }
        states = next_states;
        msgs = next_msgs;
        observe(t + 1, &states, &mut trace)?;
    }
    Ok((states, trace, worst))
}

struct Dual<'p> {
    p: &'p ConstraintCoupledProblem,
    gamma: StepSchedule,
}

impl Machine for Dual<'_> {
    type State = DualDecompState;
    type Msg = Vector;
    const WEIGHTED: bool = true;
    const NEEDS_UNDIRECTED: bool = false;

    fn init(&self, i: usize) -> Result<DualDecompState> {
        dd_init(self.p, i)
    }
    fn message(&self, s: &DualDecompState) -> Vector {
        s.mu.clone()
    }
    fn step_weighted(&self, s: &DualDecompState, inbox: &[(f64, &Vector)], t: usize, i: usize) -> Result<(DualDecompState, Vector)> {
        dd_step(s, inbox, self.gamma.at(t), self.p, i)
    }
    fn primal(&self, s: &DualDecompState) -> Vector {
        s.x_running.clone()
    }
    fn consensus(&self, s: &DualDecompState) -> Vector {
        s.mu.clone()
    }
    fn wrap(states: Vec<DualDecompState>) -> RobotStates {
        RobotStates::Dual(states)
    }
    fn audit(&self, _: &[DualDecompState], _: &[Vector]) -> (AuditReport, AuditReport, Summary) {
        (AuditReport::default(), AuditReport::default(), Summary::default())
    }
}

struct Primal<'p> {
    p: &'p MilpProblem,
    alpha: StepSchedule,
    penalty: f64,
    initial: Vec<Vector>,
}

impl Machine for Primal<'_> {
    type State = PrimalDecompState;
    type Msg = Vector;
    const WEIGHTED: bool = false;
    const NEEDS_UNDIRECTED: bool = true;

    fn init(&self, i: usize) -> Result<PrimalDecompState> {
        pd_init(self.p, i, self.initial[i].clone(), self.penalty)
    }
    fn message(&self, s: &PrimalDecompState) -> Vector {
        s.mu.clone()
    }
    fn step_plain(&self, s: &PrimalDecompState, inbox: &[&Vector], t: usize, i: usize) -> Result<(PrimalDecompState, Vector)> {
        pd_step(s, inbox, self.alpha.at(t), self.p, i, self.penalty)
    }
    fn primal(&self, s: &PrimalDecompState) -> Vector {
        s.x_relaxed.clone()
    }
    fn consensus(&self, s: &PrimalDecompState) -> Vector {
        s.mu.clone()
    }
    fn wrap(states: Vec<PrimalDecompState>) -> RobotStates {
        RobotStates::Primal(states)
    }
    fn audit(&self, states: &[PrimalDecompState], _: &[Vector]) -> (AuditReport, AuditReport, Summary) {
        let target = &self.p.b - &self.p.sigma_ft;
        let sum = states.iter().fold(Vector::zeros(target.len()), |a, s| a + &s.y_alloc);
        let audit = AuditReport { allocation: (&sum - &target).amax(), ..Default::default() };
        let scale = AuditReport { tracker_s: 1.0, tracker_y: 1.0, allocation: target.amax().max(1.0) };
        (audit, scale, Summary { alloc_sum: Some(sum), ..Default::default() })
    }
}

fn tracker_audit(
    p: &AggregativeProblem,
    xs: &[Vector],
    ss: &[&Vector],
    ys: &[&Vector],
) -> (AuditReport, AuditReport, Summary) {
    let n = p.n_robots() as f64;
    let d = p.agg_dim;
    let sigma = p.sigma(xs);
    let s_mean = ss.iter().fold(Vector::zeros(d), |a, s| a + *s) / n;
    let y_mean = ys.iter().fold(Vector::zeros(d), |a, y| a + *y) / n;
    let g_mean = (0..p.n_robots())
        .fold(Vector::zeros(d), |a, i| a + p.grad_sigma(i, &xs[i], ss[i]))
        / n;
    let audit = AuditReport {
        tracker_s: (&s_mean - &sigma).norm(),
        tracker_y: (&y_mean - &g_mean).norm(),
        allocation: 0.0,
    };
    // rounding scales with the largest term that entered the sums
    let biggest = |vs: &mut dyn Iterator<Item = f64>| vs.fold(1.0f64, f64::max);
    let scale = AuditReport {
        tracker_s: biggest(&mut ss.iter().map(|s| s.norm()).chain([sigma.norm()])),
        tracker_y: biggest(
            &mut ys
                .iter()
                .map(|y| y.norm())
                .chain((0..p.n_robots()).map(|i| p.grad_sigma(i, &xs[i], ss[i]).norm())),
        ),
        allocation: 1.0,
    };
    let summary = Summary {
        sigma: Some(sigma),
        alloc_sum: None,
        tracker_means: Some(TrackerMeans { s: s_mean, y: y_mean }),
    };
    (audit, scale, summary)
}

struct Pat<'p> {
    p: &'p AggregativeProblem,
    gamma: f64,
    delta: f64,
}

impl Machine for Pat<'_> {
    type State = PatState;
    type Msg = TrackerMsg;
    const WEIGHTED: bool = true;
    const NEEDS_UNDIRECTED: bool = false;

    fn init(&self, i: usize) -> Result<PatState> {
        pat_init(self.p, i)
    }
    fn message(&self, s: &PatState) -> TrackerMsg {
        s.message()
    }
    fn step_weighted(&self, s: &PatState, inbox: &[(f64, &TrackerMsg)], _t: usize, i: usize) -> Result<(PatState, TrackerMsg)> {
        pat_step(s, inbox, self.gamma, self.delta, self.p, i)
    }
    fn primal(&self, s: &PatState) -> Vector {
        s.x.clone()
    }
    fn consensus(&self, s: &PatState) -> Vector {
        s.s_tracker.clone()
    }
    fn wrap(states: Vec<PatState>) -> RobotStates {
        RobotStates::Pat(states)
    }
    fn audit(&self, states: &[PatState], xs: &[Vector]) -> (AuditReport, AuditReport, Summary) {
        let ss: Vec<&Vector> = states.iter().map(|s| &s.s_tracker).collect();
        let ys: Vec<&Vector> = states.iter().map(|s| &s.y_tracker).collect();
        tracker_audit(self.p, xs, &ss, &ys)
    }
}

struct Fw<'p> {
    p: &'p AggregativeProblem,
    gamma: StepSchedule,
}

impl Machine for Fw<'_> {
    type State = FwState;
    type Msg = TrackerMsg;
    const WEIGHTED: bool = true;
    const NEEDS_UNDIRECTED: bool = false;

    fn init(&self, i: usize) -> Result<FwState> {
        fw_init(self.p, i)
    }
    fn message(&self, s: &FwState) -> TrackerMsg {
        s.message()
    }
    fn step_weighted(&self, s: &FwState, inbox: &[(f64, &TrackerMsg)], t: usize, i: usize) -> Result<(FwState, TrackerMsg)> {
        fw_step(s, inbox, self.gamma.at(t), self.p, i)
    }
    fn primal(&self, s: &FwState) -> Vector {
        s.x.clone()
    }
    fn consensus(&self, s: &FwState) -> Vector {
        s.s_tracker.clone()
    }
    fn wrap(states: Vec<FwState>) -> RobotStates {
        RobotStates::Fw(states)
    }
    fn audit(&self, states: &[FwState], xs: &[Vector]) -> (AuditReport, AuditReport, Summary) {
        let ss: Vec<&Vector> = states.iter().map(|s| &s.s_tracker).collect();
        let ys: Vec<&Vector> = states.iter().map(|s| &s.y_tracker).collect();
        tracker_audit(self.p, xs, &ss, &ys)
    }
}

struct Admm<'p> {
    p: &'p AggregativeProblem,
    params: AdmmParams,
    g: Vec<ScalarFn>,
}

impl Machine for Admm<'_> {
    type State = AdmmState;
    type Msg = Vector;
    const WEIGHTED: bool = false;
    const NEEDS_UNDIRECTED: bool = true;

    fn init(&self, i: usize) -> Result<AdmmState> {
        admm_init(self.p, i, &self.params)
    }
    fn message(&self, s: &AdmmState) -> Vector {
        s.y.clone()
    }
    fn step_plain(&self, s: &AdmmState, inbox: &[&Vector], _t: usize, i: usize) -> Result<(AdmmState, Vector)> {
        admm_step(s, inbox, &self.params, self.p, &self.g, i)
    }
    fn primal(&self, s: &AdmmState) -> Vector {
        s.x.clone()
    }
    fn consensus(&self, s: &AdmmState) -> Vector {
        s.y.clone()
    }
    fn wrap(states: Vec<AdmmState>) -> RobotStates {
        RobotStates::Admm(states)
    }
    fn audit(&self, _: &[AdmmState], xs: &[Vector]) -> (AuditReport, AuditReport, Summary) {
        let summary = Summary { sigma: Some(self.p.sigma(xs)), ..Default::default() };
        (AuditReport::default(), AuditReport::default(), summary)
    }
}

/// Runs `config` on `problem`.
pub fn run(problem: &Problem, config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    problem.validate()?;
    config.algorithm.check_compatible(problem)?;
    let n = problem.n_robots();
    match (&config.algorithm, problem) {
        (AlgorithmConfig::DualDecomposition { gamma }, Problem::ConstraintCoupled(p)) => {
            let (states, trace, audit) = drive(&Dual { p, gamma: *gamma }, n, config)?;
            Ok(RunOutput { states: RobotStates::Dual(states), trace, audit, recovered: None })
        }
        (AlgorithmConfig::PrimalDecomposition { alpha, penalty, initial }, Problem::Milp(p)) => {
            let initial = match initial {
                Some(y0) => {
                    if y0.len() != n {
                        return Err(Error::Config("one initial allocation per robot".into()));
                    }
                    let target = &p.b - &p.sigma_ft;
                    let sum = y0.iter().fold(Vector::zeros(target.len()), |a, y| a + y);
                    if (sum - &target).amax() > 1e-9 * target.amax().max(1.0) {
                        return Err(Error::Config("initial allocations must sum to b - sigma_ft".into()));
                    }
                    y0.clone()
                }
                None => equal_split(p),
            };
            let m = Primal { p, alpha: *alpha, penalty: penalty.unwrap_or_else(|| default_penalty(p)), initial };
            let (states, trace, audit) = drive(&m, n, config)?;
            let recovered = states
                .iter()
                .enumerate()
                .map(|(i, s)| pd_finalize(s, p, i))
                .collect::<Result<Vec<_>>>()?;
            Ok(RunOutput { states: RobotStates::Primal(states), trace, audit, recovered: Some(recovered) })
        }
        (AlgorithmConfig::ProjectedTracking { gamma, delta }, Problem::Aggregative(p)) => {
            let (states, trace, audit) = drive(&Pat { p, gamma: *gamma, delta: *delta }, n, config)?;
            Ok(RunOutput { states: RobotStates::Pat(states), trace, audit, recovered: None })
        }
        (AlgorithmConfig::FrankWolfe { gamma }, Problem::Aggregative(p)) => {
            let (states, trace, audit) = drive(&Fw { p, gamma: *gamma }, n, config)?;
            Ok(RunOutput { states: RobotStates::Fw(states), trace, audit, recovered: None })
        }
        (AlgorithmConfig::DualConsensusAdmm(params), Problem::Aggregative(p)) => {
            let m = Admm { p, params: *params, g: p.admm_form().g };
            let (states, trace, audit) = drive(&m, n, config)?;
            Ok(RunOutput { states: RobotStates::Admm(states), trace, audit, recovered: None })
        }
        _ => unreachable!("compatibility checked above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_kit::build_erdos_renyi;
    use crate::problems::{build_resource_allocation, build_task_assignment, random_cost_table, ResourceData};

    fn resource(n: usize) -> Problem {
        Problem::Aggregative(build_resource_allocation(&ResourceData::random(n, 5)).unwrap())
    }

    fn er(n: usize) -> TopologySchedule {
        TopologySchedule::Static { topology: build_erdos_renyi(n, 0.3, 1).unwrap() }
    }

    #[test]
    fn one_round_gives_two_records() {
        let cfg = RunConfig::new(AlgorithmConfig::ProjectedTracking { gamma: 0.01, delta: 0.5 }, er(4), 1);
        let out = run(&resource(4), &cfg).unwrap();
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.trace[0].t, 0);
        assert_eq!(out.trace[1].t, 1);
    }

    #[test]
    fn cadence_defaults() {
        let mut cfg = RunConfig::new(AlgorithmConfig::FrankWolfe { gamma: StepSchedule::InvSqrt { scale: 1.0 } }, er(3), 2500);
        assert_eq!(cfg.effective_cadence(), 3);
        cfg.rounds = 1000;
        assert_eq!(cfg.effective_cadence(), 1);
        cfg.rounds = 2500;
        let out = run(&resource(3), &cfg).unwrap();
        let ts: Vec<usize> = out.trace.iter().map(|r| r.t).collect();
        assert_eq!(ts.first(), Some(&0));
        assert_eq!(ts.last(), Some(&2500));
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn incompatible_pair_is_a_config_error() {
        let cfg = RunConfig::new(AlgorithmConfig::DualDecomposition { gamma: StepSchedule::Harmonic { scale: 1.0 } }, er(3), 5);
        assert!(matches!(run(&resource(3), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn robot_count_must_match() {
        let cfg = RunConfig::new(AlgorithmConfig::ProjectedTracking { gamma: 0.01, delta: 0.5 }, er(5), 5);
        assert!(matches!(run(&resource(4), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn trackers_stay_conserved() {
        let cfg = RunConfig::new(AlgorithmConfig::ProjectedTracking { gamma: 0.01, delta: 0.5 }, er(6), 300);
        let out = run(&resource(6), &cfg).unwrap();
        assert!(out.audit.tracker_s <= 1e-10);
        assert!(out.audit.tracker_y <= 1e-10);
    }

    #[test]
    fn dual_decomposition_states_recorded() {
        let cost = random_cost_table(3, 2);
        let p = Problem::ConstraintCoupled(build_task_assignment(&cost, None).unwrap());
        let mut cfg = RunConfig::new(
            AlgorithmConfig::DualDecomposition { gamma: StepSchedule::Harmonic { scale: 1.0 } },
            TopologySchedule::Static { topology: Topology::complete(3).unwrap() },
            20,
        );
        cfg.record_states = true;
        let out = run(&p, &cfg).unwrap();
        assert!(matches!(out.trace[5].states, Some(RobotStates::Dual(ref v)) if v.len() == 3));
    }

    #[test]
    fn seeded_random_schedule_is_deterministic() {
        let schedule = TopologySchedule::SeededRandom { n: 5, p: 0.4, seed: 3 };
        let cfg = RunConfig::new(AlgorithmConfig::ProjectedTracking { gamma: 0.01, delta: 0.5 }, schedule, 50);
        let a = run(&resource(5), &cfg).unwrap();
        let b = run(&resource(5), &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig::new(AlgorithmConfig::DualConsensusAdmm(AdmmParams::new(0.1, 0.1)), er(3), 10);
        let s = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }
}
