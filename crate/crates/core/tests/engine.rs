mod common;

use common::metrics_csv;
use proptest::prelude::*;
use swarm_opt::algorithms::{AdmmParams, StepSchedule};
use swarm_opt::graph_kit::{build_erdos_renyi, Topology, TopologySchedule};
use swarm_opt::netsim::{run, AlgorithmConfig, RobotStates, RunConfig};
use swarm_opt::problems::{
    build_pev_charging, build_resource_allocation, random_cost_table, random_milp, build_task_assignment, PevData,
    Problem, ResourceData,
};
use swarm_opt::Vector;

fn fixed(topology: Topology) -> TopologySchedule {
    TopologySchedule::Static { topology }
}

#[test]
fn running_average_matches_weighted_sum_of_minimizers() {
    let p = Problem::ConstraintCoupled(build_pev_charging(&PevData::random(4, 12, 3)).unwrap());
    let gamma = StepSchedule::Harmonic { scale: 2.0 };
    let mut cfg = RunConfig::new(AlgorithmConfig::DualDecomposition { gamma }, fixed(Topology::ring(4).unwrap()), 150);
    cfg.cadence = Some(1);
    cfg.record_states = true;
    let out = run(&p, &cfg).unwrap();
    let mut num: Vec<Option<Vector>> = vec![None; 4];
    let mut den = 0.0;
    for row in out.trace.iter().skip(1) {
        let Some(RobotStates::Dual(states)) = &row.states else { panic!("dual states expected") };
        let g = gamma.at(row.t - 1);
        den += g;
        for (i, s) in states.iter().enumerate() {
            let term = &s.x_hat * g;
            num[i] = Some(num[i].take().map_or(term.clone(), |acc| acc + term));
            let avg = num[i].as_ref().unwrap() / den;
            let scale = avg.amax().max(1.0);
            assert!((&avg - &s.x_running).amax() <= 1e-12 * scale, "robot {i} at t={}", row.t);
            assert!((s.step_weight_sum - den).abs() <= 1e-12 * den);
        }
    }
}

#[test]
fn primal_decomposition_conserves_allocation() {
    for seed in 0..3 {
        let p = Problem::Milp(random_milp(4, 2, 4, 0.5, seed).unwrap());
        let cfg = RunConfig::new(
            AlgorithmConfig::PrimalDecomposition { alpha: StepSchedule::Harmonic { scale: 1.0 }, penalty: None, initial: None },
            fixed(build_erdos_renyi(4, 0.5, seed).unwrap()),
            200,
        );
        let out = run(&p, &cfg).unwrap();
        assert!(out.audit.allocation <= 1e-9, "seed {seed}: {}", out.audit.allocation);
    }
}

#[test]
fn trackers_conserve_means() {
    let p = Problem::Aggregative(build_resource_allocation(&ResourceData::random(6, 1)).unwrap());
    let cfg = RunConfig::new(
        AlgorithmConfig::ProjectedTracking { gamma: 0.01, delta: 0.05 },
        fixed(build_erdos_renyi(6, 0.3, 1).unwrap()),
        1000,
    );
    let out = run(&p, &cfg).unwrap();
    assert!(out.audit.tracker_s <= 1e-10 && out.audit.tracker_y <= 1e-10, "{:?}", out.audit);
}

#[test]
fn repeated_runs_give_identical_metrics() {
    let p = Problem::Aggregative(build_resource_allocation(&ResourceData::random(5, 2)).unwrap());
    for alg in [
        AlgorithmConfig::ProjectedTracking { gamma: 0.01, delta: 0.05 },
        AlgorithmConfig::FrankWolfe { gamma: StepSchedule::InvSqrt { scale: 0.05 } },
        AlgorithmConfig::DualConsensusAdmm(AdmmParams::new(0.1, 0.1)),
    ] {
        let cfg = RunConfig::new(alg, fixed(Topology::complete(5).unwrap()), 300);
        let a = run(&p, &cfg).unwrap();
        let b = run(&p, &cfg).unwrap();
        assert_eq!(metrics_csv(&a.trace, &p, None).1, metrics_csv(&b.trace, &p, None).1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dual_iterates_stay_in_local_sets(seed in 0u64..1000, rounds in 1usize..60) {
        let cc = build_task_assignment(&random_cost_table(3, seed), None).unwrap();
        let p = Problem::ConstraintCoupled(cc.clone());
        let cfg = RunConfig::new(
            AlgorithmConfig::DualDecomposition { gamma: StepSchedule::Harmonic { scale: 1.0 } },
            fixed(Topology::ring(3).unwrap()),
            rounds,
        );
        let out = run(&p, &cfg).unwrap();
        prop_assert_eq!(out.trace.last().unwrap().t, rounds);
        for (r, x) in cc.robots.iter().zip(out.final_x()) {
            prop_assert!(r.set.contains(x, 1e-9));
        }
    }
}
