//! Protocol invariants over randomized live decision rounds, plus one
//! end-to-end reroute through a shortage segment.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use proptest::prelude::*;

use mixtraffic::exec::ExecMode;
use mixtraffic::network::{generate_grid, load_network, NetworkGraph, SegIdx};
use mixtraffic::routing::{rates_from_estimates, run_round, Score};
use mixtraffic::sensing::{sensing_round, EstimateTable, SensePrior, SENSE_RADIUS, STALENESS_LIMIT};
use mixtraffic::sim::control::ControlMode;
use mixtraffic::sim::observation::LongestWaitPolicy;
use mixtraffic::sim::vehicle::VehId;
use mixtraffic::sim::{Sim, SimConfig, SpawnSpec};

fn grid() -> &'static NetworkGraph {
    static GRID: OnceLock<NetworkGraph> = OnceLock::new();
    GRID.get_or_init(|| generate_grid(3, 3, 100.0, 10.0).unwrap().build().unwrap())
}

fn spawned_sim(seed: u64, rate: f64, rv_probability: f64) -> Sim<'static> {
    let graph = grid();
    let spawns: Vec<SpawnSpec> = graph
        .spawn_segments()
        .filter(|&s| !graph.successors(s).is_empty())
        .map(|segment| SpawnSpec {
            segment,
            rate,
            rv_probability,
        })
        .collect();
    Sim::new(
        graph,
        SimConfig {
            mode: ControlMode::RvNegotiated,
            seed,
            spawns,
        },
    )
    .unwrap()
}

/// Everything the coordinator decided in one round must be internally
/// consistent, privacy-shaped, and reproducible.
fn check_round(sim_before: &Sim, seed_note: &str, rates: &[(f64, f64)], p_target: f64) {
    let mut sim = sim_before.clone();
    let mut twin = sim_before.clone();
    let outcome = run_round(&mut sim, rates, p_target, 0.05, 0, None, ExecMode::Parallel).unwrap();
    let replay = run_round(&mut twin, rates, p_target, 0.05, 0, None, ExecMode::Sequential).unwrap();

    // Reruns from the same state agree message for message, regardless of
    // execution mode.
    assert_eq!(outcome.reports, replay.reports, "{seed_note}");
    assert_eq!(outcome.tasks, replay.tasks, "{seed_note}");
    assert_eq!(outcome.responses, replay.responses, "{seed_note}");
    assert_eq!(outcome.assignments, replay.assignments, "{seed_note}");

    // Tasks go only to idle robots on well-supplied feeder segments, one
    // per (robot, shortage) pair.
    let mut task_pairs = std::collections::BTreeSet::new();
    for task in &outcome.tasks {
        assert!(
            task_pairs.insert((task.veh_id, task.shortage_segment)),
            "{seed_note}: duplicate task for one robot and shortage"
        );
        let v = sim_before.vehicle(task.veh_id).expect("tasked vehicle");
        assert!(v.is_robot(), "{seed_note}");
        assert!(v.crossing.is_none(), "{seed_note}");
        assert!(v.mission.is_none(), "{seed_note}");
        let feeder = v.segment();
        assert!(
            grid().predecessors(task.shortage_segment).contains(&feeder),
            "{seed_note}: task from a non-feeder segment"
        );
        assert!(rates[feeder].0 > p_target, "{seed_note}");
    }

    // At most one finite bid per robot.
    let mut finite_per_veh: BTreeMap<VehId, u32> = BTreeMap::new();
    for r in &outcome.responses {
        if r.score.is_finite() {
            *finite_per_veh.entry(r.veh_id).or_default() += 1;
        }
    }
    for (veh, n) in &finite_per_veh {
        assert!(*n <= 1, "{seed_note}: robot {veh} made {n} finite bids");
    }

    // At most one assignment per robot, never more per shortage than its
    // deficit, and never to a robot that bid infinite everywhere.
    let mut assigned: BTreeMap<VehId, u32> = BTreeMap::new();
    let mut per_shortage: BTreeMap<SegIdx, u64> = BTreeMap::new();
    for a in &outcome.assignments {
        *assigned.entry(a.veh_id).or_default() += 1;
        *per_shortage.entry(a.shortage_segment).or_default() += 1;
        assert_eq!(finite_per_veh.get(&a.veh_id), Some(&1), "{seed_note}");
    }
    for (veh, n) in &assigned {
        assert!(*n <= 1, "{seed_note}: robot {veh} assigned {n} times");
    }
    for report in &outcome.reports {
        let n = per_shortage.get(&report.segment).copied().unwrap_or(0);
        assert!(
            n <= report.deficit,
            "{seed_note}: {n} assignments exceed deficit {} on segment {}",
            report.deficit,
            report.segment
        );
    }

    // Winners cost no more than any finite bid that was passed over for
    // the same shortage.
    let shortage_of: BTreeMap<u64, SegIdx> = outcome
        .tasks
        .iter()
        .map(|t| (t.task_id, t.shortage_segment))
        .collect();
    for report in &outcome.reports {
        let finite: Vec<(VehId, f64)> = outcome
            .responses
            .iter()
            .filter(|r| shortage_of.get(&r.task_id) == Some(&report.segment))
            .filter_map(|r| match r.score {
                Score::Finite(s) => Some((r.veh_id, s)),
                Score::Infinite => None,
            })
            .collect();
        let winners: Vec<VehId> = outcome
            .assignments
            .iter()
            .filter(|a| a.shortage_segment == report.segment)
            .map(|a| a.veh_id)
            .collect();
        let worst_winner = finite
            .iter()
            .filter(|(v, _)| winners.contains(v))
            .map(|&(_, s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let best_loser = finite
            .iter()
            .filter(|(v, _)| !winners.contains(v))
            .map(|&(_, s)| s)
            .fold(f64::INFINITY, f64::min);
        assert!(
            worst_winner <= best_loser + 1e-9,
            "{seed_note}: assigned a costlier bid over a cheaper one"
        );
    }

    // Applied or expired, every assignment is accounted for.
    assert_eq!(
        outcome.applied + outcome.expired,
        outcome.assignments.len() as u64,
        "{seed_note}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 1000,
        ..ProptestConfig::default()
    })]

    #[test]
    fn randomized_rounds_hold_every_protocol_invariant(
        seed in any::<u64>(),
        warmup in 10u64..60,
        rate in 0.02f64..0.30,
        rv_probability in 0.1f64..0.9,
        p_target in 0.3f64..0.7,
    ) {
        let graph = grid();
        let mut sim = spawned_sim(seed, rate, rv_probability);
        let prior = SensePrior::from_spawns(graph, sim.specs());
        let mut table = EstimateTable::prior_only(graph, &prior, 0);
        for _ in 0..warmup {
            sim.spawn_arrivals();
            sim.step(Some(&LongestWaitPolicy));
            table = sensing_round(
                &sim, &table, &prior, SENSE_RADIUS, STALENESS_LIMIT, ExecMode::Sequential,
            );
        }
        let rates = rates_from_estimates(&table);
        let note = format!("seed={seed} warmup={warmup} rate={rate} rv={rv_probability} target={p_target}");
        check_round(&sim, &note, &rates, p_target);
    }
}

/// Two branches from "a" to "d": direct via "b", or the long way via "c"
/// then "e".
fn forked() -> NetworkGraph {
    load_network(
        r#"
        format = 1
        [[segments]]
        id = "a"
        from = "n0"
        to = "n1"
        length_m = 100.0
        speed_mps = 10.0
        spawn = true
        [[segments]]
        id = "b"
        from = "n1"
        to = "n2"
        length_m = 100.0
        speed_mps = 10.0
        [[segments]]
        id = "c"
        from = "n1"
        to = "n3"
        length_m = 100.0
        speed_mps = 10.0
        [[segments]]
        id = "e"
        from = "n3"
        to = "n2"
        length_m = 100.0
        speed_mps = 10.0
        [[segments]]
        id = "d"
        from = "n2"
        to = "n4"
        length_m = 100.0
        speed_mps = 10.0
        exit = true
        [[connections]]
        from = "a"
        to = "b"
        movement = "through"
        [[connections]]
        from = "a"
        to = "c"
        movement = "right"
        [[connections]]
        from = "b"
        to = "d"
        movement = "through"
        [[connections]]
        from = "c"
        to = "e"
        movement = "through"
        [[connections]]
        from = "e"
        to = "d"
        movement = "left"
        "#,
    )
    .unwrap()
}

#[test]
fn an_accepted_assignment_carries_the_robot_through_the_shortage() {
    let graph = forked();
    let idx = |s| graph.idx(s).unwrap();
    let (a, b, c, e, d) = (idx("a"), idx("b"), idx("c"), idx("e"), idx("d"));
    let mut sim = Sim::new(
        &graph,
        SimConfig {
            mode: ControlMode::RvNegotiated,
            seed: 7,
            spawns: vec![SpawnSpec {
                segment: a,
                rate: 1.0,
                rv_probability: 1.0,
            }],
        },
    )
    .unwrap();
    sim.spawn_arrivals();
    let veh = sim.vehicles().next().unwrap().id;
    assert_eq!(
        sim.vehicle(veh).unwrap().route.segments(),
        &[a, b, d],
        "fresh robots take the short branch"
    );

    // Coordinator believes the long branch is starved and the spawn
    // segment well-supplied.
    let mut rates = vec![(0.0, 0.0); graph.segments().len()];
    rates[a] = (1.0, 1.0);
    rates[c] = (0.0, 4.0);
    let outcome = run_round(&mut sim, &rates, 0.5, 0.05, 0, None, ExecMode::Sequential).unwrap();
    assert_eq!(outcome.reports.len(), 1);
    assert_eq!(outcome.reports[0].deficit, 2);
    assert_eq!(outcome.tasks.len(), 1);
    assert_eq!(outcome.assignments.len(), 1);
    assert_eq!(outcome.applied, 1);
    assert_eq!(outcome.expired, 0);

    let v = sim.vehicle(veh).unwrap();
    assert!(v.rerouted);
    assert_eq!(v.mission, Some(c));
    assert_eq!(v.route.segments(), &[a, c, e, d]);

    // Drive it (no further arrivals) until it leaves; it must pass the
    // shortage segment and drop the mission marker there.
    let mut reached = false;
    for _ in 0..300 {
        sim.step(Some(&LongestWaitPolicy));
        if let Some(v) = sim.vehicle(veh) {
            if v.segment() == c {
                reached = true;
                assert_eq!(v.mission, None, "mission clears on arrival");
            }
        }
    }
    assert!(reached, "robot travelled through the shortage segment");
    assert!(sim.vehicle(veh).is_none(), "robot finished its trip");
    assert_eq!(sim.stats().conflicting_grants, 0);

    // A robot already on a mission is not re-tasked.
    let mut sim2 = Sim::new(
        &graph,
        SimConfig {
            mode: ControlMode::RvNegotiated,
            seed: 7,
            spawns: vec![SpawnSpec {
                segment: a,
                rate: 1.0,
                rv_probability: 1.0,
            }],
        },
    )
    .unwrap();
    sim2.spawn_arrivals();
    run_round(&mut sim2, &rates, 0.5, 0.05, 0, None, ExecMode::Sequential).unwrap();
    let again = run_round(&mut sim2, &rates, 0.5, 0.05, 1, None, ExecMode::Sequential).unwrap();
    assert!(again.tasks.is_empty(), "mission holders are left alone");
}
