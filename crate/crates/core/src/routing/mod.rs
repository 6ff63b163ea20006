//! Robot-vehicle rebalancing: find segments short on robots, ask robots on
//! well-supplied neighbouring segments to bid a detour, pick the cheapest
//! bids, and reroute the winners.
//!
//! The privacy boundary mirrors the sensing one: the coordinator sees task
//! ids, vehicle ids, the shortage segment, and detour scores in metres.
//! Planned routes, destinations, and positions stay on the vehicle — an
//! assignment is just "change route", and the vehicle swaps to the route it
//! planned locally.
//!
//! A decision round is atomic between two simulation ticks:
//! detect → issue tasks → plan (per robot, parallelizable) → select →
//! apply, then leftover bids are dropped.

pub mod replay;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::network::{shortest_route_via, NetworkGraph, Route, SegIdx};
use crate::sensing::EstimateTable;
use crate::sim::vehicle::VehId;
use crate::sim::Sim;
pub use replay::ReplayWriter;

/// Shortage alarm threshold slack below the target rate.
pub const LAMBDA: f64 = 0.05;

/// One segment found short on robots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortageReport {
    pub segment: SegIdx,
    pub p_e: f64,
    pub n_e: f64,
    /// Robots wanted: ⌈(target − p_e) · n_e⌉, at least 1.
    pub deficit: u64,
    pub tick: u64,
}

/// Coordinator → robot: "consider detouring through this segment".
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RerouteTask {
    pub task_id: u64,
    pub shortage_segment: SegIdx,
    pub veh_id: VehId,
    pub tick: u64,
}

/// A detour cost in metres, or the explicit refusal sentinel. All but the
/// robot's best bid per round are masked to `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    Finite(f64),
    Infinite,
}

impl Score {
    pub fn is_finite(&self) -> bool {
        matches!(self, Score::Finite(_))
    }

    fn ordering_key(&self) -> (u8, f64) {
        match *self {
            Score::Finite(v) => (0, v),
            Score::Infinite => (1, 0.0),
        }
    }
}

/// Robot → coordinator: its bid for one task. Carries no route,
/// destination, or position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RouteResponse {
    pub task_id: u64,
    pub veh_id: VehId,
    pub score: Score,
}

/// Coordinator → robot: reroute instruction for a winning bid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assignment {
    pub veh_id: VehId,
    /// Always the literal instruction tag.
    pub message: &'static str,
    pub shortage_segment: SegIdx,
}

pub const CHANGE_ROUTE: &str = "change_route";

/// How far a segment's robot share falls below the target; zero at or
/// above it.
pub fn shortage_index(p_e: f64, p_target: f64) -> f64 {
    if p_e > p_target {
        0.0
    } else {
        p_target - p_e
    }
}

/// Per-segment (robot share, vehicle count) input to a decision round —
/// from the live estimate table or from a forecast row.
pub type SegmentRates = Vec<(f64, f64)>;

pub fn rates_from_estimates(table: &EstimateTable) -> SegmentRates {
    table.iter().map(|e| (e.p_e, e.n_e)).collect()
}

/// Segments whose robot share falls more than `lambda` below the target.
/// Empty segments (no vehicles to speak of) are skipped.
pub fn detect_shortage(
    rates: &[(f64, f64)],
    p_target: f64,
    lambda: f64,
    tick: u64,
) -> Vec<ShortageReport> {
    rates
        .iter()
        .enumerate()
        .filter_map(|(segment, &(p_e, n_e))| {
            if n_e < 1e-9 || p_e >= p_target - lambda {
                return None;
            }
            let deficit = ((p_target - p_e) * n_e).ceil() as u64;
            Some(ShortageReport {
                segment,
                p_e,
                n_e,
                deficit: deficit.max(1),
                tick,
            })
        })
        .collect()
}

/// One task per robot on each well-supplied predecessor of each shortage
/// segment. Robots already mid-crossing or already on an unfinished
/// rebalancing mission are left alone. Task ids are sequential in
/// (shortage, predecessor, vehicle id) order and unique per (vehicle,
/// shortage) pair.
pub fn issue_tasks(
    sim: &Sim,
    reports: &[ShortageReport],
    rates: &[(f64, f64)],
    p_target: f64,
) -> Vec<RerouteTask> {
    let graph = sim.graph();
    let mut tasks = Vec::new();
    let mut seen: BTreeSet<(VehId, SegIdx)> = BTreeSet::new();
    let mut next_id = 0;
    for report in reports {
        for &pred in graph.predecessors(report.segment) {
            if rates[pred].0 <= p_target {
                continue;
            }
            let mut robots: Vec<VehId> = sim
                .vehicles_on(pred)
                .iter()
                .copied()
                .filter(|&id| {
                    let v = sim.vehicle(id).expect("listed vehicle");
                    v.is_robot() && v.crossing.is_none() && v.mission.is_none()
                })
                .collect();
            robots.sort_unstable();
            for veh_id in robots {
                if !seen.insert((veh_id, report.segment)) {
                    continue;
                }
                tasks.push(RerouteTask {
                    task_id: next_id,
                    shortage_segment: report.segment,
                    veh_id,
                    tick: report.tick,
                });
                next_id += 1;
            }
        }
    }
    tasks
}

/// Detour cost of `new_route` against the remaining current route:
/// distance to reach the shortage segment plus the added route length.
/// Both routes must start at the vehicle's current segment; `rv_pos` is
/// its position along it.
pub fn score_route(
    graph: &NetworkGraph,
    rv_pos: f64,
    new_route: &Route,
    curr_route: &Route,
    shortage: SegIdx,
) -> Result<f64> {
    let at = new_route.position_of(shortage).ok_or_else(|| {
        Error::Config(format!(
            "planned route misses the shortage segment {}",
            graph.segment(shortage).id
        ))
    })?;
    let to_shortage: f64 = new_route.segments()[..at]
        .iter()
        .map(|&s| graph.segment(s).length)
        .sum();
    let dis = to_shortage - rv_pos;
    let len_new = new_route.total_length() - rv_pos;
    let len_curr = curr_route.total_length() - rv_pos;
    Ok(dis + len_new - len_curr)
}

/// Everything one robot needs to bid on its tasks, snapshotted from the
/// simulation so planning can run in parallel.
#[derive(Debug, Clone)]
pub struct PlanJob {
    pub veh_id: VehId,
    pub pos: f64,
    /// Remaining current route, starting at the current segment.
    pub curr_route: Route,
    pub dest: SegIdx,
    pub tasks: Vec<RerouteTask>,
}

/// One robot's bids: a response per task, with only the cheapest feasible
/// detour kept finite (ties to the smallest task id), plus that winning
/// route for the vehicle to hold on to.
pub fn plan_routes(graph: &NetworkGraph, job: &PlanJob) -> (Vec<RouteResponse>, Option<(SegIdx, Route)>) {
    let current = job.curr_route.first();
    let mut scored: Vec<(usize, f64, Route)> = Vec::new();
    for (i, task) in job.tasks.iter().enumerate() {
        let Ok(route) = shortest_route_via(graph, current, task.shortage_segment, job.dest) else {
            continue;
        };
        let Ok(score) = score_route(graph, job.pos, &route, &job.curr_route, task.shortage_segment)
        else {
            continue;
        };
        scored.push((i, score, route));
    }
    let best = scored
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.1.total_cmp(&b.1).then(job.tasks[a.0].task_id.cmp(&job.tasks[b.0].task_id)))
        .map(|(k, _)| k);
    let responses = job
        .tasks
        .iter()
        .enumerate()
        .map(|(i, task)| RouteResponse {
            task_id: task.task_id,
            veh_id: job.veh_id,
            score: match best {
                Some(k) if scored[k].0 == i => Score::Finite(scored[k].1),
                _ => Score::Infinite,
            },
        })
        .collect();
    let plan = best.map(|k| {
        let (i, _, ref route) = scored[k];
        (job.tasks[i].shortage_segment, route.clone())
    });
    (responses, plan)
}

/// Pick winners for one shortage segment: finite bids, cheapest first
/// (ties to the lower vehicle id), at most `deficit` of them.
pub fn select_routes(
    shortage: SegIdx,
    responses: &[RouteResponse],
    deficit: u64,
) -> Vec<Assignment> {
    let mut finite: Vec<&RouteResponse> = responses.iter().filter(|r| r.score.is_finite()).collect();
    finite.sort_by(|a, b| {
        let (ka, kb) = (a.score.ordering_key(), b.score.ordering_key());
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(a.veh_id.cmp(&b.veh_id))
    });
    finite
        .into_iter()
        .take(deficit as usize)
        .map(|r| Assignment {
            veh_id: r.veh_id,
            message: CHANGE_ROUTE,
            shortage_segment: shortage,
        })
        .collect()
}

/// Everything a decision round produced, for logs, metrics, and tests.
#[derive(Debug, Clone, Default)]
pub struct RoundOutcome {
    pub reports: Vec<ShortageReport>,
    pub tasks: Vec<RerouteTask>,
    pub responses: Vec<RouteResponse>,
    pub assignments: Vec<Assignment>,
    pub applied: u64,
    pub expired: u64,
}

/// Run one full decision round against the simulation. `rates` indexes
/// every segment with the (robot share, vehicle count) the coordinator
/// believes right now — estimates or a forecast row.
pub fn run_round(
    sim: &mut Sim,
    rates: &[(f64, f64)],
    p_target: f64,
    lambda: f64,
    round: u64,
    mut log: Option<&mut ReplayWriter>,
    mode: ExecMode,
) -> Result<RoundOutcome> {
    let tick = sim.tick();
    let graph = sim.graph();
    let reports = detect_shortage(rates, p_target, lambda, tick);
    let tasks = issue_tasks(sim, &reports, rates, p_target);

    // Per-robot planning jobs, in vehicle-id order.
    let mut by_veh: BTreeMap<VehId, Vec<RerouteTask>> = BTreeMap::new();
    for t in &tasks {
        by_veh.entry(t.veh_id).or_default().push(*t);
    }
    let jobs: Vec<PlanJob> = by_veh
        .into_iter()
        .map(|(veh_id, tasks)| {
            let v = sim.vehicle(veh_id).expect("tasked vehicle is active");
            let remaining = v.route.segments()[v.route_pos..].to_vec();
            Ok(PlanJob {
                veh_id,
                pos: v.pos,
                curr_route: Route::new(graph, remaining)?,
                dest: v.route.destination(),
                tasks,
            })
        })
        .collect::<Result<_>>()?;
    let planned = exec::map_slice(mode, &jobs, |job| plan_routes(graph, job));

    let mut responses: Vec<RouteResponse> = Vec::new();
    for (job, (rs, plan)) in jobs.iter().zip(&planned) {
        responses.extend_from_slice(rs);
        if let Some((shortage, route)) = plan {
            sim.set_planned(job.veh_id, *shortage, route.clone());
        }
    }

    // Selection per shortage segment, in report order.
    let shortage_of: BTreeMap<u64, SegIdx> = tasks
        .iter()
        .map(|t| (t.task_id, t.shortage_segment))
        .collect();
    let mut assignments: Vec<Assignment> = Vec::new();
    for report in &reports {
        let for_segment: Vec<RouteResponse> = responses
            .iter()
            .filter(|r| shortage_of.get(&r.task_id) == Some(&report.segment))
            .copied()
            .collect();
        assignments.extend(select_routes(report.segment, &for_segment, report.deficit));
    }

    let mut applied = 0;
    let mut expired = 0;
    for a in &assignments {
        if sim.apply_assignment(a.veh_id, a.shortage_segment) {
            applied += 1;
        } else {
            expired += 1;
        }
    }
    sim.clear_plans();

    if let Some(log) = log.as_deref_mut() {
        for t in &tasks {
            log.record(round, tick, "task", t)?;
        }
        for r in &responses {
            log.record(round, tick, "response", r)?;
        }
        for a in &assignments {
            log.record(round, tick, "assignment", a)?;
        }
    }

    Ok(RoundOutcome {
        reports,
        tasks,
        responses,
        assignments,
        applied,
        expired,
    })
}
