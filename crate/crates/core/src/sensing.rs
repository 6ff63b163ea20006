//! Crowdsensed traffic estimation.
//!
//! Robot vehicles observe their immediate surroundings and report only
//! aggregate counts: how many vehicles they saw nearby and how many of
//! those were robots. No identity, position, type, or trajectory of any
//! observed vehicle ever leaves the reporter — the message schema is the
//! privacy boundary, and a test pins its exact field set.
//!
//! The coordinator combines the per-reporter rates into per-segment
//! estimates: with `k` reporters on a segment whose local rates average
//! `p`, the segment is estimated to carry `k / p` vehicles at robot share
//! `p`. Segments nobody reported carry their last estimate forward as
//! stale, and decay to a static prior once too old.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::exec::{self, ExecMode};
use crate::network::{NetworkGraph, SegIdx};
use crate::sim::vehicle::{VehId, VehicleKind};
use crate::sim::{Sim, SpawnSpec};

/// How far a robot vehicle sees along its own segment, in metres.
pub const SENSE_RADIUS: f64 = 30.0;

/// Carried-forward estimates older than this many ticks fall back to the
/// prior.
pub const STALENESS_LIMIT: u64 = 50;

/// One robot's report: aggregate counts of what it saw around itself.
/// This is the only sensing message that crosses to the coordinator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalObservation {
    pub reporter_rv_id: VehId,
    pub segment_id: SegIdx,
    /// Vehicles within the radius, the reporter included — never zero.
    pub observed_total: u32,
    /// Robots within the radius, the reporter included — never zero.
    pub observed_rv: u32,
    /// Local robot share, `observed_rv / observed_total`.
    pub p_v: f64,
    pub tick: u64,
}

/// Coordinator-side estimate for one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentEstimate {
    pub segment_id: SegIdx,
    /// Estimated robot share of the segment, in (0, 1] when fresh.
    pub p_e: f64,
    /// Estimated vehicle count; at least `rv_count` when fresh.
    pub n_e: f64,
    /// Reporters behind this estimate (zero for prior fallbacks).
    pub rv_count: u32,
    /// Tick the estimate was computed or fell back to the prior.
    pub tick: u64,
    /// True when carried forward or prior-backed rather than reported.
    pub stale: bool,
}

/// A vehicle as the sensing pass sees it: identity, kind, position.
pub type SegmentView = (VehId, VehicleKind, f64);

/// One reporter's local count over its segment's vehicles. Pure; the
/// reporter is `view[reporter]` and counts itself on both sides.
pub fn sense_local(
    view: &[SegmentView],
    reporter: usize,
    segment: SegIdx,
    tick: u64,
    radius: f64,
) -> LocalObservation {
    let (id, kind, pos) = view[reporter];
    debug_assert_eq!(kind, VehicleKind::Robot, "only robots report");
    let mut observed_total = 0u32;
    let mut observed_rv = 0u32;
    for &(_, k, p) in view {
        if (p - pos).abs() <= radius {
            observed_total += 1;
            if k == VehicleKind::Robot {
                observed_rv += 1;
            }
        }
    }
    LocalObservation {
        reporter_rv_id: id,
        segment_id: segment,
        observed_total,
        observed_rv,
        p_v: observed_rv as f64 / observed_total as f64,
        tick,
    }
}

/// Every active robot's observation, in vehicle-id order.
pub fn sense_all(sim: &Sim, radius: f64, mode: ExecMode) -> Vec<LocalObservation> {
    let graph = sim.graph();
    let views: Vec<Vec<SegmentView>> = (0..graph.len())
        .map(|seg| {
            sim.vehicles_on(seg)
                .iter()
                .map(|&id| {
                    let v = sim.vehicle(id).expect("listed vehicle");
                    (id, v.kind, v.pos)
                })
                .collect()
        })
        .collect();
    // (segment, index within the segment view) per robot, in id order.
    let jobs: Vec<(SegIdx, usize)> = sim
        .vehicles()
        .filter(|v| v.is_robot())
        .map(|v| {
            let seg = v.segment();
            let at = views[seg]
                .iter()
                .position(|&(id, _, _)| id == v.id)
                .expect("robot is on its own segment");
            (seg, at)
        })
        .collect();
    let tick = sim.tick();
    exec::map_slice(mode, &jobs, |&(seg, at)| {
        sense_local(&views[seg], at, seg, tick, radius)
    })
}

/// Combine one segment's reports into a segment estimate. Reports must
/// share segment and tick; `None` when there are no reporters.
pub fn aggregate(observations: &[LocalObservation]) -> Option<SegmentEstimate> {
    let first = observations.first()?;
    debug_assert!(observations
        .iter()
        .all(|o| o.segment_id == first.segment_id && o.tick == first.tick));
    // Sort the rates before summing so the estimate is identical for any
    // arrival order of the reports.
    let mut rates: Vec<f64> = observations.iter().map(|o| o.p_v).collect();
    rates.sort_by(f64::total_cmp);
    let p_e = rates.iter().sum::<f64>() / rates.len() as f64;
    let rv_count = observations.len() as u32;
    Some(SegmentEstimate {
        segment_id: first.segment_id,
        p_e,
        n_e: rv_count as f64 / p_e,
        rv_count,
        tick: first.tick,
        stale: false,
    })
}

/// Static per-segment fallback rates for segments without recent reports.
#[derive(Debug, Clone)]
pub struct SensePrior {
    rates: Vec<f64>,
}

impl SensePrior {
    /// The prior for a segment is the robot share of the nearest spawn
    /// point, by driving distance from the spawn segment's end. Segments
    /// no spawn can reach get 0 — nothing ever drives there.
    pub fn from_spawns(graph: &NetworkGraph, specs: &[SpawnSpec]) -> SensePrior {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        #[derive(PartialEq)]
        struct Entry(f64, usize, SegIdx); // distance, spec index, segment
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.0
                    .total_cmp(&other.0)
                    .then(self.1.cmp(&other.1))
                    .then(self.2.cmp(&other.2))
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }

        let mut rates = vec![0.0; graph.len()];
        let mut settled = vec![false; graph.len()];
        let mut heap = BinaryHeap::new();
        for (i, s) in specs.iter().enumerate() {
            heap.push(Reverse(Entry(0.0, i, s.segment)));
        }
        while let Some(Reverse(Entry(dist, spec, seg))) = heap.pop() {
            if settled[seg] {
                continue;
            }
            settled[seg] = true;
            rates[seg] = specs[spec].rv_probability;
            for &(next, _) in graph.successors(seg) {
                if !settled[next] {
                    heap.push(Reverse(Entry(
                        dist + graph.segment(next).length,
                        spec,
                        next,
                    )));
                }
            }
        }
        SensePrior { rates }
    }

    pub fn rate(&self, seg: SegIdx) -> f64 {
        self.rates[seg]
    }
}

/// Current best estimate for every segment.
#[derive(Debug, Clone)]
pub struct EstimateTable {
    estimates: Vec<SegmentEstimate>,
}

impl EstimateTable {
    /// Before any report exists, every segment sits at its prior.
    pub fn prior_only(graph: &NetworkGraph, prior: &SensePrior, tick: u64) -> EstimateTable {
        EstimateTable {
            estimates: (0..graph.len())
                .map(|seg| prior_estimate(seg, prior, tick))
                .collect(),
        }
    }

    pub fn get(&self, seg: SegIdx) -> &SegmentEstimate {
        &self.estimates[seg]
    }

    pub fn iter(&self) -> impl Iterator<Item = &SegmentEstimate> {
        self.estimates.iter()
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
}

fn prior_estimate(seg: SegIdx, prior: &SensePrior, tick: u64) -> SegmentEstimate {
    SegmentEstimate {
        segment_id: seg,
        p_e: prior.rate(seg),
        n_e: 0.0,
        rv_count: 0,
        tick,
        stale: true,
    }
}

/// Merge fresh estimates over the previous table: reported segments take
/// the fresh value, unreported ones carry forward as stale until
/// `staleness_limit` ticks old, then fall back to the prior.
pub fn snapshot(
    previous: &EstimateTable,
    fresh: &BTreeMap<SegIdx, SegmentEstimate>,
    prior: &SensePrior,
    tick: u64,
    staleness_limit: u64,
) -> EstimateTable {
    let estimates = previous
        .estimates
        .iter()
        .enumerate()
        .map(|(seg, prev)| match fresh.get(&seg) {
            Some(e) => *e,
            None if tick.saturating_sub(prev.tick) > staleness_limit => {
                prior_estimate(seg, prior, tick)
            }
            None => SegmentEstimate {
                stale: true,
                ..*prev
            },
        })
        .collect();
    EstimateTable { estimates }
}

/// One full sensing round: robots report, reports aggregate per segment,
/// and the table rolls forward.
pub fn sensing_round(
    sim: &Sim,
    previous: &EstimateTable,
    prior: &SensePrior,
    radius: f64,
    staleness_limit: u64,
    mode: ExecMode,
) -> EstimateTable {
    let observations = sense_all(sim, radius, mode);
    let mut by_segment: BTreeMap<SegIdx, Vec<LocalObservation>> = BTreeMap::new();
    for o in observations {
        by_segment.entry(o.segment_id).or_default().push(o);
    }
    let fresh: BTreeMap<SegIdx, SegmentEstimate> = by_segment
        .iter()
        .filter_map(|(&seg, obs)| aggregate(obs).map(|e| (seg, e)))
        .collect();
    snapshot(previous, &fresh, prior, sim.tick(), staleness_limit)
}
