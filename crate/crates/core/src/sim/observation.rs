//! What a robot vehicle sees when negotiating a crossing, the reward that
//! scores a crossing decision, and the decision policies themselves.

use serde::{Deserialize, Serialize};

/// Saturation constant for wait normalisation: a direction that has waited
/// `TAU_NORM` ticks scores 0.5, and the score approaches 1 asymptotically.
pub const TAU_NORM: f64 = 30.0;

/// Occupancy maps are 4x4 boolean grids per direction.
pub const OCC_GRID: usize = 4;
/// Length of one occupancy cell, metres; the map covers the final
/// `OCC_GRID * OCC_GRID * OCC_CELL` metres before the stop line, read
/// row-major from the line backwards.
pub const OCC_CELL: f64 = 2.5;

/// Wait normalised into [0, 1): `w / (w + TAU_NORM)`.
pub fn normalize_wait(wait_ticks: f64) -> f64 {
    wait_ticks / (wait_ticks + TAU_NORM)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    Stop,
    Go,
}

/// Reward for a crossing decision: the ego direction's normalised wait on
/// the next tick, credited for going and debited for stopping, plus a flat
/// penalty when the decision produced a conflicting grant.
pub const LAMBDA_WAIT: f64 = 1.0;
pub const CONFLICT_PENALTY: f64 = 5.0;

pub fn decision_reward(action: ControlAction, next_norm_wait: f64, conflict: bool) -> f64 {
    let wait_term = match action {
        ControlAction::Go => next_norm_wait,
        ControlAction::Stop => -next_norm_wait,
    };
    LAMBDA_WAIT * wait_term + if conflict { -CONFLICT_PENALTY } else { 0.0 }
}

/// Everything a robot at the head of a queue knows when deciding whether to
/// enter the intersection. Indices run over the intersection's directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlObservation {
    /// Direction the ego vehicle wants to take.
    pub ego_direction: usize,
    /// Metres from the ego's nose to the stop line.
    pub ego_distance: f64,
    /// Vehicles queued per direction (approaching, not yet past the line).
    pub queue_lengths: Vec<u32>,
    /// Mean normalised wait per direction; 0 for empty directions.
    pub avg_waits: Vec<f64>,
    /// Per-direction occupancy of the approach zone, row 0 nearest the line.
    pub occupancy: Vec<[[bool; OCC_GRID]; OCC_GRID]>,
}

/// A crossing decision rule. Policies are pure functions of the observation
/// so they can be swapped (or trained) without touching the simulator.
pub trait ControlPolicy {
    fn decide(&self, obs: &ControlObservation) -> ControlAction;
}

/// Longest-wait-first: go exactly when the ego direction is the strict
/// leader by (average wait, queue length), ties broken toward the lowest
/// direction index. At most one direction can believe it is the leader, so
/// grants from this policy never collide with one another.
#[derive(Debug, Clone, Copy, Default)]
pub struct LongestWaitPolicy;

impl ControlPolicy for LongestWaitPolicy {
    fn decide(&self, obs: &ControlObservation) -> ControlAction {
        let mut leader: Option<usize> = None;
        for j in 0..obs.queue_lengths.len() {
            if obs.queue_lengths[j] == 0 {
                continue;
            }
            let better = match leader {
                None => true,
                Some(l) => {
                    (obs.avg_waits[j], obs.queue_lengths[j])
                        .partial_cmp(&(obs.avg_waits[l], obs.queue_lengths[l]))
                        == Some(std::cmp::Ordering::Greater)
                }
            };
            if better {
                leader = Some(j);
            }
        }
        if leader == Some(obs.ego_direction) {
            ControlAction::Go
        } else {
            ControlAction::Stop
        }
    }
}

/// Never yield. Useful only for demonstrating that the simulator detects
/// conflicting grants.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysGoPolicy;

impl ControlPolicy for AlwaysGoPolicy {
    fn decide(&self, _obs: &ControlObservation) -> ControlAction {
        ControlAction::Go
    }
}
