//! Vehicles: identity, kind, route progress, and kinematic state.

use crate::network::{Route, SegIdx};

pub type VehId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    /// Human-driven: follows, stops at lines, takes first-stopped tickets.
    Human,
    /// Robot: senses its surroundings, negotiates crossings, accepts
    /// rerouting assignments.
    Robot,
}

/// Where a vehicle currently is relative to an intersection's interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingState {
    /// Index into the network's intersection list.
    pub intersection: usize,
    /// Direction index within that intersection.
    pub direction: usize,
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehId,
    pub kind: VehicleKind,
    pub route: Route,
    /// Index of the current segment within the route.
    pub route_pos: usize,
    /// Distance travelled along the current segment, metres.
    pub pos: f64,
    /// Speed, metres per tick.
    pub speed: f64,
    /// Set while the vehicle occupies an intersection's interior box.
    pub crossing: Option<CrossingState>,
    /// Route the vehicle planned for the one rerouting task it bid on this
    /// round, keyed by the shortage segment. Kept on the vehicle between
    /// planning and assignment so full routes never leave it.
    pub planned: Option<(SegIdx, Route)>,
    /// Shortage segment from an accepted assignment the vehicle has not yet
    /// reached. While set, the vehicle is not offered further tasks; cleared
    /// on arrival at that segment.
    pub mission: Option<SegIdx>,
    pub spawned_tick: u64,
    /// Ticks spent (nearly) standing still.
    pub wait_ticks: u64,
    /// True once any rerouting assignment has been accepted.
    pub rerouted: bool,
}

impl Vehicle {
    pub fn segment(&self) -> SegIdx {
        self.route.segments()[self.route_pos]
    }

    /// The segment after the current one on the route, if any.
    pub fn next_segment(&self) -> Option<SegIdx> {
        self.route.segments().get(self.route_pos + 1).copied()
    }

    pub fn is_robot(&self) -> bool {
        self.kind == VehicleKind::Robot
    }

    /// Remaining route length from the current position to the destination.
    pub fn remaining_length(&self, graph: &crate::network::NetworkGraph) -> f64 {
        let mut total = graph.segment(self.segment()).length - self.pos;
        for &s in &self.route.segments()[self.route_pos + 1..] {
            total += graph.segment(s).length;
        }
        total
    }
}
