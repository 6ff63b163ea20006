//! Road network model: directed segments, turn connections, intersections.
//!
//! A network is a directed graph whose vertices are *road segments* (one
//! direction of one road) and whose edges are *connections* (permitted turn
//! movements between segments that meet at a node). Intersections are
//! derived per node, including the per-direction conflict matrix used by
//! intersection control.
//!
//! `NetworkGraph` is immutable once built; the simulator and planners only
//! read from it.

mod document;
mod grid;
mod intersection;
mod route;

pub use document::{load_network, load_network_file, network_to_toml, NetworkDoc};
pub use grid::generate_grid;
pub use intersection::{Direction, Intersection, IntersectionKind, MovementPath, TurnGroup};
pub use route::{shortest_route, shortest_route_via, Route};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::fingerprint;

/// Index of a segment inside a [`NetworkGraph`]. Segments are stored sorted
/// by id, so index order and id order agree.
pub type SegIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Movement {
    Left,
    Right,
    Through,
}

impl std::fmt::Display for Movement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Movement::Left => write!(f, "left"),
            Movement::Right => write!(f, "right"),
            Movement::Through => write!(f, "through"),
        }
    }
}

/// One directed stretch of road between two nodes.
#[derive(Debug, Clone)]
pub struct RoadSegment {
    pub id: String,
    pub from_node: String,
    pub to_node: String,
    /// Length in metres. Always > 0.
    pub length: f64,
    /// Speed limit in m/s. Always > 0.
    pub speed_limit: f64,
    pub lane_count: u32,
    /// Vehicles may enter the network here.
    pub spawn: bool,
    /// Vehicles may leave the network at the end of this segment.
    pub exit: bool,
}

/// A permitted turn from one segment onto another across a node.
#[derive(Debug, Clone, Copy)]
pub struct Connection {
    pub from: SegIdx,
    pub to: SegIdx,
    pub movement: Movement,
}

/// Immutable road network.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    segments: Vec<RoadSegment>,
    index: BTreeMap<String, SegIdx>,
    connections: Vec<Connection>,
    /// Per segment: (successor segment, movement), sorted by successor.
    succ: Vec<Vec<(SegIdx, Movement)>>,
    /// Per segment: predecessor segments, sorted.
    pred: Vec<Vec<SegIdx>>,
    /// Row-major |E| x |E| adjacency: `adj[from * n + to]`.
    adjacency: Vec<bool>,
    intersections: Vec<Intersection>,
    /// Intersection index at the end (to_node) of each segment, if any.
    inter_at_end: Vec<Option<usize>>,
    hash: String,
}

impl NetworkGraph {
    /// Assemble a graph from validated parts. `segments` must already be
    /// sorted by id. Callers go through [`load_network`], which performs the
    /// full document validation.
    pub(crate) fn from_parts(
        segments: Vec<RoadSegment>,
        connections: Vec<Connection>,
    ) -> Result<Self> {
        let n = segments.len();
        let index: BTreeMap<String, SegIdx> = segments
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();

        let mut succ: Vec<Vec<(SegIdx, Movement)>> = vec![Vec::new(); n];
        let mut pred: Vec<Vec<SegIdx>> = vec![Vec::new(); n];
        let mut adjacency = vec![false; n * n];
        for c in &connections {
            succ[c.from].push((c.to, c.movement));
            pred[c.to].push(c.from);
            adjacency[c.from * n + c.to] = true;
        }
        for s in &mut succ {
            s.sort_unstable_by_key(|&(to, _)| to);
        }
        for p in &mut pred {
            p.sort_unstable();
        }

        // Empty predecessor lists are only legitimate on spawn segments:
        // anything else could never carry traffic.
        for (i, seg) in segments.iter().enumerate() {
            if pred[i].is_empty() && !seg.spawn {
                return Err(Error::BadSegment {
                    id: seg.id.clone(),
                    reason: "has no predecessors and is not a spawn segment".into(),
                });
            }
        }

        let intersections = intersection::build_intersections(&segments, &connections)?;
        let mut inter_at_end = vec![None; n];
        for (k, inter) in intersections.iter().enumerate() {
            for &seg in &inter.incoming {
                inter_at_end[seg] = Some(k);
            }
        }

        // Every segment must be reachable from some spawn segment.
        let mut reach = vec![false; n];
        let mut queue: Vec<SegIdx> = (0..n).filter(|&i| segments[i].spawn).collect();
        for &s in &queue {
            reach[s] = true;
        }
        while let Some(u) = queue.pop() {
            for &(v, _) in &succ[u] {
                if !reach[v] {
                    reach[v] = true;
                    queue.push(v);
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| !reach[i]) {
            return Err(Error::Unreachable {
                id: segments[i].id.clone(),
            });
        }

        let hash = {
            let mut desc = String::new();
            for s in &segments {
                desc.push_str(&format!(
                    "{}|{}|{}|{:.3}|{:.3}|{}\n",
                    s.id, s.from_node, s.to_node, s.length, s.speed_limit, s.lane_count
                ));
            }
            for c in &connections {
                desc.push_str(&format!(
                    "{}>{}:{}\n",
                    segments[c.from].id, segments[c.to].id, c.movement
                ));
            }
            fingerprint(desc.as_bytes())
        };

        Ok(NetworkGraph {
            segments,
            index,
            connections,
            succ,
            pred,
            adjacency,
            intersections,
            inter_at_end,
            hash,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segment(&self, idx: SegIdx) -> &RoadSegment {
        &self.segments[idx]
    }

    pub fn segments(&self) -> &[RoadSegment] {
        &self.segments
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn idx(&self, id: &str) -> Result<SegIdx> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownSegment { id: id.into() })
    }

    /// Predecessor segments of `seg`, sorted by id. Empty only for spawn
    /// segments.
    pub fn predecessors(&self, seg: SegIdx) -> &[SegIdx] {
        &self.pred[seg]
    }

    /// Successor segments of `seg` with the movement that reaches them.
    pub fn successors(&self, seg: SegIdx) -> &[(SegIdx, Movement)] {
        &self.succ[seg]
    }

    pub fn adjacent(&self, from: SegIdx, to: SegIdx) -> bool {
        self.adjacency[from * self.segments.len() + to]
    }

    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    /// The intersection a vehicle on `seg` is driving towards, if its end
    /// node carries any connection.
    pub fn intersection_at_end(&self, seg: SegIdx) -> Option<&Intersection> {
        self.inter_at_end[seg].map(|k| &self.intersections[k])
    }

    pub fn intersection_idx_at_end(&self, seg: SegIdx) -> Option<usize> {
        self.inter_at_end[seg]
    }

    pub fn spawn_segments(&self) -> impl Iterator<Item = SegIdx> + '_ {
        (0..self.segments.len()).filter(|&i| self.segments[i].spawn)
    }

    pub fn exit_segments(&self) -> impl Iterator<Item = SegIdx> + '_ {
        (0..self.segments.len()).filter(|&i| self.segments[i].exit)
    }

    /// Stable fingerprint of topology and geometry; recorded in fitted
    /// models so a model can refuse to run on a different network.
    pub fn graph_hash(&self) -> &str {
        &self.hash
    }
}
