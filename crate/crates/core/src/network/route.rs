//! Segment-level routes and deterministic shortest-path search.
//!
//! A route is a connected sequence of segments; its length is the sum of
//! every member segment's length, endpoints included. Shortest-path search
//! is Dijkstra over segments with a deterministic tie-break: among paths of
//! equal length (within 1e-9) the lexicographically smallest index sequence
//! wins, so equal-cost grids always yield the same route regardless of
//! iteration order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::network::{NetworkGraph, SegIdx};

const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    segments: Vec<SegIdx>,
    total_length: f64,
}

impl Route {
    /// Build a route from an explicit segment sequence, validating that each
    /// consecutive pair is connected.
    pub fn new(graph: &NetworkGraph, segments: Vec<SegIdx>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyInput("route has no segments".into()));
        }
        for w in segments.windows(2) {
            if !graph.adjacent(w[0], w[1]) {
                return Err(Error::BadConnection {
                    from: graph.segment(w[0]).id.clone(),
                    to: graph.segment(w[1]).id.clone(),
                    reason: "route segments are not connected".into(),
                });
            }
        }
        let total_length = segments.iter().map(|&s| graph.segment(s).length).sum();
        Ok(Route {
            segments,
            total_length,
        })
    }

    pub fn segments(&self) -> &[SegIdx] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn first(&self) -> SegIdx {
        self.segments[0]
    }

    pub fn destination(&self) -> SegIdx {
        *self.segments.last().expect("routes are never empty")
    }

    /// Position of `seg` within the route, if present.
    pub fn position_of(&self, seg: SegIdx) -> Option<usize> {
        self.segments.iter().position(|&s| s == seg)
    }
}

/// Candidate path ordered so the binary heap pops the shortest first, and
/// among equals the lexicographically smallest segment sequence.
struct Cand {
    dist: f64,
    path: Vec<SegIdx>,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we want the smallest on top.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.path.cmp(&self.path))
    }
}

/// Shortest route from `from` to `to`, inclusive of both endpoint segments.
/// `from == to` yields the single-segment route.
pub fn shortest_route(graph: &NetworkGraph, from: SegIdx, to: SegIdx) -> Result<Route> {
    let mut settled = vec![false; graph.len()];
    let mut best: Vec<f64> = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    heap.push(Cand {
        dist: graph.segment(from).length,
        path: vec![from],
    });

    while let Some(Cand { dist, path }) = heap.pop() {
        let last = *path.last().expect("candidate paths are never empty");
        if settled[last] {
            continue;
        }
        settled[last] = true;
        if last == to {
            return Ok(Route {
                segments: path,
                total_length: dist,
            });
        }
        for &(next, _) in graph.successors(last) {
            if settled[next] {
                continue;
            }
            let nd = dist + graph.segment(next).length;
            // Keep strictly better paths and near-ties; the heap's
            // lexicographic ordering picks among the ties.
            if nd < best[next] + TIE_EPS {
                best[next] = best[next].min(nd);
                let mut np = path.clone();
                np.push(next);
                heap.push(Cand { dist: nd, path: np });
            }
        }
    }
    Err(Error::NoRoute {
        from: graph.segment(from).id.clone(),
        to: graph.segment(to).id.clone(),
    })
}

/// Shortest route from `from` to `to` constrained to pass through `via`.
/// The `via` segment is counted once.
pub fn shortest_route_via(
    graph: &NetworkGraph,
    from: SegIdx,
    via: SegIdx,
    to: SegIdx,
) -> Result<Route> {
    let head = shortest_route(graph, from, via)?;
    let tail = shortest_route(graph, via, to)?;
    let mut segments = head.segments;
    segments.extend_from_slice(&tail.segments[1..]);
    Ok(Route {
        segments,
        total_length: head.total_length + tail.total_length - graph.segment(via).length,
    })
}
