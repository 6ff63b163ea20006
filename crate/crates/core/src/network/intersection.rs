//! Intersection derivation: legs, compass sides, directions, conflicts.
//!
//! Road documents carry no coordinates, so intersection geometry is
//! reconstructed from the turn movements themselves. Segments incident to a
//! node are grouped into *legs* (one per neighbouring node); each connection
//! constrains the relative compass sides of two legs (a through movement
//! exits opposite its entry, a left one quarter turn counter-clockwise, and
//! so on). Solving those constraints yields a consistent side layout or a
//! validation error for movement labels that cannot be realised.
//!
//! Directions follow the usual two-group scheme per approach: left turns in
//! one group, through and right movements in the other, giving at most
//! J = 8 directions at a four-way node and J = 6 at a three-way node.
//!
//! Conflicts are computed geometrically on a unit intersection box:
//! each movement is a straight path between lane-offset entry and exit
//! ports; two directions conflict when any of their paths cross or merge
//! into the same outgoing segment. Directions sharing an approach never
//! conflict (their vehicles queue behind one another instead).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::{Connection, Movement, RoadSegment, SegIdx};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectionKind {
    /// Up to three legs.
    ThreeWay,
    /// Exactly four legs.
    FourWay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TurnGroup {
    Left,
    ThroughRight,
}

/// One movement inside a direction, with its path across the unit box.
#[derive(Debug, Clone)]
pub struct MovementPath {
    pub to: SegIdx,
    pub movement: Movement,
    /// Entry port on the unit intersection box, lane-offset to the right.
    pub entry: [f64; 2],
    /// Exit port on the unit intersection box.
    pub exit: [f64; 2],
}

/// A direction j: all movements of one turn group from one approach.
#[derive(Debug, Clone)]
pub struct Direction {
    pub approach: SegIdx,
    pub group: TurnGroup,
    /// Which side of the box the approach enters from (0..4, axis-consistent
    /// within a node; the absolute rotation is arbitrary).
    pub side: usize,
    pub movements: Vec<MovementPath>,
}

#[derive(Debug, Clone)]
pub struct Intersection {
    pub node: String,
    pub kind: IntersectionKind,
    /// Incoming segments, sorted by id.
    pub incoming: Vec<SegIdx>,
    /// Outgoing segments, sorted by id.
    pub outgoing: Vec<SegIdx>,
    /// The J directions, sorted by (approach, group).
    pub directions: Vec<Direction>,
    /// Symmetric J x J matrix with a false diagonal.
    conflict: Vec<bool>,
    /// True when two or more approaches feed connections through the node;
    /// single-approach nodes are plain pass-throughs.
    pub controlled: bool,
}

impl Intersection {
    pub fn j(&self) -> usize {
        self.directions.len()
    }

    pub fn conflicts(&self, a: usize, b: usize) -> bool {
        self.conflict[a * self.directions.len() + b]
    }

    /// Direction and movement indices for a concrete (approach, out) pair.
    pub fn direction_of(&self, approach: SegIdx, to: SegIdx) -> Option<(usize, usize)> {
        for (d, dir) in self.directions.iter().enumerate() {
            if dir.approach != approach {
                continue;
            }
            if let Some(m) = dir.movements.iter().position(|mp| mp.to == to) {
                return Some((d, m));
            }
        }
        None
    }
}

/// Compass side unit vectors on the box, y pointing "south".
fn side_vec(s: usize) -> [f64; 2] {
    match s {
        0 => [0.0, -1.0], // N
        1 => [1.0, 0.0],  // E
        2 => [0.0, 1.0],  // S
        _ => [-1.0, 0.0], // W
    }
}

/// Versor pointing to the right of heading `h` (right-hand traffic).
fn right_of(h: [f64; 2]) -> [f64; 2] {
    [-h[1], h[0]]
}

const LANE_OFFSET: f64 = 0.5;

/// Where a vehicle approaching from side `s` crosses into the box.
fn entry_port(s: usize) -> [f64; 2] {
    let sv = side_vec(s);
    let heading = [-sv[0], -sv[1]];
    let r = right_of(heading);
    [sv[0] + r[0] * LANE_OFFSET, sv[1] + r[1] * LANE_OFFSET]
}

/// Where a vehicle leaving through side `s` crosses out of the box.
fn exit_port(s: usize) -> [f64; 2] {
    let sv = side_vec(s);
    let r = right_of(sv);
    [sv[0] + r[0] * LANE_OFFSET, sv[1] + r[1] * LANE_OFFSET]
}

/// Side offset implied by a movement: out side = in side + offset (mod 4).
fn movement_offset(m: Movement) -> usize {
    match m {
        Movement::Left => 1,
        Movement::Through => 2,
        Movement::Right => 3,
    }
}

const EPS: f64 = 1e-9;

fn orient(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

fn on_segment(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> bool {
    r[0] <= p[0].max(q[0]) + EPS
        && r[0] >= p[0].min(q[0]) - EPS
        && r[1] <= p[1].max(q[1]) + EPS
        && r[1] >= p[1].min(q[1]) - EPS
}

/// Whether two straight movement paths cross inside the box. Touching
/// counts as crossing; the port layout guarantees legitimate paths never
/// share endpoints.
fn paths_cross(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);

    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    // Collinear or touching cases: conservative — any contact is a conflict.
    (d1.abs() <= EPS && on_segment(b1, b2, a1))
        || (d2.abs() <= EPS && on_segment(b1, b2, a2))
        || (d3.abs() <= EPS && on_segment(a1, a2, b1))
        || (d4.abs() <= EPS && on_segment(a1, a2, b2))
}

#[derive(Default)]
struct Leg {
    incoming: Option<SegIdx>,
    outgoing: Option<SegIdx>,
}

/// Derive all intersections from segments plus connections. Returns them
/// sorted by node id.
pub(crate) fn build_intersections(
    segments: &[RoadSegment],
    connections: &[Connection],
) -> Result<Vec<Intersection>> {
    // Node -> connection list. Only nodes with connections become
    // intersections; bare endpoints (dead ends) carry no logic.
    let mut by_node: BTreeMap<&str, Vec<&Connection>> = BTreeMap::new();
    for c in connections {
        debug_assert_eq!(segments[c.from].to_node, segments[c.to].from_node);
        by_node
            .entry(segments[c.from].to_node.as_str())
            .or_default()
            .push(c);
    }

    let mut result = Vec::new();
    for (node, conns) in by_node {
        result.push(build_one(node, segments, &conns)?);
    }
    Ok(result)
}

fn build_one(
    node: &str,
    segments: &[RoadSegment],
    conns: &[&Connection],
) -> Result<Intersection> {
    let err = |reason: &str| Error::BadNode {
        node: node.into(),
        reason: reason.into(),
    };

    // Group incident segments into legs keyed by neighbour node.
    let mut legs: BTreeMap<&str, Leg> = BTreeMap::new();
    for (i, seg) in segments.iter().enumerate() {
        if seg.to_node == node {
            let leg = legs.entry(seg.from_node.as_str()).or_default();
            if leg.incoming.replace(i).is_some() {
                return Err(err("parallel incoming segments from the same neighbour"));
            }
        }
        if seg.from_node == node {
            let leg = legs.entry(seg.to_node.as_str()).or_default();
            if leg.outgoing.replace(i).is_some() {
                return Err(err("parallel outgoing segments to the same neighbour"));
            }
        }
    }
    if legs.len() > 4 {
        return Err(err("more than four legs meet here"));
    }

    let leg_names: Vec<&str> = legs.keys().copied().collect();
    let leg_of_seg = |seg: SegIdx| -> usize {
        leg_names
            .iter()
            .position(|&nb| {
                let leg = &legs[nb];
                leg.incoming == Some(seg) || leg.outgoing == Some(seg)
            })
            .expect("segment incident to node")
    };

    // Relative-side constraints between legs from the declared movements.
    // side(out leg) = side(in leg) + offset(movement)  (mod 4)
    let mut constraints: Vec<Vec<(usize, usize)>> = vec![Vec::new(); leg_names.len()];
    for c in conns {
        let la = leg_of_seg(c.from);
        let lb = leg_of_seg(c.to);
        if la == lb {
            return Err(Error::BadConnection {
                from: segments[c.from].id.clone(),
                to: segments[c.to].id.clone(),
                reason: "u-turn movements are not permitted".into(),
            });
        }
        let off = movement_offset(c.movement);
        constraints[la].push((lb, off));
        constraints[lb].push((la, (4 - off) % 4));
    }

    // Solve sides component by component; each component is fixed up to a
    // rotation, chosen as the smallest that avoids already-used sides.
    let mut side: Vec<Option<usize>> = vec![None; leg_names.len()];
    let mut used = [false; 4];
    for root in 0..leg_names.len() {
        if side[root].is_some() {
            continue;
        }
        let mut rel: Vec<Option<usize>> = vec![None; leg_names.len()];
        rel[root] = Some(0);
        let mut stack = vec![root];
        let mut members = vec![root];
        while let Some(u) = stack.pop() {
            let ru = rel[u].unwrap();
            for &(v, off) in &constraints[u] {
                let rv = (ru + off) % 4;
                match rel[v] {
                    None => {
                        rel[v] = Some(rv);
                        members.push(v);
                        stack.push(v);
                    }
                    Some(prev) if prev != rv => {
                        return Err(err("movement labels are geometrically inconsistent"));
                    }
                    _ => {}
                }
            }
        }
        members.sort_unstable();
        let rotation = (0..4)
            .find(|rot| {
                members
                    .iter()
                    .all(|&m| !used[(rel[m].unwrap() + rot) % 4])
            })
            .ok_or_else(|| err("legs cannot be placed on distinct sides"))?;
        for &m in &members {
            let s = (rel[m].unwrap() + rotation) % 4;
            used[s] = true;
            side[m] = Some(s);
        }
    }

    // Directions: per approach leg, the non-empty turn groups, in
    // (approach segment, group) order.
    let mut incoming: Vec<SegIdx> = legs.values().filter_map(|l| l.incoming).collect();
    let mut outgoing: Vec<SegIdx> = legs.values().filter_map(|l| l.outgoing).collect();
    incoming.sort_unstable();
    outgoing.sort_unstable();

    let mut directions: Vec<Direction> = Vec::new();
    for &approach in &incoming {
        let in_side = side[leg_of_seg(approach)].unwrap();
        for group in [TurnGroup::Left, TurnGroup::ThroughRight] {
            let mut movements: Vec<MovementPath> = conns
                .iter()
                .filter(|c| c.from == approach)
                .filter(|c| match group {
                    TurnGroup::Left => c.movement == Movement::Left,
                    TurnGroup::ThroughRight => c.movement != Movement::Left,
                })
                .map(|c| {
                    let out_side = side[leg_of_seg(c.to)].unwrap();
                    MovementPath {
                        to: c.to,
                        movement: c.movement,
                        entry: entry_port(in_side),
                        exit: exit_port(out_side),
                    }
                })
                .collect();
            if movements.is_empty() {
                continue;
            }
            movements.sort_unstable_by_key(|mp| mp.to);
            directions.push(Direction {
                approach,
                group,
                side: in_side,
                movements,
            });
        }
    }

    let j = directions.len();
    if j > 8 {
        return Err(err("more than eight directions"));
    }

    let mut conflict = vec![false; j * j];
    for a in 0..j {
        for b in (a + 1)..j {
            if directions[a].approach == directions[b].approach {
                continue;
            }
            let hit = directions[a].movements.iter().any(|ma| {
                directions[b].movements.iter().any(|mb| {
                    ma.to == mb.to || paths_cross(ma.entry, ma.exit, mb.entry, mb.exit)
                })
            });
            if hit {
                conflict[a * j + b] = true;
                conflict[b * j + a] = true;
            }
        }
    }

    let kind = if legs.len() == 4 {
        IntersectionKind::FourWay
    } else {
        IntersectionKind::ThreeWay
    };
    if kind == IntersectionKind::ThreeWay {
        debug_assert!(j <= 6);
    }

    let approaches_with_moves = directions
        .iter()
        .map(|d| d.approach)
        .collect::<std::collections::BTreeSet<_>>()
        .len();

    Ok(Intersection {
        node: node.into(),
        kind,
        incoming,
        outgoing,
        directions,
        conflict,
        controlled: approaches_with_moves >= 2,
    })
}
