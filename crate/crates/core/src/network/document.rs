//! Versioned network document: parse, validate, emit.
//!
//! Networks are stored as TOML with a `format` version and two sections:
//!
//! ```toml
//! format = 1
//!
//! [[segments]]
//! id = "a"          # unique
//! from = "n1"       # node ids
//! to = "n2"
//! length_m = 100.0  # > 0
//! speed_mps = 13.9  # > 0
//! lanes = 1         # optional, default 1
//! spawn = false     # optional: vehicles may enter here
//! exit = false      # optional: vehicles may leave here
//!
//! [[connections]]
//! from = "a"        # segment ids
//! to = "b"
//! movement = "through"   # left | right | through
//! ```
//!
//! Validation rejects dangling segment references, u-turn connections,
//! non-positive lengths or speed limits, segments unreachable from every
//! spawn segment, and movement labels that cannot be laid out consistently
//! around a node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Connection, Movement, NetworkGraph, RoadSegment};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub format: u32,
    pub segments: Vec<SegmentDoc>,
    #[serde(default)]
    pub connections: Vec<ConnectionDoc>,
}

impl NetworkDoc {
    /// Validate the document and build the runtime graph.
    pub fn build(&self) -> Result<NetworkGraph> {
        build_graph(self)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub speed_mps: f64,
    #[serde(default = "default_lanes")]
    pub lanes: u32,
    #[serde(default)]
    pub spawn: bool,
    #[serde(default)]
    pub exit: bool,
}

fn default_lanes() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionDoc {
    pub from: String,
    pub to: String,
    pub movement: Movement,
}

/// Parse and validate a network document.
pub fn load_network(text: &str) -> Result<NetworkGraph> {
    let doc: NetworkDoc = toml::from_str(text)?;
    build_graph(&doc)
}

pub fn load_network_file(path: &std::path::Path) -> Result<NetworkGraph> {
    load_network(&std::fs::read_to_string(path)?)
}

/// Canonical TOML rendering (segments and connections sorted).
pub fn network_to_toml(doc: &NetworkDoc) -> Result<String> {
    let mut doc = doc.clone();
    doc.segments.sort_by(|a, b| a.id.cmp(&b.id));
    doc.connections
        .sort_by(|a, b| (a.from.as_str(), a.to.as_str()).cmp(&(b.from.as_str(), b.to.as_str())));
    Ok(toml::to_string(&doc)?)
}

pub(crate) fn build_graph(doc: &NetworkDoc) -> Result<NetworkGraph> {
    if doc.format != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: doc.format,
            expected: FORMAT_VERSION,
        });
    }
    if doc.segments.is_empty() {
        return Err(Error::EmptyInput("network has no segments".into()));
    }

    let mut segments: Vec<RoadSegment> = Vec::with_capacity(doc.segments.len());
    for s in &doc.segments {
        let bad = |reason: &str| Error::BadSegment {
            id: s.id.clone(),
            reason: reason.into(),
        };
        if !(s.length_m > 0.0) {
            return Err(bad("length must be positive"));
        }
        if !(s.speed_mps > 0.0) {
            return Err(bad("speed limit must be positive"));
        }
        if s.lanes == 0 {
            return Err(bad("lane count must be at least 1"));
        }
        if s.from == s.to {
            return Err(bad("segment loops back to its start node"));
        }
        segments.push(RoadSegment {
            id: s.id.clone(),
            from_node: s.from.clone(),
            to_node: s.to.clone(),
            length: s.length_m,
            speed_limit: s.speed_mps,
            lane_count: s.lanes,
            spawn: s.spawn,
            exit: s.exit,
        });
    }

    segments.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = segments.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::BadSegment {
            id: w[0].id.clone(),
            reason: "duplicate segment id".into(),
        });
    }
    let idx_of = |id: &str| -> Result<usize> {
        segments
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .map_err(|_| Error::UnknownSegment { id: id.into() })
    };

    let mut connections: Vec<Connection> = Vec::with_capacity(doc.connections.len());
    for c in &doc.connections {
        let bad = |reason: &str| Error::BadConnection {
            from: c.from.clone(),
            to: c.to.clone(),
            reason: reason.into(),
        };
        let from = idx_of(&c.from).map_err(|_| bad("references an unknown segment"))?;
        let to = idx_of(&c.to).map_err(|_| bad("references an unknown segment"))?;
        if from == to {
            return Err(bad("connects a segment to itself"));
        }
        if segments[from].to_node != segments[to].from_node {
            return Err(bad("segments do not meet at a shared node"));
        }
        connections.push(Connection {
            from,
            to,
            movement: c.movement,
        });
    }
    connections.sort_by_key(|c| (c.from, c.to));
    if let Some(w) = connections.windows(2).find(|w| {
        w[0].from == w[1].from && w[0].to == w[1].to
    }) {
        return Err(Error::BadConnection {
            from: segments[w[0].from].id.clone(),
            to: segments[w[0].to].id.clone(),
            reason: "duplicate connection".into(),
        });
    }

    NetworkGraph::from_parts(segments, connections)
}
