//! Rectangular grid network generator.
//!
//! Produces a `rows x cols` lattice of nodes (`r{row}c{col}`) joined by
//! bidirectional segment pairs, plus four one-way stub segments on the
//! corners: feeders into `r0c0` and the far corner, drains out of the other
//! two. The stubs give the grid dedicated entry/exit points whose demand can
//! be steered independently of the border ring.
//!
//! Rows grow southward and columns grow eastward. Segment ids are
//! `"{from_node}_{to_node}"`. Every segment whose start node lies on the
//! border is spawn-enabled, and every segment ending on the border is
//! exit-enabled, so traffic can enter and leave along the whole perimeter.
//! Movement labels are derived from the lattice geometry.

use crate::error::{Error, Result};
use crate::network::document::{ConnectionDoc, NetworkDoc, SegmentDoc, FORMAT_VERSION};
use crate::network::Movement;

/// Generate a grid network document. `rows` and `cols` count nodes and must
/// both be at least 2.
pub fn generate_grid(
    rows: u32,
    cols: u32,
    segment_length: f64,
    speed_limit: f64,
) -> Result<NetworkDoc> {
    if rows < 2 || cols < 2 {
        return Err(Error::Config(format!(
            "grid must be at least 2x2 nodes, got {rows}x{cols}"
        )));
    }
    if !(segment_length > 0.0) {
        return Err(Error::Config("segment length must be positive".into()));
    }
    if !(speed_limit > 0.0) {
        return Err(Error::Config("speed limit must be positive".into()));
    }
    let (rows, cols) = (rows as i64, cols as i64);

    let node = |r: i64, c: i64| -> String {
        if (0..rows).contains(&r) && (0..cols).contains(&c) {
            format!("r{r}c{c}")
        } else {
            // Off-lattice stub endpoint.
            format!("b{r}c{c}")
        }
    };
    let on_border = |r: i64, c: i64| r == 0 || r == rows - 1 || c == 0 || c == cols - 1;

    // Directed edges as node-coordinate pairs. Lattice edges both ways,
    // stubs one way.
    let mut edges: Vec<((i64, i64), (i64, i64))> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if r + 1 < rows {
                edges.push(((r, c), (r + 1, c)));
                edges.push(((r + 1, c), (r, c)));
            }
            if c + 1 < cols {
                edges.push(((r, c), (r, c + 1)));
                edges.push(((r, c + 1), (r, c)));
            }
        }
    }
    // Feeder stubs into two opposite corners, drain stubs out of the others.
    edges.push(((-1, 0), (0, 0)));
    edges.push(((rows, cols - 1), (rows - 1, cols - 1)));
    edges.push(((0, cols - 1), (-1, cols - 1)));
    edges.push(((rows - 1, 0), (rows, 0)));

    let in_lattice = |r: i64, c: i64| (0..rows).contains(&r) && (0..cols).contains(&c);
    let mut segments: Vec<SegmentDoc> = edges
        .iter()
        .map(|&((fr, fc), (tr, tc))| SegmentDoc {
            id: format!("{}_{}", node(fr, fc), node(tr, tc)),
            from: node(fr, fc),
            to: node(tr, tc),
            length_m: segment_length,
            speed_mps: speed_limit,
            lanes: 1,
            spawn: !in_lattice(fr, fc) || on_border(fr, fc),
            exit: !in_lattice(tr, tc) || on_border(tr, tc),
        })
        .collect();

    // Connections: at every lattice node, join each incoming edge to every
    // outgoing edge except the reversal.
    let mut connections: Vec<ConnectionDoc> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let inbound: Vec<(i64, i64)> = edges
                .iter()
                .filter(|&&(_, t)| t == (r, c))
                .map(|&(f, _)| f)
                .collect();
            let outbound: Vec<(i64, i64)> = edges
                .iter()
                .filter(|&&(f, _)| f == (r, c))
                .map(|&(_, t)| t)
                .collect();
            for &(fr, fc) in &inbound {
                for &(tr, tc) in &outbound {
                    if (fr, fc) == (tr, tc) {
                        continue;
                    }
                    // Heading into the node and heading out of it, in
                    // (east, south) coordinates.
                    let hin = ((c - fc), (r - fr));
                    let hout = ((tc - c), (tr - r));
                    let cross = hin.0 * hout.1 - hin.1 * hout.0;
                    let movement = match cross.signum() {
                        1 => Movement::Right,
                        -1 => Movement::Left,
                        _ => Movement::Through,
                    };
                    connections.push(ConnectionDoc {
                        from: format!("{}_{}", node(fr, fc), node(r, c)),
                        to: format!("{}_{}", node(r, c), node(tr, tc)),
                        movement,
                    });
                }
            }
        }
    }

    segments.sort_by(|a, b| a.id.cmp(&b.id));
    connections
        .sort_by(|a, b| (a.from.as_str(), a.to.as_str()).cmp(&(b.from.as_str(), b.to.as_str())));
    Ok(NetworkDoc {
        format: FORMAT_VERSION,
        segments,
        connections,
    })
}
