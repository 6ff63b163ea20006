//! Shortest-route search checked against exhaustive simple-path enumeration.
//!
//! The oracle walks every simple path (no repeated segment) between two
//! segments, folding lengths in path order exactly as the search does, and
//! keeps the minimum by (total length, lexicographic index sequence). The
//! production Dijkstra must agree on both the winning path and its length.

use mixtraffic::network::{generate_grid, load_network, network_to_toml, shortest_route, NetworkGraph, SegIdx};

/// All-pairs exhaustive reference search.
fn brute_force(g: &NetworkGraph, from: SegIdx, to: SegIdx) -> Option<(Vec<SegIdx>, f64)> {
    fn dfs(
        g: &NetworkGraph,
        at: SegIdx,
        to: SegIdx,
        dist: f64,
        path: &mut Vec<SegIdx>,
        on_path: &mut Vec<bool>,
        best: &mut Option<(Vec<SegIdx>, f64)>,
    ) {
        if let Some((bp, bd)) = best {
            match dist.total_cmp(bd) {
                // Already longer than the incumbent: no extension can win.
                std::cmp::Ordering::Greater => return,
                std::cmp::Ordering::Equal => {
                    if at == to && path.as_slice() < bp.as_slice() {
                        *best = Some((path.clone(), dist));
                    }
                    // Equal length midway can only grow: prune either way.
                    return;
                }
                std::cmp::Ordering::Less => {
                    if at == to {
                        *best = Some((path.clone(), dist));
                        return;
                    }
                }
            }
        } else if at == to {
            *best = Some((path.clone(), dist));
            return;
        }
        for &(next, _) in g.successors(at) {
            if on_path[next] {
                continue;
            }
            on_path[next] = true;
            path.push(next);
            dfs(g, next, to, dist + g.segment(next).length, path, on_path, best);
            path.pop();
            on_path[next] = false;
        }
    }

    let mut best = None;
    let mut on_path = vec![false; g.len()];
    on_path[from] = true;
    dfs(
        g,
        from,
        to,
        g.segment(from).length,
        &mut vec![from],
        &mut on_path,
        &mut best,
    );
    best
}

fn check_all_pairs(g: &NetworkGraph) {
    for from in 0..g.len() {
        for to in 0..g.len() {
            let expected = brute_force(g, from, to);
            let actual = shortest_route(g, from, to);
            match (expected, actual) {
                (None, Err(_)) => {}
                (Some((path, dist)), Ok(route)) => {
                    assert_eq!(
                        route.segments(),
                        path.as_slice(),
                        "path mismatch {} -> {}",
                        g.segment(from).id,
                        g.segment(to).id
                    );
                    assert!(
                        (route.total_length() - dist).abs() < 1e-9,
                        "length mismatch {} -> {}: {} vs {}",
                        g.segment(from).id,
                        g.segment(to).id,
                        route.total_length(),
                        dist
                    );
                }
                (exp, act) => panic!(
                    "feasibility mismatch {} -> {}: oracle {:?}, search {:?}",
                    g.segment(from).id,
                    g.segment(to).id,
                    exp.map(|e| e.1),
                    act.map(|r| r.total_length())
                ),
            }
        }
    }
}

#[test]
fn all_pairs_match_on_small_hand_networks() {
    // Unequal branch lengths, dead ends, an unreachable direction.
    let diamond = load_network(
        r#"
format = 1

[[segments]]
id = "a"
from = "n1"
to = "n2"
length_m = 100.0
speed_mps = 10.0
spawn = true

[[segments]]
id = "b"
from = "n2"
to = "n3"
length_m = 80.5
speed_mps = 10.0

[[segments]]
id = "c"
from = "n2"
to = "n4"
length_m = 120.25
speed_mps = 10.0

[[segments]]
id = "db"
from = "n3"
to = "n5"
length_m = 50.0
speed_mps = 10.0
exit = true

[[segments]]
id = "dc"
from = "n4"
to = "n5"
length_m = 10.0
speed_mps = 10.0
exit = true

[[connections]]
from = "a"
to = "b"
movement = "left"

[[connections]]
from = "a"
to = "c"
movement = "right"

[[connections]]
from = "b"
to = "db"
movement = "right"

[[connections]]
from = "c"
to = "dc"
movement = "left"
"#,
    )
    .unwrap();
    check_all_pairs(&diamond);
}

#[test]
fn all_pairs_match_on_generated_grids() {
    for (rows, cols) in [(2u32, 2u32), (2, 3)] {
        let doc = generate_grid(rows, cols, 100.0, 13.9).unwrap();
        let g = load_network(&network_to_toml(&doc).unwrap()).unwrap();
        check_all_pairs(&g);
    }
}

#[test]
fn spot_pairs_match_on_a_three_by_three_grid() {
    let doc = generate_grid(3, 3, 75.0, 13.9).unwrap();
    let g = load_network(&network_to_toml(&doc).unwrap()).unwrap();
    // Corner feeder to the two drain stubs and a handful of interior hops.
    let pairs = [
        ("b-1c0_r0c0", "r0c2_b-1c2"),
        ("b-1c0_r0c0", "r2c0_b3c0"),
        ("r0c0_r0c1", "r2c2_r2c1"),
        ("r1c1_r1c2", "r1c1_r1c0"),
        ("r2c1_r1c1", "r0c1_r1c1"),
    ];
    for (a, b) in pairs {
        let (from, to) = (g.idx(a).unwrap(), g.idx(b).unwrap());
        let (path, dist) = brute_force(&g, from, to).expect("reachable");
        let route = shortest_route(&g, from, to).unwrap();
        assert_eq!(route.segments(), path.as_slice(), "{a} -> {b}");
        assert!((route.total_length() - dist).abs() < 1e-9, "{a} -> {b}");
    }
}
