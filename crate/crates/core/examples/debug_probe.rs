//! Scratch probe: single entry, fixed-time, watch the first intersection.

use mixtraffic::network::generate_grid;
use mixtraffic::sim::control::ControlMode;
use mixtraffic::sim::signal;
use mixtraffic::sim::{Sim, SimConfig, SpawnSpec};

fn main() {
    let doc = generate_grid(4, 4, 100.0, 13.9).unwrap();
    let graph = doc.build().unwrap();
    let entry = graph.idx("b-1c0_r0c0").unwrap();
    let mut sim = Sim::new(
        &graph,
        SimConfig {
            mode: ControlMode::FixedTime,
            seed: 3,
            spawns: vec![SpawnSpec {
                segment: entry,
                rate: 0.1,
                rv_probability: 0.5,
            }],
        },
    )
    .unwrap();

    // Geometry of the node the stub feeds.
    let (ii, inter) = graph
        .intersections()
        .iter()
        .enumerate()
        .find(|(_, i)| i.node == "r0c0")
        .unwrap();
    println!("node {} controlled={} kind={:?}", inter.node, inter.controlled, inter.kind);
    for (d, dir) in inter.directions.iter().enumerate() {
        let outs: Vec<&str> = dir
            .movements
            .iter()
            .map(|m| graph.segment(m.to).id.as_str())
            .collect();
        println!(
            "  dir {d}: {} -> {:?} side={} group={:?}",
            graph.segment(dir.approach).id,
            outs,
            dir.side,
            dir.group
        );
    }
    let plan = signal::build_plan(inter).unwrap().unwrap();
    println!("  phases: {:?}", plan.phases());

    for t in 0..400u64 {
        sim.spawn_arrivals();
        let green = plan.green_at(sim.tick()).to_vec();
        let report = sim.step(None);
        let grants: Vec<_> = report
            .granted
            .iter()
            .filter(|&&(_, i, _)| i == ii)
            .map(|&(v, _, d)| (v, d))
            .collect();
        if t < 150 {
            // Heads of each approach to r0c0.
            let mut heads = String::new();
            for &seg in &inter.incoming {
                let ids = sim.vehicles_on(seg);
                if let Some(&h) = ids.first() {
                    let v = sim.vehicle(h).unwrap();
                    heads.push_str(&format!(
                        " {}[n={} head v{} pos={:.1} sp={:.1} cross={}]",
                        graph.segment(seg).id,
                        ids.len(),
                        h,
                        v.pos,
                        v.speed,
                        v.crossing.is_some(),
                    ));
                }
            }
            println!("t={t:3} green={green:?} grants={grants:?}{heads}");
        }
        if t % 50 == 49 {
            let mut occ = String::new();
            for s in 0..graph.len() {
                let n = sim.vehicles_on(s).len();
                if n > 0 {
                    occ.push_str(&format!(" {}={}", graph.segment(s).id, n));
                }
            }
            println!(
                "== t={t} active={} departed={} spawned={} |{}",
                sim.active_count(),
                sim.stats().departed,
                sim.stats().spawned,
                occ
            );
        }
    }
}
