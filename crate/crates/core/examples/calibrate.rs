//! Scratch calibration sweep: uniform demand over all entries, per mode.

use mixtraffic::network::generate_grid;
use mixtraffic::sim::control::ControlMode;
use mixtraffic::sim::observation::LongestWaitPolicy;
use mixtraffic::sim::{Sim, SimConfig, SpawnSpec};

fn main() {
    let doc = generate_grid(4, 4, 100.0, 13.9).unwrap();
    let graph = doc.build().unwrap();
    let entries: Vec<usize> = graph
        .spawn_segments()
        .filter(|&s| !graph.successors(s).is_empty())
        .collect();
    eprintln!("{} entries", entries.len());

    let modes = [
        ControlMode::FixedTime,
        ControlMode::AllWayStop,
        ControlMode::RvNegotiated,
    ];
    let half = entries.len() / 2;
    println!("mode,busy,calm,total_rate,spawned,departed,deferred,active_mid,active_end,avg_wait");
    for mode in modes {
        for (busy, calm) in [
            (0.020, 0.008),
            (0.030, 0.010),
            (0.035, 0.012),
            (0.040, 0.015),
            (0.050, 0.015),
        ] {
            let spawns: Vec<SpawnSpec> = entries
                .iter()
                .enumerate()
                .map(|(i, &segment)| SpawnSpec {
                    segment,
                    rate: if i >= half { busy } else { calm },
                    rv_probability: 0.55,
                })
                .collect();
            let mut sim = Sim::new(&graph, SimConfig { mode, seed: 1, spawns }).unwrap();
            let policy = LongestWaitPolicy;
            let mut active_mid = 0;
            for t in 0..2000 {
                sim.spawn_arrivals();
                sim.step(if mode == ControlMode::RvNegotiated {
                    Some(&policy)
                } else {
                    None
                });
                if t == 999 {
                    active_mid = sim.active_count();
                }
            }
            let s = sim.stats();
            let total = busy * (entries.len() - half) as f64 + calm * half as f64;
            println!(
                "{:?},{},{},{:.2},{},{},{},{},{},{:.1}",
                mode,
                busy,
                calm,
                total,
                s.spawned,
                s.departed,
                s.deferred_spawns,
                active_mid,
                sim.active_count(),
                sim.average_wait().unwrap_or(0.0),
            );
        }
    }
}
