//! Baseline sweep: average waiting time per (control method, robot rate),
//! paired across methods by running every cell from the same seeds.

use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::forecast::PropagationModel;
use crate::hash;
use crate::network::NetworkGraph;
use crate::sim::control::ControlMode;

use super::runner::run_scenario;
use super::{demand_preset, RouterMode, ScenarioConfig};

/// The four methods under comparison, least to most coordinated.
pub const METHODS: [(&str, ControlMode, RouterMode); 4] = [
    ("all-way-stop", ControlMode::AllWayStop, RouterMode::Shortest),
    ("fixed-time", ControlMode::FixedTime, RouterMode::Shortest),
    (
        "negotiated-shortest",
        ControlMode::RvNegotiated,
        RouterMode::Shortest,
    ),
    (
        "negotiated-rebalance",
        ControlMode::RvNegotiated,
        RouterMode::Rebalance,
    ),
];

/// The sweep's shared base: one scenario preset, run at several robot
/// rates. The designated low-robot entry points keep `rv_low` at every
/// rate — they are part of the scenario, not of the rate axis.
#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub preset: String,
    pub duration: u64,
    pub seeds: Vec<u64>,
    pub rv_rates: Vec<f64>,
    pub rv_low: f64,
    pub p_target: f64,
    pub lambda: f64,
    pub cadence: u64,
    pub horizon: usize,
}

impl CompareConfig {
    pub fn config_hash(&self, graph: &NetworkGraph) -> String {
        let canon = serde_json::json!({
            "graph": graph.graph_hash(),
            "preset": self.preset,
            "duration": self.duration,
            "seeds": self.seeds,
            "rv_rates": self.rv_rates,
            "rv_low": self.rv_low,
            "p_target": self.p_target,
            "lambda": self.lambda,
            "cadence": self.cadence,
            "horizon": self.horizon,
        });
        hash::fingerprint(canon.to_string().as_bytes())
    }
}

/// One table cell: a method at a robot rate, averaged over the seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareCell {
    pub method: &'static str,
    pub rv_rate: f64,
    pub avg_wait: f64,
    pub departed: u64,
    pub conflicting_grants: u64,
}

/// Run the full methods × rates grid. Per-run artifacts land under
/// `out_dir/runs/`, the table in `out_dir/compare.csv`.
pub fn compare_baselines(
    graph: &NetworkGraph,
    cfg: &CompareConfig,
    model: Option<&PropagationModel>,
    out_dir: &Path,
    mode: ExecMode,
) -> Result<Vec<CompareCell>> {
    if cfg.seeds.is_empty() || cfg.rv_rates.is_empty() {
        return Err(Error::Config(
            "the comparison needs at least one seed and one robot rate".into(),
        ));
    }
    fs::create_dir_all(out_dir)?;
    let mut cells = Vec::with_capacity(METHODS.len() * cfg.rv_rates.len());
    for &(method, control_mode, router) in &METHODS {
        for &rv_rate in &cfg.rv_rates {
            let mut wait_sum = 0.0;
            let mut departed = 0;
            let mut conflicting = 0;
            for &seed in &cfg.seeds {
                let scenario = ScenarioConfig {
                    duration: cfg.duration,
                    seed,
                    control_mode,
                    router,
                    spawns: demand_preset(&cfg.preset, graph, rv_rate, cfg.rv_low)?,
                    p_target: cfg.p_target,
                    lambda: cfg.lambda,
                    cadence: cfg.cadence,
                    horizon: cfg.horizon,
                };
                let run_dir = out_dir
                    .join("runs")
                    .join(format!("{method}-rv{:02}-s{seed}", (rv_rate * 100.0).round()));
                let summary = run_scenario(graph, &scenario, model, &run_dir, mode)?;
                wait_sum += summary.avg_wait;
                departed += summary.departed;
                conflicting += summary.conflicting_grants;
            }
            cells.push(CompareCell {
                method,
                rv_rate,
                avg_wait: wait_sum / cfg.seeds.len() as f64,
                departed,
                conflicting_grants: conflicting,
            });
        }
    }

    let mut out = BufWriter::new(File::create(out_dir.join("compare.csv"))?);
    writeln!(
        out,
        "# config_hash={} seeds={}",
        cfg.config_hash(graph),
        cfg.seeds.len()
    )?;
    writeln!(out, "method,rv_rate,avg_wait")?;
    for c in &cells {
        writeln!(out, "{},{:.2},{:.6}", c.method, c.rv_rate, c.avg_wait)?;
    }
    out.flush()?;
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generate_grid;

    #[test]
    fn the_grid_covers_every_method_and_rate_exactly_once() {
        let graph = generate_grid(3, 3, 100.0, 10.0).unwrap().build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = CompareConfig {
            preset: "late-evening".into(),
            duration: 40,
            seeds: vec![3],
            rv_rates: vec![0.5, 0.8],
            rv_low: 0.2,
            p_target: 0.5,
            lambda: 0.05,
            cadence: 20,
            horizon: 0,
        };
        let cells =
            compare_baselines(&graph, &cfg, None, dir.path(), ExecMode::Sequential).unwrap();
        assert_eq!(cells.len(), 8);
        for &(method, _, _) in &METHODS {
            assert_eq!(cells.iter().filter(|c| c.method == method).count(), 2);
        }
        assert!(cells.iter().all(|c| c.conflicting_grants == 0));

        let text = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
        assert_eq!(text.lines().count(), 2 + 8, "comment, header, cells");
    }
}
