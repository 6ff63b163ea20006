//! Ground-truth flow datasets: many seeded runs recorded as per-tick
//! per-segment (count, robot-rate) tables, split into train/eval/validation.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::forecast::{FlowMatrix, F_COUNT, F_RATE};
use crate::hash;
use crate::network::NetworkGraph;
use crate::sim::control::ControlMode;
use crate::sim::observation::{ControlPolicy, LongestWaitPolicy};
use crate::sim::{Sim, SimConfig, SpawnSpec};

use super::runner::truth_flow;

/// What to simulate while recording flows. The router plays no part here:
/// datasets capture the network's natural dynamics.
#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub runs: u32,
    pub duration: u64,
    /// Run `r` simulates with `seed + r`.
    pub seed: u64,
    pub control_mode: ControlMode,
    pub spawns: Vec<SpawnSpec>,
}

impl DatasetConfig {
    pub fn config_hash(&self, graph: &NetworkGraph) -> String {
        let canon = serde_json::json!({
            "graph": graph.graph_hash(),
            "runs": self.runs,
            "duration": self.duration,
            "seed": self.seed,
            "control_mode": self.control_mode,
            "spawns": self.spawns,
        });
        hash::fingerprint(canon.to_string().as_bytes())
    }
}

/// Index file tying the run CSVs to their split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub graph_hash: String,
    pub seed: u64,
    pub runs: u32,
    pub duration: u64,
    pub files: Vec<String>,
    /// Indices into `files`.
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
    pub validation: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// 70/20/10 by floor, remainder to validation. Too few runs for a real
/// split degenerates into everything-in-training plus a warning.
pub fn split_runs(runs: u32) -> (Vec<usize>, Vec<usize>, Vec<usize>, Option<String>) {
    let n = runs as usize;
    let train = (n * 7) / 10;
    let eval = (n * 2) / 10;
    if train == 0 || eval == 0 {
        return (
            (0..n).collect(),
            Vec::new(),
            Vec::new(),
            Some(format!(
                "{n} run(s) cannot fill a 70/20/10 split; all placed in training"
            )),
        );
    }
    (
        (0..train).collect(),
        (train..train + eval).collect(),
        (train + eval..n).collect(),
        None,
    )
}

/// Simulate `cfg.runs` seeded runs and write one flow CSV each plus a
/// `manifest.json` under `out_dir`.
pub fn generate_dataset(
    graph: &NetworkGraph,
    cfg: &DatasetConfig,
    out_dir: &Path,
    _mode: ExecMode,
) -> Result<Manifest> {
    if cfg.runs == 0 {
        return Err(Error::Config("dataset needs at least one run".into()));
    }
    fs::create_dir_all(out_dir)?;
    let config_hash = cfg.config_hash(graph);
    let policy = LongestWaitPolicy;

    let mut files = Vec::with_capacity(cfg.runs as usize);
    for r in 0..cfg.runs {
        let seed = cfg.seed + r as u64;
        let mut sim = Sim::new(
            graph,
            SimConfig {
                mode: cfg.control_mode,
                seed,
                spawns: cfg.spawns.clone(),
            },
        )?;
        let policy_ref: Option<&dyn ControlPolicy> = match cfg.control_mode {
            ControlMode::RvNegotiated => Some(&policy),
            _ => None,
        };
        let name = format!("run_{r:03}.csv");
        let mut out = BufWriter::new(File::create(out_dir.join(&name))?);
        writeln!(out, "# config_hash={config_hash} seed={seed}")?;
        writeln!(out, "tick,segment,count,rv_rate")?;
        for t in 0..cfg.duration {
            sim.spawn_arrivals();
            sim.step(policy_ref);
            let flow = truth_flow(&sim);
            for seg in 0..graph.len() {
                writeln!(
                    out,
                    "{t},{seg},{},{:.6}",
                    flow.get(seg, F_COUNT) as u64,
                    flow.get(seg, F_RATE),
                )?;
            }
        }
        out.flush()?;
        files.push(name);
    }

    let (train, eval, validation, warning) = split_runs(cfg.runs);
    let manifest = Manifest {
        config_hash,
        graph_hash: graph.graph_hash().to_string(),
        seed: cfg.seed,
        runs: cfg.runs,
        duration: cfg.duration,
        files,
        train,
        eval,
        validation,
        warning,
    };
    let mut f = BufWriter::new(File::create(out_dir.join("manifest.json"))?);
    writeln!(f, "{}", serde_json::to_string_pretty(&manifest)?)?;
    f.flush()?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Read one run CSV back into a tick-ordered snapshot sequence.
pub fn load_run(path: &Path, segments: usize) -> Result<Vec<FlowMatrix>> {
    let reader = BufReader::new(File::open(path)?);
    let mut ticks: Vec<FlowMatrix> = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.starts_with('#') || line.starts_with("tick,") || line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut next = || {
            parts
                .next()
                .ok_or_else(|| Error::Config(format!("short flow row: {line:?}")))
        };
        let tick: usize = next()?.parse().map_err(|_| bad_row(&line))?;
        let seg: usize = next()?.parse().map_err(|_| bad_row(&line))?;
        let count: f64 = next()?.parse().map_err(|_| bad_row(&line))?;
        let rate: f64 = next()?.parse().map_err(|_| bad_row(&line))?;
        if seg >= segments {
            return Err(Error::Config(format!(
                "flow row names segment {seg} but the network has {segments}"
            )));
        }
        while ticks.len() <= tick {
            ticks.push(FlowMatrix::zeros(segments));
        }
        ticks[tick].set(seg, F_COUNT, count);
        ticks[tick].set(seg, F_RATE, rate);
    }
    if ticks.is_empty() {
        return Err(Error::EmptyInput(format!(
            "flow file {} has no data rows",
            path.display()
        )));
    }
    Ok(ticks)
}

fn bad_row(line: &str) -> Error {
    Error::Config(format!("unparseable flow row: {line:?}"))
}

/// Load the runs behind a list of manifest indices.
pub fn load_split(
    dir: &Path,
    manifest: &Manifest,
    indices: &[usize],
    segments: usize,
) -> Result<Vec<Vec<FlowMatrix>>> {
    indices
        .iter()
        .map(|&i| {
            let name = manifest.files.get(i).ok_or_else(|| {
                Error::Config(format!("manifest split references missing run {i}"))
            })?;
            load_run(&dir.join(name), segments)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generate_grid;
    use crate::scenario::demand_preset;

    #[test]
    fn split_follows_the_seventy_twenty_ten_floor_rule() {
        let (train, eval, val, warning) = split_runs(20);
        assert_eq!((train.len(), eval.len(), val.len()), (14, 4, 2));
        assert!(warning.is_none());

        let (train, eval, val, warning) = split_runs(10);
        assert_eq!((train.len(), eval.len(), val.len()), (7, 2, 1));
        assert!(warning.is_none());

        let (train, eval, val, warning) = split_runs(1);
        assert_eq!((train.len(), eval.len(), val.len()), (1, 0, 0));
        assert!(warning.unwrap().contains("training"));
    }

    #[test]
    fn splits_are_disjoint_and_cover_every_run() {
        for runs in [3u32, 10, 20, 31] {
            let (train, eval, val, _) = split_runs(runs);
            let mut all: Vec<usize> = train.iter().chain(&eval).chain(&val).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..runs as usize).collect::<Vec<_>>());
        }
    }

    #[test]
    fn generated_runs_load_back_exactly() {
        let graph = generate_grid(3, 3, 100.0, 10.0).unwrap().build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = DatasetConfig {
            runs: 3,
            duration: 40,
            seed: 5,
            control_mode: ControlMode::FixedTime,
            spawns: demand_preset("evening-rush", &graph, 0.5, 0.2).unwrap(),
        };
        let manifest = generate_dataset(&graph, &cfg, dir.path(), ExecMode::Sequential).unwrap();
        assert_eq!(manifest.files.len(), 3);
        assert_eq!(manifest.train.len() + manifest.eval.len() + manifest.validation.len(), 3);

        let reloaded = load_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(reloaded, manifest);

        for name in &manifest.files {
            let run = load_run(&dir.path().join(name), graph.len()).unwrap();
            assert_eq!(run.len(), 40, "one snapshot per tick");
            for m in &run {
                assert_eq!(m.segments(), graph.len());
                for seg in 0..graph.len() {
                    let (n, p) = (m.get(seg, F_COUNT), m.get(seg, F_RATE));
                    assert!(n >= 0.0 && n == n.trunc());
                    assert!((0.0..=1.0).contains(&p));
                    if n == 0.0 {
                        assert_eq!(p, 0.0);
                    }
                }
            }
        }

        // Different seeds genuinely differ.
        let a = load_run(&dir.path().join(&manifest.files[0]), graph.len()).unwrap();
        let b = load_run(&dir.path().join(&manifest.files[1]), graph.len()).unwrap();
        assert_ne!(a, b);

        // Regeneration is byte-identical.
        let dir2 = tempfile::tempdir().unwrap();
        generate_dataset(&graph, &cfg, dir2.path(), ExecMode::Parallel).unwrap();
        for name in manifest.files.iter().chain(std::iter::once(&"manifest.json".to_string())) {
            let x = std::fs::read(dir.path().join(name)).unwrap();
            let y = std::fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(x, y, "{name} differs on regeneration");
        }
    }
}
