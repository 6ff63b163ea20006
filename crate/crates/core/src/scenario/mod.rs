//! Experiment harness: scenario configuration, the end-to-end run loop,
//! dataset generation, forecast evaluation, and baseline comparisons.
//!
//! A scenario is one simulated run: a network, a demand pattern, a control
//! mode, and a router. Every output file starts with a `# config_hash=…
//! seed=…` line, and two runs with the same hash and seed write identical
//! bytes.

pub mod compare;
pub mod dataset;
pub mod evalf;
pub mod runner;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash;
use crate::network::{NetworkGraph, SegIdx};
use crate::sim::control::ControlMode;
use crate::sim::SpawnSpec;

/// How vehicles pick routes during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouterMode {
    /// Everyone drives the shortest route to their destination.
    Shortest,
    /// Shortest by default, plus periodic shortage-driven rerouting of
    /// robot vehicles.
    Rebalance,
}

/// One spawn point with the segment named by id, as configs spell it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSpawn {
    pub segment: String,
    pub rate: f64,
    pub rv_probability: f64,
}

/// A fully resolved scenario: everything a run needs except output paths.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub duration: u64,
    pub seed: u64,
    pub control_mode: ControlMode,
    pub router: RouterMode,
    pub spawns: Vec<SpawnSpec>,
    /// Network-wide robot-share target the coordinator defends.
    pub p_target: f64,
    /// Detection slack below the target before a shortage is reported.
    pub lambda: f64,
    /// Ticks between rebalancing rounds.
    pub cadence: u64,
    /// Forecast steps ahead used to anticipate shortages.
    pub horizon: usize,
}

impl ScenarioConfig {
    pub fn validate(&self, graph: &NetworkGraph) -> Result<()> {
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::Config(format!(
                "p_target must be inside (0, 1), got {}",
                self.p_target
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda < self.p_target) {
            return Err(Error::Config(format!(
                "lambda must be in [0, p_target), got {}",
                self.lambda
            )));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be at least 1 tick".into()));
        }
        for s in &self.spawns {
            if s.segment >= graph.len() {
                return Err(Error::Config(format!(
                    "spawn segment index {} out of range",
                    s.segment
                )));
            }
            if !(0.0..=1.0).contains(&s.rv_probability) {
                return Err(Error::Config(format!(
                    "spawn rv_probability must be in [0, 1], got {}",
                    s.rv_probability
                )));
            }
        }
        Ok(())
    }

    /// Stable fingerprint over everything that shapes the run's content.
    /// Output locations are deliberately not part of it.
    pub fn config_hash(&self, graph: &NetworkGraph) -> String {
        let canon = serde_json::json!({
            "graph": graph.graph_hash(),
            "duration": self.duration,
            "seed": self.seed,
            "control_mode": self.control_mode,
            "router": self.router,
            "spawns": self.spawns,
            "p_target": self.p_target,
            "lambda": self.lambda,
            "cadence": self.cadence,
            "horizon": self.horizon,
        });
        hash::fingerprint(canon.to_string().as_bytes())
    }
}

/// What a finished run reports back. Everything except `wall_seconds`
/// also lands in the summary file; wall time stays out of it so reruns
/// write identical bytes.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub metrics_path: PathBuf,
    pub replay_path: Option<PathBuf>,
    pub config_hash: String,
    pub seed: u64,
    pub spawned: u64,
    pub departed: u64,
    pub deferred_spawns: u64,
    /// Cumulative average wait over departed and still-active vehicles.
    pub avg_wait: f64,
    /// Mean over ticks of the per-tick network shortage index.
    pub mean_shortage_index: f64,
    pub granted_total: u64,
    pub conflicting_grants: u64,
    pub rounds: u64,
    pub reports: u64,
    pub tasks: u64,
    pub assignments: u64,
    pub applied_assignments: u64,
    pub expired_assignments: u64,
    /// Quota the rounds could not fill: Σ max(deficit − assigned, 0).
    pub shortfall: u64,
    /// Forecast values pulled back into their valid range during rounds.
    pub clamped_forecasts: u64,
    pub wall_seconds: f64,
}

/// Bundled demand patterns. The three differ only in spawn rates and in
/// where the low-robot entry points sit.
pub const PRESETS: [&str; 3] = ["morning-rush", "evening-rush", "late-evening"];

/// Build the spawn table for a bundled scenario on any network.
///
/// Entries are every spawn-flagged segment which actually leads somewhere,
/// in index order. The busy half of the entries depends on the scenario —
/// morning loads the first half (west/north side on generated grids),
/// evening the second half, late evening spreads a light demand evenly.
/// The two lowest-indexed busy entries become the designated low-robot
/// points and spawn with `rv_low` instead of `rv_normal`.
pub fn demand_preset(
    name: &str,
    graph: &NetworkGraph,
    rv_normal: f64,
    rv_low: f64,
) -> Result<Vec<SpawnSpec>> {
    let entries: Vec<SegIdx> = graph
        .spawn_segments()
        .filter(|&s| !graph.successors(s).is_empty())
        .collect();
    if entries.len() < 2 {
        return Err(Error::Config(
            "demand presets need at least two usable spawn segments".into(),
        ));
    }
    let half = entries.len() / 2;
    let (busy_rate, calm_rate, busy_range): (f64, f64, std::ops::Range<usize>) = match name {
        "morning-rush" => (0.035, 0.012, 0..half),
        "evening-rush" => (0.035, 0.012, half..entries.len()),
        "late-evening" => (0.012, 0.012, 0..entries.len()),
        other => {
            return Err(Error::Config(format!(
                "unknown scenario preset {other:?}; expected one of {PRESETS:?}"
            )))
        }
    };
    let low_points: Vec<SegIdx> = entries[busy_range.clone()].iter().copied().take(2).collect();
    Ok(entries
        .iter()
        .enumerate()
        .map(|(i, &segment)| SpawnSpec {
            segment,
            rate: if busy_range.contains(&i) {
                busy_rate
            } else {
                calm_rate
            },
            rv_probability: if low_points.contains(&segment) {
                rv_low
            } else {
                rv_normal
            },
        })
        .collect())
}
