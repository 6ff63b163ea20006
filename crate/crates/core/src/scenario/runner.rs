//! The end-to-end run loop: spawn, sense, periodically rebalance, step,
//! record.

use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::Path;
use std::time::Instant;

use crate::error::Result;
use crate::exec::ExecMode;
use crate::forecast::{ClampStats, FlowMatrix, PropagationModel, F_COUNT, F_RATE};
use crate::network::NetworkGraph;
use crate::routing::{rates_from_estimates, run_round, shortage_index, ReplayWriter};
use crate::sensing::{
    sensing_round, EstimateTable, SensePrior, SENSE_RADIUS, STALENESS_LIMIT,
};
use crate::sim::control::ControlMode;
use crate::sim::observation::{ControlPolicy, LongestWaitPolicy};
use crate::sim::{Sim, SimConfig};

use super::{RouterMode, RunSummary, ScenarioConfig};

/// Robot share and vehicle count per segment straight from the live
/// simulation — the ground truth the estimates approximate. Empty
/// segments carry `None`.
pub fn truth_rates(sim: &Sim) -> Vec<Option<(f64, f64)>> {
    (0..sim.graph().len())
        .map(|seg| {
            let ids = sim.vehicles_on(seg);
            if ids.is_empty() {
                return None;
            }
            let robots = ids
                .iter()
                .filter(|&&id| sim.vehicle(id).expect("listed vehicle").is_robot())
                .count();
            Some((robots as f64 / ids.len() as f64, ids.len() as f64))
        })
        .collect()
}

/// Ground truth as a flow snapshot; empty segments read as zero flow.
pub fn truth_flow(sim: &Sim) -> FlowMatrix {
    let mut m = FlowMatrix::zeros(sim.graph().len());
    for (seg, cell) in truth_rates(sim).iter().enumerate() {
        if let Some((p, n)) = cell {
            m.set(seg, F_COUNT, *n);
            m.set(seg, F_RATE, *p);
        }
    }
    m
}

/// Mean shortage index over occupied segments, if any are occupied.
pub fn network_shortage_index(truth: &[Option<(f64, f64)>], p_target: f64) -> Option<f64> {
    let occupied: Vec<f64> = truth
        .iter()
        .flatten()
        .map(|&(p, _)| shortage_index(p, p_target))
        .collect();
    if occupied.is_empty() {
        None
    } else {
        Some(occupied.iter().sum::<f64>() / occupied.len() as f64)
    }
}

/// What the coordinator plans against: the forecast at least `horizon`
/// ticks ahead when a model is available (rounded up to whole model steps;
/// the instantaneous estimate table stands in for a one-window mean), the
/// current estimates otherwise. Forecast counts that collapse to zero fall
/// back to the current count so a momentarily pessimistic model cannot
/// silence detection.
fn planning_rates(
    graph: &NetworkGraph,
    table: &EstimateTable,
    model: Option<&PropagationModel>,
    horizon: usize,
    clamp: &mut ClampStats,
) -> Vec<(f64, f64)> {
    let Some(model) = model else {
        return rates_from_estimates(table);
    };
    let mut now = FlowMatrix::zeros(graph.len());
    for seg in 0..graph.len() {
        let e = table.get(seg);
        now.set(seg, F_COUNT, e.n_e);
        now.set(seg, F_RATE, e.p_e);
    }
    let steps = model.predict_multi(graph, &now, model.steps_for_ticks(horizon), clamp);
    let ahead = steps.last().unwrap_or(&now);
    (0..graph.len())
        .map(|seg| {
            let n = ahead.get(seg, F_COUNT);
            let n = if n > 0.0 { n } else { table.get(seg).n_e };
            (ahead.get(seg, F_RATE), n)
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Run one scenario to completion, writing `metrics.csv`, `summary.json`,
/// and (when rebalancing) `replay.jsonl` under `out_dir`.
pub fn run_scenario(
    graph: &NetworkGraph,
    cfg: &ScenarioConfig,
    model: Option<&PropagationModel>,
    out_dir: &Path,
    mode: ExecMode,
) -> Result<RunSummary> {
    let started = Instant::now();
    cfg.validate(graph)?;
    let config_hash = cfg.config_hash(graph);
    fs::create_dir_all(out_dir)?;

    let mut sim = Sim::new(
        graph,
        SimConfig {
            mode: cfg.control_mode,
            seed: cfg.seed,
            spawns: cfg.spawns.clone(),
        },
    )?;
    let prior = SensePrior::from_spawns(graph, sim.specs());
    let mut table = EstimateTable::prior_only(graph, &prior, 0);
    let policy = LongestWaitPolicy;
    let policy_ref: Option<&dyn ControlPolicy> = match cfg.control_mode {
        ControlMode::RvNegotiated => Some(&policy),
        _ => None,
    };

    let metrics_path = out_dir.join("metrics.csv");
    let mut metrics = BufWriter::new(File::create(&metrics_path)?);
    writeln!(metrics, "# config_hash={config_hash} seed={}", cfg.seed)?;
    write!(metrics, "tick,active,mean_speed,mean_wait,mean_shortage_index")?;
    for seg in graph.segments() {
        write!(metrics, ",{}", seg.id)?;
    }
    writeln!(metrics)?;

    let replay_path = out_dir.join("replay.jsonl");
    let mut replay = if cfg.router == RouterMode::Rebalance {
        Some(ReplayWriter::create(&replay_path)?)
    } else {
        None
    };

    let mut clamp = ClampStats::default();
    let mut shortage_sum = 0.0;
    let mut shortage_ticks = 0u64;
    let (mut rounds, mut reports, mut tasks) = (0u64, 0u64, 0u64);
    let (mut assignments, mut applied, mut expired, mut shortfall) = (0u64, 0u64, 0u64, 0u64);

    for t in 0..cfg.duration {
        sim.spawn_arrivals();
        table = sensing_round(&sim, &table, &prior, SENSE_RADIUS, STALENESS_LIMIT, mode);

        if cfg.router == RouterMode::Rebalance && t > 0 && t % cfg.cadence == 0 {
            let rates = planning_rates(graph, &table, model, cfg.horizon, &mut clamp);
            let outcome = run_round(
                &mut sim,
                &rates,
                cfg.p_target,
                cfg.lambda,
                rounds,
                replay.as_mut(),
                mode,
            )?;
            rounds += 1;
            reports += outcome.reports.len() as u64;
            tasks += outcome.tasks.len() as u64;
            assignments += outcome.assignments.len() as u64;
            applied += outcome.applied;
            expired += outcome.expired;
            for report in &outcome.reports {
                let filled = outcome
                    .assignments
                    .iter()
                    .filter(|a| a.shortage_segment == report.segment)
                    .count() as u64;
                shortfall += report.deficit.saturating_sub(filled);
            }
        }

        sim.step(policy_ref);

        let truth = truth_rates(&sim);
        let tick_shortage = network_shortage_index(&truth, cfg.p_target);
        if let Some(s) = tick_shortage {
            shortage_sum += s;
            shortage_ticks += 1;
        }
        let active = sim.active_count();
        let (speed_sum, wait_sum) = sim
            .vehicles()
            .fold((0.0, 0u64), |(sp, w), v| (sp + v.speed, w + v.wait_ticks));
        write!(
            metrics,
            "{t},{active},{},{},{}",
            fmt_opt((active > 0).then(|| speed_sum / active as f64)),
            fmt_opt((active > 0).then(|| wait_sum as f64 / active as f64)),
            fmt_opt(tick_shortage),
        )?;
        for cell in &truth {
            write!(metrics, ",{}", fmt_opt(cell.map(|(p, _)| p)))?;
        }
        writeln!(metrics)?;
    }
    metrics.flush()?;
    if let Some(r) = replay.take() {
        r.finish()?;
    }

    let stats = *sim.stats();
    let summary = RunSummary {
        metrics_path,
        replay_path: (cfg.router == RouterMode::Rebalance).then_some(replay_path),
        config_hash: config_hash.clone(),
        seed: cfg.seed,
        spawned: stats.spawned,
        departed: stats.departed,
        deferred_spawns: stats.deferred_spawns,
        avg_wait: sim.average_wait().unwrap_or(0.0),
        mean_shortage_index: if shortage_ticks > 0 {
            shortage_sum / shortage_ticks as f64
        } else {
            0.0
        },
        granted_total: stats.granted_total,
        conflicting_grants: stats.conflicting_grants,
        rounds,
        reports,
        tasks,
        assignments,
        applied_assignments: applied,
        expired_assignments: expired,
        shortfall,
        clamped_forecasts: clamp.total(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_summary(out_dir, cfg, &summary)?;
    Ok(summary)
}

fn write_summary(out_dir: &Path, cfg: &ScenarioConfig, s: &RunSummary) -> Result<()> {
    let doc = serde_json::json!({
        "config_hash": s.config_hash,
        "seed": s.seed,
        "duration": cfg.duration,
        "control_mode": cfg.control_mode,
        "router": cfg.router,
        "p_target": cfg.p_target,
        "lambda": cfg.lambda,
        "cadence": cfg.cadence,
        "horizon": cfg.horizon,
        "spawned": s.spawned,
        "departed": s.departed,
        "deferred_spawns": s.deferred_spawns,
        "avg_wait": s.avg_wait,
        "mean_shortage_index": s.mean_shortage_index,
        "granted_total": s.granted_total,
        "conflicting_grants": s.conflicting_grants,
        "rounds": s.rounds,
        "reports": s.reports,
        "tasks": s.tasks,
        "assignments": s.assignments,
        "applied_assignments": s.applied_assignments,
        "expired_assignments": s.expired_assignments,
        "shortfall": s.shortfall,
        "clamped_forecasts": s.clamped_forecasts,
    });
    let mut f = BufWriter::new(File::create(out_dir.join("summary.json"))?);
    writeln!(f, "{}", serde_json::to_string_pretty(&doc)?)?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generate_grid;
    use crate::scenario::demand_preset;

    fn quick_config(graph: &NetworkGraph, router: RouterMode, duration: u64) -> ScenarioConfig {
        ScenarioConfig {
            duration,
            seed: 11,
            control_mode: ControlMode::RvNegotiated,
            router,
            spawns: demand_preset("evening-rush", graph, 0.55, 0.20).unwrap(),
            p_target: 0.5,
            lambda: 0.05,
            cadence: 50,
            horizon: 0,
        }
    }

    #[test]
    fn zero_duration_writes_headers_and_zero_counters() {
        let graph = generate_grid(3, 3, 100.0, 10.0).unwrap().build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_config(&graph, RouterMode::Shortest, 0);
        let s = run_scenario(&graph, &cfg, None, dir.path(), ExecMode::Sequential).unwrap();
        assert_eq!(s.spawned, 0);
        assert_eq!(s.departed, 0);
        assert_eq!(s.rounds, 0);
        assert_eq!(s.mean_shortage_index, 0.0);
        let text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# config_hash="));
        assert!(lines.next().unwrap().starts_with("tick,active,"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn identical_config_and_seed_rerun_byte_identical() {
        let graph = generate_grid(3, 3, 100.0, 10.0).unwrap().build().unwrap();
        let cfg = quick_config(&graph, RouterMode::Rebalance, 120);
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_scenario(&graph, &cfg, None, d1.path(), ExecMode::Parallel).unwrap();
        run_scenario(&graph, &cfg, None, d2.path(), ExecMode::Sequential).unwrap();
        for name in ["metrics.csv", "summary.json", "replay.jsonl"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn shortest_router_never_opens_a_replay_log() {
        let graph = generate_grid(3, 3, 100.0, 10.0).unwrap().build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_config(&graph, RouterMode::Shortest, 30);
        let s = run_scenario(&graph, &cfg, None, dir.path(), ExecMode::Sequential).unwrap();
        assert!(s.replay_path.is_none());
        assert!(!dir.path().join("replay.jsonl").exists());
        assert_eq!(s.rounds, 0);
        assert_eq!(s.tasks, 0);
    }

    #[test]
    fn rebalancing_rounds_fire_on_the_cadence_and_reroute_somebody() {
        let graph = generate_grid(4, 4, 100.0, 10.0).unwrap().build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(&graph, RouterMode::Rebalance, 400);
        cfg.cadence = 100;
        let s = run_scenario(&graph, &cfg, None, dir.path(), ExecMode::Parallel).unwrap();
        assert_eq!(s.rounds, 3, "rounds at ticks 100, 200, 300");
        assert!(s.reports > 0, "low-robot entries starve some segment");
        assert_eq!(s.conflicting_grants, 0);
        let replay = std::fs::read_to_string(dir.path().join("replay.jsonl")).unwrap();
        if s.assignments > 0 {
            assert!(replay.lines().any(|l| l.contains("\"assignment\"")));
        }
    }
}
