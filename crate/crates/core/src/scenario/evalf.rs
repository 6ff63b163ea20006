//! Forecaster evaluation: constant, per-segment AR(1), and the graph
//! propagation model, scored at several horizons over held-out runs.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::forecast::{
    aggregate_series, fit, fit_ar, ClampStats, ErrorAccumulator, ErrorMetrics, FitConfig,
    FlowMatrix, PropagationModel,
};
use crate::network::NetworkGraph;

/// One table row: every metric for every forecaster at one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub horizon: usize,
    pub constant: ErrorMetrics,
    pub ar: ErrorMetrics,
    pub propagation: ErrorMetrics,
}

/// Score the three forecasters on `eval_runs` at each horizon, fitting on
/// `train_runs` whatever is not supplied ready-made (`fit_config` governs
/// that fit and is ignored when a model comes in from outside).
///
/// Horizons count model steps; per-tick runs are reduced to the model's
/// aggregation window first, and all three forecasters are scored on the
/// reduced series so the comparison is step-for-step. Every start step that
/// leaves room for a horizon contributes to that horizon. Errors compare
/// the forecast for step `t + h` (composed `h` steps from step `t`) against
/// the recorded truth at `t + h`, across all segments and both features.
pub fn eval_forecast(
    graph: &NetworkGraph,
    train_runs: &[Vec<FlowMatrix>],
    eval_runs: &[Vec<FlowMatrix>],
    model: Option<PropagationModel>,
    fit_config: FitConfig,
    horizons: &[usize],
    mode: ExecMode,
) -> Result<Vec<EvalRow>> {
    if horizons.is_empty() {
        return Err(Error::EmptyInput("no horizons requested".into()));
    }
    if eval_runs.is_empty() {
        return Err(Error::EmptyInput("no evaluation runs".into()));
    }
    let mut horizons: Vec<usize> = horizons.to_vec();
    horizons.sort_unstable();
    horizons.dedup();
    if horizons[0] == 0 {
        return Err(Error::Config("horizon 0 is not a forecast".into()));
    }

    let propagation = match model {
        Some(m) => m,
        None => fit(graph, train_runs, fit_config, mode)?,
    };
    let window = propagation.window();
    let train_runs: Vec<Vec<FlowMatrix>> = train_runs
        .iter()
        .map(|r| aggregate_series(r, window))
        .collect();
    let eval_runs: Vec<Vec<FlowMatrix>> = eval_runs
        .iter()
        .map(|r| aggregate_series(r, window))
        .collect();

    let h_max = *horizons.last().expect("nonempty");
    let longest = eval_runs.iter().map(Vec::len).max().expect("nonempty");
    if h_max >= longest {
        return Err(Error::Config(format!(
            "horizon {h_max} exceeds the longest evaluation run \
             ({longest} steps of {window} ticks)"
        )));
    }

    let ar = fit_ar(&train_runs, mode)?;

    let mut acc_const = vec![ErrorAccumulator::default(); horizons.len()];
    let mut acc_ar = vec![ErrorAccumulator::default(); horizons.len()];
    let mut acc_prop = vec![ErrorAccumulator::default(); horizons.len()];
    let mut clamp = ClampStats::default();

    for run in &eval_runs {
        for t in 0..run.len() {
            let room = run.len() - 1 - t;
            let reach = h_max.min(room);
            if reach < horizons[0] {
                continue;
            }
            let prop_steps = propagation.predict_multi(graph, &run[t], reach, &mut clamp);
            let ar_steps = ar.predict_multi(&run[t], reach, &mut clamp);
            for (i, &h) in horizons.iter().enumerate() {
                if h > reach {
                    break;
                }
                let truth = &run[t + h];
                acc_const[i].add(&run[t], truth);
                acc_ar[i].add(&ar_steps[h - 1], truth);
                acc_prop[i].add(&prop_steps[h - 1], truth);
            }
        }
    }

    horizons
        .iter()
        .enumerate()
        .map(|(i, &horizon)| {
            Ok(EvalRow {
                horizon,
                constant: acc_const[i].finish()?,
                ar: acc_ar[i].finish()?,
                propagation: acc_prop[i].finish()?,
            })
        })
        .collect()
}

/// Write the evaluation table: one row per horizon, one column block per
/// forecaster.
pub fn write_eval_csv(path: &Path, config_hash: &str, rows: &[EvalRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# config_hash={config_hash}")?;
    writeln!(
        out,
        "horizon,const_mae,const_rmse,const_mape,ar_mae,ar_rmse,ar_mape,prop_mae,prop_rmse,prop_mape"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.horizon,
            r.constant.mae,
            r.constant.rmse,
            r.constant.mape,
            r.ar.mae,
            r.ar.rmse,
            r.ar.mape,
            r.propagation.mae,
            r.propagation.rmse,
            r.propagation.mape,
        )?;
    }
    out.flush()?;
    Ok(())
}
