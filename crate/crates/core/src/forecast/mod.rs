//! Graph-propagation traffic forecasting with reference baselines.
//!
//! The forecaster predicts the next per-segment traffic state from the
//! current state of each segment's upstream neighbours: every target
//! `(segment, feature)` gets a linear model over the same feature on its
//! predecessor segments plus an intercept, fitted by least squares over all
//! observed step-to-step transitions. Multi-step forecasts compose the
//! one-step model with its own output.
//!
//! A model step spans a configurable aggregation window of simulation ticks
//! (default 1): series are reduced to non-overlapping window means before
//! fitting, and every forecast step advances one window. One step should
//! roughly cover a segment traversal, or upstream traffic has not yet
//! arrived downstream and there is no propagation signal to fit.
//!
//! Two baselines calibrate the results: a constant forecast that repeats the
//! last observation, and an independent per-series autoregression that
//! ignores the road graph. Both run at the same window so the comparison is
//! step-for-step. The propagation model's edge over both comes entirely
//! from upstream traffic actually arriving downstream.

pub mod lstsq;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, ExecMode};
use crate::network::NetworkGraph;
use lstsq::solve_least_squares;

/// Features tracked per segment: vehicle count, then RV rate.
pub const FEATURES: usize = 2;
pub const F_COUNT: usize = 0;
pub const F_RATE: usize = 1;

/// One snapshot of per-segment traffic state: `graph.len()` rows of
/// `[vehicle_count, rv_rate]`, row index == segment index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    values: Vec<[f64; FEATURES]>,
}

impl FlowMatrix {
    pub fn zeros(segments: usize) -> Self {
        FlowMatrix {
            values: vec![[0.0; FEATURES]; segments],
        }
    }

    pub fn from_rows(values: Vec<[f64; FEATURES]>) -> Self {
        FlowMatrix { values }
    }

    pub fn segments(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, segment: usize, feature: usize) -> f64 {
        self.values[segment][feature]
    }

    pub fn set(&mut self, segment: usize, feature: usize, value: f64) {
        self.values[segment][feature] = value;
    }

    pub fn row(&self, segment: usize) -> &[f64; FEATURES] {
        &self.values[segment]
    }
}

/// Keep forecasts physically meaningful: counts are non-negative, rates live
/// in [0, 1]. Clamped values are counted so callers can see how often the
/// linear model leaves the feasible region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampStats {
    pub count_low: u64,
    pub rate_low: u64,
    pub rate_high: u64,
}

impl ClampStats {
    pub fn total(&self) -> u64 {
        self.count_low + self.rate_low + self.rate_high
    }
}

fn clamp_feature(feature: usize, value: f64, stats: &mut ClampStats) -> f64 {
    match feature {
        F_COUNT => {
            if value < 0.0 {
                stats.count_low += 1;
                0.0
            } else {
                value
            }
        }
        F_RATE => {
            if value < 0.0 {
                stats.rate_low += 1;
                0.0
            } else if value > 1.0 {
                stats.rate_high += 1;
                1.0
            } else {
                value
            }
        }
        _ => value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Also feed each target its own previous value. Off by default: the
    /// model then explains downstream state purely from upstream state.
    pub include_self_lag: bool,
    /// Ticks per model step; series are averaged over non-overlapping
    /// windows of this many snapshots before fitting.
    pub window: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            include_self_lag: false,
            window: 1,
        }
    }
}

/// Reduce a per-tick series to non-overlapping window means. A trailing
/// partial window is dropped so every step covers the same span;
/// `window == 1` returns the series unchanged.
pub fn aggregate_series(series: &[FlowMatrix], window: usize) -> Vec<FlowMatrix> {
    assert!(window >= 1, "window must be at least one tick");
    if window == 1 {
        return series.to_vec();
    }
    series
        .chunks_exact(window)
        .map(|chunk| {
            let segments = chunk[0].segments();
            let mut mean = FlowMatrix::zeros(segments);
            for m in chunk {
                for e in 0..segments {
                    for f in 0..FEATURES {
                        mean.set(e, f, mean.get(e, f) + m.get(e, f));
                    }
                }
            }
            for e in 0..segments {
                for f in 0..FEATURES {
                    mean.set(e, f, mean.get(e, f) / window as f64);
                }
            }
            mean
        })
        .collect()
}

/// Linear one-step propagation model over a fixed road graph.
///
/// Coefficients for segment `e`, feature `f` are ordered: one per
/// predecessor of `e` (ascending segment index), then the self term when
/// enabled, then the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationModel {
    graph_hash: String,
    include_self_lag: bool,
    /// Ticks per model step (the aggregation window it was fitted at).
    #[serde(default = "default_window")]
    window: usize,
    /// [segment][feature] -> coefficient vector.
    coefficients: Vec<[Vec<f64>; FEATURES]>,
}

fn default_window() -> usize {
    1
}

/// Fit the propagation model on one or more runs. Each run is a
/// time-ordered sequence of per-tick snapshots, reduced to window means per
/// `config.window`; transitions never cross run boundaries, so concatenated
/// runs do not leak state into each other.
pub fn fit(
    graph: &NetworkGraph,
    runs: &[Vec<FlowMatrix>],
    config: FitConfig,
    mode: ExecMode,
) -> Result<PropagationModel> {
    for run in runs {
        for m in run {
            if m.segments() != graph.len() {
                return Err(Error::Config(format!(
                    "snapshot has {} segments but the network has {}",
                    m.segments(),
                    graph.len()
                )));
            }
        }
    }
    let runs: Vec<Vec<FlowMatrix>> = runs
        .iter()
        .map(|r| aggregate_series(r, config.window))
        .collect();
    let runs = &runs;
    let transitions: usize = runs.iter().map(|r| r.len().saturating_sub(1)).sum();
    if transitions == 0 {
        return Err(Error::EmptyInput(
            "fitting needs at least one step-to-step transition".into(),
        ));
    }

    let fitted = map_indices(mode, graph.len(), |e| -> Result<[Vec<f64>; FEATURES]> {
        let preds = graph.predecessors(e);
        let width = preds.len() + usize::from(config.include_self_lag) + 1;
        if transitions < width {
            return Err(Error::SeriesTooShort {
                id: graph.segment(e).id.clone(),
                needed: width,
                got: transitions,
            });
        }
        let mut out: [Vec<f64>; FEATURES] = [Vec::new(), Vec::new()];
        for f in 0..FEATURES {
            let mut rows = Vec::with_capacity(transitions);
            let mut targets = Vec::with_capacity(transitions);
            for run in runs {
                for w in run.windows(2) {
                    let mut row = Vec::with_capacity(width);
                    for &p in preds {
                        row.push(w[0].get(p, f));
                    }
                    if config.include_self_lag {
                        row.push(w[0].get(e, f));
                    }
                    row.push(1.0);
                    rows.push(row);
                    targets.push(w[1].get(e, f));
                }
            }
            out[f] = solve_least_squares(&rows, &targets)?;
        }
        Ok(out)
    });

    let mut coefficients = Vec::with_capacity(graph.len());
    for r in fitted {
        coefficients.push(r?);
    }
    Ok(PropagationModel {
        graph_hash: graph.graph_hash().to_string(),
        include_self_lag: config.include_self_lag,
        window: config.window,
        coefficients,
    })
}

impl PropagationModel {
    pub fn include_self_lag(&self) -> bool {
        self.include_self_lag
    }

    /// Ticks covered by one forecast step.
    pub fn window(&self) -> usize {
        self.window
    }

    /// Model steps needed to look at least `ticks` ticks ahead.
    pub fn steps_for_ticks(&self, ticks: usize) -> usize {
        ticks.div_ceil(self.window).max(1)
    }

    pub fn coefficients(&self, segment: usize, feature: usize) -> &[f64] {
        &self.coefficients[segment][feature]
    }

    /// One-step forecast.
    pub fn predict_one(
        &self,
        graph: &NetworkGraph,
        current: &FlowMatrix,
        stats: &mut ClampStats,
    ) -> FlowMatrix {
        debug_assert_eq!(self.graph_hash, graph.graph_hash());
        debug_assert_eq!(current.segments(), graph.len());
        let mut next = FlowMatrix::zeros(graph.len());
        for e in 0..graph.len() {
            let preds = graph.predecessors(e);
            for f in 0..FEATURES {
                let coef = &self.coefficients[e][f];
                let mut acc = 0.0;
                for (i, &p) in preds.iter().enumerate() {
                    acc += coef[i] * current.get(p, f);
                }
                let mut at = preds.len();
                if self.include_self_lag {
                    acc += coef[at] * current.get(e, f);
                    at += 1;
                }
                acc += coef[at];
                next.set(e, f, clamp_feature(f, acc, stats));
            }
        }
        next
    }

    /// Forecast `horizon` steps ahead by composing the one-step model with
    /// its own output; returns all intermediate steps, index 0 being one
    /// step ahead.
    pub fn predict_multi(
        &self,
        graph: &NetworkGraph,
        current: &FlowMatrix,
        horizon: usize,
        stats: &mut ClampStats,
    ) -> Vec<FlowMatrix> {
        let mut out = Vec::with_capacity(horizon);
        let mut state = current.clone();
        for _ in 0..horizon {
            state = self.predict_one(graph, &state, stats);
            out.push(state.clone());
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse a saved model and verify it was fitted on this exact network.
    pub fn from_json(text: &str, graph: &NetworkGraph) -> Result<Self> {
        let model: PropagationModel = serde_json::from_str(text)?;
        let expect = graph.graph_hash().to_string();
        if model.graph_hash != expect {
            return Err(Error::GraphHashMismatch {
                model_hash: model.graph_hash.clone(),
                graph_hash: expect,
            });
        }
        if model.coefficients.len() != graph.len() {
            return Err(Error::Config(format!(
                "model covers {} segments but the network has {}",
                model.coefficients.len(),
                graph.len()
            )));
        }
        if model.window == 0 {
            return Err(Error::Config("model window must be at least 1".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &std::path::Path, graph: &NetworkGraph) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, graph)
    }
}

/// Constant baseline: the forecast for every horizon is the last
/// observation, unchanged.
pub fn constant_forecast(current: &FlowMatrix, horizon: usize) -> Vec<FlowMatrix> {
    vec![current.clone(); horizon]
}

/// Independent per-series autoregression baseline: each `(segment, feature)`
/// series gets `x_{t+1} = a x_t + b` fitted by least squares, with no graph
/// information at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    /// [segment][feature] -> (a, b).
    terms: Vec<[(f64, f64); FEATURES]>,
}

pub fn fit_ar(runs: &[Vec<FlowMatrix>], mode: ExecMode) -> Result<ArModel> {
    let transitions: usize = runs.iter().map(|r| r.len().saturating_sub(1)).sum();
    if transitions < 2 {
        return Err(Error::EmptyInput(
            "autoregression needs at least two transitions".into(),
        ));
    }
    let segments = runs
        .iter()
        .flat_map(|r| r.iter())
        .map(|m| m.segments())
        .next()
        .ok_or_else(|| Error::EmptyInput("autoregression needs at least one run".into()))?;

    let fitted = map_indices(mode, segments, |e| -> Result<[(f64, f64); FEATURES]> {
        let mut out = [(0.0, 0.0); FEATURES];
        for f in 0..FEATURES {
            let mut rows = Vec::with_capacity(transitions);
            let mut targets = Vec::with_capacity(transitions);
            for run in runs {
                for w in run.windows(2) {
                    rows.push(vec![w[0].get(e, f), 1.0]);
                    targets.push(w[1].get(e, f));
                }
            }
            let coef = solve_least_squares(&rows, &targets)?;
            out[f] = (coef[0], coef[1]);
        }
        Ok(out)
    });

    let mut terms = Vec::with_capacity(segments);
    for r in fitted {
        terms.push(r?);
    }
    Ok(ArModel { terms })
}

impl ArModel {
    pub fn predict_multi(
        &self,
        current: &FlowMatrix,
        horizon: usize,
        stats: &mut ClampStats,
    ) -> Vec<FlowMatrix> {
        let mut out = Vec::with_capacity(horizon);
        let mut state = current.clone();
        for _ in 0..horizon {
            let mut next = FlowMatrix::zeros(state.segments());
            for e in 0..state.segments() {
                for f in 0..FEATURES {
                    let (a, b) = self.terms[e][f];
                    next.set(e, f, clamp_feature(f, a * state.get(e, f) + b, stats));
                }
            }
            state = next;
            out.push(state.clone());
        }
        out
    }
}

/// Aggregate forecast errors over any number of (forecast, truth) snapshot
/// pairs. Accumulation order is the caller's call order, then segment, then
/// feature — fully deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorAccumulator {
    n: u64,
    abs_sum: f64,
    sq_sum: f64,
    ape_sum: f64,
    ape_n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// Mean absolute percentage error as a fraction (0.25 = 25%), over
    /// entries whose reference value is non-zero.
    pub mape: f64,
}

impl ErrorAccumulator {
    pub fn add(&mut self, forecast: &FlowMatrix, truth: &FlowMatrix) {
        debug_assert_eq!(forecast.segments(), truth.segments());
        for e in 0..truth.segments() {
            for f in 0..FEATURES {
                let err = forecast.get(e, f) - truth.get(e, f);
                self.n += 1;
                self.abs_sum += err.abs();
                self.sq_sum += err * err;
                let reference = truth.get(e, f);
                if reference != 0.0 {
                    self.ape_sum += (err / reference).abs();
                    self.ape_n += 1;
                }
            }
        }
    }

    pub fn finish(&self) -> Result<ErrorMetrics> {
        if self.n == 0 {
            return Err(Error::EmptyInput("no forecast errors accumulated".into()));
        }
        if self.ape_n == 0 {
            return Err(Error::AllReferencesZero);
        }
        Ok(ErrorMetrics {
            mae: self.abs_sum / self.n as f64,
            rmse: (self.sq_sum / self.n as f64).sqrt(),
            mape: self.ape_sum / self.ape_n as f64,
        })
    }
}

/// Convenience wrapper for a single pair of forecast/truth sequences.
pub fn error_metrics(forecast: &[FlowMatrix], truth: &[FlowMatrix]) -> Result<ErrorMetrics> {
    if forecast.len() != truth.len() {
        return Err(Error::Config(format!(
            "forecast has {} steps but truth has {}",
            forecast.len(),
            truth.len()
        )));
    }
    let mut acc = ErrorAccumulator::default();
    for (p, t) in forecast.iter().zip(truth) {
        acc.add(p, t);
    }
    acc.finish()
}
