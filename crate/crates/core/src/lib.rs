//! Mixed-traffic simulation and coordination toolkit.
//!
//! The crate simulates road networks shared by human-driven vehicles (HVs)
//! and robot vehicles (RVs), and layers a coordination stack on top of the
//! simulator:
//!
//! * [`network`] — road segments, connections, intersections, routing;
//! * [`sim`] — the per-tick traffic simulation with three intersection
//!   control modes (no control, fixed-time signals, RV-coordinated);
//! * [`sensing`] — RV-side local traffic observation and the aggregation
//!   that turns per-vehicle reports into per-segment estimates;
//! * [`forecast`] — graph-propagation traffic forecasting plus reference
//!   baselines and error metrics;
//! * [`routing`] — shortage detection and the task/response/assignment
//!   protocol that reroutes RVs toward under-served road segments;
//! * [`scenario`] — scenario configuration, the experiment runner, dataset
//!   generation, forecast evaluation and baseline comparison.
//!
//! Everything is deterministic for a fixed seed: repeated runs produce
//! byte-identical outputs, with or without the `parallel` feature.

pub mod cli;
pub mod error;
pub mod exec;
pub mod forecast;
pub mod hash;
pub mod network;
pub mod routing;
pub mod scenario;
pub mod sensing;
pub mod sim;

pub use error::{Error, Result};
