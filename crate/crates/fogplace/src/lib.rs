//! Deterministic simulator and algorithm suite for placing multimedia
//! services on hierarchical cloud-fog networks.
//!
//! The crate covers the full pipeline:
//!
//! - [`topology`] builds a tiered cloud-fog environment bottom-up from
//!   base-station locations via community detection, and models per-node
//!   latency.
//! - [`workload`] ingests or synthesizes per-region traffic series, derives
//!   per-slot demand snapshots, and classifies traffic intensity.
//! - [`forecast`] fits ARIMA and LSTM regressors to the traffic series and
//!   evaluates forecasts with MAE/RMSE.
//! - [`placement`] solves the per-slot capacitated facility-location problem
//!   exactly (branch and bound) or heuristically (greedy + local search).
//! - [`reservation`] prepares prediction-aware capacity reservations between
//!   consecutive slots.
//! - [`simulate`] runs the discrete-time comparison of the placement
//!   strategies and reports delivery, latency, and network-usage metrics.
//! - [`cli`] wires everything into a reproducible batch command line.
//!
//! Every operation is deterministic given its inputs and a 64-bit seed; see
//! the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod error;
pub mod forecast;
pub mod geo;
pub mod placement;
pub mod reservation;
pub mod rng;
pub mod simulate;
pub mod topology;
pub mod workload;

pub use error::{Error, Result};
