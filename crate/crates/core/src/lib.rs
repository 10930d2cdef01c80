//! Trace-driven propagation loss modelling.
//!
//! A path-loss learner (boosted regression trees over distance) and a fitted
//! fast-fading distribution are trained from wireless traces, then combined
//! into a seedable propagation engine that drives a link-level simulator.
//!
//! Module map:
//!
//! * [`traces`]: trace formats and the SNR-to-path-loss link budget
//! * [`baselines`]: Friis and log-distance reference models
//! * [`pathloss_ml`]: boosted-tree training, prediction and model files
//! * [`fading`]: residual extraction, distribution fitting, CDF tables
//! * [`randvar`]: seeded inverse-transform sampling
//! * [`propagation`]: total loss and received power
//! * [`linksim`]: trajectory replay, rate selection, goodput
//! * [`metrics`]: percentiles, box statistics, scenario splits
//! * [`synth`]: synthetic traces with a known ground truth

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod fading;
pub mod linksim;
pub mod metrics;
mod optim;
pub mod pathloss_ml;
pub mod propagation;
pub mod randvar;
pub mod synth;
pub mod traces;

pub use baselines::{friis_loss, log_distance_loss, LogDistanceParams};
pub use error::{Error, Result};
pub use fading::{
    extract_residuals, select_fading, to_cdf_table, CdfTable, FadingDist, FadingFamily, FadingFit,
    Residuals,
};
pub use linksim::{LinkRun, RateTable, SimConfig, Trajectory};
pub use metrics::{BoxStats, PercentileCurve, Scenario, ScenarioSplit};
pub use optim::{Minimum, NelderMead};
pub use pathloss_ml::{load_model, save_model, train, PathLossModel, TrainConfig, TreeNode};
pub use propagation::{rx_power, LinkBudget, PathLossVariant, PropagationEngine};
pub use randvar::{make_stream, sample_fading, RngStream};
pub use traces::{PathLossSample, Position, RadioConfig, TraceRecord};
