// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded Monte-Carlo harness.
//!
//! Every experiment is a pure function of its configuration and seed.
//! Replicates run in parallel on independent random streams and are
//! collected in replicate order, so reports do not depend on thread count.
//! Every solver call is certified with [`crate::verify_kkt`]; a single
//! failed certificate aborts the experiment.

pub mod config;
pub mod fluctuation;
pub mod lemma10;
pub mod rng;
pub mod runner;
pub mod trend_monitor;

pub use config::{ExperimentConfig, LambdaRule, TheoremConstants, TruthShape};
pub use fluctuation::{
    crossing_bound, crossing_probability_check, fluctuation_uniformity, CrossingReport,
    FluctuationReport,
};
pub use lemma10::{exact_recovery_failure_fraction, knot_truth, lemma10_witness, Lemma10Report};
pub use rng::{generate, generate_with, replicate_rng, stream_id};
pub use runner::{
    boundary_fraction, example1_config, example2_config, lambda_grid, run_consistency_sweep,
    run_example1, run_example2, run_experiment, sweep_config, wilson_interval, McReport, NSummary,
    ReplicateRecord, SweepVerdict,
};
pub use trend_monitor::{run_trend_monitor, KinkShape, TrendMonitorReport, TrendReplicate};
