//! Experiment plumbing: configuration, reports, ladder fits, the L⁶ probe and
//! the experiment registry.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod probe;
pub mod report;

pub use config::{Config, Format};
pub use experiments::{find, registry, run_experiment, run_ladder, Experiment, Group};
pub use fit::{fit_slope, LadderFit};
pub use probe::{decoupling_probe, ProbeResult};
pub use report::{ExperimentReport, Verdict};
