//! Experiment runner, probes, scans and artifact writers.

pub mod arms;
pub mod compare;
pub mod config;
pub mod counterexamples;
pub mod fig1;
pub mod run;
pub mod scan;
pub mod svg;

pub use arms::{arm_by_name, arm_names, paired_spectrum, Arm, ArmRow};
pub use compare::{compare_full_reduced, compare_trajectories, CompareReport};
pub use config::ExperimentConfig;
pub use counterexamples::{check_counterexamples, CounterexampleReport};
pub use fig1::{fig1_trajectory, reproduce_fig1, Fig1Row};
pub use run::{execute, run_experiment, summarize, ArmTrajectory, RunOutput, RunSummary};
pub use scan::{scan_monotonicity, Sampling, Violation};
