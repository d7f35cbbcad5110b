//! Boltzmann-Grad sweeps: plans with `d = c / sqrt(N)`, execution with
//! checkpoints, per-`N` diagnostics, power-law fits and reports.

pub mod analysis;
pub mod estimators;
pub mod execute;
pub mod fit;
pub mod plan;
pub mod report;
pub mod vanhove;

pub use analysis::{
    analyze_run, analyze_sweep, compare_terms, f1_density, SweepRecord, SweepResult, TermReport, TermRow,
};
pub use estimators::{EstimatorConfig, EstimatorSet};
pub use execute::{execute_sweep, load_sweep, NRun, SweepData, SweepOptions};
pub use fit::{fit_power_law, PowerLawFit};
pub use plan::{default_replicas, validate_plan, CheckedEntry, CheckedPlan, PlanEntry, SweepPlan};
pub use report::write_reports;
pub use vanhove::{lens_volume, van_hove_diagnostics, van_hove_probe, VanHoveAccumulator, VanHoveProbe};
