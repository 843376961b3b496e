//! Monte Carlo simulation of defect-free atom assembly in two interleaved
//! optical-tweezer arrays.
//!
//! The main array is the register; the secondary array, offset by half a
//! pitch, acts as a one-shot reservoir ("supercharging") that fills main
//! array defects before the usual multi-cycle rearrangement. The crate
//! provides the lattice geometry, seeded stochastic processes, the insertion
//! heuristic with an exact matching bound, the intra-array assignment
//! planner, and trial orchestration with confidence intervals.

// `!(x > 0.0)` is used on purpose in validation: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod assignment;
pub mod config;
pub mod error;
pub mod geometry;
pub mod matching;
pub mod montecarlo;
pub mod plan;
pub mod report;
pub mod stochastic;
pub mod supercharge;

pub use assembly::{
    execute_cycle, move_duration, plan_assembly, plan_duration, run_experiment, CycleContext,
    CycleRecord, Experiment, Planner, RunRecord, TargetPattern, TimingParams,
};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use geometry::{ArrayTag, InterleavedLayout, MaskSpec, RegionMask, SiteId, TrapArrayParams};
pub use montecarlo::{
    cumulative_success_curve, expected_atom_count, run_trials, simulate, wilson_interval,
    MeanEstimate, Proportion, TrialStatistics,
};
pub use plan::{Move, MoveKind, MovePlan, SiteRef};
pub use stochastic::{LoadingModel, NoiseParams, OccupancyState, RngStream};
pub use supercharge::{
    execute_insertion, max_matching_oracle, plan_supercharge, ReservoirPolicy, SuperchargeMc,
    SuperchargeReport,
};
