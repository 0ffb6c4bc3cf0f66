//! Trajectory simulation, exit-time statistics, and simulated validation
//! of certificates.

mod exit_time;
mod integrate;
mod validate;

pub use exit_time::{
    auto_time_bound, estimate_avg_exit_time, estimate_avg_exit_time_with_step, sample_interior, AutoTimeBound,
    ExitTimeEstimate, CENSORING_FLAG, DEFAULT_EXIT_HORIZON, TRAJECTORY_CHUNK,
};
pub use integrate::{integrate, integrate_observed, Outcome, TrajectoryResult, DEFAULT_STEP, EXIT_TIME_TOL};
pub use validate::{
    inner_set_volume, symmetric_difference, validate_certificate, FiniteHorizonCheck, InvarianceSummary, ResidualSummary, ValidationConfig,
    ValidationReport, VolumeEstimate,
};
