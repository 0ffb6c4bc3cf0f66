//! Configuration-driven runs: TOML problem files, the solve/validate
//! pipeline, and the files it writes.

mod config;
mod levelset;
mod run;

pub use config::{AutoTimeConfig, Problem, RunConfig, RunMode, TimeBound};
pub use levelset::{export_levelset_grid, write_levelset_csv, LevelsetRow};
pub use run::{
    run, CrossCheck, ModeSummary, OrderSummary, RunOutcome, Summary, ValidationDigest, EXIT_CONFIG, EXIT_FAILED,
    EXIT_OK,
};
