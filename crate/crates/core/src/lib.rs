//! Certified inner approximations of the maximal positively invariant set of
//! a polynomial ODE `x' = f(x)` constrained to a compact basic semialgebraic
//! set `X = {x : g_i(x) >= 0}`.
//!
//! A hierarchy of sum-of-squares programs is assembled over increasing
//! relaxation orders, compiled to semidefinite programs, solved, and the
//! resulting polynomial `v` gives the inner approximation `{x in int(X) : v(x) < 0}`.
//! The [`dynamics`] module re-checks every certificate against simulated
//! trajectories.

pub mod app;
pub mod dynamics;
pub mod error;
pub mod hierarchy;
pub mod moments;
pub mod poly;
pub mod sdp;
pub mod semialgebraic;
pub mod sos;

pub use error::{Error, Result};
