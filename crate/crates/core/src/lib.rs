//! Online peak-demand minimization with a limited, discharge-only energy store.
//!
//! The crate is organised bottom-up:
//!
//! * [`instance`] holds the static problem data and the causal online state.
//! * [`offline`] solves the clairvoyant problem in closed form (water filling).
//! * [`lp`] is a small dense two-phase simplex solver plus the Charnes–Cooper
//!   reduction for linear-fractional programs.
//! * [`cr`] computes the optimal competitive ratio from a linear number of
//!   linear-fractional programs, and carries a brute-force oracle for it.
//! * [`online`] implements the ratio-pursuing policy and its anytime-optimal
//!   refinement (with monthly-peak and depleting variants).
//! * [`baselines`] contains the threshold, equal-split and receding-horizon
//!   comparison policies.
//! * [`harness`] ingests charging traces, generates synthetic days and runs
//!   experiments.
//! * [`cli`] is the command-line front end used by the `peakmin` binary.

pub mod baselines;
pub mod cli;
pub mod cr;
mod error;
pub mod harness;
pub mod instance;
pub mod lp;
pub mod offline;
pub mod online;

pub use error::{Error, Result};
pub use instance::{DemandProfile, DischargeSchedule, Instance, OnlineState, RateLimit};
