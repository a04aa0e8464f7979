//! Robust ahead-of-time energy management and transmit beamforming for a
//! smart-grid powered CoMP downlink cluster.
//!
//! The library computes per-slot lifted beamformers and per-base-station
//! battery/power schedules that minimize the worst-case energy transaction
//! cost subject to worst-case SINR guarantees, via a Lagrange-dual
//! decomposition: per-slot robust beamforming SDPs, per-station battery LPs,
//! and a proximal bundle method for the nonsmooth worst-case cost term.
//! A Monte-Carlo harness evaluates the resulting schedules against
//! non-robust and heuristic baselines.

pub mod bundle;
pub mod cost;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod sdp;
pub mod uncertainty;

pub use linalg::{HermitianMatrix, LinalgError};
pub use model::{ProblemInstance, Schedule};
