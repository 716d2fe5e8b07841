//! Harvested-power region of a two-user MISO wireless power transfer link
//! with nonlinear, saturating rectennas.

pub mod beam_design;
pub mod channel;
pub mod cli;
pub mod config;
pub mod conic;
pub mod eh_model;
pub mod error;
pub mod linalg;
pub mod output;
pub mod region;
pub mod seed;
pub mod specfun;
pub mod two_point;

pub use beam_design::{compute_phi_point, psi_of_w, ChannelPair, PhiPoint, ScaOptions, Weights};
pub use eh_model::RectennaParams;
pub use error::{Error, Result};
pub use region::{build_phi_curve, solve_policy, sweep_region, PhiCurve, TwoPointPolicy};
