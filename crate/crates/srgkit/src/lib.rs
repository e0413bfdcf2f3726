//! Scaled relative graphs (SRGs) of discrete-time LTI operators.
//!
//! The SRG of an operator is a subset of the extended complex plane that
//! collects the gain and phase pairs (‖y‖/‖u‖)·exp(±i∠(u,y)) over all
//! admissible inputs. For a linear time-invariant operator it equals an
//! intersection of annuli: for each real shift `alpha`, the annulus centered
//! at `alpha` whose inner and outer radii are the minimum and maximum gain of
//! the shifted operator. This crate computes those radii three ways:
//!
//! * from a state-space model, via storage-function LMIs ([`gains::ss`]),
//! * from a noise-free input-output trajectory, via data-matrix LMIs
//!   ([`gains::data`]),
//! * from a noisy trajectory, via an S-procedure over a data-consistency set
//!   ([`gains::robust`]),
//!
//! and turns the resulting gain profiles into rasterized regions with
//! deterministic exports ([`srg`]). Feasibility of every LMI is decided by a
//! small pluggable semidefinite backend ([`sdp`]).
//!
//! All numerics are generic over the scalar type through [`scalar::Scalar`]
//! (`f32` or `f64`); the aliases at the crate root fix `f64` for callers that
//! do not need the generality.

pub mod fixtures;
pub mod gains;
pub mod io;
pub mod lti;
pub mod scalar;
pub mod sdp;
pub mod srg;

pub use scalar::{cvt, Scalar};

/// `f64` state-space model.
pub type StateSpace64 = lti::StateSpace<f64>;
/// `f64` input-output trajectory.
pub type Trajectory64 = lti::Trajectory<f64>;
/// `f64` data-matrix bundle.
pub type DataMatrices64 = gains::data::DataMatrices<f64>;
/// `f64` noise model.
pub type NoiseModel64 = gains::robust::NoiseModel<f64>;
/// `f64` gain bounds at one shift.
pub type GainBounds64 = gains::GainBounds<f64>;
/// `f64` gain profile over a shift grid.
pub type GainProfile64 = srg::GainProfile<f64>;
/// `f64` rasterized SRG region.
pub type SrgRegion64 = srg::SrgRegion<f64>;
