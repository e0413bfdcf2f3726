//! Minimum and maximum gain computation: from models, from clean data,
//! and from noisy data with set-membership noise descriptions.
//!
//! All three routes answer the same question for an annulus center `alpha`:
//! find the largest `zeta` and smallest `gamma` such that the shifted
//! operator's gain certificates hold, by bisecting over the gain level and
//! solving one feasibility LMI per query.

pub mod data;
pub mod robust;
pub mod ss;

use crate::lti::{LtiError, OperatorKind};
use crate::scalar::{cvt, Scalar};
use crate::sdp::{BisectOpts, SdpError};

/// Default relative tolerance of all gain bisection searches.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

/// A nonnegative gain value that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gain<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Gain<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Gain::Finite(_))
    }

    /// The finite value, if there is one.
    pub fn finite(&self) -> Option<T> {
        match self {
            Gain::Finite(v) => Some(*v),
            Gain::Infinite => None,
        }
    }
}

impl<T: Scalar> std::fmt::Display for Gain<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gain::Finite(v) => write!(f, "{v}"),
            Gain::Infinite => write!(f, "inf"),
        }
    }
}

/// Gain annulus of a shifted operator at one center.
#[derive(Debug, Clone, Copy)]
pub struct GainBounds<T: Scalar> {
    /// Real shift at which the bounds were computed.
    pub alpha: T,
    /// Minimum gain (annulus inner radius); a bisection estimate whose
    /// error is bounded by `rel_tol` plus the verifier's slack.
    pub zeta: T,
    /// Maximum gain (annulus outer radius), estimated the same way.
    pub gamma: Gain<T>,
    pub kind: OperatorKind,
    /// Relative tolerance the bisection guaranteed.
    pub rel_tol: T,
}

impl<T: Scalar> GainBounds<T> {
    /// Basic shape check: nonnegative radii, inner not above outer.
    pub fn is_consistent(&self) -> bool {
        if self.zeta < T::zero() {
            return false;
        }
        match self.gamma {
            Gain::Infinite => true,
            Gain::Finite(g) => {
                g >= T::zero() && self.zeta <= g + self.rel_tol * (T::one() + g)
            }
        }
    }
}

/// Shared bisection controls for every gain routine.
#[derive(Debug, Clone, Copy)]
pub struct GainOpts<T: Scalar> {
    /// Relative tolerance of the bisection (attached to every result).
    pub rel_tol: T,
    /// Gain level above which the search declares an unbounded gain.
    pub cap: T,
    /// Gain level below which the search declares a zero gain.
    pub floor: T,
}

impl<T: Scalar> Default for GainOpts<T> {
    fn default() -> Self {
        Self { rel_tol: cvt(DEFAULT_REL_TOL), cap: cvt(1e6), floor: cvt(1e-9) }
    }
}

impl<T: Scalar> GainOpts<T> {
    pub(crate) fn bisect(&self) -> BisectOpts<T> {
        BisectOpts { rel_tol: self.rel_tol, cap: self.cap, floor: self.floor }
    }
}

/// Errors from the gain layer.
#[derive(Debug, thiserror::Error)]
pub enum GainError {
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error("gain search failed at alpha {alpha}: {source}")]
    Solver {
        alpha: f64,
        #[source]
        source: SdpError,
    },
    #[error("input is not persistently exciting of order {order}")]
    NotPersistentlyExciting { order: usize },
    #[error("trajectory has {len} steps but the construction needs {need}")]
    TrajectoryTooShort { len: usize, need: usize },
    #[error("window length must be at least 1, got {l}")]
    InvalidWindow { l: usize },
    #[error("data matrices were built with window length {built}, but {requested} was requested")]
    WindowMismatch { built: usize, requested: usize },
    #[error("noise model dimensions are inconsistent: {0}")]
    NoiseDimension(String),
    #[error("data-consistency matrix is singular or could not be inverted reliably: {0}")]
    SingularConsistency(String),
    #[error(
        "data-consistency upper-left block is not negative definite \
         (largest eigenvalue {lambda_max:.3e}); the data is too weak for \
         robust bounds — use a longer trajectory or a larger window length"
    )]
    IndefiniteQbar { lambda_max: f64 },
}

impl GainError {
    /// Re-tags a solver failure with the annulus center it occurred at.
    pub(crate) fn at_alpha(self, alpha: f64) -> Self {
        match self {
            GainError::Solver { source, .. } => GainError::Solver { alpha, source },
            other => other,
        }
    }
}
