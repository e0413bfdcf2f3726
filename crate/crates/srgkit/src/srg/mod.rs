//! From per-shift gain annuli to regions of the extended complex plane.
//!
//! The operator's scaled relative graph is outer-approximated by
//! intersecting, over a grid of real centers `alpha`, the annuli
//! `{alpha + z : zeta(alpha) ≤ |z| ≤ gamma(alpha)}`. This module owns the
//! annulus family ([`GainProfile`]), point membership, and grid selection;
//! rasterization and export live in the submodules.

mod export;
mod raster;

pub use export::{profile_csv, region_csv, region_pgm, region_svg};
pub use raster::{
    rasterize, region_contains, region_diff_count, RasterMode, Resolution, SrgRegion, Window,
};

use num_complex::Complex;
use rayon::prelude::*;

use crate::gains::{Gain, GainBounds, GainError};
use crate::lti::OperatorKind;
use crate::scalar::{cvt, Scalar};

/// Default number of annulus centers.
pub const DEFAULT_ALPHA_COUNT: usize = 101;

/// Errors from profile construction and region operations.
#[derive(Debug, thiserror::Error)]
pub enum SrgError {
    #[error("profile must contain at least one entry")]
    EmptyProfile,
    #[error("profile centers must be strictly increasing (entry {index})")]
    UnorderedAlphas { index: usize },
    #[error("profile entry {index} is inconsistent: {detail}")]
    BadEntry { index: usize, detail: String },
    #[error(
        "gain bound moves faster than the center between entries {i} and {j}: \
         |{gi} - {gj}| > |{ai} - {aj}| + 2 tol"
    )]
    LipschitzViolation { i: usize, j: usize, gi: f64, gj: f64, ai: f64, aj: f64 },
    #[error("entries mix operator kinds")]
    MixedKinds,
    #[error("all gain bounds are unbounded; an explicit center window is required")]
    UnboundedNeedsWindow,
    #[error("invalid window or resolution: {0}")]
    InvalidWindow(String),
    #[error("regions have different windows or resolutions")]
    RegionMismatch,
    #[error("gain computation failed at alpha {alpha}: {source}")]
    Gain {
        alpha: f64,
        #[source]
        source: Box<GainError>,
    },
}

/// One annulus of the family.
#[derive(Debug, Clone, Copy)]
pub struct ProfileEntry<T: Scalar> {
    pub alpha: T,
    pub zeta: T,
    pub gamma: Gain<T>,
}

/// Validated, ordered annulus family with its tolerance metadata.
#[derive(Debug, Clone)]
pub struct GainProfile<T: Scalar> {
    entries: Vec<ProfileEntry<T>>,
    kind: OperatorKind,
    rel_tol: T,
    abs_tol: T,
}

impl<T: Scalar> GainProfile<T> {
    /// Validates ordering, entry consistency, and the Lipschitz property
    /// of the outer bound (its slope in the center cannot exceed one, up
    /// to twice the absolute tolerance).
    pub fn new(
        entries: Vec<ProfileEntry<T>>,
        kind: OperatorKind,
        rel_tol: T,
    ) -> Result<Self, SrgError> {
        if entries.is_empty() {
            return Err(SrgError::EmptyProfile);
        }
        let mut max_gamma = T::zero();
        for (idx, e) in entries.iter().enumerate() {
            if idx > 0 && !(entries[idx - 1].alpha < e.alpha) {
                return Err(SrgError::UnorderedAlphas { index: idx });
            }
            if e.zeta < T::zero() {
                return Err(SrgError::BadEntry {
                    index: idx,
                    detail: "negative inner radius".into(),
                });
            }
            if let Gain::Finite(g) = e.gamma {
                if g < T::zero() {
                    return Err(SrgError::BadEntry {
                        index: idx,
                        detail: "negative outer radius".into(),
                    });
                }
                max_gamma = max_gamma.max(g);
            }
        }
        let abs_tol = rel_tol * max_gamma.max(T::one());
        for (idx, e) in entries.iter().enumerate() {
            if let Gain::Finite(g) = e.gamma {
                if e.zeta > g + abs_tol + abs_tol {
                    return Err(SrgError::BadEntry {
                        index: idx,
                        detail: "inner radius exceeds outer radius".into(),
                    });
                }
            }
        }
        let as_f64 = |v: T| num_traits::cast::<T, f64>(v).unwrap_or(f64::NAN);
        for i in 0..entries.len() {
            for j in i + 1..entries.len() {
                let (Gain::Finite(gi), Gain::Finite(gj)) = (entries[i].gamma, entries[j].gamma)
                else {
                    continue;
                };
                let gap = (gi - gj).abs();
                let da = (entries[i].alpha - entries[j].alpha).abs();
                if gap > da + abs_tol + abs_tol {
                    return Err(SrgError::LipschitzViolation {
                        i,
                        j,
                        gi: as_f64(gi),
                        gj: as_f64(gj),
                        ai: as_f64(entries[i].alpha),
                        aj: as_f64(entries[j].alpha),
                    });
                }
            }
        }
        Ok(Self { entries, kind, rel_tol, abs_tol })
    }

    pub fn entries(&self) -> &[ProfileEntry<T>] {
        &self.entries
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn rel_tol(&self) -> T {
        self.rel_tol
    }

    /// Absolute tolerance used by conservative rasters: the relative
    /// tolerance scaled by the largest finite outer radius.
    pub fn abs_tol(&self) -> T {
        self.abs_tol
    }

    /// True when every outer bound is unbounded; the region then includes
    /// the point at infinity.
    pub fn all_unbounded(&self) -> bool {
        self.entries.iter().all(|e| !e.gamma.is_finite())
    }

    /// Largest finite outer radius, if any bound is finite.
    pub fn max_finite_gamma(&self) -> Option<T> {
        let mut out: Option<T> = None;
        for e in &self.entries {
            if let Gain::Finite(g) = e.gamma {
                out = Some(out.map_or(g, |v| v.max(g)));
            }
        }
        out
    }

    /// Outer radius at the center closest to zero, when finite.
    pub fn gamma_near_origin(&self) -> Option<T> {
        let mut best: Option<(T, Gain<T>)> = None;
        for e in &self.entries {
            let d = e.alpha.abs();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, e.gamma));
            }
        }
        best.and_then(|(_, g)| g.finite())
    }
}

/// Point membership in the annulus intersection.
///
/// Unbounded outer radii and zero inner radii never exclude a point;
/// membership is exact, with no tolerance padding.
pub fn membership<T: Scalar>(z: Complex<T>, profile: &GainProfile<T>) -> bool {
    for e in profile.entries() {
        let dist = ((z.re - e.alpha) * (z.re - e.alpha) + z.im * z.im).sqrt();
        if dist < e.zeta {
            return false;
        }
        if let Gain::Finite(g) = e.gamma {
            if dist > g {
                return false;
            }
        }
    }
    true
}

/// Uniform center grid covering the reach of the annulus family.
///
/// With a finite outer radius at the origin the grid spans
/// `[-1.1 gamma0, 1.1 gamma0]`; an unbounded one requires the explicit
/// window. Odd counts place a center exactly at zero for symmetric spans.
pub fn default_alpha_grid<T: Scalar>(
    gamma0: Gain<T>,
    window: Option<(T, T)>,
    count: usize,
) -> Result<Vec<T>, SrgError> {
    let (lo, hi) = match (gamma0, window) {
        (_, Some((a, b))) => {
            if !(a < b) {
                return Err(SrgError::InvalidWindow(format!("bad center window [{a}, {b}]")));
            }
            (a, b)
        }
        (Gain::Finite(g), None) => {
            let w = g * cvt(1.1);
            (-w, w)
        }
        (Gain::Infinite, None) => return Err(SrgError::UnboundedNeedsWindow),
    };
    let count = count.max(1);
    if count == 1 {
        return Ok(vec![(lo + hi) / cvt(2.0)]);
    }
    let mid = (lo + hi) / cvt(2.0);
    let half = (hi - lo) / cvt(2.0);
    let denom = cvt::<T>((count - 1) as f64);
    Ok((0..count)
        .map(|i| {
            let num = cvt::<T>(2.0 * i as f64 - (count - 1) as f64);
            mid + half * (num / denom)
        })
        .collect())
}

/// Evaluates a gain routine over the center grid and assembles a profile.
///
/// Centers are processed in parallel; the first failure aborts with its
/// center attached.
pub fn compute_profile<T, F>(gain_fn: F, alphas: &[T]) -> Result<GainProfile<T>, SrgError>
where
    T: Scalar,
    F: Fn(T) -> Result<GainBounds<T>, GainError> + Sync,
{
    if alphas.is_empty() {
        return Err(SrgError::EmptyProfile);
    }
    let results: Result<Vec<GainBounds<T>>, SrgError> = alphas
        .par_iter()
        .map(|&alpha| {
            gain_fn(alpha).map_err(|source| SrgError::Gain {
                alpha: num_traits::cast::<T, f64>(alpha).unwrap_or(f64::NAN),
                source: Box::new(source),
            })
        })
        .collect();
    let bounds = results?;
    let kind = bounds[0].kind;
    if bounds.iter().any(|b| b.kind != kind) {
        return Err(SrgError::MixedKinds);
    }
    let mut rel_tol = T::zero();
    for b in &bounds {
        rel_tol = rel_tol.max(b.rel_tol);
    }
    let entries = bounds
        .into_iter()
        .map(|b| ProfileEntry { alpha: b.alpha, zeta: b.zeta, gamma: b.gamma })
        .collect();
    GainProfile::new(entries, kind, rel_tol)
}
