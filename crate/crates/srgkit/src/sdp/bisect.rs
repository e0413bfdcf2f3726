//! Scalar gain search on top of a monotone feasibility predicate.

use crate::scalar::{cvt, Scalar};

use super::{FeasibilityResult, SdpError};

/// Strictness the predicate should apply when assembling its problem.
/// `Relaxed` is requested once per query point after an inconclusive solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Default,
    Relaxed,
}

/// Which side of the threshold is feasible.
///
/// Upper gain bounds are `FeasibleAbove`: every gain level at or above the
/// true bound admits a certificate. Lower bounds are `FeasibleBelow`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    FeasibleAbove,
    FeasibleBelow,
}

/// Result of a gain search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BisectOutcome<T> {
    /// Certified threshold, rounded toward the feasible side.
    Threshold(T),
    /// Feasibility was never reached below the cap; the gain is unbounded.
    Infinity,
    /// Already infeasible at the floor; the gain is indistinguishable
    /// from zero.
    Zero,
}

/// Search controls. The defaults match the crate-wide tolerances.
#[derive(Debug, Clone, Copy)]
pub struct BisectOpts<T: Scalar> {
    /// Relative width at which the bracket is considered resolved.
    pub rel_tol: T,
    /// Upper limit of the doubling search before declaring `Infinity`.
    pub cap: T,
    /// Smallest gain level ever queried; also an absolute width floor.
    pub floor: T,
}

impl<T: Scalar> Default for BisectOpts<T> {
    fn default() -> Self {
        Self { rel_tol: cvt(1e-6), cap: cvt(1e6), floor: cvt(1e-9) }
    }
}

/// Finds the feasibility threshold of `predicate` over gain levels.
///
/// The predicate must be monotone in the direction given by `orientation`;
/// observed violations are reported as [`SdpError::NonMonotone`] rather
/// than silently absorbed. Inconclusive solver answers are retried with
/// relaxed strictness and at a slightly perturbed query point; a point
/// that stays inconclusive is then treated as infeasible. That choice is
/// conservative for both orientations: the search only tightens a bracket
/// endpoint toward a level that carried a verified certificate.
///
/// The returned threshold is always an endpoint that was certified
/// feasible, so upper bounds are rounded up and lower bounds are rounded
/// down; the result stays on the conservative side of the true value.
pub fn bisect_gain<T, F>(
    mut predicate: F,
    lo: T,
    hi: T,
    orientation: Orientation,
    opts: &BisectOpts<T>,
) -> Result<BisectOutcome<T>, SdpError>
where
    T: Scalar,
    F: FnMut(T, Strictness) -> Result<FeasibilityResult<T>, SdpError>,
{
    if !(hi > lo) || lo < T::zero() {
        return Err(SdpError::BadProblem(format!(
            "bad bisection bracket [{lo}, {hi}]"
        )));
    }

    let mut min_feas: Option<T> = None;
    let mut max_feas: Option<T> = None;
    let mut min_infeas: Option<T> = None;
    let mut max_infeas: Option<T> = None;
    let as_f64 = |v: T| num_traits::cast::<T, f64>(v).unwrap_or(f64::NAN);

    let mut resolve = |g: T, gap: T, pred: &mut F| -> Result<(T, bool), SdpError> {
        let mut queries = vec![g];
        if gap > T::zero() {
            queries.push(g + gap * cvt(0.0137));
        }
        let mut decided = None;
        'points: for &q in &queries {
            for strictness in [Strictness::Default, Strictness::Relaxed] {
                let res = pred(q, strictness)?;
                match res.status {
                    super::FeasibilityStatus::Feasible => {
                        decided = Some((q, true));
                        break 'points;
                    }
                    super::FeasibilityStatus::Infeasible => {
                        decided = Some((q, false));
                        break 'points;
                    }
                    super::FeasibilityStatus::Inconclusive => {}
                }
            }
        }
        // Near the threshold neither a witness nor a certificate may survive
        // verification at f64 scale. Such points are taken as infeasible:
        // bracket endpoints only ever tighten toward certified levels.
        let (q, feas, certified) = match decided {
            Some((q, feas)) => (q, feas, true),
            None => (g, false, false),
        };
        if certified {
            if feas {
                min_feas = Some(min_feas.map_or(q, |v: T| v.min(q)));
                max_feas = Some(max_feas.map_or(q, |v: T| v.max(q)));
            } else {
                min_infeas = Some(min_infeas.map_or(q, |v: T| v.min(q)));
                max_infeas = Some(max_infeas.map_or(q, |v: T| v.max(q)));
            }
        }
        let slack = T::one() + cvt(1e-12);
        match orientation {
            Orientation::FeasibleAbove => {
                if let (Some(mi), Some(mf)) = (max_infeas, min_feas) {
                    if mi > mf * slack {
                        return Err(SdpError::NonMonotone {
                            feasible_at: as_f64(mf),
                            infeasible_at: as_f64(mi),
                        });
                    }
                }
            }
            Orientation::FeasibleBelow => {
                if let (Some(mf), Some(mi)) = (max_feas, min_infeas) {
                    if mf > mi * slack {
                        return Err(SdpError::NonMonotone {
                            feasible_at: as_f64(mf),
                            infeasible_at: as_f64(mi),
                        });
                    }
                }
            }
        }
        Ok((q, feas))
    };

    let two: T = cvt(2.0);
    match orientation {
        Orientation::FeasibleAbove => {
            let mut lo = lo;
            let mut hi = hi;
            loop {
                if resolve(hi, T::zero(), &mut predicate)?.1 {
                    break;
                }
                lo = hi;
                hi *= two;
                if hi > opts.cap {
                    return Ok(BisectOutcome::Infinity);
                }
            }
            while hi - lo > opts.rel_tol * hi.max(opts.floor) {
                let mid = (lo + hi) / two;
                let (point, feas) = resolve(mid, hi - lo, &mut predicate)?;
                if feas {
                    hi = point;
                } else {
                    lo = point;
                }
            }
            Ok(BisectOutcome::Threshold(hi))
        }
        Orientation::FeasibleBelow => {
            let mut lo = lo.max(opts.floor);
            let mut hi = hi.max(lo * two);
            if !resolve(lo, T::zero(), &mut predicate)?.1 {
                return Ok(BisectOutcome::Zero);
            }
            loop {
                if !resolve(hi, T::zero(), &mut predicate)?.1 {
                    break;
                }
                lo = hi;
                hi *= two;
                if hi > opts.cap {
                    return Ok(BisectOutcome::Threshold(lo));
                }
            }
            while hi - lo > opts.rel_tol * hi.max(opts.floor) {
                let mid = (lo + hi) / two;
                let (point, feas) = resolve(mid, hi - lo, &mut predicate)?;
                if feas {
                    lo = point;
                } else {
                    hi = point;
                }
            }
            Ok(BisectOutcome::Threshold(lo))
        }
    }
}
