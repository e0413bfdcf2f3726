//! Gain bounds computed from a state-space model.
//!
//! The maximum-gain certificate asks for `P` with
//! `[A'PA - P + C'C, A'PB + C'D; (.)', B'PB + D'D - g^2 I] ⪯ 0`,
//! equivalently `G'PG - E'PE + H'H - g^2 J ⪯ 0` with `G = [A B]`,
//! `E = [I 0]`, `H = [C D]` and `J` selecting the input block. The
//! minimum-gain certificate flips the sign of the `H'H` and level terms.
//! `P ⪰ 0` is demanded only for the truncated-limit operator kind.

use nalgebra::DMatrix;

use crate::lti::{
    shift_output, OperatorKind, StateSpace, FEEDTHROUGH_SINGULAR_TOL,
};
use crate::scalar::{cvt, Scalar};
use crate::sdp::{
    bisect_gain, solver_from_env, BisectOutcome, LmiConstraint, LmiProblem, Orientation, PsdTerm,
    SdpError, Strictness, DEFAULT_EPS_REL, RELAXED_EPS_REL,
};

use super::{Gain, GainBounds, GainError, GainOpts};

/// Grid used when the frequency sweep only seeds a bisection bracket.
const BRACKET_ORACLE_GRID: usize = 2048;

fn eps_for(strictness: Strictness) -> f64 {
    match strictness {
        Strictness::Default => DEFAULT_EPS_REL,
        Strictness::Relaxed => RELAXED_EPS_REL,
    }
}

/// Assembles the gain certificate at a fixed level.
fn gain_problem<T: Scalar>(
    ss: &StateSpace<T>,
    level: T,
    is_max: bool,
    kind: OperatorKind,
    eps_rel: f64,
) -> LmiProblem<T> {
    let n = ss.state_dim();
    let m = ss.io_dim();
    let mut g_fac = DMatrix::<T>::zeros(n, n + m);
    g_fac.view_mut((0, 0), (n, n)).copy_from(ss.a());
    g_fac.view_mut((0, n), (n, m)).copy_from(ss.b());
    let mut e_fac = DMatrix::<T>::zeros(n, n + m);
    e_fac.view_mut((0, 0), (n, n)).fill_with_identity();
    let mut h = DMatrix::<T>::zeros(m, n + m);
    h.view_mut((0, 0), (m, n)).copy_from(ss.c());
    h.view_mut((0, n), (m, m)).copy_from(ss.d());

    let hth = h.transpose() * &h;
    let sq = level * level;
    let mut constant = if is_max { hth } else { -hth };
    for j in 0..m {
        let idx = n + j;
        if is_max {
            constant[(idx, idx)] -= sq;
        } else {
            constant[(idx, idx)] += sq;
        }
    }

    let mut prob = LmiProblem::new(n, kind == OperatorKind::TruncatedLimit, 0);
    prob.eps_rel = cvt(eps_rel);
    prob.constraints.push(LmiConstraint {
        constant,
        p_terms: vec![
            PsdTerm { factor: g_fac, sign: T::one() },
            PsdTerm { factor: e_fac, sign: -T::one() },
        ],
        scalar_terms: vec![],
    });
    prob
}

/// Extreme singular values of the feedthrough; the exact gains whenever the
/// model has no input-to-state-to-output path.
fn static_extremes<T: Scalar>(ss: &StateSpace<T>) -> (T, T) {
    let sv = ss.d().clone().svd(false, false).singular_values;
    let mut hi = T::zero();
    let mut lo = T::zero();
    for (i, &s) in sv.iter().enumerate() {
        if i == 0 {
            hi = s;
            lo = s;
        } else {
            hi = hi.max(s);
            lo = lo.min(s);
        }
    }
    (lo, hi)
}

fn is_effectively_static<T: Scalar>(ss: &StateSpace<T>) -> bool {
    ss.state_dim() == 0 || ss.b().amax() == T::zero() || ss.c().amax() == T::zero()
}

/// Frequency-sampling gain estimate of the shifted operator.
///
/// Sweeps `theta` uniformly over the closed upper half of the unit circle
/// (conjugate symmetry covers the rest for real systems) and records the
/// extreme singular values of the response minus `alpha I`. For systems
/// without unit-circle poles this equals the square-summable-kind gains up
/// to grid refinement error.
pub fn gain_freq_oracle<T: Scalar>(
    ss: &StateSpace<T>,
    alpha: T,
    grid_size: usize,
) -> Result<GainBounds<T>, GainError> {
    let grid = grid_size.max(2);
    let m = ss.io_dim();
    let mut lo = T::zero();
    let mut hi = T::zero();
    for j in 0..grid {
        let theta = cvt::<T>(std::f64::consts::PI) * cvt::<T>(j as f64) / cvt::<T>((grid - 1) as f64);
        let mut resp = crate::lti::freq_response(ss, theta)?;
        for i in 0..m {
            resp[(i, i)].re -= alpha;
        }
        let sv = resp.svd(false, false).singular_values;
        let (mut smin, mut smax) = (sv[0], sv[0]);
        for &s in sv.iter() {
            smin = smin.min(s);
            smax = smax.max(s);
        }
        if j == 0 {
            lo = smin;
            hi = smax;
        } else {
            lo = lo.min(smin);
            hi = hi.max(smax);
        }
    }
    Ok(GainBounds {
        alpha,
        zeta: lo,
        gamma: Gain::Finite(hi),
        kind: OperatorKind::L2,
        rel_tol: T::zero(),
    })
}

/// Cheap oracle bracket, available when no pole sits on the unit circle.
fn oracle_bracket<T: Scalar>(ss: &StateSpace<T>) -> Option<(T, T)> {
    if ss.has_unit_circle_eigenvalue(cvt(1e-8)) {
        return None;
    }
    gain_freq_oracle(ss, T::zero(), BRACKET_ORACLE_GRID)
        .ok()
        .and_then(|gb| gb.gamma.finite().map(|g| (gb.zeta, g)))
}

fn run_bisect<T: Scalar>(
    ss: &StateSpace<T>,
    is_max: bool,
    kind: OperatorKind,
    opts: &GainOpts<T>,
    lo: T,
    hi: T,
) -> Result<BisectOutcome<T>, GainError> {
    let solver = solver_from_env::<T>().map_err(|source| GainError::Solver { alpha: 0.0, source })?;
    let orientation = if is_max { Orientation::FeasibleAbove } else { Orientation::FeasibleBelow };
    let predicate = |level: T, strictness: Strictness| -> Result<_, SdpError> {
        let prob = gain_problem(ss, level, is_max, kind, eps_for(strictness));
        solver.check(&prob)
    };
    bisect_gain(predicate, lo, hi, orientation, &opts.bisect())
        .map_err(|source| GainError::Solver { alpha: 0.0, source })
}

fn max_gain_impl<T: Scalar>(
    ss: &StateSpace<T>,
    kind: OperatorKind,
    opts: &GainOpts<T>,
    bracket: Option<Option<(T, T)>>,
) -> Result<Gain<T>, GainError> {
    if is_effectively_static(ss) {
        return Ok(Gain::Finite(static_extremes(ss).1));
    }
    if kind == OperatorKind::TruncatedLimit && ss.spectral_radius() > T::one() + cvt(1e-8) {
        // A minimal realization beyond the stability boundary admits no
        // nonnegative storage certificate at any finite level.
        return Ok(Gain::Infinite);
    }
    let bracket = bracket.unwrap_or_else(|| oracle_bracket(ss));
    let (lo, hi) = match bracket {
        Some((_, g_or)) => (
            g_or * cvt(0.999),
            g_or * cvt(1.5) + cvt(1e-6),
        ),
        None => (T::zero(), cvt::<T>(2.0) * (T::one() + static_extremes(ss).1)),
    };
    match run_bisect(ss, true, kind, opts, lo, hi)? {
        BisectOutcome::Threshold(g) => Ok(Gain::Finite(g)),
        BisectOutcome::Infinity => Ok(Gain::Infinite),
        BisectOutcome::Zero => Ok(Gain::Finite(T::zero())),
    }
}

fn min_gain_impl<T: Scalar>(
    ss: &StateSpace<T>,
    kind: OperatorKind,
    opts: &GainOpts<T>,
    bracket: Option<Option<(T, T)>>,
) -> Result<T, GainError> {
    if is_effectively_static(ss) {
        return Ok(static_extremes(ss).0);
    }
    if kind == OperatorKind::TruncatedLimit {
        let (dmin, dmax) = static_extremes(ss);
        if dmin <= cvt::<T>(FEEDTHROUGH_SINGULAR_TOL) * dmax {
            // Inputs arriving at the truncation horizon leave the output
            // in the feedthrough's near-null direction; no positive lower
            // bound survives the limit.
            return Ok(T::zero());
        }
    }
    let bracket = bracket.unwrap_or_else(|| oracle_bracket(ss));
    let hi = match bracket {
        Some((z_or, _)) => z_or * cvt(1.5) + cvt(1e-6),
        None => cvt::<T>(2.0) * (T::one() + static_extremes(ss).1),
    };
    match run_bisect(ss, false, kind, opts, T::zero(), hi)? {
        BisectOutcome::Threshold(z) => Ok(z),
        BisectOutcome::Zero => Ok(T::zero()),
        BisectOutcome::Infinity => Ok(T::zero()),
    }
}

/// Maximum gain of the operator itself (no shift applied).
pub fn max_gain<T: Scalar>(
    ss: &StateSpace<T>,
    kind: OperatorKind,
    opts: &GainOpts<T>,
) -> Result<Gain<T>, GainError> {
    max_gain_impl(ss, kind, opts, None)
}

/// Minimum gain of the operator itself (no shift applied).
pub fn min_gain<T: Scalar>(
    ss: &StateSpace<T>,
    kind: OperatorKind,
    opts: &GainOpts<T>,
) -> Result<T, GainError> {
    min_gain_impl(ss, kind, opts, None)
}

/// Both gain bounds of the operator shifted by `alpha` (feedthrough becomes
/// `D - alpha I`), sharing one frequency-sweep bracket between them.
pub fn gain_annulus<T: Scalar>(
    ss: &StateSpace<T>,
    alpha: T,
    kind: OperatorKind,
    opts: &GainOpts<T>,
) -> Result<GainBounds<T>, GainError> {
    let shifted = shift_output(ss, alpha);
    let alpha_f = num_traits::cast::<T, f64>(alpha).unwrap_or(f64::NAN);
    let bracket = oracle_bracket(&shifted);
    let gamma = max_gain_impl(&shifted, kind, opts, Some(bracket))
        .map_err(|e| e.at_alpha(alpha_f))?;
    let zeta = min_gain_impl(&shifted, kind, opts, Some(bracket))
        .map_err(|e| e.at_alpha(alpha_f))?;
    Ok(GainBounds { alpha, zeta, gamma, kind, rel_tol: opts.rel_tol })
}
