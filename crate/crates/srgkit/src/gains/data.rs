//! Gain bounds from one noise-free trajectory.
//!
//! A window of `l` past inputs and outputs is stacked into the extended
//! state `xi_k = (u_{k-l}..u_{k-1}, y_{k-l}..y_{k-1})`; the trajectory then
//! yields snapshot matrices whose columns advance in lockstep, and the gain
//! certificates of the model route transfer verbatim with the snapshot
//! matrices taking the role of the system matrices.

use nalgebra::DMatrix;

use crate::lti::{is_persistently_exciting, OperatorKind, Trajectory, DEFAULT_RANK_TOL};
use crate::scalar::{cvt, Scalar};
use crate::sdp::{
    bisect_gain, solver_from_env, BisectOutcome, LmiConstraint, LmiProblem, Orientation, PsdTerm,
    SdpError, Strictness, DEFAULT_EPS_REL, RELAXED_EPS_REL,
};

use super::{Gain, GainBounds, GainError, GainOpts};

/// Snapshot matrices of one trajectory for a window length `l`.
///
/// Columns `j = 0..N-l` correspond to time `k = l+j`: `xi` holds the window
/// state `xi_k`, `xi_plus` the advanced window `xi_{k+1}`, and `u`/`y` the
/// current input and output samples.
#[derive(Debug, Clone)]
pub struct DataMatrices<T: Scalar> {
    xi: DMatrix<T>,
    xi_plus: DMatrix<T>,
    u: DMatrix<T>,
    y: DMatrix<T>,
    l: usize,
    m: usize,
    n_samples: usize,
    raw_u: DMatrix<T>,
}

impl<T: Scalar> DataMatrices<T> {
    pub fn xi(&self) -> &DMatrix<T> {
        &self.xi
    }

    pub fn xi_plus(&self) -> &DMatrix<T> {
        &self.xi_plus
    }

    pub fn u(&self) -> &DMatrix<T> {
        &self.u
    }

    pub fn y(&self) -> &DMatrix<T> {
        &self.y
    }

    /// Window length the matrices were built with.
    pub fn window_len(&self) -> usize {
        self.l
    }

    pub fn io_dim(&self) -> usize {
        self.m
    }

    /// Number of trajectory steps the matrices were built from.
    pub fn num_samples(&self) -> usize {
        self.n_samples
    }

    /// Number of snapshot columns.
    pub fn num_cols(&self) -> usize {
        self.n_samples - self.l
    }

    /// The raw input samples, kept for excitation checks.
    pub fn raw_input(&self) -> &DMatrix<T> {
        &self.raw_u
    }
}

/// Stacks the window states of a trajectory into snapshot matrices.
pub fn build_data_matrices<T: Scalar>(
    traj: &Trajectory<T>,
    l: usize,
) -> Result<DataMatrices<T>, GainError> {
    if l == 0 {
        return Err(GainError::InvalidWindow { l });
    }
    let n = traj.len();
    if n < l + 2 {
        return Err(GainError::TrajectoryTooShort { len: n, need: l + 2 });
    }
    let m = traj.channels();
    let cols = n - l;
    let window = |k: usize, mat: &mut DMatrix<T>, j: usize| {
        // Column j gets (u_{k-l}..u_{k-1}, y_{k-l}..y_{k-1}).
        for i in 0..l {
            for ch in 0..m {
                mat[(i * m + ch, j)] = traj.u()[(k - l + i, ch)];
                mat[(l * m + i * m + ch, j)] = traj.y()[(k - l + i, ch)];
            }
        }
    };
    let mut xi = DMatrix::<T>::zeros(2 * l * m, cols);
    let mut xi_plus = DMatrix::<T>::zeros(2 * l * m, cols);
    let mut u = DMatrix::<T>::zeros(m, cols);
    let mut y = DMatrix::<T>::zeros(m, cols);
    for j in 0..cols {
        let k = l + j;
        window(k, &mut xi, j);
        window(k + 1, &mut xi_plus, j);
        for ch in 0..m {
            u[(ch, j)] = traj.u()[(k, ch)];
            y[(ch, j)] = traj.y()[(k, ch)];
        }
    }
    Ok(DataMatrices {
        xi,
        xi_plus,
        u,
        y,
        l,
        m,
        n_samples: n,
        raw_u: traj.u().clone(),
    })
}

/// Replaces every output sample by `y - alpha u` throughout the matrices,
/// turning them into data of the shifted operator.
pub fn shift_data<T: Scalar>(dm: &DataMatrices<T>, alpha: T) -> DataMatrices<T> {
    let mut out = dm.clone();
    let lm = dm.l * dm.m;
    for mat in [&mut out.xi, &mut out.xi_plus] {
        for j in 0..mat.ncols() {
            for r in 0..lm {
                let u_val = mat[(r, j)];
                mat[(lm + r, j)] -= alpha * u_val;
            }
        }
    }
    for j in 0..out.u.ncols() {
        for ch in 0..dm.m {
            let u_val = out.u[(ch, j)];
            out.y[(ch, j)] -= alpha * u_val;
        }
    }
    out
}

/// Trajectory-level counterpart of [`shift_data`].
pub fn shift_trajectory<T: Scalar>(traj: &Trajectory<T>, alpha: T) -> Trajectory<T> {
    let y = traj.y() - traj.u().scale(alpha);
    Trajectory::new(traj.u().clone(), y).expect("shapes preserved")
}

/// Options of the data-driven gain routines.
#[derive(Debug, Clone, Copy, Default)]
pub struct DataGainOpts<T: Scalar> {
    pub base: GainOpts<T>,
    /// State dimension of the generating system, when known. Supplying it
    /// turns on the excitation-order precondition check; leaving it out is
    /// an explicit waiver.
    pub state_dim: Option<usize>,
}

fn check_excitation<T: Scalar>(
    dm: &DataMatrices<T>,
    opts: &DataGainOpts<T>,
) -> Result<(), GainError> {
    let Some(n) = opts.state_dim else {
        return Ok(());
    };
    let order = n + dm.l + 1;
    let ok = is_persistently_exciting(&dm.raw_u, order, cvt(DEFAULT_RANK_TOL))?;
    if ok {
        Ok(())
    } else {
        Err(GainError::NotPersistentlyExciting { order })
    }
}

/// Compressed congruence factors of the snapshot constraint.
///
/// The raw constraint `XiPlus'P XiPlus - Xi'P Xi + Y'Y - g^2 U'U ⪯ 0` has
/// one row per snapshot column and a large common null space; stacking the
/// four matrices, factoring by a thin singular value decomposition, and
/// keeping the dominant left factor is a congruence that preserves
/// feasibility at every level while making the constraint strictly
/// satisfiable.
struct CompressedData<T: Scalar> {
    v_plus: DMatrix<T>,
    v_now: DMatrix<T>,
    v_y: DMatrix<T>,
    v_u: DMatrix<T>,
}

fn compress<T: Scalar>(dm: &DataMatrices<T>) -> CompressedData<T> {
    let p = 2 * dm.l * dm.m;
    let m = dm.m;
    let rows = 2 * p + 2 * m;
    let mut w = DMatrix::<T>::zeros(rows, dm.num_cols());
    w.view_mut((0, 0), (p, dm.num_cols())).copy_from(&dm.xi_plus);
    w.view_mut((p, 0), (p, dm.num_cols())).copy_from(&dm.xi);
    w.view_mut((2 * p, 0), (m, dm.num_cols())).copy_from(&dm.y);
    w.view_mut((2 * p + m, 0), (m, dm.num_cols())).copy_from(&dm.u);

    // Snapshot columns of an exponentially unstable record grow with their
    // time index, which buries the input rows of the early samples under
    // the output rows of the late ones. Scaling individual columns is a
    // reparametrization of the span the constraint quantifies over, so it
    // leaves the feasible set untouched while flattening that growth.
    for j in 0..w.ncols() {
        let norm = w.column(j).norm().max(cvt(1e-300));
        for i in 0..rows {
            w[(i, j)] /= norm;
        }
    }

    let svd = w.clone().svd(true, false);
    let u_fac = svd.u.expect("left factor requested");
    let sv = &svd.singular_values;
    let smax = sv[0].max(cvt(1e-300));
    let tol = cvt::<T>(1e-10) * smax;
    let rank = sv.iter().filter(|&&s| s > tol).count().max(1);
    let mut smin_pos = smax;
    for &s in sv.iter() {
        if s > T::zero() {
            smin_pos = smin_pos.min(s);
        }
    }
    // One common column scaling is a congruence by a positive scalar and
    // leaves the feasible levels unchanged; applied only for badly scaled
    // data.
    let scale = if smax > cvt::<T>(1e10) * smin_pos { T::one() / smax } else { T::one() };

    let mut wr = DMatrix::<T>::zeros(rows, rank);
    for r in 0..rank {
        for i in 0..rows {
            wr[(i, r)] = u_fac[(i, r)] * sv[r] * scale;
        }
    }
    let v_plus = wr.view((0, 0), (p, rank)).into_owned();
    let v_now = wr.view((p, 0), (p, rank)).into_owned();

    // A shift by a large center leaves the input-window rows of the snapshot
    // factors orders of magnitude below the output-window rows, and the
    // squared imbalance poisons the Newton systems of the feasibility
    // search. Whitening the joint factor Gram is a congruence of the
    // certificate variable, so the feasible levels are unchanged while the
    // search sees well-scaled coefficients.
    let gram = &v_plus * v_plus.transpose() + &v_now * v_now.transpose();
    let eig = gram.symmetric_eigen();
    let lam_max = eig.eigenvalues.amax().max(cvt(1e-300));
    let lam_floor = cvt::<T>(1e-14) * lam_max;
    let mut white = DMatrix::<T>::zeros(p, p);
    for k in 0..p {
        let w = T::one() / eig.eigenvalues[k].max(lam_floor).sqrt();
        let col = eig.eigenvectors.column(k);
        for i in 0..p {
            for j in 0..p {
                white[(i, j)] += w * col[i] * col[j];
            }
        }
    }
    CompressedData {
        v_plus: &white * &v_plus,
        v_now: &white * &v_now,
        v_y: wr.view((2 * p, 0), (m, rank)).into_owned(),
        v_u: wr.view((2 * p + m, 0), (m, rank)).into_owned(),
    }
}

fn data_gain_problem<T: Scalar>(
    cd: &CompressedData<T>,
    p_dim: usize,
    level: T,
    is_max: bool,
    kind: OperatorKind,
    eps_rel: f64,
) -> LmiProblem<T> {
    let sq = level * level;
    let yty = cd.v_y.transpose() * &cd.v_y;
    let utu = cd.v_u.transpose() * &cd.v_u;
    let constant = if is_max { yty - utu.scale(sq) } else { utu.scale(sq) - yty };
    let mut prob = LmiProblem::new(p_dim, kind == OperatorKind::TruncatedLimit, 0);
    prob.eps_rel = cvt(eps_rel);
    prob.constraints.push(LmiConstraint {
        constant,
        p_terms: vec![
            PsdTerm { factor: cd.v_plus.clone(), sign: T::one() },
            PsdTerm { factor: cd.v_now.clone(), sign: -T::one() },
        ],
        scalar_terms: vec![],
    });
    prob
}

/// Initial upper probe for the level search, from the compressed factors.
///
/// Using the normalized factors rather than the raw record keeps the probe
/// within a few doublings of the threshold; a wildly high start would make
/// the search cross levels whose certificates are far from the origin and
/// needlessly hard to reach.
fn data_bracket<T: Scalar>(cd: &CompressedData<T>) -> T {
    let u_norm = cd.v_u.norm().max(cvt(1e-12));
    let ratio = cd.v_y.norm() / u_norm;
    cvt::<T>(10.0) * ratio.max(T::one())
}

fn run_data_bisect<T: Scalar>(
    dm: &DataMatrices<T>,
    is_max: bool,
    kind: OperatorKind,
    opts: &DataGainOpts<T>,
) -> Result<BisectOutcome<T>, GainError> {
    check_excitation(dm, opts)?;
    let cd = compress(dm);
    let p_dim = 2 * dm.l * dm.m;
    let solver = solver_from_env::<T>().map_err(|source| GainError::Solver { alpha: 0.0, source })?;
    let predicate = |level: T, strictness: Strictness| -> Result<_, SdpError> {
        let eps = match strictness {
            Strictness::Default => DEFAULT_EPS_REL,
            Strictness::Relaxed => RELAXED_EPS_REL,
        };
        let prob = data_gain_problem(&cd, p_dim, level, is_max, kind, eps);
        solver.check(&prob)
    };
    let orientation = if is_max { Orientation::FeasibleAbove } else { Orientation::FeasibleBelow };
    bisect_gain(predicate, T::zero(), data_bracket(&cd), orientation, &opts.base.bisect())
        .map_err(|source| GainError::Solver { alpha: 0.0, source })
}

/// Maximum gain certified directly from the snapshot matrices.
pub fn max_gain_data<T: Scalar>(
    dm: &DataMatrices<T>,
    kind: OperatorKind,
    opts: &DataGainOpts<T>,
) -> Result<Gain<T>, GainError> {
    match run_data_bisect(dm, true, kind, opts)? {
        BisectOutcome::Threshold(g) => Ok(Gain::Finite(g)),
        BisectOutcome::Infinity => Ok(Gain::Infinite),
        BisectOutcome::Zero => Ok(Gain::Finite(T::zero())),
    }
}

/// Minimum gain certified directly from the snapshot matrices.
pub fn min_gain_data<T: Scalar>(
    dm: &DataMatrices<T>,
    kind: OperatorKind,
    opts: &DataGainOpts<T>,
) -> Result<T, GainError> {
    match run_data_bisect(dm, false, kind, opts)? {
        BisectOutcome::Threshold(z) => Ok(z),
        BisectOutcome::Zero => Ok(T::zero()),
        BisectOutcome::Infinity => Ok(T::zero()),
    }
}

/// Both bounds of the shifted operator, computed from shifted data.
pub fn gain_annulus_data<T: Scalar>(
    dm: &DataMatrices<T>,
    alpha: T,
    kind: OperatorKind,
    opts: &DataGainOpts<T>,
) -> Result<GainBounds<T>, GainError> {
    let alpha_f = num_traits::cast::<T, f64>(alpha).unwrap_or(f64::NAN);
    let shifted = shift_data(dm, alpha);
    let gamma = max_gain_data(&shifted, kind, opts).map_err(|e| e.at_alpha(alpha_f))?;
    let zeta = min_gain_data(&shifted, kind, opts).map_err(|e| e.at_alpha(alpha_f))?;
    Ok(GainBounds { alpha, zeta, gamma, kind, rel_tol: opts.base.rel_tol })
}
