//! Robust gain bounds from noisy data.
//!
//! The output channel is assumed to carry additive noise from a known
//! quadratically bounded set. All window-advance rows of the extended state
//! recursion are exactly known shifts; only the map from the window to the
//! newest output is uncertain. Every output map consistent with the data
//! and the noise set satisfies one quadratic matrix inequality, and an
//! S-procedure multiplier folds that inequality into the gain certificate,
//! so the certified bounds hold for the true system no matter which
//! admissible noise realization produced the data.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::lti::{numerical_rank, LtiError, OperatorKind, StateSpace, Trajectory};
use crate::scalar::{cvt, Scalar};
use crate::sdp::{
    bisect_gain, solver_from_env, BisectOutcome, LmiConstraint, LmiProblem, Orientation, PsdTerm,
    SdpError, Strictness, DEFAULT_EPS_REL, RELAXED_EPS_REL,
};

use super::data::{shift_data, DataMatrices};
use super::{Gain, GainBounds, GainError, GainOpts};

/// Quadratic noise-set description: admissible stacked noise `V` (one row
/// per snapshot column) satisfies `V'QV + V'S + S'V + R ⪰ 0`, entering the
/// outputs through `Bv`.
#[derive(Debug, Clone)]
pub struct NoiseModel<T: Scalar> {
    q: DMatrix<T>,
    s: DMatrix<T>,
    r: DMatrix<T>,
    bv: DMatrix<T>,
}

impl<T: Scalar> NoiseModel<T> {
    /// Validates symmetry, dimensional consistency, and negative
    /// definiteness of `Q`.
    pub fn new(
        q: DMatrix<T>,
        s: DMatrix<T>,
        r: DMatrix<T>,
        bv: DMatrix<T>,
    ) -> Result<Self, GainError> {
        let c = q.nrows();
        let mv = r.nrows();
        if q.ncols() != c || r.ncols() != mv {
            return Err(GainError::NoiseDimension("Q and R must be square".into()));
        }
        if s.nrows() != c || s.ncols() != mv {
            return Err(GainError::NoiseDimension(format!(
                "S must be {}x{}, got {}x{}",
                c,
                mv,
                s.nrows(),
                s.ncols()
            )));
        }
        if bv.ncols() != mv {
            return Err(GainError::NoiseDimension(format!(
                "Bv must have {} columns, got {}",
                mv,
                bv.ncols()
            )));
        }
        let sym_err = |m: &DMatrix<T>| (m - m.transpose()).amax();
        let tol = cvt::<T>(1e-9) * (q.amax() + r.amax() + T::one());
        if sym_err(&q) > tol || sym_err(&r) > tol {
            return Err(GainError::NoiseDimension("Q and R must be symmetric".into()));
        }
        let lam_max = sym_eig_max(&q);
        if lam_max >= T::zero() {
            return Err(GainError::NoiseDimension(format!(
                "Q must be negative definite (largest eigenvalue {})",
                num_traits::cast::<T, f64>(lam_max).unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { q, s, r, bv })
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn s(&self) -> &DMatrix<T> {
        &self.s
    }

    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }

    pub fn bv(&self) -> &DMatrix<T> {
        &self.bv
    }

    /// Number of snapshot columns the model is sized for.
    pub fn num_cols(&self) -> usize {
        self.q.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.r.nrows()
    }

    /// Content hash for run reports, stable across platforms.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for mat in [&self.q, &self.s, &self.r, &self.bv] {
            hasher.update((mat.nrows() as u64).to_le_bytes());
            hasher.update((mat.ncols() as u64).to_le_bytes());
            for i in 0..mat.nrows() {
                for j in 0..mat.ncols() {
                    let v = num_traits::cast::<T, f64>(mat[(i, j)]).unwrap_or(f64::NAN);
                    hasher.update(v.to_le_bytes());
                }
            }
        }
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Evaluates the noise-set quadratic form at a stacked realization
    /// (one row per snapshot column); membership means the result is
    /// positive semidefinite.
    pub fn quadratic_form(&self, v: &DMatrix<T>) -> DMatrix<T> {
        let vt_q_v = v.transpose() * &self.q * v;
        let vt_s = v.transpose() * &self.s;
        vt_q_v + &vt_s + vt_s.transpose() + &self.r
    }

    /// Smallest eigenvalue of the membership form at `v`; nonnegative
    /// exactly when the realization is admissible.
    pub fn membership_margin(&self, v: &DMatrix<T>) -> T {
        sym_eig_min(&self.quadratic_form(v))
    }
}

fn sym_eig_max<T: Scalar>(m: &DMatrix<T>) -> T {
    let eig = m.clone().symmetric_eigen();
    let mut hi = eig.eigenvalues[0];
    for &v in eig.eigenvalues.iter() {
        hi = hi.max(v);
    }
    hi
}

fn sym_eig_min<T: Scalar>(m: &DMatrix<T>) -> T {
    let eig = m.clone().symmetric_eigen();
    let mut lo = eig.eigenvalues[0];
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
    }
    lo
}

/// Noise set for per-step vectors bounded in norm by `v_bar`: any
/// realization with `|v_k| ≤ v_bar` at each of the `n_samples - l` window
/// steps is admissible.
pub fn ball_noise_model<T: Scalar>(
    v_bar: T,
    n_samples: usize,
    l: usize,
    m: usize,
) -> Result<NoiseModel<T>, GainError> {
    if n_samples <= l {
        return Err(GainError::TrajectoryTooShort { len: n_samples, need: l + 2 });
    }
    let c = n_samples - l;
    let q = -DMatrix::<T>::identity(c, c);
    let s = DMatrix::<T>::zeros(c, m);
    let r = DMatrix::<T>::identity(m, m).scale(v_bar * v_bar * cvt(c as f64));
    let bv = DMatrix::<T>::identity(m, m);
    NoiseModel::new(q, s, r, bv)
}

/// Draws per-step noise vectors uniformly from the radius-`v_bar` ball,
/// one row per time step, deterministically per seed.
pub fn sample_ball_noise<T: Scalar>(
    m: usize,
    n_samples: usize,
    v_bar: f64,
    seed: u64,
) -> DMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::<T>::zeros(n_samples, m);
    for k in 0..n_samples {
        let mut dir = vec![0.0f64; m];
        let mut norm_sq = 0.0;
        for d in dir.iter_mut() {
            *d = rng.sample::<f64, _>(rand_distr::StandardNormal);
            norm_sq += *d * *d;
        }
        let norm = norm_sq.sqrt();
        if norm < 1e-300 {
            dir[0] = 1.0;
        }
        let radius = v_bar * rng.gen::<f64>().powf(1.0 / m as f64);
        let scale = radius / norm.max(1e-300);
        for (ch, d) in dir.iter().enumerate() {
            out[(k, ch)] = cvt(d * scale);
        }
    }
    out
}

/// Simulates from zero initial state with additive output noise
/// `y_k = C x_k + D u_k + Bv v_k`.
pub fn simulate_noisy<T: Scalar>(
    ss: &StateSpace<T>,
    u: &DMatrix<T>,
    noise: &DMatrix<T>,
    bv: &DMatrix<T>,
) -> Result<Trajectory<T>, LtiError> {
    let clean = crate::lti::simulate(ss, u)?;
    if noise.nrows() != u.nrows() {
        return Err(LtiError::DimensionMismatch(format!(
            "noise has {} rows for {} input steps",
            noise.nrows(),
            u.nrows()
        )));
    }
    if bv.nrows() != ss.io_dim() || bv.ncols() != noise.ncols() {
        return Err(LtiError::DimensionMismatch(format!(
            "noise input matrix is {}x{}, expected {}x{}",
            bv.nrows(),
            bv.ncols(),
            ss.io_dim(),
            noise.ncols()
        )));
    }
    let y = clean.y() + noise * bv.transpose();
    Trajectory::new(u.clone(), y)
}

/// The exactly known rows of the window-state advance: shifting the input
/// and output windows and injecting the newest input.
#[derive(Debug, Clone)]
pub struct ExtendedKnown<T: Scalar> {
    at: DMatrix<T>,
    bt: DMatrix<T>,
}

impl<T: Scalar> ExtendedKnown<T> {
    pub fn at(&self) -> &DMatrix<T> {
        &self.at
    }

    pub fn bt(&self) -> &DMatrix<T> {
        &self.bt
    }
}

/// Builds the known shift rows for window length `l` and channel count `m`.
///
/// The advanced window state is `(At xi + Bt u; y)`: all rows except the
/// newest output are data-independent.
pub fn build_extended_known<T: Scalar>(l: usize, m: usize) -> ExtendedKnown<T> {
    assert!(l >= 1 && m >= 1, "window length and channel count must be positive");
    let p = 2 * l * m;
    let rows = p - m;
    let mut at = DMatrix::<T>::zeros(rows, p);
    let mut bt = DMatrix::<T>::zeros(rows, m);
    // Input window: drop the oldest block, append the newest input.
    for i in 0..l - 1 {
        for ch in 0..m {
            at[(i * m + ch, (i + 1) * m + ch)] = T::one();
        }
    }
    for ch in 0..m {
        bt[((l - 1) * m + ch, ch)] = T::one();
    }
    // Output window: drop the oldest block; the newest output row is the
    // unknown one and is excluded here.
    for i in 0..l - 1 {
        for ch in 0..m {
            at[(l * m + i * m + ch, l * m + (i + 1) * m + ch)] = T::one();
        }
    }
    ExtendedKnown { at, bt }
}

/// The true window-to-output map of a model: coefficients `(Cw, Dw)` with
/// `y_k = Cw xi_k + Dw u_k` on noise-free trajectories once `k ≥ l`.
///
/// Used by tests to check that the generating system belongs to every
/// consistency set built from its own data; requires the observability
/// stack of depth `l` to have full rank.
pub fn window_output_map<T: Scalar>(
    ss: &StateSpace<T>,
    l: usize,
) -> Result<(DMatrix<T>, DMatrix<T>), GainError> {
    let n = ss.state_dim();
    let m = ss.io_dim();
    if n == 0 {
        return Ok((DMatrix::zeros(m, 2 * l * m), ss.d().clone()));
    }
    let mut obs = DMatrix::<T>::zeros(l * m, n);
    let mut cai = ss.c().clone();
    for i in 0..l {
        obs.view_mut((i * m, 0), (m, n)).copy_from(&cai);
        cai *= ss.a();
    }
    // After the loop `cai = C A^l`.
    if numerical_rank(&obs, cvt(1e-10)) < n {
        return Err(GainError::Lti(LtiError::NotObservable {
            rank: numerical_rank(&obs, cvt(1e-10)),
            n,
        }));
    }
    let obs_pinv = obs
        .clone()
        .pseudo_inverse(cvt::<T>(1e-12) * obs.amax().max(T::one()))
        .map_err(|_| GainError::Lti(LtiError::NotObservable { rank: 0, n }))?;
    let gamma = &cai * &obs_pinv;

    // Markov blocks C A^i B for i = 0..l-1.
    let mut markov: Vec<DMatrix<T>> = Vec::with_capacity(l);
    let mut a_pow = DMatrix::<T>::identity(n, n);
    for _ in 0..l {
        markov.push(ss.c() * &a_pow * ss.b());
        a_pow = &a_pow * ss.a();
    }

    // Column block i multiplies u_{k-l+i}, which is l-1-i steps old.
    let mut m_row = DMatrix::<T>::zeros(m, l * m);
    for i in 0..l {
        m_row.view_mut((0, i * m), (m, m)).copy_from(&markov[l - 1 - i]);
    }

    let mut toeplitz = DMatrix::<T>::zeros(l * m, l * m);
    for i in 0..l {
        for j in 0..=i {
            let blk = if i == j { ss.d().clone() } else { markov[i - 1 - j].clone() };
            toeplitz.view_mut((i * m, j * m), (m, m)).copy_from(&blk);
        }
    }

    let cu = &m_row - &gamma * &toeplitz;
    let cy = gamma;
    let mut cw = DMatrix::<T>::zeros(m, 2 * l * m);
    cw.view_mut((0, 0), (m, l * m)).copy_from(&cu);
    cw.view_mut((0, l * m), (m, l * m)).copy_from(&cy);
    Ok((cw, ss.d().clone()))
}

/// Inverted data-consistency blocks entering the S-procedure term.
#[derive(Debug, Clone)]
pub struct ConsistencySet<T: Scalar> {
    qt: DMatrix<T>,
    st: DMatrix<T>,
    rt: DMatrix<T>,
    forward: DMatrix<T>,
}

impl<T: Scalar> ConsistencySet<T> {
    pub fn qt(&self) -> &DMatrix<T> {
        &self.qt
    }

    pub fn st(&self) -> &DMatrix<T> {
        &self.st
    }

    pub fn rt(&self) -> &DMatrix<T> {
        &self.rt
    }

    /// The consistency blocks assembled into one symmetric matrix over
    /// (window state, input | output) coordinates.
    pub fn tilde_matrix(&self) -> DMatrix<T> {
        let p = self.qt.nrows();
        let m = self.rt.nrows();
        let mut out = DMatrix::<T>::zeros(p + m, p + m);
        out.view_mut((0, 0), (p, p)).copy_from(&self.qt);
        out.view_mut((0, p), (p, m)).copy_from(&self.st);
        out.view_mut((p, 0), (m, p)).copy_from(&self.st.transpose());
        out.view_mut((p, p), (m, m)).copy_from(&self.rt);
        out
    }

    /// The matrix the blocks invert (data-side form of the set).
    pub fn forward_matrix(&self) -> &DMatrix<T> {
        &self.forward
    }

    /// Quadratic membership form for a candidate window-to-output map
    /// `z = [Cw Dw]`; membership in the set means the result is positive
    /// semidefinite.
    pub fn membership_form(&self, z: &DMatrix<T>) -> DMatrix<T> {
        let p = self.qt.nrows();
        let m = self.rt.nrows();
        assert_eq!(z.nrows(), m, "candidate output map has wrong row count");
        assert_eq!(z.ncols(), p, "candidate output map has wrong column count");
        let mut w = DMatrix::<T>::zeros(p + m, m);
        w.view_mut((0, 0), (p, m)).copy_from(&(-z.transpose()));
        w.view_mut((p, 0), (m, m)).fill_with_identity();
        w.transpose() * &self.forward * w
    }
}

/// Assembles and inverts the data-side consistency matrix.
///
/// The forward matrix is congruent to the noise-set description through
/// the data: its upper-left block must be negative definite for the set of
/// consistent output maps to be a bounded ellipsoid, and it must be
/// invertible for the S-procedure form to exist. The computed inverse is
/// verified against the forward matrix to a max-abs residual of 1e-8, widened
/// to the f64 evaluation floor when the matrix scales make 1e-8 unattainable.
pub fn build_consistency_set<T: Scalar>(
    dm: &DataMatrices<T>,
    noise: &NoiseModel<T>,
) -> Result<ConsistencySet<T>, GainError> {
    let c = dm.num_cols();
    let m = dm.io_dim();
    let p = 2 * dm.window_len() * dm.io_dim() + m;
    if noise.num_cols() != c {
        return Err(GainError::NoiseDimension(format!(
            "noise model sized for {} snapshot columns, data has {}",
            noise.num_cols(),
            c
        )));
    }
    if noise.bv.nrows() != m {
        return Err(GainError::NoiseDimension(format!(
            "Bv has {} rows, data has {} channels",
            noise.bv.nrows(),
            m
        )));
    }

    let mut x = DMatrix::<T>::zeros(p, c);
    x.view_mut((0, 0), (p - m, c)).copy_from(dm.xi());
    x.view_mut((p - m, 0), (m, c)).copy_from(dm.u());
    let yd = dm.y();

    // Ball-structured models admit a numerically safer block inversion.
    let ball_q = detect_scaled_identity(&noise.q);
    let is_ball = ball_q.is_some() && noise.s.amax() == T::zero();

    let (q_bar, s_bar, r_bar);
    if let (true, Some(q0)) = (is_ball, ball_q) {
        let g = &x * x.transpose();
        q_bar = g.scale(q0);
        s_bar = (&x * yd.transpose()).scale(q0);
        r_bar = (yd * yd.transpose()).scale(q0) + &noise.bv * &noise.r * noise.bv.transpose();
    } else {
        let xq = &x * &noise.q;
        q_bar = &xq * x.transpose();
        s_bar = &xq * yd.transpose() + &x * &noise.s * noise.bv.transpose();
        let yq = yd * &noise.q;
        let ys_bv = yd * &noise.s * noise.bv.transpose();
        r_bar = &yq * yd.transpose()
            + &ys_bv
            + ys_bv.transpose()
            + &noise.bv * &noise.r * noise.bv.transpose();
    }

    let lam_max = sym_eig_max(&q_bar);
    if lam_max > -cvt::<T>(1e-12) * q_bar.amax().max(T::one()) {
        return Err(GainError::IndefiniteQbar {
            lambda_max: num_traits::cast(lam_max).unwrap_or(f64::NAN),
        });
    }

    let mut forward = DMatrix::<T>::zeros(p + m, p + m);
    forward.view_mut((0, 0), (p, p)).copy_from(&q_bar);
    forward.view_mut((0, p), (p, m)).copy_from(&s_bar);
    forward.view_mut((p, 0), (m, p)).copy_from(&s_bar.transpose());
    forward.view_mut((p, p), (m, m)).copy_from(&r_bar);
    symmetrize(&mut forward);

    let mut inverse = if let (true, Some(q0)) = (is_ball, ball_q) {
        structured_inverse(&x, yd, q0, &noise.bv, &noise.r)
    } else {
        dense_inverse(&forward)
    }
    .ok_or_else(|| GainError::SingularConsistency("matrix inversion failed".into()))?;

    // Newton refinement of the inverse, each candidate symmetrized before it
    // is measured so the kept iterate never trades a small right residual for
    // a large left one. Steps are only accepted when the measured residual
    // drops.
    let ident = DMatrix::<T>::identity(p + m, p + m);
    symmetrize(&mut inverse);
    let mut resid_norm = (&ident - &forward * &inverse).amax();
    for _ in 0..3 {
        if resid_norm <= cvt(1e-10) {
            break;
        }
        let resid = &ident - &forward * &inverse;
        let mut cand = &inverse + &inverse * resid;
        symmetrize(&mut cand);
        let cand_norm = (&ident - &forward * &cand).amax();
        if cand_norm >= resid_norm {
            break;
        }
        inverse = cand;
        resid_norm = cand_norm;
    }
    // Tiny noise radii make the forward matrix nearly singular; the residual
    // of even a correctly rounded inverse then sits at eps * |F| * |F^-1|,
    // so the acceptance threshold must track that floor.
    let eval_floor = cvt::<T>(8.0)
        * T::default_epsilon()
        * cvt::<T>((p + m) as f64)
        * forward.amax()
        * inverse.amax();
    if resid_norm > cvt::<T>(1e-8).max(eval_floor) {
        return Err(GainError::SingularConsistency(format!(
            "inverse residual {} exceeds tolerance",
            num_traits::cast::<T, f64>(resid_norm).unwrap_or(f64::NAN)
        )));
    }

    let qt = inverse.view((0, 0), (p, p)).into_owned();
    let st = inverse.view((0, p), (p, m)).into_owned();
    let rt = inverse.view((p, p), (m, m)).into_owned();
    Ok(ConsistencySet { qt, st, rt, forward })
}

fn symmetrize<T: Scalar>(m: &mut DMatrix<T>) {
    let sym = (m.clone() + m.transpose()).scale(cvt(0.5));
    m.copy_from(&sym);
}

fn detect_scaled_identity<T: Scalar>(q: &DMatrix<T>) -> Option<T> {
    let c = q.nrows();
    if c == 0 {
        return None;
    }
    let q0 = q[(0, 0)];
    for i in 0..c {
        for j in 0..c {
            let expect = if i == j { q0 } else { T::zero() };
            if q[(i, j)] != expect {
                return None;
            }
        }
    }
    Some(q0)
}

/// Block inversion for ball-type models: factor the data stack, solve a
/// least-squares split of the outputs, and invert the small Schur
/// complement. The QR route works on the stack itself rather than its Gram
/// matrix, so growing records cost one power of the condition number, not
/// two.
fn structured_inverse<T: Scalar>(
    x: &DMatrix<T>,
    yd: &DMatrix<T>,
    q0: T,
    bv: &DMatrix<T>,
    r: &DMatrix<T>,
) -> Option<DMatrix<T>> {
    let p = x.nrows();
    let m = yd.nrows();
    let qr = x.transpose().qr();
    let rt = qr.r();
    let qty = qr.q().transpose() * yd.transpose();
    let zt = rt.solve_upper_triangular(&qty)?;
    let z = zt.transpose();
    let e = yd - &z * x;
    let delta = bv * r * bv.transpose() + (&e * e.transpose()).scale(q0);
    let delta_inv = delta.try_inverse()?;
    let rt_inv = rt.solve_upper_triangular(&DMatrix::<T>::identity(p, p))?;
    let g_inv = &rt_inv * rt_inv.transpose();

    let qt = g_inv.scale(T::one() / q0) + &zt * &delta_inv * &z;
    let st = (-&zt) * &delta_inv;
    let mut out = DMatrix::<T>::zeros(p + m, p + m);
    out.view_mut((0, 0), (p, p)).copy_from(&qt);
    out.view_mut((0, p), (p, m)).copy_from(&st);
    out.view_mut((p, 0), (m, p)).copy_from(&st.transpose());
    out.view_mut((p, p), (m, m)).copy_from(&delta_inv);
    Some(out)
}

/// Jacobi-equilibrated dense inversion for general models.
fn dense_inverse<T: Scalar>(forward: &DMatrix<T>) -> Option<DMatrix<T>> {
    let k = forward.nrows();
    let mut d = DVector::<T>::zeros(k);
    for i in 0..k {
        let v = forward[(i, i)].abs();
        d[i] = T::one() / (v.sqrt() + cvt(1e-150));
    }
    let mut scaled = forward.clone();
    for i in 0..k {
        for j in 0..k {
            scaled[(i, j)] *= d[i] * d[j];
        }
    }
    let inv = scaled.full_piv_lu().try_inverse()?;
    let mut out = inv;
    for i in 0..k {
        for j in 0..k {
            out[(i, j)] *= d[i] * d[j];
        }
    }
    Some(out)
}

fn robust_problem<T: Scalar>(
    ek: &ExtendedKnown<T>,
    nt_norm: &DMatrix<T>,
    p_dim: usize,
    m: usize,
    level: T,
    is_max: bool,
    kind: OperatorKind,
    eps_rel: f64,
) -> LmiProblem<T> {
    let k = p_dim + 2 * m;
    let known_rows = p_dim - m;

    let mut t1 = DMatrix::<T>::zeros(p_dim, k);
    t1.view_mut((0, 0), (known_rows, p_dim)).copy_from(&ek.at);
    t1.view_mut((0, p_dim), (known_rows, m)).copy_from(&ek.bt);
    for ch in 0..m {
        t1[(known_rows + ch, p_dim + m + ch)] = T::one();
    }
    let mut e1 = DMatrix::<T>::zeros(p_dim, k);
    e1.view_mut((0, 0), (p_dim, p_dim)).fill_with_identity();

    let sq = level * level;
    let mut constant = DMatrix::<T>::zeros(k, k);
    for ch in 0..m {
        let u_idx = p_dim + ch;
        let y_idx = p_dim + m + ch;
        if is_max {
            constant[(u_idx, u_idx)] = -sq;
            constant[(y_idx, y_idx)] = T::one();
        } else {
            constant[(u_idx, u_idx)] = sq;
            constant[(y_idx, y_idx)] = -T::one();
        }
    }

    let mut prob = LmiProblem::new(p_dim, kind == OperatorKind::TruncatedLimit, 1);
    prob.eps_rel = cvt(eps_rel);
    prob.constraints.push(LmiConstraint {
        constant,
        p_terms: vec![
            PsdTerm { factor: t1, sign: T::one() },
            PsdTerm { factor: e1, sign: -T::one() },
        ],
        scalar_terms: vec![(0, nt_norm.scale(-T::one()))],
    });
    prob
}

fn run_robust_bisect<T: Scalar>(
    dm: &DataMatrices<T>,
    noise: &NoiseModel<T>,
    l: usize,
    is_max: bool,
    kind: OperatorKind,
    opts: &GainOpts<T>,
) -> Result<BisectOutcome<T>, GainError> {
    if l != dm.window_len() {
        return Err(GainError::WindowMismatch { built: dm.window_len(), requested: l });
    }
    let m = dm.io_dim();
    let p_dim = 2 * l * m;
    let cs = build_consistency_set(dm, noise)?;
    let nt = cs.tilde_matrix();
    // The inverse blocks scale like the reciprocal noise energy; dividing
    // by the spectral norm keeps the multiplier search well conditioned
    // and only rescales the free multiplier.
    let nt_scale = {
        let eig = nt.clone().symmetric_eigen();
        let mut s = T::zero();
        for &v in eig.eigenvalues.iter() {
            s = s.max(v.abs());
        }
        s.max(cvt(1e-300))
    };
    let nt_norm = nt.scale(T::one() / nt_scale);
    let ek = build_extended_known::<T>(l, m);

    let solver = solver_from_env::<T>().map_err(|source| GainError::Solver { alpha: 0.0, source })?;
    let predicate = |level: T, strictness: Strictness| -> Result<_, SdpError> {
        let eps = match strictness {
            Strictness::Default => DEFAULT_EPS_REL,
            Strictness::Relaxed => RELAXED_EPS_REL,
        };
        let prob = robust_problem(&ek, &nt_norm, p_dim, m, level, is_max, kind, eps);
        solver.check(&prob)
    };
    let u_norm = dm.u().norm().max(cvt(1e-12));
    let hi = cvt::<T>(10.0) * (dm.y().norm() / u_norm).max(T::one());
    let orientation = if is_max { Orientation::FeasibleAbove } else { Orientation::FeasibleBelow };
    bisect_gain(predicate, T::zero(), hi, orientation, &opts.bisect())
        .map_err(|source| GainError::Solver { alpha: 0.0, source })
}

/// Upper gain bound valid for every system consistent with the noisy data.
pub fn robust_max_gain<T: Scalar>(
    dm: &DataMatrices<T>,
    noise: &NoiseModel<T>,
    l: usize,
    kind: OperatorKind,
    opts: &GainOpts<T>,
) -> Result<Gain<T>, GainError> {
    match run_robust_bisect(dm, noise, l, true, kind, opts)? {
        BisectOutcome::Threshold(g) => Ok(Gain::Finite(g)),
        BisectOutcome::Infinity => Ok(Gain::Infinite),
        BisectOutcome::Zero => Ok(Gain::Finite(T::zero())),
    }
}

/// Lower gain bound valid for every system consistent with the noisy data.
pub fn robust_min_gain<T: Scalar>(
    dm: &DataMatrices<T>,
    noise: &NoiseModel<T>,
    l: usize,
    kind: OperatorKind,
    opts: &GainOpts<T>,
) -> Result<T, GainError> {
    match run_robust_bisect(dm, noise, l, false, kind, opts)? {
        BisectOutcome::Threshold(z) => Ok(z),
        BisectOutcome::Zero => Ok(T::zero()),
        BisectOutcome::Infinity => Ok(T::zero()),
    }
}

/// Robust annulus at shift `alpha`, built from shifted data.
pub fn gain_annulus_robust<T: Scalar>(
    dm: &DataMatrices<T>,
    noise: &NoiseModel<T>,
    alpha: T,
    kind: OperatorKind,
    opts: &GainOpts<T>,
) -> Result<GainBounds<T>, GainError> {
    let alpha_f = num_traits::cast::<T, f64>(alpha).unwrap_or(f64::NAN);
    let shifted = shift_data(dm, alpha);
    let l = dm.window_len();
    let gamma = robust_max_gain(&shifted, noise, l, kind, opts).map_err(|e| e.at_alpha(alpha_f))?;
    let zeta = robust_min_gain(&shifted, noise, l, kind, opts).map_err(|e| e.at_alpha(alpha_f))?;
    Ok(GainBounds { alpha, zeta, gamma, kind, rel_tol: opts.rel_tol })
}
