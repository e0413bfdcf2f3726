//! Discrete-time LTI state-space models, simulation, and structural checks.

use nalgebra::{Complex, DMatrix, DVector};

use crate::scalar::{cvt, Scalar};

/// Relative singular-value threshold for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Relative threshold below which a feedthrough matrix counts as singular.
pub const FEEDTHROUGH_SINGULAR_TOL: f64 = 1e-10;

/// Errors from model construction and the structural operations.
#[derive(Debug, thiserror::Error)]
pub enum LtiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("state-output pair is not observable: rank {rank} < {n} at depth {n}")]
    NotObservable { rank: usize, n: usize },
    #[error("feedthrough matrix is singular (smallest/largest singular value {ratio:.3e})")]
    SingularFeedthrough { ratio: f64 },
    #[error("transfer matrix evaluation at angle {theta} hit a pole on the unit circle")]
    UnitCirclePole { theta: f64 },
    #[error("hankel depth {depth} exceeds trajectory length {len}")]
    DepthExceedsLength { depth: usize, len: usize },
}

/// Which operator a gain computation refers to.
///
/// `TruncatedLimit` is the limit of the finite-horizon truncated operators
/// and requires a positive semidefinite storage matrix in every LMI.
/// `L2` is the operator on square-summable signals, with its domain
/// restricted so outputs are square-summable; its storage matrix may be
/// indefinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    TruncatedLimit,
    L2,
}

/// Minimal discrete-time realization with equally many inputs and outputs.
///
/// The represented map is `x_{k+1} = A x_k + B u_k`, `y_k = C x_k + D u_k`
/// with `x_0 = 0`. The state dimension may be zero, in which case the
/// operator is the static gain `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    d: DMatrix<T>,
}

impl<T: Scalar> StateSpace<T> {
    /// Validates dimensions and builds a model.
    pub fn new(
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DMatrix<T>,
        d: DMatrix<T>,
    ) -> Result<Self, LtiError> {
        let n = a.nrows();
        let m = d.nrows();
        if a.ncols() != n {
            return Err(LtiError::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if d.ncols() != m {
            return Err(LtiError::DimensionMismatch(format!(
                "D must be square (equal input and output counts), got {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() != m {
            return Err(LtiError::DimensionMismatch(format!(
                "B must be {}x{}, got {}x{}",
                n,
                m,
                b.nrows(),
                b.ncols()
            )));
        }
        if c.nrows() != m || c.ncols() != n {
            return Err(LtiError::DimensionMismatch(format!(
                "C must be {}x{}, got {}x{}",
                m,
                n,
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Static gain with no state.
    pub fn static_gain(d: DMatrix<T>) -> Result<Self, LtiError> {
        let m = d.nrows();
        Self::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, m),
            DMatrix::zeros(m, 0),
            d,
        )
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<T> {
        &self.d
    }

    /// Number of states.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Number of inputs, equal to the number of outputs.
    pub fn io_dim(&self) -> usize {
        self.d.nrows()
    }

    /// Largest eigenvalue magnitude of `A`; zero for stateless models.
    pub fn spectral_radius(&self) -> T {
        if self.state_dim() == 0 {
            return T::zero();
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm_sqr().sqrt())
            .fold(T::zero(), |acc, x| acc.max(x))
    }

    /// True when some eigenvalue of `A` lies within `tol` of the unit circle.
    pub fn has_unit_circle_eigenvalue(&self, tol: T) -> bool {
        if self.state_dim() == 0 {
            return false;
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .any(|l| (l.norm_sqr().sqrt() - T::one()).abs() <= tol)
    }
}

/// One input-output record, row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    u: DMatrix<T>,
    y: DMatrix<T>,
}

impl<T: Scalar> Trajectory<T> {
    /// Pairs an input record with an output record of identical shape.
    pub fn new(u: DMatrix<T>, y: DMatrix<T>) -> Result<Self, LtiError> {
        if u.shape() != y.shape() {
            return Err(LtiError::DimensionMismatch(format!(
                "input record is {}x{} but output record is {}x{}",
                u.nrows(),
                u.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        if u.nrows() == 0 {
            return Err(LtiError::DimensionMismatch(
                "trajectory must contain at least one step".into(),
            ));
        }
        Ok(Self { u, y })
    }

    pub fn u(&self) -> &DMatrix<T> {
        &self.u
    }
    pub fn y(&self) -> &DMatrix<T> {
        &self.y
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of channels.
    pub fn channels(&self) -> usize {
        self.u.ncols()
    }
}

/// Runs the model over an input record starting from the zero state.
pub fn simulate<T: Scalar>(
    ss: &StateSpace<T>,
    u: &DMatrix<T>,
) -> Result<Trajectory<T>, LtiError> {
    let m = ss.io_dim();
    if u.ncols() != m {
        return Err(LtiError::DimensionMismatch(format!(
            "input has {} channels but the model takes {}",
            u.ncols(),
            m
        )));
    }
    let steps = u.nrows();
    let mut x = DVector::<T>::zeros(ss.state_dim());
    let mut y = DMatrix::<T>::zeros(steps, m);
    for k in 0..steps {
        let uk = u.row(k).transpose();
        let yk = ss.c() * &x + ss.d() * &uk;
        y.row_mut(k).copy_from(&yk.transpose());
        x = ss.a() * &x + ss.b() * &uk;
    }
    Trajectory::new(u.clone(), y)
}

/// Counts singular values above `rank_tol` times the largest one.
pub fn numerical_rank<T: Scalar>(mat: &DMatrix<T>, rank_tol: T) -> usize {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return 0;
    }
    let sv = mat.clone().singular_values();
    let smax = sv.max();
    if smax <= T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tol * smax).count()
}

/// Smallest observability-stack depth at which the state is determined.
///
/// Returns the least `l` with `rank(C; CA; ...; CA^{l-1}) = n`. A stateless
/// model has lag zero by convention.
pub fn lag<T: Scalar>(ss: &StateSpace<T>, rank_tol: T) -> Result<usize, LtiError> {
    let n = ss.state_dim();
    if n == 0 {
        return Ok(0);
    }
    let m = ss.io_dim();
    let mut stack = DMatrix::<T>::zeros(0, n);
    let mut block = ss.c().clone();
    let mut best = 0;
    for l in 1..=n {
        let mut next = DMatrix::<T>::zeros(l * m, n);
        next.view_mut((0, 0), ((l - 1) * m, n)).copy_from(&stack);
        next.view_mut(((l - 1) * m, 0), (m, n)).copy_from(&block);
        stack = next;
        best = numerical_rank(&stack, rank_tol);
        if best == n {
            return Ok(l);
        }
        block = &block * ss.a();
    }
    Err(LtiError::NotObservable { rank: best, n })
}

/// Depth-`depth` block-Hankel matrix of a channel record.
///
/// Block-row `i` holds the samples `u_i ... u_{N-depth+i}`.
pub fn hankel<T: Scalar>(u: &DMatrix<T>, depth: usize) -> Result<DMatrix<T>, LtiError> {
    let steps = u.nrows();
    let m = u.ncols();
    if depth == 0 || depth > steps {
        return Err(LtiError::DepthExceedsLength { depth, len: steps });
    }
    let cols = steps - depth + 1;
    let mut h = DMatrix::<T>::zeros(m * depth, cols);
    for i in 0..depth {
        for j in 0..cols {
            for c in 0..m {
                h[(i * m + c, j)] = u[(i + j, c)];
            }
        }
    }
    Ok(h)
}

/// True when the depth-`order` block-Hankel matrix of the record has full
/// row rank.
pub fn is_persistently_exciting<T: Scalar>(
    u: &DMatrix<T>,
    order: usize,
    rank_tol: T,
) -> Result<bool, LtiError> {
    let h = hankel(u, order)?;
    Ok(numerical_rank(&h, rank_tol) == u.ncols() * order)
}

/// Shifts the operator by `-alpha` times identity: feedthrough becomes
/// `D - alpha I`.
pub fn shift_output<T: Scalar>(ss: &StateSpace<T>, alpha: T) -> StateSpace<T> {
    let m = ss.io_dim();
    let mut d = ss.d().clone();
    for i in 0..m {
        d[(i, i)] -= alpha;
    }
    StateSpace {
        a: ss.a().clone(),
        b: ss.b().clone(),
        c: ss.c().clone(),
        d,
    }
}

/// Realization of the inverse operator.
///
/// Returns `(A - B D^{-1} C, B D^{-1}, -D^{-1} C, D^{-1})`. Fails with
/// [`LtiError::SingularFeedthrough`] when `D` has no usable inverse, which
/// for the truncated-limit operator means the minimum gain is zero.
pub fn inverse_system<T: Scalar>(ss: &StateSpace<T>) -> Result<StateSpace<T>, LtiError> {
    let d = ss.d();
    let svd = d.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let tol = cvt::<T>(FEEDTHROUGH_SINGULAR_TOL);
    if smax <= T::zero() || smin <= tol * smax {
        let ratio = if smax <= T::zero() {
            0.0
        } else {
            num_traits::cast::<T, f64>(smin / smax).unwrap_or(0.0)
        };
        return Err(LtiError::SingularFeedthrough { ratio });
    }
    let d_inv = svd
        .pseudo_inverse(T::zero())
        .expect("u and v_t requested above");
    let bd = ss.b() * &d_inv;
    Ok(StateSpace {
        a: ss.a() - &bd * ss.c(),
        b: bd,
        c: -(&d_inv * ss.c()),
        d: d_inv,
    })
}

/// Transfer matrix `C (e^{i theta} I - A)^{-1} B + D` at one angle.
pub fn freq_response<T: Scalar>(
    ss: &StateSpace<T>,
    theta: T,
) -> Result<DMatrix<Complex<T>>, LtiError> {
    let n = ss.state_dim();
    let to_c = |mat: &DMatrix<T>| mat.map(|x| Complex::new(x, T::zero()));
    let d_c = to_c(ss.d());
    if n == 0 {
        return Ok(d_c);
    }
    let z = Complex::new(theta.cos(), theta.sin());
    let mut zi_a = to_c(ss.a()).scale(-T::one());
    for i in 0..n {
        zi_a[(i, i)] += z;
    }
    let b_c = to_c(ss.b());
    let theta_f = num_traits::cast::<T, f64>(theta).unwrap_or(f64::NAN);
    let sol = zi_a
        .clone()
        .lu()
        .solve(&b_c)
        .ok_or(LtiError::UnitCirclePole { theta: theta_f })?;
    // An exactly solvable but numerically collapsing system still signals a
    // pole; a cheap residual test catches that case.
    let resid = (&zi_a * &sol - &b_c).norm();
    let scale = b_c.norm().max(T::one());
    if resid > cvt::<T>(1e-6) * scale {
        return Err(LtiError::UnitCirclePole { theta: theta_f });
    }
    Ok(to_c(ss.c()) * sol + d_c)
}
