//! Linear matrix inequality assembly and the feasibility backend interface.
//!
//! Every gain query in this crate reduces to the same question: does there
//! exist a symmetric matrix `P` (optionally constrained `P ⪰ 0`) and a set
//! of nonnegative scalars such that a list of affine symmetric matrix
//! expressions are all negative semidefinite. [`LmiProblem`] captures that
//! question, [`FeasibilitySolver`] answers it, and [`bisect_gain`] drives the
//! scalar search over gain parameters.

mod barrier;
mod bisect;

pub use barrier::{BarrierOpts, BarrierSolver};
pub use bisect::{bisect_gain, BisectOpts, BisectOutcome, Orientation, Strictness};

use nalgebra::DMatrix;

use crate::scalar::{cvt, Scalar};

/// Default strictness margin, relative to each constraint's constant block.
pub const DEFAULT_EPS_REL: f64 = 1e-9;

/// Relaxed strictness margin used on retry after an inconclusive solve.
pub const RELAXED_EPS_REL: f64 = 1e-12;

/// Default tolerance of the independent witness eigenvalue check. Kept near
/// the f64 noise floor of the eigensolve: a looser value lets points just
/// below a feasibility threshold pass off a near-miss as a witness, which
/// shaves gain thresholds by far more than the bisection tolerance.
pub const DEFAULT_VERIFY_TOL: f64 = 1e-9;

/// Errors from problem validation, solving, and bisection.
#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("constraint {index} is not symmetric (relative asymmetry {asymmetry:.3e})")]
    AsymmetricConstraint { index: usize, asymmetry: f64 },
    #[error("malformed problem: {0}")]
    BadProblem(String),
    #[error(
        "feasibility is not monotone: feasible at {feasible_at} but infeasible at {infeasible_at}"
    )]
    NonMonotone { feasible_at: f64, infeasible_at: f64 },
    #[error("solver inconclusive on bracket [{lo}, {hi}]: {message}")]
    Inconclusive { lo: f64, hi: f64, message: String },
    #[error("unknown feasibility backend {name:?} (available: barrier)")]
    UnknownSolver { name: String },
}

/// One `sign * factor^T P factor` contribution to a constraint.
#[derive(Debug, Clone)]
pub struct PsdTerm<T: Scalar> {
    /// Matrix with `p` rows and as many columns as the constraint has.
    pub factor: DMatrix<T>,
    /// `+1` or `-1` in practice; any real weight is accepted.
    pub sign: T,
}

/// One affine symmetric matrix expression required `⪯ -eps I`.
#[derive(Debug, Clone)]
pub struct LmiConstraint<T: Scalar> {
    /// Constant symmetric block.
    pub constant: DMatrix<T>,
    /// Contributions of the matrix variable.
    pub p_terms: Vec<PsdTerm<T>>,
    /// Coefficient matrix per nonnegative scalar variable, by index.
    pub scalar_terms: Vec<(usize, DMatrix<T>)>,
}

/// Feasibility question in one symmetric matrix variable and optional
/// nonnegative scalars.
#[derive(Debug, Clone)]
pub struct LmiProblem<T: Scalar> {
    /// Side length of the matrix variable; zero means no matrix variable.
    pub p_dim: usize,
    /// Whether `P ⪰ 0` is required.
    pub p_psd: bool,
    /// Number of scalar variables, each constrained nonnegative.
    pub num_scalars: usize,
    /// Constraints, each required `⪯ -eps I`.
    pub constraints: Vec<LmiConstraint<T>>,
    /// Strictness margin relative to each constraint's constant block scale.
    pub eps_rel: T,
}

impl<T: Scalar> LmiProblem<T> {
    /// Empty problem shell with the default strictness margin.
    pub fn new(p_dim: usize, p_psd: bool, num_scalars: usize) -> Self {
        Self {
            p_dim,
            p_psd,
            num_scalars,
            constraints: Vec::new(),
            eps_rel: cvt(DEFAULT_EPS_REL),
        }
    }

    /// Checks shapes and symmetry, symmetrizing matrices in place.
    ///
    /// Asymmetry beyond a relative `1e-10` is reported as an error rather
    /// than silently averaged away.
    pub fn validate(&mut self) -> Result<(), SdpError> {
        if self.eps_rel < T::zero() {
            return Err(SdpError::BadProblem("strictness margin must be nonnegative".into()));
        }
        for (idx, con) in self.constraints.iter_mut().enumerate() {
            let k = con.constant.nrows();
            if con.constant.ncols() != k {
                return Err(SdpError::BadProblem(format!(
                    "constraint {idx} constant block is {}x{}",
                    con.constant.nrows(),
                    con.constant.ncols()
                )));
            }
            symmetrize_checked(&mut con.constant, idx)?;
            for term in &con.p_terms {
                if term.factor.nrows() != self.p_dim || term.factor.ncols() != k {
                    return Err(SdpError::BadProblem(format!(
                        "constraint {idx} has a factor of shape {}x{}, expected {}x{}",
                        term.factor.nrows(),
                        term.factor.ncols(),
                        self.p_dim,
                        k
                    )));
                }
            }
            for (j, mat) in con.scalar_terms.iter_mut() {
                if *j >= self.num_scalars {
                    return Err(SdpError::BadProblem(format!(
                        "constraint {idx} references scalar {j} of {}",
                        self.num_scalars
                    )));
                }
                if mat.nrows() != k || mat.ncols() != k {
                    return Err(SdpError::BadProblem(format!(
                        "constraint {idx} scalar coefficient is {}x{}, expected {k}x{k}",
                        mat.nrows(),
                        mat.ncols()
                    )));
                }
                symmetrize_checked(mat, idx)?;
            }
        }
        Ok(())
    }

    /// Evaluates constraint `idx` at a concrete assignment.
    pub fn eval_constraint(&self, idx: usize, p: &DMatrix<T>, scalars: &[T]) -> DMatrix<T> {
        let con = &self.constraints[idx];
        let mut m = con.constant.clone();
        for term in &con.p_terms {
            m += (term.factor.transpose() * p * &term.factor).scale(term.sign);
        }
        for (j, mat) in &con.scalar_terms {
            m += mat.scale(scalars[*j]);
        }
        m
    }

    /// Strictness margin of constraint `idx`, in absolute terms.
    pub fn eps_abs(&self, idx: usize) -> T {
        self.eps_rel * self.constraints[idx].constant.amax().max(T::one())
    }
}

fn symmetrize_checked<T: Scalar>(m: &mut DMatrix<T>, idx: usize) -> Result<(), SdpError> {
    let sym = (m.clone() + m.transpose()).scale(cvt(0.5));
    let asym = (&*m - &sym).amax();
    let scale = sym.amax().max(T::one());
    if asym > cvt::<T>(1e-10) * scale {
        return Err(SdpError::AsymmetricConstraint {
            index: idx,
            asymmetry: num_traits::cast::<T, f64>(asym / scale).unwrap_or(f64::NAN),
        });
    }
    *m = sym;
    Ok(())
}

/// Solver verdict with an eigenvalue-verified witness when feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    Inconclusive,
}

/// Witness assignment for a feasible problem.
#[derive(Debug, Clone)]
pub struct Witness<T: Scalar> {
    pub p: DMatrix<T>,
    pub scalars: Vec<T>,
}

/// Solver trace attached to every verdict.
#[derive(Debug, Clone, Default)]
pub struct SolverDiagnostics {
    /// Newton iterations spent in total.
    pub iterations: usize,
    /// Barrier stages completed.
    pub stages: usize,
    /// Final value of the feasibility shift; negative values certify
    /// strict feasibility.
    pub shift: f64,
    pub message: String,
}

/// Outcome of one feasibility query.
#[derive(Debug, Clone)]
pub struct FeasibilityResult<T: Scalar> {
    pub status: FeasibilityStatus,
    pub witness: Option<Witness<T>>,
    pub diagnostics: SolverDiagnostics,
}

impl<T: Scalar> FeasibilityResult<T> {
    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

/// Narrow interface every feasibility backend implements.
///
/// Implementations must be safe to call from parallel workers; the solvers
/// here are stateless apart from their options.
pub trait FeasibilitySolver<T: Scalar>: Send + Sync {
    fn name(&self) -> &'static str;
    fn check(&self, prob: &LmiProblem<T>) -> Result<FeasibilityResult<T>, SdpError>;
}

/// Returns the backend with the given name.
pub fn solver_by_name<T: Scalar>(
    name: &str,
) -> Result<Box<dyn FeasibilitySolver<T>>, SdpError> {
    match name {
        "barrier" => Ok(Box::new(BarrierSolver::<T>::default())),
        other => Err(SdpError::UnknownSolver { name: other.into() }),
    }
}

/// Selects the backend from the `SRGKIT_SOLVER` environment variable,
/// defaulting to the reference barrier solver.
pub fn solver_from_env<T: Scalar>() -> Result<Box<dyn FeasibilitySolver<T>>, SdpError> {
    match std::env::var("SRGKIT_SOLVER") {
        Ok(name) => solver_by_name(&name),
        Err(_) => solver_by_name("barrier"),
    }
}

/// Decides feasibility with the default backend.
pub fn check_feasible<T: Scalar>(
    prob: &LmiProblem<T>,
) -> Result<FeasibilityResult<T>, SdpError> {
    BarrierSolver::default().check(prob)
}

/// Writes the assembled problem in a plain-text matrix format for external
/// cross-checks: a dimension header per matrix followed by row-major values.
pub fn dump_problem<T: Scalar>(
    prob: &LmiProblem<T>,
    out: &mut dyn std::io::Write,
) -> std::io::Result<()> {
    writeln!(
        out,
        "lmi p_dim {} p_psd {} scalars {} constraints {} eps_rel {}",
        prob.p_dim,
        prob.p_psd as u8,
        prob.num_scalars,
        prob.constraints.len(),
        prob.eps_rel
    )?;
    let write_mat = |out: &mut dyn std::io::Write, tag: &str, m: &DMatrix<T>| -> std::io::Result<()> {
        writeln!(out, "{tag} {} {}", m.nrows(), m.ncols())?;
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    };
    for (idx, con) in prob.constraints.iter().enumerate() {
        writeln!(
            out,
            "constraint {idx} p_terms {} scalar_terms {}",
            con.p_terms.len(),
            con.scalar_terms.len()
        )?;
        write_mat(out, "constant", &con.constant)?;
        for term in &con.p_terms {
            writeln!(out, "sign {}", term.sign)?;
            write_mat(out, "factor", &term.factor)?;
        }
        for (j, mat) in &con.scalar_terms {
            writeln!(out, "scalar {j}")?;
            write_mat(out, "coeff", mat)?;
        }
    }
    Ok(())
}
