//! Built-in example systems used by the test suite and the `reproduce`
//! subcommand.

use nalgebra::{dmatrix, DMatrix};

use crate::lti::StateSpace;
use crate::scalar::{cvt, Scalar};

fn convert<T: Scalar>(m: DMatrix<f64>) -> DMatrix<T> {
    m.map(cvt::<T>)
}

/// Two-input two-output fourth-order system with an eigenvalue outside the
/// unit circle. Its truncated-limit gains diverge while the doubly-infinite
/// gains stay finite.
pub fn unstable_mimo<T: Scalar>() -> StateSpace<T> {
    let a = dmatrix![
        0.5, 0.0, 0.0, 0.0;
        0.0, 1.05, 0.0, 0.0;
        0.0, 0.0, -0.3, 0.0;
        0.0, 0.0, 0.0, -0.9;
    ];
    let b = dmatrix![
        -2.0, 0.0;
        1.0, 0.0;
        1.0, -2.0;
        -1.0, 0.0;
    ];
    let c = dmatrix![
        0.2, -0.3, 0.4, 0.0;
        0.0, 0.1, -0.3, 0.5;
    ];
    let d = DMatrix::zeros(2, 2);
    StateSpace::new(convert(a), convert(b), convert(c), convert(d)).expect("fixture dims")
}

/// Second-order resonant low-pass filter.
pub fn low_pass_filter<T: Scalar>() -> StateSpace<T> {
    let a = dmatrix![0.94, -0.33; 1.0, 0.0];
    let b = dmatrix![1.0; 0.0];
    let c = dmatrix![0.29, 0.07];
    let d = dmatrix![0.10];
    StateSpace::new(convert(a), convert(b), convert(c), convert(d)).expect("fixture dims")
}

/// High-pass filter sharing the low-pass state dynamics. Its gain profile is
/// close to the low-pass one even though the responses differ sharply.
pub fn high_pass_filter<T: Scalar>() -> StateSpace<T> {
    let a = dmatrix![0.94, -0.33; 1.0, 0.0];
    let b = dmatrix![1.0; 0.0];
    let c = dmatrix![-0.60, 0.38];
    let d = dmatrix![0.57];
    StateSpace::new(convert(a), convert(b), convert(c), convert(d)).expect("fixture dims")
}
