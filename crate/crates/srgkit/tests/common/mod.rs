#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use srgkit::lti::{lag, numerical_rank, StateSpace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

/// Random system with spectral radius scaled to `rho`; retries until the
/// realization is minimal (controllable and observable at tolerance 1e-6).
pub fn rand_minimal(rng: &mut ChaCha8Rng, n: usize, m: usize, rho: f64) -> StateSpace<f64> {
    loop {
        let mut a = rand_matrix(rng, n, n, 1.0);
        if n > 0 {
            let sr = StateSpace::new(
                a.clone(),
                DMatrix::zeros(n, 1),
                DMatrix::zeros(1, n),
                DMatrix::zeros(1, 1),
            )
            .unwrap()
            .spectral_radius();
            if sr > 1e-9 {
                a *= rho / sr;
            }
        }
        let b = rand_matrix(rng, n, m, 1.0);
        let c = rand_matrix(rng, m, n, 1.0);
        let d = rand_matrix(rng, m, m, 1.0);
        let ss = StateSpace::new(a.clone(), b.clone(), c.clone(), d).unwrap();
        if n == 0 {
            return ss;
        }
        let mut obs = DMatrix::zeros(m * n, n);
        let mut ctr = DMatrix::zeros(n, m * n);
        let mut ca = c.clone();
        let mut ab = b.clone();
        for i in 0..n {
            obs.view_mut((i * m, 0), (m, n)).copy_from(&ca);
            ctr.view_mut((0, i * m), (n, m)).copy_from(&ab);
            ca = &ca * &a;
            ab = &a * &ab;
        }
        if numerical_rank(&obs, 1e-6) == n && numerical_rank(&ctr, 1e-6) == n {
            if lag(&ss, 1e-8).is_ok() {
                return ss;
            }
        }
    }
}

/// Gaussian excitation, the workhorse input for the data-driven routes.
pub fn gaussian_input(rng: &mut ChaCha8Rng, steps: usize, m: usize) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DMatrix::from_fn(steps, m, |_, _| StandardNormal.sample(rng))
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol * f64::max(1.0, b.abs()),
        "{what}: {a} vs {b} (tol {tol})"
    );
}
