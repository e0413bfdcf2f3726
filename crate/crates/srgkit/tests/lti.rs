//! Core model and trajectory layer: construction, simulation, excitation
//! checks, shifts, inversion, and the frequency response.

mod common;

use approx::assert_relative_eq;
use nalgebra::{dmatrix, DMatrix};
use proptest::prelude::*;

use common::{gaussian_input, rand_minimal, rng};
use srgkit::fixtures::{high_pass_filter, low_pass_filter, unstable_mimo};
use srgkit::lti::{
    freq_response, hankel, inverse_system, is_persistently_exciting, lag, numerical_rank,
    shift_output, simulate, LtiError, StateSpace,
};

fn lag_system() -> StateSpace<f64> {
    StateSpace::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap()
}

#[test]
fn dimension_mismatch_is_reported() {
    let err = StateSpace::new(
        dmatrix![0.5, 0.0; 0.0, 0.5],
        dmatrix![1.0],
        dmatrix![1.0, 0.0],
        dmatrix![0.0],
    )
    .unwrap_err();
    assert!(matches!(err, LtiError::DimensionMismatch(_)), "{err}");
}

#[test]
fn static_gain_has_no_state() {
    let ss = StateSpace::static_gain(dmatrix![2.0]).unwrap();
    assert_eq!(ss.state_dim(), 0);
    assert_eq!(ss.io_dim(), 1);
    assert_relative_eq!(ss.spectral_radius(), 0.0);
}

#[test]
fn simulate_matches_hand_recursion() {
    let ss = lag_system();
    let u = dmatrix![1.0; 0.0; 0.0; 0.0];
    let traj = simulate(&ss, &u).unwrap();
    // Impulse response of x+ = 0.5x + u, y = x: delayed geometric sequence.
    let expect = [0.0, 1.0, 0.5, 0.25];
    for (k, e) in expect.iter().enumerate() {
        assert_relative_eq!(traj.y()[(k, 0)], *e, epsilon = 1e-14);
    }
}

#[test]
fn low_pass_impulse_leads_with_markov_parameters() {
    let ss = low_pass_filter::<f64>();
    let u = DMatrix::from_fn(5, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let traj = simulate(&ss, &u).unwrap();
    assert_relative_eq!(traj.y()[(0, 0)], 0.10, epsilon = 1e-14);
    assert_relative_eq!(traj.y()[(1, 0)], 0.29, epsilon = 1e-14);
}

#[test]
fn hankel_matches_direct_definition() {
    let u = dmatrix![1.0; 2.0; 3.0; 4.0];
    let h = hankel(&u, 2).unwrap();
    assert_eq!(h, dmatrix![1.0, 2.0, 3.0; 2.0, 3.0, 4.0]);
    let h1 = hankel(&u, 1).unwrap();
    assert_eq!(h1, dmatrix![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn hankel_two_channels() {
    let u = dmatrix![1.0, 10.0; 2.0, 20.0; 3.0, 30.0];
    let h = hankel(&u, 2).unwrap();
    assert_eq!(h.shape(), (4, 2));
    assert_eq!(h, dmatrix![1.0, 2.0; 10.0, 20.0; 2.0, 3.0; 20.0, 30.0]);
}

#[test]
fn impulse_is_not_persistently_exciting() {
    let u = dmatrix![1.0; 0.0; 0.0; 0.0; 0.0];
    assert!(!is_persistently_exciting(&u, 2, 1e-8).unwrap());
}

#[test]
fn ramp_is_persistently_exciting_of_order_two() {
    let u = dmatrix![1.0; 2.0; 3.0; 4.0];
    assert!(is_persistently_exciting(&u, 2, 1e-8).unwrap());
}

#[test]
fn random_input_is_persistently_exciting() {
    let mut r = rng(7);
    let u = gaussian_input(&mut r, 50, 2);
    assert!(is_persistently_exciting(&u, 7, 1e-8).unwrap());
}

#[test]
fn full_state_measurement_has_lag_one() {
    let ss = StateSpace::new(
        dmatrix![0.3, 0.1; 0.0, 0.2],
        dmatrix![1.0, 0.0; 0.0, 1.0],
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 2),
    )
    .unwrap();
    assert_eq!(lag(&ss, 1e-8).unwrap(), 1);
}

#[test]
fn filter_lag_is_two() {
    assert_eq!(lag(&low_pass_filter::<f64>(), 1e-8).unwrap(), 2);
    assert_eq!(lag(&high_pass_filter::<f64>(), 1e-8).unwrap(), 2);
}

#[test]
fn mimo_lag_matches_rank_sweep() {
    let ss = unstable_mimo::<f64>();
    let n = ss.state_dim();
    // Independent sweep: stack C, CA, ... and count singular values.
    let mut expectation = None;
    let mut block = ss.c().clone();
    let mut stacked = DMatrix::<f64>::zeros(0, n);
    for depth in 1..=n {
        let mut next = DMatrix::zeros(stacked.nrows() + block.nrows(), n);
        next.view_mut((0, 0), (stacked.nrows(), n)).copy_from(&stacked);
        next.view_mut((stacked.nrows(), 0), (block.nrows(), n)).copy_from(&block);
        stacked = next;
        if numerical_rank(&stacked, 1e-8) == n {
            expectation = Some(depth);
            break;
        }
        block = &block * ss.a();
    }
    assert_eq!(lag(&ss, 1e-8).unwrap(), expectation.unwrap());
}

#[test]
fn unobservable_pair_is_rejected() {
    let ss = StateSpace::new(
        dmatrix![0.5, 0.0; 0.0, 0.3],
        dmatrix![1.0; 1.0],
        dmatrix![1.0, 0.0],
        dmatrix![0.0],
    )
    .unwrap();
    let err = lag(&ss, 1e-8).unwrap_err();
    assert!(matches!(err, LtiError::NotObservable { .. }), "{err}");
}

#[test]
fn shift_output_only_touches_feedthrough() {
    let ss = low_pass_filter::<f64>();
    let shifted = shift_output(&ss, 0.10);
    assert_eq!(shifted.a(), ss.a());
    assert_eq!(shifted.b(), ss.b());
    assert_eq!(shifted.c(), ss.c());
    assert_relative_eq!(shifted.d()[(0, 0)], 0.0, epsilon = 1e-15);
}

#[test]
fn inverse_of_scalar_example() {
    let ss = StateSpace::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![2.0]).unwrap();
    let inv = inverse_system(&ss).unwrap();
    assert_relative_eq!(inv.a()[(0, 0)], 0.0, epsilon = 1e-15);
    assert_relative_eq!(inv.b()[(0, 0)], 0.5, epsilon = 1e-15);
    assert_relative_eq!(inv.c()[(0, 0)], -0.5, epsilon = 1e-15);
    assert_relative_eq!(inv.d()[(0, 0)], 0.5, epsilon = 1e-15);
}

#[test]
fn inverse_with_zero_c_keeps_dynamics() {
    let ss = StateSpace::new(
        dmatrix![0.4, 0.1; 0.0, 0.6],
        dmatrix![1.0, 0.0; 0.0, 1.0],
        DMatrix::zeros(2, 2),
        DMatrix::identity(2, 2),
    )
    .unwrap();
    let inv = inverse_system(&ss).unwrap();
    assert_eq!(inv.a(), ss.a());
    assert_eq!(inv.b(), ss.b());
    assert_eq!(inv.c(), ss.c());
    assert_eq!(inv.d(), ss.d());
}

#[test]
fn singular_feedthrough_is_rejected() {
    let ss = lag_system();
    let err = inverse_system(&ss).unwrap_err();
    assert!(matches!(err, LtiError::SingularFeedthrough { .. }), "{err}");
}

#[test]
fn inverse_round_trip_recovers_input() {
    let mut r = rng(11);
    let base = rand_minimal(&mut r, 3, 2, 0.8);
    // A dominant feedthrough keeps the inverse dynamics tame; without it the
    // exact recursion still holds but rounding grows along unstable inverse
    // modes.
    let d = DMatrix::identity(2, 2) * 3.0 + common::rand_matrix(&mut r, 2, 2, 0.3);
    let ss = StateSpace::new(base.a().clone(), base.b().clone(), base.c().clone(), d).unwrap();
    let inv = inverse_system(&ss).unwrap();
    let u = gaussian_input(&mut r, 40, 2);
    let traj = simulate(&ss, &u).unwrap();
    let back = simulate(&inv, traj.y()).unwrap();
    let err = (back.y() - &u).amax();
    assert!(err <= 1e-10 * u.amax().max(1.0), "round trip error {err}");
}

#[test]
fn freq_response_static_is_feedthrough() {
    let ss = StateSpace::static_gain(dmatrix![2.0]).unwrap();
    let h = freq_response(&ss, 1.234).unwrap();
    assert_relative_eq!(h[(0, 0)].re, 2.0);
    assert_relative_eq!(h[(0, 0)].im, 0.0);
}

#[test]
fn filter_dc_and_nyquist_values() {
    let low = freq_response(&low_pass_filter::<f64>(), 0.0).unwrap();
    assert_relative_eq!(low[(0, 0)].re, 1.023076923077, epsilon = 1e-9);
    assert_relative_eq!(low[(0, 0)].im, 0.0, epsilon = 1e-12);
    let high = freq_response(&high_pass_filter::<f64>(), std::f64::consts::PI).unwrap();
    assert_relative_eq!(high[(0, 0)].re, 1.001718061674, epsilon = 1e-9);
    assert_relative_eq!(high[(0, 0)].im, 0.0, epsilon = 1e-12);
}

#[test]
fn pole_on_unit_circle_is_flagged() {
    let ss = StateSpace::new(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap();
    let err = freq_response(&ss, 0.0).unwrap_err();
    assert!(matches!(err, LtiError::UnitCirclePole { .. }), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Simulation is linear in the input.
    #[test]
    fn simulate_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut r = rng(seed);
        let ss = rand_minimal(&mut r, 3, 2, 0.9);
        let u1 = gaussian_input(&mut r, 25, 2);
        let u2 = gaussian_input(&mut r, 25, 2);
        let mix = &u1 * a + &u2 * b;
        let y_mix = simulate(&ss, &mix).unwrap();
        let y1 = simulate(&ss, &u1).unwrap();
        let y2 = simulate(&ss, &u2).unwrap();
        let expect = y1.y() * a + y2.y() * b;
        let scale = expect.amax().max(1.0);
        prop_assert!((y_mix.y() - expect).amax() <= 1e-12 * scale);
    }

    /// The first block-row of a Hankel matrix re-lists the leading samples.
    #[test]
    fn hankel_first_row_reproduces_samples(steps in 4usize..20, depth in 1usize..4) {
        prop_assume!(depth <= steps);
        let mut r = rng(steps as u64 * 31 + depth as u64);
        let u = gaussian_input(&mut r, steps, 2);
        let h = hankel(&u, depth).unwrap();
        for col in 0..(steps - depth + 1) {
            for ch in 0..2 {
                prop_assert_eq!(h[(ch, col)], u[(col, ch)]);
            }
        }
    }

    /// Inverting twice returns the original realization.
    #[test]
    fn inverse_is_an_involution(seed in 0u64..1000) {
        let mut r = rng(seed);
        let ss = rand_minimal(&mut r, 3, 2, 0.8);
        let twice = inverse_system(&inverse_system(&ss).unwrap()).unwrap();
        prop_assert!((twice.a() - ss.a()).amax() <= 1e-10);
        prop_assert!((twice.b() - ss.b()).amax() <= 1e-10);
        prop_assert!((twice.c() - ss.c()).amax() <= 1e-10);
        prop_assert!((twice.d() - ss.d()).amax() <= 1e-10);
    }

    /// Lag never exceeds the state dimension for observable pairs.
    #[test]
    fn lag_is_at_most_state_dim(seed in 0u64..1000, n in 1usize..5) {
        let mut r = rng(seed);
        let ss = rand_minimal(&mut r, n, 2, 0.8);
        prop_assert!(lag(&ss, 1e-8).unwrap() <= n);
    }

    /// Shifting the output shifts the frequency response diagonal exactly.
    #[test]
    fn shift_moves_response_diagonal(seed in 0u64..1000, alpha in -2.0f64..2.0, theta in 0.0f64..3.1) {
        let mut r = rng(seed);
        let ss = rand_minimal(&mut r, 3, 2, 0.85);
        let direct = freq_response(&shift_output(&ss, alpha), theta).unwrap();
        let mut expect = freq_response(&ss, theta).unwrap();
        for i in 0..2 {
            expect[(i, i)].re -= alpha;
        }
        let err = (direct - expect).map(|z| z.norm_sqr().sqrt()).amax();
        prop_assert!(err <= 1e-12);
    }
}
