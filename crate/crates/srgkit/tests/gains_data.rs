//! Data-driven gain bounds: snapshot assembly, shift commutation, and
//! agreement with the model-based route on simulated trajectories.

mod common;

use nalgebra::{dmatrix, DMatrix};
use proptest::prelude::*;

use common::{assert_close, gaussian_input, rand_minimal, rng};
use srgkit::fixtures::low_pass_filter;
use srgkit::gains::data::{
    build_data_matrices, gain_annulus_data, max_gain_data, min_gain_data, shift_data,
    shift_trajectory, DataGainOpts,
};
use srgkit::gains::ss::{gain_annulus, max_gain};
use srgkit::gains::{Gain, GainError};
use srgkit::lti::{lag, simulate, OperatorKind, StateSpace, Trajectory};

fn data_opts(n: usize) -> DataGainOpts<f64> {
    DataGainOpts { state_dim: Some(n), ..DataGainOpts::default() }
}

#[test]
fn snapshot_matrices_of_tiny_trajectory() {
    let traj = Trajectory::new(
        DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]),
        DMatrix::from_column_slice(3, 1, &[4.0, 5.0, 6.0]),
    )
    .unwrap();
    let dm = build_data_matrices(&traj, 1).unwrap();
    assert_eq!(dm.xi(), &dmatrix![1.0, 2.0; 4.0, 5.0]);
    assert_eq!(dm.xi_plus(), &dmatrix![2.0, 3.0; 5.0, 6.0]);
    assert_eq!(dm.u(), &dmatrix![2.0, 3.0]);
    assert_eq!(dm.y(), &dmatrix![5.0, 6.0]);
    assert_eq!(dm.window_len(), 1);
    assert_eq!(dm.io_dim(), 1);
    assert_eq!(dm.num_cols(), 2);
}

#[test]
fn window_length_and_length_guards() {
    let traj = Trajectory::<f64>::new(DMatrix::zeros(3, 1), DMatrix::zeros(3, 1)).unwrap();
    assert!(matches!(
        build_data_matrices(&traj, 0),
        Err(GainError::InvalidWindow { l: 0 })
    ));
    assert!(matches!(
        build_data_matrices(&traj, 2),
        Err(GainError::TrajectoryTooShort { len: 3, need: 4 })
    ));
}

#[test]
fn shifting_commutes_with_assembly() {
    let mut r = rng(5);
    let traj = Trajectory::new(
        common::rand_matrix(&mut r, 12, 2, 1.0),
        common::rand_matrix(&mut r, 12, 2, 1.0),
    )
    .unwrap();
    let alpha = 0.37;
    let a = shift_data(&build_data_matrices(&traj, 2).unwrap(), alpha);
    let b = build_data_matrices(&shift_trajectory(&traj, alpha), 2).unwrap();
    assert!((a.xi() - b.xi()).amax() <= 1e-14);
    assert!((a.xi_plus() - b.xi_plus()).amax() <= 1e-14);
    assert!((a.u() - b.u()).amax() <= 1e-14);
    assert!((a.y() - b.y()).amax() <= 1e-14);
}

/// The snapshot route reproduces the model-based bounds from one noise-free
/// record, at the shared cross-method tolerance.
#[test]
fn data_gains_match_model_gains_on_low_pass() {
    let ss = low_pass_filter::<f64>();
    let l = lag(&ss, 1e-8).unwrap();
    let mut r = rng(42);
    let u = gaussian_input(&mut r, 120, 1);
    let traj = simulate(&ss, &u).unwrap();
    let dm = build_data_matrices(&traj, l).unwrap();
    let opts = data_opts(2);
    for kind in [OperatorKind::TruncatedLimit, OperatorKind::L2] {
        for alpha in [0.0, 0.5] {
            let model = gain_annulus(&ss, alpha, kind, &opts.base).unwrap();
            let data = gain_annulus_data(&dm, alpha, kind, &opts).unwrap();
            let (gm, gd) = (model.gamma.finite().unwrap(), data.gamma.finite().unwrap());
            assert_close(gd, gm, 1e-4, &format!("gamma kind {kind:?} alpha {alpha}"));
            // Inner bounds near zero are certified only up to solver mush;
            // both routes may round a tiny threshold down to it.
            let tol = 1e-4 * f64::max(1.0, model.zeta);
            assert!(
                (data.zeta - model.zeta).abs() <= tol.max(1e-4),
                "zeta kind {kind:?} alpha {alpha}: {} vs {}",
                data.zeta,
                model.zeta
            );
        }
    }
}

/// Two different input realizations certify the same bounds.
#[test]
fn data_gains_are_seed_invariant() {
    let ss = rand_minimal(&mut rng(13), 2, 1, 0.7);
    let l = lag(&ss, 1e-8).unwrap();
    let opts = data_opts(2);
    let mut gains = Vec::new();
    for seed in [101, 202] {
        let u = gaussian_input(&mut rng(seed), 100, 1);
        let traj = simulate(&ss, &u).unwrap();
        let dm = build_data_matrices(&traj, l).unwrap();
        let g = max_gain_data(&dm, OperatorKind::L2, &opts).unwrap().finite().unwrap();
        let z = min_gain_data(&dm, OperatorKind::L2, &opts).unwrap();
        gains.push((g, z));
    }
    assert_close(gains[0].0, gains[1].0, 1e-4, "seed-invariant gamma");
    assert_close(gains[0].1, gains[1].1, 1e-4, "seed-invariant zeta");
}

#[test]
fn unexercised_input_is_refused() {
    let ss = low_pass_filter::<f64>();
    let u = DMatrix::from_element(60, 1, 1.0);
    let traj = simulate(&ss, &u).unwrap();
    let dm = build_data_matrices(&traj, 2).unwrap();
    let err = max_gain_data(&dm, OperatorKind::L2, &data_opts(2)).unwrap_err();
    assert!(matches!(err, GainError::NotPersistentlyExciting { order: 5 }), "{err}");
    // Waiving the state dimension skips the excitation precondition.
    let waived = DataGainOpts::default();
    assert!(max_gain_data(&dm, OperatorKind::L2, &waived).is_ok());
}

/// A record of a static relation certifies that relation's gain.
#[test]
fn static_record_recovers_static_gain() {
    let mut r = rng(3);
    let u = gaussian_input(&mut r, 40, 1);
    let y = u.scale(2.0);
    let traj = Trajectory::new(u, y).unwrap();
    let dm = build_data_matrices(&traj, 1).unwrap();
    let opts = DataGainOpts::default();
    for kind in [OperatorKind::TruncatedLimit, OperatorKind::L2] {
        let g = max_gain_data(&dm, kind, &opts).unwrap().finite().unwrap();
        assert_close(g, 2.0, 1e-4, "static gamma");
        let z = min_gain_data(&dm, kind, &opts).unwrap();
        assert_close(z, 2.0, 1e-4, "static zeta");
    }
}

/// Data generated by an exponentially unstable system still witnesses the
/// kind split: no finite truncated-limit bound, finite doubly-infinite one.
#[test]
fn unstable_record_splits_by_kind() {
    let ss = StateSpace::new(dmatrix![2.0], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0]).unwrap();
    let mut r = rng(8);
    let u = gaussian_input(&mut r, 24, 1);
    let traj = simulate(&ss, &u).unwrap();
    let dm = build_data_matrices(&traj, 1).unwrap();
    let opts = data_opts(1);
    let trunc = max_gain_data(&dm, OperatorKind::TruncatedLimit, &opts).unwrap();
    assert!(matches!(trunc, Gain::Infinite), "expected unbounded, got {trunc:?}");
    let l2 = max_gain_data(&dm, OperatorKind::L2, &opts).unwrap().finite().unwrap();
    assert_close(l2, 1.0, 1e-3, "doubly-infinite max from data");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Shift commutation holds for arbitrary records and window lengths.
    #[test]
    fn shift_commutation_is_exact(seed in 0u64..500, l in 1usize..3, alpha in -1.0f64..1.0) {
        let mut r = rng(seed);
        let traj = Trajectory::new(
            common::rand_matrix(&mut r, 10, 1, 2.0),
            common::rand_matrix(&mut r, 10, 1, 2.0),
        ).unwrap();
        let a = shift_data(&build_data_matrices(&traj, l).unwrap(), alpha);
        let b = build_data_matrices(&shift_trajectory(&traj, alpha), l).unwrap();
        prop_assert!((a.xi() - b.xi()).amax() <= 1e-13);
        prop_assert!((a.xi_plus() - b.xi_plus()).amax() <= 1e-13);
        prop_assert!((a.y() - b.y()).amax() <= 1e-13);
    }

    /// On random stable systems the two certification routes agree on the
    /// outer bound.
    #[test]
    fn data_route_tracks_model_route(seed in 0u64..300) {
        let mut r = rng(seed);
        let ss = rand_minimal(&mut r, 2, 1, 0.75);
        let l = lag(&ss, 1e-8).unwrap();
        let u = gaussian_input(&mut r, 90, 1);
        let traj = simulate(&ss, &u).unwrap();
        let dm = build_data_matrices(&traj, l).unwrap();
        let opts = data_opts(2);
        let gm = max_gain(&ss, OperatorKind::L2, &opts.base).unwrap().finite().unwrap();
        let gd = max_gain_data(&dm, OperatorKind::L2, &opts).unwrap().finite().unwrap();
        prop_assert!((gd - gm).abs() <= 1e-4 * f64::max(1.0, gm), "{gd} vs {gm}");
    }
}
