use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::{frobenius, unitary_defect};
use num_complex::Complex64;
use crate::system_model::mse_matrix_lmmse;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

fn cgauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| {
        Complex64::new(gauss(rng), gauss(rng)) * core::f64::consts::FRAC_1_SQRT_2
    })
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    crate::linalg::FullSvd::new(&cgauss(rng, n, n)).unwrap().u
}

fn channel(seed: u64, n_rx: usize, n_tx: usize, noise: f64) -> ChannelModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelModel::with_white_noise(cgauss(&mut rng, n_rx, n_tx), noise).unwrap()
}

fn weights(w: &[f64]) -> DiagonalWeights {
    DiagonalWeights::new(w.to_vec()).unwrap()
}

#[test]
fn identity_permutation_wins_for_sorted_weights() {
    let ch = channel(1, 4, 4, 0.1);
    let w = weights(&[0.4, 0.3, 0.2, 0.1]);
    let r = design_lagrange(&ch, &w, 4.0, PermutationStrategy::Exhaustive).unwrap();
    assert_eq!(r.certificate, Certificate::BruteForcedPermutation);
    assert_eq!(r.candidates_examined, 24);
    assert!(frobenius(&(r.design.u_right.clone() - CMatrix::identity(4, 4))) == 0.0);
    assert!(r.design.reconstruction_error() < 1e-12);
    assert!((r.design.total_power() - 4.0).abs() < 1e-9);
}

#[test]
fn equal_weights_prune_to_one_candidate() {
    let ch = channel(2, 4, 4, 0.1);
    let w = weights(&[1.0; 4]);
    let r = design_lagrange(&ch, &w, 4.0, PermutationStrategy::Exhaustive).unwrap();
    assert_eq!(r.candidates_examined, 1);
    for perm in [[3, 2, 1, 0], [1, 0, 3, 2], [2, 0, 3, 1]] {
        let other = design_with_permutation(&ch, &w, 4.0, &perm).unwrap();
        assert!((other.objective - r.objective).abs() < 1e-9);
    }
}

#[test]
fn exhaustive_is_never_beaten() {
    let ch = channel(3, 3, 3, 0.2);
    let w = weights(&[0.1, 0.5, 0.3]);
    let best = design_lagrange(&ch, &w, 3.0, PermutationStrategy::Exhaustive).unwrap();
    assert_eq!(best.candidates_examined, 6);
    let mut perm = vec![0, 1, 2];
    for _ in 0..6 {
        let r = design_with_permutation(&ch, &w, 3.0, &perm).unwrap();
        assert!(best.objective <= r.objective + 1e-12);
        next_permutation(&mut perm);
    }
}

fn next_permutation(p: &mut [usize]) {
    let n = p.len();
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        p.reverse();
        return;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
}

#[test]
fn too_many_streams() {
    let ch = channel(4, 9, 9, 1.0);
    let w = weights(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
    assert_eq!(
        design_lagrange(&ch, &w, 1.0, PermutationStrategy::Exhaustive).unwrap_err(),
        Error::TooManyStreams { count: 9, max: 8 }
    );
    assert!(design_lagrange(&ch, &w, 1.0, PermutationStrategy::WeightChannelPairing).is_ok());
}

#[test]
fn majorization_pairings() {
    let ch = channel(5, 4, 4, 0.1);
    let dec = weights(&[0.4, 0.3, 0.2, 0.1]);
    let m = design_majorization(&ch, &dec, 4.0).unwrap();
    let p = design_lagrange(&ch, &dec, 4.0, PermutationStrategy::WeightChannelPairing).unwrap();
    assert_eq!(m.design.f, p.design.f);
    assert_eq!(m.certificate, Certificate::OrderingCertified);

    let inc = weights(&[0.1, 0.2, 0.3, 0.4]);
    let m = design_majorization(&ch, &inc, 4.0).unwrap();
    assert_eq!(m.design.u_right, crate::linalg::permutation_matrix(&[3, 2, 1, 0]));
    let ex = design_lagrange(&ch, &inc, 4.0, PermutationStrategy::Exhaustive).unwrap();
    assert!((m.objective - ex.objective).abs() < 1e-9);
}

#[test]
fn general_weight_reduces_to_majorization() {
    let ch = channel(6, 4, 4, 0.3);
    let wv = [0.4, 0.3, 0.2, 0.1];
    let gw = GeneralWeight::new(crate::linalg::diag(&wv)).unwrap();
    let g = design_general_weight(&ch, &gw, 2.0).unwrap();
    let m = design_majorization(&ch, &weights(&wv), 2.0).unwrap();
    assert!(frobenius(&(g.design.f - m.design.f)) < 1e-12);
    assert!((g.objective - m.objective).abs() < 1e-12);
}

#[test]
fn general_weight_beats_random_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ch = channel(7, 4, 4, 0.5);
    let a = cgauss(&mut rng, 4, 4);
    let gw = GeneralWeight::new(&a * a.adjoint()).unwrap();
    let r = design_general_weight(&ch, &gw, 4.0).unwrap();
    for _ in 0..200 {
        let q = random_unitary(&mut rng, 4);
        let alt = PrecoderDesign::assemble(r.design.v_left.clone(), r.design.gains.clone(), q, None)
            .unwrap();
        let obj = gw.objective(&mse_matrix_lmmse(&ch, &alt.f).unwrap()).unwrap();
        assert!(r.objective <= obj + 1e-9);
    }
}

#[test]
fn minmax_equalizes_diagonal() {
    let ch = channel(8, 4, 4, 0.2);
    let r = design_minmax(&ch, 4, 4.0).unwrap();
    let d = mse_matrix_lmmse(&ch, &r.design.f).unwrap().diagonal();
    let spread = d.iter().copied().fold(f64::MIN, f64::max) - d.iter().copied().fold(f64::MAX, f64::min);
    assert!(spread < 1e-9);
    let mean = d.iter().sum::<f64>() / 4.0;
    assert!((r.objective - mean).abs() < 1e-12);

    let diag_design = design_sum_mse(&ch, 4, 4.0, CMatrix::identity(4, 4)).unwrap();
    let di = mse_matrix_lmmse(&ch, &diag_design.design.f).unwrap().diagonal();
    assert!(di.iter().copied().fold(f64::MIN, f64::max) >= r.objective - 1e-12);
    assert!((diag_design.objective - mean * 4.0).abs() < 1e-9);
}

#[test]
fn sum_mse_relaxation() {
    let ch = ChannelModel::with_white_noise(CMatrix::identity(1, 1), 1.0).unwrap();
    let r = design_sum_mse_q(&ch, 2.0, 1).unwrap();
    assert!((r.q[(0, 0)].re - 2.0).abs() < 1e-12);
    assert_eq!(r.rank_gap, 0);

    let h = crate::linalg::diag(&[2.0, 1.8, 1.5, 1.2]);
    let ch = ChannelModel::with_white_noise(h, 1.0).unwrap();
    let r = design_sum_mse_q(&ch, 100.0, 2).unwrap();
    assert_eq!(r.rank, 4);
    assert_eq!(r.rank_gap, 2);
}

#[test]
fn pareto_structure_spectrum() {
    let ch = channel(9, 3, 3, 0.5);
    let svd = whitened_svd(&ch).unwrap();
    let w_tilde = [1.0, 1.0, 1.0];
    let a = crate::power_allocation::pareto_waterfill(&w_tilde, &svd.h_sq, 3.0).unwrap();
    let x = pareto_structure(&ch, &a.p).unwrap();
    let spec = matrix_snr_spectrum(&ch, &x.f).unwrap();
    let mut expected: Vec<f64> = a.p.iter().zip(&svd.h_sq).map(|(p, h)| p * h).collect();
    expected.sort_by(|a, b| b.total_cmp(a));
    for (s, e) in spec.iter().zip(&expected) {
        assert!((s - e).abs() < 1e-10);
    }
    let zero = pareto_structure(&ch, &[0.0; 3]).unwrap();
    assert_eq!(frobenius(&zero.f), 0.0);
    assert!(matches!(
        pareto_structure(&ch, &[0.0, 1.0, 0.0]),
        Err(Error::OrderingViolation { index: 1 })
    ));
}

#[test]
fn capacity_scalar_and_trace() {
    let ch = ChannelModel::with_white_noise(CMatrix::identity(1, 1), 1.0).unwrap();
    let r = design_capacity_wmmse(&ch, 1.0, 50, 1e-12).unwrap();
    assert!((r.design.f[(0, 0)].norm() - 1.0).abs() < 1e-12);
    let rate = crate::system_model::achievable_rate(&ch, &r.design.f).unwrap();
    assert!((rate - core::f64::consts::LN_2).abs() < 1e-12);

    let ch = channel(10, 4, 4, 0.5);
    let r = design_capacity_wmmse(&ch, 4.0, 200, 1e-13).unwrap();
    assert_eq!(r.certificate, Certificate::IterativeConverged);
    assert!(r.trace.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    let svd = whitened_svd(&ch).unwrap();
    let (_, oracle) = crate::power_allocation::capacity_waterfill(&svd.h_sq, 4.0).unwrap();
    let rate = crate::system_model::achievable_rate(&ch, &r.design.f).unwrap();
    assert!((rate - oracle).abs() < 1e-6);
}

#[test]
fn capacity_reports_non_convergence() {
    let ch = channel(11, 4, 4, 0.5);
    match design_capacity_wmmse(&ch, 4.0, 2, 0.0) {
        Err(Error::NoConvergence { iterations, best }) => {
            assert_eq!(iterations, 2);
            assert_eq!(best.trace.len(), 3);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn training_identity_is_uniform() {
    let r = design_training(&CMatrix::identity(3, 3), &CMatrix::identity(3, 3), 3.0).unwrap();
    for g in &r.design.gains {
        assert!((g - 1.0).abs() < 1e-12);
    }
    let xxh = &r.design.f * r.design.f.adjoint();
    assert!(frobenius(&(xxh - CMatrix::identity(3, 3))) < 1e-12);
}

#[test]
fn training_opposed_pairing() {
    let rn = crate::linalg::diag(&[1.0, 2.0]);
    let rh = crate::linalg::diag(&[2.0, 1.0]);
    let r = design_training(&rn, &rh, 1.0).unwrap();
    // best noise direction (index 0) carries the most power, aimed at the
    // largest prior variance (index 0)
    let x = &r.design.f;
    assert!(x[(0, 0)].norm() > x[(1, 1)].norm());
    assert!(x[(0, 1)].norm() < 1e-12 && x[(1, 0)].norm() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let y = cgauss(&mut rng, 2, 2);
        let scale = 1.0 / libm::sqrt(y.iter().map(|z| z.norm_sqr()).sum::<f64>());
        let y = y * Complex64::new(scale, 0.0);
        assert!(r.objective <= structured::training_objective(&rn, &rh, &y).unwrap() + 1e-12);
    }
}

#[test]
fn per_antenna_single_antenna_matches_sum_power() {
    let ch = channel(13, 3, 1, 0.4);
    let w = weights(&[1.0]);
    let r = design_per_antenna(&ch, &w, &[2.0], PerAntennaOptions::default()).unwrap();
    let s = design_majorization(&ch, &w, 2.0).unwrap();
    assert!((r.objective - s.objective).abs() < 1e-10);
}

#[test]
fn per_antenna_budgets_hold() {
    let ch = channel(14, 4, 4, 0.5);
    let w = weights(&[0.1, 0.2, 0.3, 0.4]);
    let budgets = [1.0, 2.0, 3.0, 4.0];
    let r = design_per_antenna(&ch, &w, &budgets, PerAntennaOptions::default()).unwrap();
    assert_eq!(r.certificate, Certificate::FixedPointConverged);
    for (q, p) in r.design.antenna_powers().iter().zip(&budgets) {
        assert!(*q <= p + 1e-8);
    }
    let naive = CMatrix::from_fn(4, 4, |i, j| if i == j { Complex64::new(libm::sqrt(budgets[i]), 0.0) } else { Complex64::new(0.0, 0.0) });
    assert!(r.objective <= design_objective(&ch, &w, &naive).unwrap());
    assert!(r.design.reconstruction_error() < 1e-9);
}

#[test]
fn robust_zero_error_matches_perfect_csi() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let h = cgauss(&mut rng, 4, 4);
    let w = weights(&[0.4, 0.3, 0.2, 0.1]);
    let r = design_robust(&h, &CMatrix::zeros(4, 4), 0.2, &w, 4.0).unwrap();
    let ch = ChannelModel::with_white_noise(h, 0.2).unwrap();
    let s = design_majorization(&ch, &w, 4.0).unwrap();
    assert!((r.objective - s.objective).abs() < 1e-10);
    assert!((r.design.total_power() - 4.0).abs() < 1e-9);
}

#[test]
fn robust_beats_random_precoders() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let h = cgauss(&mut rng, 4, 4);
    let e = cgauss(&mut rng, 4, 4);
    let sigma = (&e * e.adjoint()) * Complex64::new(0.05, 0.0);
    let w = weights(&[0.1, 0.2, 0.3, 0.4]);
    let r = design_robust(&h, &sigma, 0.3, &w, 4.0).unwrap();
    assert!((r.design.total_power() - 4.0).abs() < 1e-9);
    for _ in 0..200 {
        let f = cgauss(&mut rng, 4, 4);
        let f = &f * Complex64::new(2.0 / crate::linalg::frobenius(&f), 0.0);
        assert!(r.objective <= robust_objective(&h, &sigma, 0.3, &w, &f).unwrap() + 1e-12);
    }
    assert!(unitary_defect(&r.design.u_right) < 1e-12);
}
