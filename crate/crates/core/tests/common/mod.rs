#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wmse_core::linalg::{CMatrix, FullSvd};
use wmse_core::system_model::ChannelModel;
use wmse_core::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// i.i.d. CN(0, 1) entries.
pub fn cgauss(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

pub fn random_psd(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = cgauss(rng, n, n);
    &a * a.adjoint()
}

pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    FullSvd::new(&cgauss(rng, n, n)).unwrap().u
}

pub fn white_channel(rng: &mut impl Rng, n_rx: usize, n_tx: usize, noise: f64) -> ChannelModel {
    ChannelModel::with_white_noise(cgauss(rng, n_rx, n_tx), noise).unwrap()
}

/// Scales `f` to Frobenius norm² equal to `power`.
pub fn normalize(f: CMatrix, power: f64) -> CMatrix {
    let norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    f * Complex64::new(power.sqrt() / norm, 0.0)
}

pub fn min_eig(a: &CMatrix) -> f64 {
    wmse_core::linalg::min_eigenvalue(a).unwrap()
}
