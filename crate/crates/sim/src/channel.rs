use rand::Rng;
use rand_distr::StandardNormal;
use wmse_core::linalg::CMatrix;
use wmse_core::system_model::ChannelModel;
use wmse_core::Complex64;

use crate::rng::{stream_rng, Domain};

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn cn01(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// i.i.d. Rayleigh channel matrix for `(seed, trial)`. Independent of the
/// experiment and SNR point, so every sweep sees the same draws.
pub fn draw_channel_matrix(seed: u64, trial: u64, n_rx: usize, n_tx: usize) -> CMatrix {
    let mut rng = stream_rng(seed, Domain::Channel, 0, trial, 0);
    CMatrix::from_fn(n_rx, n_tx, |_, _| cn01(&mut rng))
}

pub fn generate_channel(
    seed: u64,
    trial: u64,
    n_rx: usize,
    n_tx: usize,
    noise_variance: f64,
) -> wmse_core::Result<ChannelModel> {
    ChannelModel::with_white_noise(draw_channel_matrix(seed, trial, n_rx, n_tx), noise_variance)
}
