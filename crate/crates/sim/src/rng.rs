//! Counter-style stream derivation: every `(seed, domain, experiment, trial,
//! snr index)` tuple owns an independent ChaCha8 stream, so work items can
//! run in any order on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Channel = 1,
    Bits = 2,
    Noise = 3,
    Verify = 4,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_id(domain: Domain, experiment: u64, trial: u64, snr_idx: u64) -> u64 {
    [experiment, trial, snr_idx]
        .iter()
        .fold(splitmix(domain as u64), |acc, &x| splitmix(acc ^ x))
}

pub fn stream_rng(seed: u64, domain: Domain, experiment: u64, trial: u64, snr_idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(domain, experiment, trial, snr_idx));
    rng
}
