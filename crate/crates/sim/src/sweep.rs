//! Monte Carlo sweeps. Each trial is an independent work item; results are
//! gathered in trial order so the output never depends on scheduling.

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use wmse_core::linalg::{self, CMatrix};
use wmse_core::power_allocation::pareto_waterfill;
use wmse_core::precoder::{
    design_lagrange, design_majorization, design_sum_mse, design_with_permutation, equalizer_only,
    pareto_structure, PermutationStrategy,
};
use wmse_core::system_model::{
    achievable_rate, lmmse_equalizer, mse_matrix_lmmse, whitened_svd, ChannelModel, DiagonalWeights,
};
use wmse_core::Complex64;

use crate::channel::{cn01, draw_channel_matrix};
use crate::config::{Design, Experiment, SimConfig};
use crate::error::SimError;
use crate::modulation::{qpsk_decide, qpsk_symbol};
use crate::record::{Metric, SimRecord, AGGREGATE_TRIAL};
use crate::rng::{stream_rng, Domain};

/// Number of BER errors below which an estimate is tagged low-confidence.
pub const MIN_CONFIDENT_ERRORS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Value(Metric, f64),
    Errors { errors: u64, bits: u64 },
}

impl Outcome {
    fn metric(self) -> Metric {
        match self {
            Outcome::Value(m, _) => m,
            Outcome::Errors { .. } => Metric::Ber,
        }
    }

    fn value(self) -> f64 {
        match self {
            Outcome::Value(_, v) => v,
            Outcome::Errors { errors, bits } => errors as f64 / bits as f64,
        }
    }
}

/// `[snr][design][metric]` for one trial.
type TrialTable = Vec<Vec<Vec<Outcome>>>;

fn channel_at(cfg: &SimConfig, h: &CMatrix, snr_db: f64) -> Result<ChannelModel, SimError> {
    Ok(ChannelModel::with_white_noise(h.clone(), cfg.noise_variance(snr_db))?)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap_or(i);
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn descending_order(w: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
    idx
}

fn weighted_mse_of(
    design: &Design,
    ch: &ChannelModel,
    w: &DiagonalWeights,
    power: f64,
) -> Result<f64, SimError> {
    let n = w.len();
    Ok(match design {
        Design::Exhaustive => design_lagrange(ch, w, power, PermutationStrategy::Exhaustive)?.objective,
        Design::Majorization => design_majorization(ch, w, power)?.objective,
        Design::Pairing => {
            design_lagrange(ch, w, power, PermutationStrategy::WeightChannelPairing)?.objective
        }
        Design::Reversal => {
            let mut perm = descending_order(w.as_slice());
            perm.reverse();
            design_with_permutation(ch, w, power, &perm)?.objective
        }
        Design::Permutation(p) => design_with_permutation(ch, w, power, p)?.objective,
        Design::Worst => {
            let mut perm: Vec<usize> = (0..n).collect();
            let mut worst = f64::NEG_INFINITY;
            loop {
                worst = worst.max(design_with_permutation(ch, w, power, &perm)?.objective);
                if !next_permutation(&mut perm) {
                    break worst;
                }
            }
        }
        other => return Err(SimError::Config(format!("design `{other}` has no weighted-MSE form"))),
    })
}

/// Precoder used by the sum-MSE and BER experiments.
pub fn link_precoder(design: &Design, ch: &ChannelModel, n_dat: usize, power: f64) -> Result<CMatrix, SimError> {
    Ok(match design {
        Design::EqualizerOnly => equalizer_only(ch.n_tx(), n_dat, power)?,
        Design::JointDiagonal => design_sum_mse(ch, n_dat, power, CMatrix::identity(n_dat, n_dat))?.design.f,
        Design::JointDft => design_sum_mse(ch, n_dat, power, linalg::dft_matrix(n_dat))?.design.f,
        other => return Err(SimError::Config(format!("design `{other}` is not a link design"))),
    })
}

fn pareto_point(alpha: f64, ch: &ChannelModel, n_dat: usize, power: f64) -> Result<[Outcome; 2], SimError> {
    let svd = whitened_svd(ch)?;
    let h_sq = &svd.h_sq[..n_dat];
    let w_tilde: Vec<f64> = h_sq
        .iter()
        .map(|&h| if h > 0.0 { h.powf(-alpha) } else { 0.0 })
        .collect();
    let alloc = pareto_waterfill(&w_tilde, h_sq, power)?;
    let design = pareto_structure(ch, &alloc.p)?;
    Ok([
        Outcome::Value(Metric::SumMse, mse_matrix_lmmse(ch, &design.f)?.trace()),
        Outcome::Value(Metric::Rate, achievable_rate(ch, &design.f)?),
    ])
}

fn analytic_trial(cfg: &SimConfig, experiment: Experiment, trial: usize) -> Result<TrialTable, SimError> {
    let h = draw_channel_matrix(cfg.seed, trial as u64, cfg.n_rx, cfg.n_tx);
    let power = cfg.power();
    let weights = match experiment {
        Experiment::WmseSweep => Some(DiagonalWeights::new(cfg.weights.clone())?),
        _ => None,
    };
    cfg.snr_db_grid
        .iter()
        .map(|&snr| {
            let ch = channel_at(cfg, &h, snr)?;
            cfg.designs
                .iter()
                .map(|d| -> Result<Vec<Outcome>, SimError> {
                    Ok(match (experiment, d) {
                        (Experiment::WmseSweep, _) => {
                            let w = weights.as_ref().expect("weights built for wmse-sweep");
                            vec![Outcome::Value(Metric::WeightedMse, weighted_mse_of(d, &ch, w, power)?)]
                        }
                        (Experiment::SumMseSweep, _) => {
                            let f = link_precoder(d, &ch, cfg.n_streams, power)?;
                            vec![Outcome::Value(Metric::SumMse, mse_matrix_lmmse(&ch, &f)?.trace())]
                        }
                        (Experiment::Pareto, Design::Tilt(a)) => pareto_point(*a, &ch, cfg.n_streams, power)?.to_vec(),
                        _ => return Err(SimError::Config(format!("design `{d}` not valid here"))),
                    })
                })
                .collect()
        })
        .collect()
}

fn ber_trial(cfg: &SimConfig, trial: usize) -> Result<TrialTable, SimError> {
    let exp = Experiment::BerSweep.id();
    let h = draw_channel_matrix(cfg.seed, trial as u64, cfg.n_rx, cfg.n_tx);
    let (n, k) = (cfg.n_streams, cfg.symbols_per_trial);
    cfg.snr_db_grid
        .iter()
        .enumerate()
        .map(|(si, &snr)| {
            let ch = channel_at(cfg, &h, snr)?;
            let mut bit_rng = stream_rng(cfg.seed, Domain::Bits, exp, trial as u64, si as u64);
            let bits: Vec<[u8; 2]> = (0..n * k)
                .map(|_| [bit_rng.random::<bool>() as u8, bit_rng.random::<bool>() as u8])
                .collect();
            // column-major: symbol vector j occupies bits[j*n..(j+1)*n]
            let s = CMatrix::from_fn(n, k, |i, j| {
                let b = bits[j * n + i];
                qpsk_symbol(b[0], b[1])
            });
            let mut noise_rng = stream_rng(cfg.seed, Domain::Noise, exp, trial as u64, si as u64);
            let sigma = cfg.noise_variance(snr).sqrt();
            let noise = CMatrix::from_fn(cfg.n_rx, k, |_, _| cn01(&mut noise_rng) * sigma);

            cfg.designs
                .iter()
                .map(|d| {
                    let f = link_precoder(d, &ch, n, cfg.power())?;
                    let g = lmmse_equalizer(&ch, &f)?;
                    let y = ch.h() * (&f * &s) + &noise;
                    let est = &g * y;
                    let errors = count_errors(&est, &bits);
                    Ok(vec![Outcome::Errors {
                        errors,
                        bits: 2 * (n * k) as u64,
                    }])
                })
                .collect()
        })
        .collect()
}

fn count_errors(est: &CMatrix, bits: &[[u8; 2]]) -> u64 {
    let n = est.nrows();
    let mut errors = 0;
    for j in 0..est.ncols() {
        for i in 0..n {
            let z: Complex64 = est[(i, j)];
            let (a, b) = qpsk_decide(z);
            let t = bits[j * n + i];
            errors += u64::from(a != t[0]) + u64::from(b != t[1]);
        }
    }
    errors
}

fn assemble(cfg: &SimConfig, experiment: Experiment, tables: &[TrialTable]) -> Vec<SimRecord> {
    let mut out = Vec::new();
    for (di, design) in cfg.designs.iter().enumerate() {
        for (si, &snr) in cfg.snr_db_grid.iter().enumerate() {
            let cells: Vec<&Vec<Outcome>> = tables.iter().map(|t| &t[si][di]).collect();
            let n_metrics = cells[0].len();
            let mut tag = experiment.name().to_string();
            let mut aggregates = Vec::with_capacity(n_metrics);
            for m in 0..n_metrics {
                let first = cells[0][m];
                let value = match first {
                    Outcome::Value(..) => cells.iter().map(|c| c[m].value()).sum::<f64>() / cells.len() as f64,
                    Outcome::Errors { .. } => {
                        let (mut e, mut b) = (0u64, 0u64);
                        for c in &cells {
                            if let Outcome::Errors { errors, bits } = c[m] {
                                e += errors;
                                b += bits;
                            }
                        }
                        if e < MIN_CONFIDENT_ERRORS {
                            warn!("{design} at {snr} dB: only {e} bit errors in {b} bits");
                            tag = format!("{}[low-confidence]", experiment.name());
                        }
                        e as f64 / b as f64
                    }
                };
                aggregates.push((first.metric(), value));
            }
            let row = |trial: i64, metric: Metric, value: f64, tag: &str| SimRecord {
                experiment: tag.to_string(),
                design: design.to_string(),
                snr_db: snr,
                trial,
                metric,
                value,
                seed_used: cfg.seed,
            };
            for &(metric, value) in &aggregates {
                out.push(row(AGGREGATE_TRIAL, metric, value, &tag));
            }
            for (t, c) in cells.iter().enumerate() {
                for o in c.iter() {
                    out.push(row(t as i64, o.metric(), o.value(), &tag));
                }
            }
        }
    }
    out
}

/// Runs one experiment in the current rayon pool.
pub fn run_sweep(cfg: &SimConfig, experiment: Experiment) -> Result<Vec<SimRecord>, SimError> {
    cfg.validate(experiment)?;
    info!(
        "{}: {} trials, {} SNR points, {} designs",
        experiment.name(),
        cfg.trials,
        cfg.snr_db_grid.len(),
        cfg.designs.len()
    );
    let tables: Vec<TrialTable> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| match experiment {
            Experiment::BerSweep => ber_trial(cfg, t),
            _ => analytic_trial(cfg, experiment, t),
        })
        .collect::<Result<_, _>>()?;
    Ok(assemble(cfg, experiment, &tables))
}

pub fn run_wmse_sweep(cfg: &SimConfig) -> Result<Vec<SimRecord>, SimError> {
    run_sweep(cfg, Experiment::WmseSweep)
}

pub fn run_summse_sweep(cfg: &SimConfig) -> Result<Vec<SimRecord>, SimError> {
    run_sweep(cfg, Experiment::SumMseSweep)
}

pub fn run_ber_sweep(cfg: &SimConfig) -> Result<Vec<SimRecord>, SimError> {
    run_sweep(cfg, Experiment::BerSweep)
}

/// α-tilt sweep along the Pareto boundary, reporting sum-MSE and rate.
pub fn run_pareto_sweep(cfg: &SimConfig) -> Result<Vec<SimRecord>, SimError> {
    run_sweep(cfg, Experiment::Pareto)
}

/// Runs `f` on a dedicated pool; `None` uses rayon's default width.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, SimError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(SimError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| SimError::Config(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Aggregate rows of `records` matching `design` and `metric`, in SNR order.
pub fn curve(records: &[SimRecord], design: &str, metric: Metric) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.trial == AGGREGATE_TRIAL && r.design == design && r.metric == metric)
        .map(|r| (r.snr_db, r.value))
        .collect()
}
