use std::process::{Command, Stdio};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmse_core::power_allocation::{waterfill_weighted, AllocationProblem, PowerAllocation};
use wmse_sim::channel::{cn01, draw_channel_matrix, generate_channel};
use wmse_sim::modulation::{qpsk_demap, qpsk_map};
use wmse_sim::record::{to_csv_string, AGGREGATE_TRIAL};
use wmse_sim::sweep::{curve, run_ber_sweep, run_pareto_sweep, run_summse_sweep, run_wmse_sweep, with_threads};
use wmse_sim::verify::{run_verify, run_verify_with};
use wmse_sim::{Design, Experiment, Metric, SimConfig};

fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[test]
fn channel_is_reproducible() {
    assert_eq!(draw_channel_matrix(3, 17, 4, 4), draw_channel_matrix(3, 17, 4, 4));
    assert_ne!(draw_channel_matrix(3, 17, 4, 4), draw_channel_matrix(3, 18, 4, 4));
    let ch = generate_channel(3, 17, 4, 2, 0.5).unwrap();
    assert_eq!(ch.h(), &draw_channel_matrix(3, 17, 4, 2));
}

#[test]
fn channel_entries_have_unit_power() {
    let n = 100_000 / 16;
    let mean: f64 = (0..n)
        .flat_map(|t| draw_channel_matrix(5, t as u64, 4, 4).iter().map(|z| z.norm_sqr()).collect::<Vec<_>>())
        .sum::<f64>()
        / (16 * n) as f64;
    assert!((mean - 1.0).abs() < 0.02, "mean |h|² = {mean}");
}

#[test]
fn trials_are_uncorrelated() {
    let n = 10_000;
    let (mut num, mut da, mut db) = (wmse_core::Complex64::new(0.0, 0.0), 0.0, 0.0);
    for t in 0..n {
        let a = draw_channel_matrix(6, t, 1, 1)[(0, 0)];
        let b = draw_channel_matrix(6, t + n, 1, 1)[(0, 0)];
        num += a * b.conj();
        da += a.norm_sqr();
        db += b.norm_sqr();
    }
    let rho = num.norm() / (da * db).sqrt();
    assert!(rho < 0.05, "correlation {rho}");
}

#[test]
fn qpsk_round_trip() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let len = 2 * r.random_range(1..16);
        let bits: Vec<u8> = (0..len).map(|_| r.random_range(0..2)).collect();
        assert_eq!(qpsk_demap(&qpsk_map(&bits).unwrap()), bits);
    }
}

#[test]
fn awgn_ber_matches_q_function() {
    let ebn0 = 10f64.powf(0.4);
    // Es = 1 carries two bits, so N0 = 1 / (2 Eb/N0)
    let sigma = (1.0 / (2.0 * ebn0)).sqrt();
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let n_bits = 400_000;
    let bits: Vec<u8> = (0..n_bits).map(|_| r.random_range(0..2)).collect();
    let rx: Vec<_> = qpsk_map(&bits).unwrap().into_iter().map(|s| s + cn01(&mut r) * sigma).collect();
    let errors = qpsk_demap(&rx).iter().zip(&bits).filter(|(a, b)| a != b).count();
    let p = q_function((2.0 * ebn0).sqrt());
    let measured = errors as f64 / n_bits as f64;
    let three_sigma = 3.0 * (p * (1.0 - p) / n_bits as f64).sqrt();
    assert!((measured - p).abs() < three_sigma, "{measured} vs {p} ± {three_sigma}");
}

fn small(experiment: Experiment) -> SimConfig {
    let mut c = SimConfig::defaults(experiment);
    c.trials = 10;
    c
}

#[test]
fn best_permutation_never_above_reversal() {
    let mut c = small(Experiment::WmseSweep);
    c.trials = 100;
    c.designs = vec![Design::Exhaustive, Design::Reversal];
    let rec = run_wmse_sweep(&c).unwrap();
    let best = curve(&rec, "exhaustive", Metric::WeightedMse);
    let rev = curve(&rec, "reversal", Metric::WeightedMse);
    assert_eq!(best.len(), 7);
    for (b, r) in best.iter().zip(&rev) {
        assert!(b.1 < r.1, "{b:?} vs {r:?}");
    }
}

#[test]
fn uniform_weights_make_permutations_coincide() {
    let mut c = small(Experiment::WmseSweep);
    c.weights = vec![0.25; 4];
    c.designs = vec![Design::Exhaustive, Design::Reversal, Design::Worst, Design::Permutation(vec![2, 0, 3, 1])];
    let rec = run_wmse_sweep(&c).unwrap();
    let base = curve(&rec, "exhaustive", Metric::WeightedMse);
    for d in ["reversal", "worst", "perm:2-0-3-1"] {
        for (a, b) in base.iter().zip(curve(&rec, d, Metric::WeightedMse)) {
            assert!((a.1 - b.1).abs() < 1e-9);
        }
    }
}

#[test]
fn sum_mse_tends_to_stream_count_at_low_snr() {
    let mut c = small(Experiment::SumMseSweep);
    c.snr_db_grid = vec![-80.0];
    let rec = run_summse_sweep(&c).unwrap();
    for r in rec.iter().filter(|r| r.trial == AGGREGATE_TRIAL) {
        assert!((r.value - 4.0).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn noiseless_link_is_error_free() {
    let mut c = small(Experiment::BerSweep);
    c.snr_db_grid = vec![200.0];
    c.symbols_per_trial = 1000;
    let rec = run_ber_sweep(&c).unwrap();
    assert!(rec.iter().all(|r| r.metric == Metric::Ber && r.value == 0.0));
    // zero errors cannot support a rate estimate
    assert!(rec.iter().all(|r| r.experiment == "ber-sweep[low-confidence]"));
}

#[test]
fn ber_and_mse_ranges() {
    let mut c = small(Experiment::BerSweep);
    c.symbols_per_trial = 1000;
    for r in run_ber_sweep(&c).unwrap() {
        assert!((0.0..=1.0).contains(&r.value));
    }
    for r in run_pareto_sweep(&small(Experiment::Pareto)).unwrap() {
        assert!(r.value >= 0.0 && r.value.is_finite());
    }
}

#[test]
fn records_follow_design_snr_trial_order() {
    let rec = run_summse_sweep(&small(Experiment::SumMseSweep)).unwrap();
    let c = small(Experiment::SumMseSweep);
    assert_eq!(rec.len(), 3 * 7 * 11);
    let keys: Vec<(usize, usize, i64)> = rec
        .iter()
        .map(|r| {
            let d = c.designs.iter().position(|d| d.to_string() == r.design).unwrap();
            let s = c.snr_db_grid.iter().position(|&s| s == r.snr_db).unwrap();
            (d, s, r.trial)
        })
        .collect();
    assert!(keys.windows(2).all(|k| k[0] < k[1]));
}

#[test]
fn csv_is_thread_count_independent() {
    let c = small(Experiment::BerSweep);
    let run = |t| with_threads(Some(t), || to_csv_string(&run_ber_sweep(&c).unwrap())).unwrap();
    let one = run(1);
    assert_eq!(one, run(4));
    assert!(one.starts_with("experiment,design,snr_db,trial,metric,value,seed_used\n"));
    assert!(!one.contains('\r'));
}

#[test]
fn verify_passes() {
    let report = run_verify(1);
    assert!(report.passed(), "{}", report.render());
    assert_eq!(report.ordering_instances, 10_000);
    assert!(report.render().contains("ordering violations"));
}

/// Water-filling with the closure test inverted: channels above the level
/// are starved and those below are fed.
fn flipped_threshold(prob: &AllocationProblem) -> wmse_core::Result<PowerAllocation> {
    let good = waterfill_weighted(prob)?;
    let mut p: Vec<f64> = prob
        .w()
        .iter()
        .zip(prob.h_sq())
        .map(|(w, h)| (1.0 / h - (w / (good.mu * h)).sqrt()).max(0.0))
        .collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x *= prob.power() / total);
    }
    Ok(PowerAllocation { p, ..good })
}

#[test]
fn verify_catches_flipped_threshold() {
    let report = run_verify_with(1, flipped_threshold);
    assert!(!report.passed());
    assert!(!report.check("waterfill-oracle-equivalence").unwrap().passed);
}

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wmse-sim"));
    c.stderr(Stdio::null());
    c
}

#[test]
fn cli_exit_codes_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# short run\ntrials = 3\nsnr_db = 0, 10\n").unwrap();
    let out = dir.path().join("out.csv");
    let status = cli()
        .args(["--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()])
        .args(["--set", "trials=2", "summse-sweep"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    // 3 designs x 2 SNR points x (aggregate + 2 trials) plus header
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",9")));

    std::fs::write(&cfg, "n_streams = 9\n").unwrap();
    let status = cli().args(["--config", cfg.to_str().unwrap(), "wmse-sweep"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = cli().args(["--set", "nonsense=1", "pareto"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
