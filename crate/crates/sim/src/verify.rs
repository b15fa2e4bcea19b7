//! Self-check suite behind the `verify` subcommand.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wmse_core::linalg::{self, CMatrix};
use wmse_core::majorization::trace_lower_bound;
use wmse_core::power_allocation::{
    brute_force_allocate, capacity_waterfill, enumerate_kkt_points, kkt_residual, pareto_waterfill,
    waterfill_ordered, waterfill_weighted, AllocationProblem, PowerAllocation, KKT_TOL, POWER_TOL,
};
use wmse_core::precoder::{design_capacity_wmmse, design_lagrange, design_majorization, design_sum_mse, PermutationStrategy};
use wmse_core::system_model::{mse_matrix_general, mse_matrix_lmmse, whitened_svd, ChannelModel, DiagonalWeights};

use crate::channel::cn01;
use crate::rng::{stream_rng, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst deviation observed.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
    pub ordering_instances: usize,
    pub ordering_violations: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<32} measured {:.3e} tolerance {:.1e}  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance,
                c.detail
            );
        }
        let _ = writeln!(
            s,
            "ordering violations: {} of {} ordered instances",
            self.ordering_violations, self.ordering_instances
        );
        s
    }
}

fn cgauss(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| cn01(r))
}

fn random_psd(r: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = cgauss(r, n, n);
    &a * a.adjoint()
}

fn outcome(name: &'static str, measured: f64, tolerance: f64, ok: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: ok && measured <= tolerance,
        measured,
        tolerance,
        detail,
    }
}

fn failed(name: &'static str, tolerance: f64, err: impl std::fmt::Display) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: false,
        measured: f64::INFINITY,
        tolerance,
        detail: format!("error: {err}"),
    }
}

fn feasible(a: &PowerAllocation, prob: &AllocationProblem) -> bool {
    a.p.len() == prob.len()
        && a.p.iter().all(|&x| x >= 0.0 && x.is_finite())
        && a.total_power() <= prob.power() * (1.0 + POWER_TOL)
}

fn oracle_equivalence<A>(r: &mut ChaCha8Rng, alloc: &A) -> CheckOutcome
where
    A: Fn(&AllocationProblem) -> wmse_core::Result<PowerAllocation>,
{
    const NAME: &str = "waterfill-oracle-equivalence";
    const TOL: f64 = 1e-4;
    let mut worst = 0.0f64;
    let mut all_feasible = true;
    for n in 2..=4 {
        for _ in 0..20 {
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
            let h: Vec<f64> = (0..n).map(|_| r.random_range(0.05..5.0)).collect();
            let prob = match AllocationProblem::new(w, h, r.random_range(0.2..5.0)) {
                Ok(p) => p,
                Err(e) => return failed(NAME, TOL, e),
            };
            let (a, g) = match (alloc(&prob), brute_force_allocate(&prob, 100)) {
                (Ok(a), Ok(g)) => (a, g),
                (Err(e), _) | (_, Err(e)) => return failed(NAME, TOL, e),
            };
            all_feasible &= feasible(&a, &prob);
            let (fa, fg) = (prob.objective(&a.p), prob.objective(&g.p));
            worst = worst.max((fa - fg).abs() / fg.abs().max(f64::MIN_POSITIVE));
        }
    }
    outcome(NAME, worst, TOL, all_feasible, "60 instances, N in 2..=4, grid 100".into())
}

fn hand_allocation<A>(alloc: &A) -> CheckOutcome
where
    A: Fn(&AllocationProblem) -> wmse_core::Result<PowerAllocation>,
{
    const NAME: &str = "hand-derived-allocation";
    const TOL: f64 = 1e-9;
    let cases = [
        (vec![4.0, 1.0], 1.0, [0.5, 0.5]),
        (vec![4.0, 0.1], 0.5, [0.5, 0.0]),
    ];
    let mut worst = 0.0f64;
    for (h, p, expected) in cases {
        let prob = match AllocationProblem::new(vec![1.0, 1.0], h, p) {
            Ok(x) => x,
            Err(e) => return failed(NAME, TOL, e),
        };
        match alloc(&prob) {
            Ok(a) => {
                for (x, y) in a.p.iter().zip(expected) {
                    worst = worst.max((x - y).abs());
                }
            }
            Err(e) => return failed(NAME, TOL, e),
        }
    }
    outcome(NAME, worst, TOL, true, "w=[1,1]: h²=[4,1],P=1 and h²=[4,0.1],P=0.5".into())
}

fn kkt_multiplicity() -> CheckOutcome {
    const NAME: &str = "kkt-multiplicity";
    let prob = AllocationProblem::new(vec![1.0, 1.0], vec![4.0, 1.0], 1.0).expect("valid instance");
    match enumerate_kkt_points(&prob) {
        Ok(points) => {
            let worst = points.iter().map(|p| kkt_residual(p, &prob)).fold(0.0, f64::max);
            let mut objs: Vec<f64> = points.iter().map(|p| p.objective).collect();
            objs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            outcome(
                NAME,
                worst,
                KKT_TOL,
                points.len() >= 3 && objs.len() >= 2,
                format!("{} points, {} distinct objectives", points.len(), objs.len()),
            )
        }
        Err(e) => failed(NAME, KKT_TOL, e),
    }
}

fn pareto_appendix() -> CheckOutcome {
    const NAME: &str = "pareto-increasing-weight-point";
    const TOL: f64 = 1e-9;
    match pareto_waterfill(&[1.0, 4.0], &[4.0, 1.0], 1.0) {
        Ok(a) => {
            let err = (a.p[0] - 0.2).abs().max((a.p[1] - 0.8).abs());
            let equalized = (a.p[0] * 4.0 - a.p[1]).abs() < TOL;
            outcome(NAME, err, TOL, equalized, format!("x² = [{:.12}, {:.12}]", a.p[0], a.p[1]))
        }
        Err(e) => failed(NAME, TOL, e),
    }
}

fn trace_bound(r: &mut ChaCha8Rng) -> CheckOutcome {
    const NAME: &str = "trace-lower-bound";
    const TOL: f64 = 1e-9;
    let mut worst = 0.0f64;
    let mut holds = true;
    for _ in 0..200 {
        let a = random_psd(r, 4);
        let b = random_psd(r, 4);
        let tb = match trace_lower_bound(&a, &b) {
            Ok(t) => t,
            Err(e) => return failed(NAME, TOL, e),
        };
        let scale = tb.bound.abs().max(1.0);
        holds &= tb.bound <= linalg::trace_re(&(&a * &b)) + TOL * scale;
        let attained = linalg::trace_re(&(&a * &tb.aligned_b));
        worst = worst.max((attained - tb.bound).abs() / scale);
    }
    outcome(NAME, worst, TOL, holds, "200 PSD pairs, N = 4".into())
}

fn loewner(r: &mut ChaCha8Rng) -> CheckOutcome {
    const NAME: &str = "lmmse-loewner-dominance";
    const TOL: f64 = 1e-9;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let mut run = || -> wmse_core::Result<f64> {
            let ch = ChannelModel::with_white_noise(cgauss(r, 4, 4), r.random_range(0.05..2.0))?;
            let f = cgauss(r, 4, 4);
            let g = cgauss(r, 4, 4);
            let diff = mse_matrix_general(&ch, &f, &g)?.matrix() - mse_matrix_lmmse(&ch, &f)?.matrix();
            linalg::min_eigenvalue(&diff)
        };
        match run() {
            Ok(m) => worst = worst.max(-m),
            Err(e) => return failed(NAME, TOL, e),
        }
    }
    outcome(NAME, worst, TOL, true, "200 (F, G) pairs, 4x4".into())
}

fn capacity(r: &mut ChaCha8Rng) -> CheckOutcome {
    const NAME: &str = "wmmse-capacity-equivalence";
    const TOL: f64 = 1e-6;
    let mut worst = 0.0f64;
    let mut monotone = true;
    for _ in 0..10 {
        let mut run = || -> wmse_core::Result<(f64, bool)> {
            let ch = ChannelModel::with_white_noise(cgauss(r, 4, 4), r.random_range(0.05..1.0))?;
            let rep = design_capacity_wmmse(&ch, 4.0, 200, 1e-12)?;
            let (_, rate) = capacity_waterfill(&whitened_svd(&ch)?.h_sq, 4.0)?;
            let mono = rep.trace.windows(2).all(|t| t[1] <= t[0] + 1e-12);
            let wmmse_rate = rep.design.n_streams() as f64 - rep.objective;
            Ok(((wmmse_rate - rate).abs(), mono))
        };
        match run() {
            Ok((d, m)) => {
                worst = worst.max(d);
                monotone &= m;
            }
            Err(e) => return failed(NAME, TOL, e),
        }
    }
    outcome(NAME, worst, TOL, monotone, "10 channels, 4x4".into())
}

fn summse_rotation(r: &mut ChaCha8Rng) -> CheckOutcome {
    const NAME: &str = "summse-rotation-invariance";
    const TOL: f64 = 1e-9;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut run = || -> wmse_core::Result<f64> {
            let ch = ChannelModel::with_white_noise(cgauss(r, 4, 4), r.random_range(0.01..2.0))?;
            let a = design_sum_mse(&ch, 4, 4.0, CMatrix::identity(4, 4))?.objective;
            let b = design_sum_mse(&ch, 4, 4.0, linalg::dft_matrix(4))?.objective;
            Ok((a - b).abs())
        };
        match run() {
            Ok(d) => worst = worst.max(d),
            Err(e) => return failed(NAME, TOL, e),
        }
    }
    outcome(NAME, worst, TOL, true, "identity vs DFT right factor, 20 channels".into())
}

fn majorization_vs_exhaustive(r: &mut ChaCha8Rng) -> CheckOutcome {
    const NAME: &str = "majorization-vs-exhaustive";
    const TOL: f64 = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut run = || -> wmse_core::Result<f64> {
            let ch = ChannelModel::with_white_noise(cgauss(r, 4, 4), r.random_range(0.05..2.0))?;
            let w = DiagonalWeights::new((0..4).map(|_| r.random_range(0.05..1.0)).collect())?;
            let m = design_majorization(&ch, &w, 4.0)?.objective;
            let e = design_lagrange(&ch, &w, 4.0, PermutationStrategy::Exhaustive)?.objective;
            Ok((m - e).abs())
        };
        match run() {
            Ok(d) => worst = worst.max(d),
            Err(e) => return failed(NAME, TOL, e),
        }
    }
    outcome(NAME, worst, TOL, true, "20 channels with distinct weights".into())
}

/// Sorted random `(w, h²)` instances through [`waterfill_ordered`];
/// returns `(instances, violations)`.
pub fn ordering_audit(seed: u64, instances: usize) -> wmse_core::Result<(usize, usize)> {
    let mut r = stream_rng(seed, Domain::Verify, 100, 0, 0);
    let mut violations = 0;
    for _ in 0..instances {
        let n = r.random_range(2..=8);
        let mut w: Vec<f64> = (0..n).map(|_| r.random_range(0.01..5.0)).collect();
        let mut h: Vec<f64> = (0..n).map(|_| r.random_range(0.01..20.0)).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        h.sort_by(|a, b| b.total_cmp(a));
        let (_, ok) = waterfill_ordered(&AllocationProblem::new(w, h, r.random_range(0.01..50.0))?)?;
        violations += usize::from(!ok);
    }
    Ok((instances, violations))
}

/// Runs the suite against an arbitrary allocator in place of
/// [`waterfill_weighted`].
pub fn run_verify_with<A>(seed: u64, alloc: A) -> VerifyReport
where
    A: Fn(&AllocationProblem) -> wmse_core::Result<PowerAllocation>,
{
    let rng = |k: u64| stream_rng(seed, Domain::Verify, k, 0, 0);
    let mut checks = vec![
        oracle_equivalence(&mut rng(1), &alloc),
        hand_allocation(&alloc),
        kkt_multiplicity(),
        pareto_appendix(),
        trace_bound(&mut rng(2)),
        loewner(&mut rng(3)),
        capacity(&mut rng(4)),
        summse_rotation(&mut rng(5)),
        majorization_vs_exhaustive(&mut rng(6)),
    ];
    let (ordering_instances, ordering_violations) = match ordering_audit(seed, 10_000) {
        Ok(x) => x,
        Err(e) => {
            checks.push(failed("ordering-audit", 0.0, e));
            (0, 0)
        }
    };
    VerifyReport {
        checks,
        ordering_instances,
        ordering_violations,
    }
}

pub fn run_verify(seed: u64) -> VerifyReport {
    run_verify_with(seed, waterfill_weighted)
}
