//! Scalar power allocation over parallel eigenchannels.
//!
//! Every routine here works on the reduced problem
//!
//! ```text
//! minimize   Σ_i w_i / (1 + p_i h_i²)
//! subject to Σ_i p_i ≤ P,  p_i ≥ 0
//! ```
//!
//! whose solution is the weighted water-filling
//! `p_i = (√(w_i / (μ h_i²)) − 1/h_i²)⁺`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Absolute tolerance on KKT residuals.
pub const KKT_TOL: f64 = 1e-8;
/// Relative slack allowed on the power budget.
pub const POWER_TOL: f64 = 1e-9;

const MAX_ENUMERATION_CHANNELS: usize = 20;
const MAX_GRID_CHANNELS: usize = 4;
const MIN_GRID_POINTS: usize = 50;

/// Weights `w`, eigenchannel gains `h²` and a total budget `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    w: Vec<f64>,
    h_sq: Vec<f64>,
    power: f64,
}

impl AllocationProblem {
    pub fn new(w: Vec<f64>, h_sq: Vec<f64>, power: f64) -> Result<Self> {
        if w.len() != h_sq.len() {
            return Err(Error::LengthMismatch {
                left: w.len(),
                right: h_sq.len(),
            });
        }
        if w.is_empty() {
            return Err(Error::InvalidInput("allocation problem has no channels"));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::InvalidInput("power budget must be positive and finite"));
        }
        if w.iter().chain(&h_sq).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("weights and gains must be finite and nonnegative"));
        }
        if w.iter().zip(&h_sq).all(|(a, b)| a * b == 0.0) {
            return Err(Error::DegenerateProblem);
        }
        Ok(Self { w, h_sq, power })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn h_sq(&self) -> &[f64] {
        &self.h_sq
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `Σ w_i / (1 + p_i h_i²)`.
    pub fn objective(&self, p: &[f64]) -> f64 {
        self.w
            .iter()
            .zip(&self.h_sq)
            .zip(p)
            .map(|((w, h), p)| w / (1.0 + p * h))
            .sum()
    }

    fn is_open(&self, i: usize) -> bool {
        self.w[i] * self.h_sq[i] > 0.0
    }

    fn level(&self, i: usize, mu: f64) -> f64 {
        if !self.is_open(i) {
            return 0.0;
        }
        let (w, h) = (self.w[i], self.h_sq[i]);
        (libm::sqrt(w / (mu * h)) - 1.0 / h).max(0.0)
    }

    fn demand(&self, mu: f64) -> f64 {
        (0..self.len()).map(|i| self.level(i, mu)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
    pub mu: f64,
    pub active: Vec<bool>,
    pub kkt_residual: f64,
}

impl PowerAllocation {
    fn from_powers(prob: &AllocationProblem, p: Vec<f64>, mu: f64) -> Self {
        let active = p.iter().map(|&x| x > 0.0).collect();
        let kkt_residual = allocation_residual(prob, &p, mu);
        Self {
            p,
            mu,
            active,
            kkt_residual,
        }
    }

    /// Dual variables `φ_i = μ − w_i h_i² / (1 + p_i h_i²)²` of the `p_i ≥ 0`
    /// constraints.
    pub fn phi(&self, prob: &AllocationProblem) -> Vec<f64> {
        (0..prob.len())
            .map(|i| {
                let d = 1.0 + self.p[i] * prob.h_sq[i];
                self.mu - prob.w[i] * prob.h_sq[i] / (d * d)
            })
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Max-norm KKT residual of an allocation `(p, μ)`.
fn allocation_residual(prob: &AllocationProblem, p: &[f64], mu: f64) -> f64 {
    let mut r: f64 = 0.0;
    for ((&pi, &w), &h) in p.iter().zip(&prob.w).zip(&prob.h_sq) {
        let d = 1.0 + pi * h;
        let phi = mu - w * h / (d * d);
        r = r.max(if pi > 0.0 { phi.abs() } else { (-phi).max(0.0) });
        r = r.max((-pi).max(0.0));
    }
    let total: f64 = p.iter().sum();
    r.max((mu * (total - prob.power)).abs())
        .max((total - prob.power).max(0.0))
        .max((-mu).max(0.0))
}

/// Weighted water-filling by bisection on `μ`, finished with the closed form
/// on the converged active set.
pub fn waterfill_weighted(prob: &AllocationProblem) -> Result<PowerAllocation> {
    let n = prob.len();
    let power = prob.power;
    let hi_bound = (0..n)
        .map(|i| prob.w[i] * prob.h_sq[i])
        .fold(0.0, f64::max);
    if hi_bound <= 0.0 {
        return Err(Error::DegenerateProblem);
    }

    let mut hi = hi_bound;
    let mut lo = hi_bound;
    while prob.demand(lo) < power {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::InvalidInput("power budget too large to water-fill"));
        }
    }
    let mut mu = lo;
    for _ in 0..400 {
        mu = libm::sqrt(lo * hi);
        let d = prob.demand(mu);
        if (d - power).abs() <= 1e-12 * power {
            break;
        }
        if d > power {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }

    // closed form: 1/√μ = (P + Σ_A 1/h²) / Σ_A √(w/h²)
    let active: Vec<bool> = (0..n).map(|i| prob.level(i, mu) > 0.0).collect();
    let (mut num, mut den) = (power, 0.0);
    for i in (0..n).filter(|&i| active[i]) {
        num += 1.0 / prob.h_sq[i];
        den += libm::sqrt(prob.w[i] / prob.h_sq[i]);
    }
    if den > 0.0 {
        let inv_sqrt_mu = num / den;
        let exact = 1.0 / (inv_sqrt_mu * inv_sqrt_mu);
        let consistent = (0..n).all(|i| {
            let open = prob.is_open(i) && prob.w[i] * prob.h_sq[i] > exact;
            open == active[i]
        });
        if consistent {
            mu = exact;
        }
    }
    let p: Vec<f64> = (0..n).map(|i| prob.level(i, mu)).collect();
    Ok(PowerAllocation::from_powers(prob, p, mu))
}

/// Water-filling for the ordering-constrained problem: solves the relaxation
/// and reports whether `p_i h_i²` came out non-increasing.
///
/// Expects `w` sorted non-increasing against non-increasing `h²`.
pub fn waterfill_ordered(prob: &AllocationProblem) -> Result<(PowerAllocation, bool)> {
    let alloc = waterfill_weighted(prob)?;
    let snr: Vec<f64> = alloc
        .p
        .iter()
        .zip(&prob.h_sq)
        .map(|(p, h)| p * h)
        .collect();
    Ok((alloc, is_non_increasing(&snr)))
}

fn is_non_increasing(v: &[f64]) -> bool {
    first_increase(v).is_none()
}

fn first_increase(v: &[f64]) -> Option<usize> {
    v.windows(2)
        .position(|p| p[1] > p[0] + 1e-12 * p[0].abs().max(1.0))
        .map(|i| i + 1)
}

/// Pareto water-filling. The gate `w̃_1 h_1² ≥ … ≥ w̃_N h_N²` certifies that
/// the result is a Pareto point of the per-stream MSE vector.
pub fn pareto_waterfill(w_tilde: &[f64], h_sq: &[f64], power: f64) -> Result<PowerAllocation> {
    let prob = AllocationProblem::new(w_tilde.to_vec(), h_sq.to_vec(), power)?;
    let products: Vec<f64> = w_tilde.iter().zip(h_sq).map(|(w, h)| w * h).collect();
    if let Some(index) = first_increase(&products) {
        return Err(Error::OrderingViolation { index });
    }
    waterfill_weighted(&prob)
}

/// A candidate stationary point of the amplitude-domain problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub f_sq: Vec<f64>,
    pub mu: f64,
    pub zero_set: Vec<usize>,
    pub objective: f64,
}

/// Max-norm residual of the stationarity system in the amplitudes `f_i`:
/// `f_i h_i² w_i / (1 + f_i² h_i²)² = μ f_i`, `μ (Σ f_i² − P) = 0`,
/// `μ ≥ 0`, `Σ f_i² ≤ P`.
///
/// Mismatched lengths give `+∞`.
pub fn kkt_residual(point: &KktPoint, prob: &AllocationProblem) -> f64 {
    if point.f_sq.len() != prob.len() {
        return f64::INFINITY;
    }
    let mut r: f64 = 0.0;
    for i in 0..prob.len() {
        let f_sq = point.f_sq[i];
        if f_sq < 0.0 {
            r = r.max(-f_sq);
            continue;
        }
        let f = libm::sqrt(f_sq);
        let d = 1.0 + f_sq * prob.h_sq[i];
        r = r.max((f * prob.h_sq[i] * prob.w[i] / (d * d) - point.mu * f).abs());
    }
    let total: f64 = point.f_sq.iter().sum();
    r.max((point.mu * (total - prob.power)).abs())
        .max((-point.mu).max(0.0))
        .max((total - prob.power).max(0.0))
}

/// Enumerates stationary points: for every support set, full power on the
/// support, plus the all-off point with `μ = 0`. Channels with `w_i h_i² = 0`
/// are never opened. Sorted by objective, then by support bitmask.
pub fn enumerate_kkt_points(prob: &AllocationProblem) -> Result<Vec<KktPoint>> {
    let n = prob.len();
    if n > MAX_ENUMERATION_CHANNELS {
        return Err(Error::TooManyChannels {
            count: n,
            max: MAX_ENUMERATION_CHANNELS,
        });
    }
    let openable: u32 = (0..n)
        .filter(|&i| prob.is_open(i))
        .fold(0, |m, i| m | (1 << i));

    let mut found: Vec<(u32, KktPoint)> = Vec::new();
    let mut push = |mask: u32, f_sq: Vec<f64>, mu: f64| {
        let zero_set = (0..n).filter(|i| mask & (1 << i) == 0).collect();
        let objective = prob.objective(&f_sq);
        let point = KktPoint {
            f_sq,
            mu,
            zero_set,
            objective,
        };
        if kkt_residual(&point, prob) < KKT_TOL {
            found.push((mask, point));
        }
    };

    push(0, vec![0.0; n], 0.0);
    let mut mask = openable;
    while mask != 0 {
        if let Some((f_sq, mu)) = full_power_on_support(prob, mask) {
            push(mask, f_sq, mu);
        }
        mask = (mask - 1) & openable;
    }
    found.sort_by(|a, b| a.1.objective.total_cmp(&b.1.objective).then(a.0.cmp(&b.0)));
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// Solves the stationarity equations on `support` with `Σ f² = P`; `None` if
/// any supported channel would need nonpositive power.
fn full_power_on_support(prob: &AllocationProblem, support: u32) -> Option<(Vec<f64>, f64)> {
    let n = prob.len();
    let (mut num, mut den) = (prob.power, 0.0);
    for i in (0..n).filter(|i| support & (1 << i) != 0) {
        num += 1.0 / prob.h_sq[i];
        den += libm::sqrt(prob.w[i] / prob.h_sq[i]);
    }
    let inv_sqrt_mu = num / den;
    let mut f_sq = vec![0.0; n];
    for i in (0..n).filter(|i| support & (1 << i) != 0) {
        let v = inv_sqrt_mu * libm::sqrt(prob.w[i] / prob.h_sq[i]) - 1.0 / prob.h_sq[i];
        if v <= 0.0 {
            return None;
        }
        f_sq[i] = v;
    }
    Some((f_sq, 1.0 / (inv_sqrt_mu * inv_sqrt_mu)))
}

/// Exhaustive search over the simplex grid `Σ p_i = P` with step
/// `P / grid_points`, then one pass at a tenth of the step around the best
/// grid point. Independent of the water-filling formula.
pub fn brute_force_allocate(prob: &AllocationProblem, grid_points: usize) -> Result<PowerAllocation> {
    let n = prob.len();
    if n > MAX_GRID_CHANNELS {
        return Err(Error::TooManyChannels {
            count: n,
            max: MAX_GRID_CHANNELS,
        });
    }
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::InvalidInput("grid oracle needs at least 50 grid points"));
    }
    let power = prob.power;
    let step = power / grid_points as f64;

    let mut best = vec![0.0; n];
    let mut best_obj = f64::INFINITY;
    let mut counts = vec![0usize; n];
    let consider = |p: &[f64], best: &mut Vec<f64>, best_obj: &mut f64| {
        let obj = prob.objective(p);
        if obj < *best_obj {
            *best_obj = obj;
            best.copy_from_slice(p);
        }
    };

    // coarse: compositions of grid_points into n parts
    let mut p = vec![0.0; n];
    loop {
        let used: usize = counts[..n - 1].iter().sum();
        if used <= grid_points {
            for i in 0..n - 1 {
                p[i] = counts[i] as f64 * step;
            }
            p[n - 1] = (grid_points - used) as f64 * step;
            consider(&p, &mut best, &mut best_obj);
        }
        if !advance(&mut counts[..n - 1], grid_points) {
            break;
        }
    }

    // refine: ±2 coarse steps around the incumbent at a tenth of the step
    let fine = step / 10.0;
    let span = 20usize;
    let centre = best.clone();
    let mut offsets = vec![0usize; n];
    loop {
        let mut ok = true;
        let mut partial = 0.0;
        for i in 0..n - 1 {
            let v = centre[i] + (offsets[i] as f64 - span as f64) * fine;
            if v < 0.0 {
                ok = false;
                break;
            }
            p[i] = v;
            partial += v;
        }
        let last = power - partial;
        if ok && last >= 0.0 {
            p[n - 1] = last;
            consider(&p, &mut best, &mut best_obj);
        }
        if !advance(&mut offsets[..n - 1], 2 * span) {
            break;
        }
    }

    // multiplier estimate from the open channels
    let open: Vec<usize> = (0..n).filter(|&i| best[i] > 0.0).collect();
    let mu = if open.is_empty() {
        0.0
    } else {
        open.iter()
            .map(|&i| {
                let d = 1.0 + best[i] * prob.h_sq[i];
                prob.w[i] * prob.h_sq[i] / (d * d)
            })
            .sum::<f64>()
            / open.len() as f64
    };
    Ok(PowerAllocation::from_powers(prob, best, mu))
}

/// Odometer increment over `[0, max]^k`; `false` once it wraps.
fn advance(digits: &mut [usize], max: usize) -> bool {
    for d in digits.iter_mut() {
        if *d < max {
            *d += 1;
            return true;
        }
        *d = 0;
    }
    false
}

/// Classical capacity water-filling `p_i = (ν − 1/h_i²)⁺` with the rate
/// `Σ ln(1 + p_i h_i²)` in nats.
pub fn capacity_waterfill(h_sq: &[f64], power: f64) -> Result<(Vec<f64>, f64)> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::InvalidInput("power budget must be positive and finite"));
    }
    if h_sq.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput("gains must be finite and nonnegative"));
    }
    let mut order: Vec<usize> = (0..h_sq.len()).filter(|&i| h_sq[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::DegenerateProblem);
    }
    order.sort_by(|&a, &b| h_sq[b].total_cmp(&h_sq[a]));
    let mut level = 0.0;
    for k in (1..=order.len()).rev() {
        let inv_sum: f64 = order[..k].iter().map(|&i| 1.0 / h_sq[i]).sum();
        level = (power + inv_sum) / k as f64;
        if level > 1.0 / h_sq[order[k - 1]] {
            break;
        }
    }
    let p: Vec<f64> = h_sq
        .iter()
        .map(|&h| if h > 0.0 { (level - 1.0 / h).max(0.0) } else { 0.0 })
        .collect();
    let rate = p.iter().zip(h_sq).map(|(p, h)| libm::log1p(p * h)).sum();
    Ok((p, rate))
}
