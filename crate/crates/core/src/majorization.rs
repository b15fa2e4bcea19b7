//! Majorization order, the eigenvalue trace bound and an empirical
//! Schur-convexity probe.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen};

fn sum_tol(total: f64) -> f64 {
    1e-9 * total.abs().max(1.0)
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `true` iff `x ≺ y`: the partial sums of `x` sorted descending never exceed
/// those of `y`, and the totals agree to within `1e-9 · max(1, |Σy|)`.
pub fn majorizes(y: &[f64], x: &[f64]) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    let xs = sorted_desc(x);
    let ys = sorted_desc(y);
    let total_y: f64 = ys.iter().sum();
    let tol = sum_tol(total_y);
    let (mut px, mut py) = (0.0, 0.0);
    for k in 0..xs.len() {
        px += xs[k];
        py += ys[k];
        if k + 1 < xs.len() && px > py + tol {
            return Ok(false);
        }
    }
    Ok((px - py).abs() <= tol)
}

/// Lower bound `Σ_i λ_i(A) λ_{N−i+1}(B) ≤ Tr(AB)` for Hermitian PSD `A`, `B`,
/// with the matrix that attains it: `B`'s spectrum re-seated in `A`'s
/// eigenbasis in opposite order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBound {
    pub bound: f64,
    pub aligned_b: CMatrix,
}

pub fn trace_lower_bound(a: &CMatrix, b: &CMatrix) -> Result<TraceBound> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch("trace bound needs equal square matrices"));
    }
    if !linalg::is_psd(a) {
        return Err(Error::NotPsd("A"));
    }
    if !linalg::is_psd(b) {
        return Err(Error::NotPsd("B"));
    }
    let ea = HermitianEigen::new(a)?;
    let eb = HermitianEigen::new(b)?;
    let b_ascending: Vec<f64> = eb.values.iter().rev().copied().collect();
    let bound = ea
        .values
        .iter()
        .zip(&b_ascending)
        .map(|(x, y)| x * y)
        .sum();
    let aligned_b = &ea.vectors * linalg::diag(&b_ascending) * ea.vectors.adjoint();
    Ok(TraceBound {
        bound,
        aligned_b: linalg::hermitian_part(&aligned_b),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurVerdict {
    SchurConvexEvidence,
    SchurConcaveEvidence,
    Linear,
    Neither,
}

/// Restricts the sampled vectors to an ordered region of the orthant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderConstraint {
    #[default]
    Unordered,
    Increasing,
    Decreasing,
}

/// A majorization-comparable pair `x ≺ y` with the evaluated function values.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub fx: f64,
    pub fy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurClassification {
    pub verdict: SchurVerdict,
    /// Pair with `x ≺ y` but `f(x) > f(y)`.
    pub convex_counterexample: Option<Counterexample>,
    /// Pair with `x ≺ y` but `f(x) < f(y)`.
    pub concave_counterexample: Option<Counterexample>,
    pub trials: usize,
    pub note: Option<&'static str>,
}

fn sample_base(rng: &mut ChaCha8Rng, n: usize, order: OrderConstraint) -> Vec<f64> {
    let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..10.0)).collect();
    match order {
        OrderConstraint::Unordered => {}
        OrderConstraint::Increasing => y.sort_by(|a, b| a.total_cmp(b)),
        OrderConstraint::Decreasing => y.sort_by(|a, b| b.total_cmp(a)),
    }
    y
}

/// T-transform: pull two coordinates toward their mean. Adjacent pairs with
/// `λ ≥ 1/2` keep a sorted vector sorted.
fn t_transform(rng: &mut ChaCha8Rng, y: &[f64], order: OrderConstraint) -> Vec<f64> {
    let n = y.len();
    let mut x = y.to_vec();
    let (i, j, lambda) = match order {
        OrderConstraint::Unordered => {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j, rng.random_range(0.0..1.0))
        }
        _ => {
            let i = rng.random_range(0..n - 1);
            (i, i + 1, rng.random_range(0.5..1.0))
        }
    };
    x[i] = lambda * y[i] + (1.0 - lambda) * y[j];
    x[j] = lambda * y[j] + (1.0 - lambda) * y[i];
    x
}

/// Samples `trials` majorization-comparable pairs and tests both
/// monotonicity directions of `f`. Evidence only: a clean run never proves
/// Schur-convexity.
pub fn check_schur<F>(f: F, n: usize, trials: usize, seed: u64) -> SchurClassification
where
    F: Fn(&[f64]) -> f64,
{
    check_schur_ordered(f, n, trials, seed, OrderConstraint::Unordered)
}

pub fn check_schur_ordered<F>(
    f: F,
    n: usize,
    trials: usize,
    seed: u64,
    order: OrderConstraint,
) -> SchurClassification
where
    F: Fn(&[f64]) -> f64,
{
    let trials = trials.max(1);
    if n < 2 {
        // every comparable pair is x = y
        return SchurClassification {
            verdict: SchurVerdict::Linear,
            convex_counterexample: None,
            concave_counterexample: None,
            trials,
            note: Some("dimension below 2 admits no nontrivial pairs"),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut convex_cx = None;
    let mut concave_cx = None;
    for _ in 0..trials {
        let y = sample_base(&mut rng, n, order);
        let x = t_transform(&mut rng, &y, order);
        let (fx, fy) = (f(&x), f(&y));
        if !fx.is_finite() || !fy.is_finite() {
            let cx = Counterexample { x, y, fx, fy };
            return SchurClassification {
                verdict: SchurVerdict::Neither,
                convex_counterexample: Some(cx.clone()),
                concave_counterexample: Some(cx),
                trials,
                note: Some("evaluator returned a non-finite value"),
            };
        }
        let tol = 1e-12 * (1.0 + fx.abs().max(fy.abs()));
        if fx > fy + tol && convex_cx.is_none() {
            convex_cx = Some(Counterexample { x: x.clone(), y: y.clone(), fx, fy });
        }
        if fx < fy - tol && concave_cx.is_none() {
            concave_cx = Some(Counterexample { x, y, fx, fy });
        }
        if convex_cx.is_some() && concave_cx.is_some() {
            break;
        }
    }
    let verdict = match (&convex_cx, &concave_cx) {
        (None, None) => SchurVerdict::Linear,
        (None, Some(_)) => SchurVerdict::SchurConvexEvidence,
        (Some(_), None) => SchurVerdict::SchurConcaveEvidence,
        (Some(_), Some(_)) => SchurVerdict::Neither,
    };
    SchurClassification {
        verdict,
        convex_counterexample: convex_cx,
        concave_counterexample: concave_cx,
        trials,
        note: None,
    }
}
