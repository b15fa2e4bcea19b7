//! Designs whose structure differs from the plain sum-power SVD form:
//! training sequences, per-antenna budgets and imperfect channel knowledge.

use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{check_streams, descending_argsort, design_objective, Certificate, DesignReport, PrecoderDesign};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, FullSvd, HermitianEigen, PSD_TOL};
use crate::power_allocation::{waterfill_weighted, AllocationProblem};
use crate::system_model::{ChannelModel, DiagonalWeights};

fn positive_definite_eigen(a: &CMatrix, what: &'static str) -> Result<HermitianEigen> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch("covariance must be square"));
    }
    if linalg::hermitian_defect(a) > linalg::RECON_TOL * linalg::frobenius(a).max(1.0) {
        return Err(Error::NotPositiveDefinite(what));
    }
    let eig = HermitianEigen::new(a)?;
    if eig.min_value() <= PSD_TOL * eig.max_value().abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveDefinite(what));
    }
    Ok(eig)
}

/// Channel-estimation MSE `Tr[(X Rn^{-1} Xᴴ + RH^{-1})^{-1}]` of a training
/// matrix `X` (N × M for `RH` N × N and `Rn` M × M).
pub fn training_objective(rn: &CMatrix, rh: &CMatrix, x: &CMatrix) -> Result<f64> {
    if x.shape() != (rh.nrows(), rn.nrows()) {
        return Err(Error::DimensionMismatch("training matrix must be dim(RH) × dim(Rn)"));
    }
    let rn_inv = linalg::hpd_inverse(rn)?;
    let rh_inv = linalg::hpd_inverse(rh)?;
    let k = x * rn_inv * x.adjoint() + rh_inv;
    Ok(linalg::trace_re(&linalg::hpd_inverse(&k)?))
}

/// Training design `X = Ũ_RH Λ_X U_Rnᴴ`.
///
/// `U_Rn` holds the eigenvectors of `Rn^{-1}` with eigenvalues `a`
/// non-increasing and `Ũ_RH` those of `RH^{-1}` with eigenvalues `b`
/// non-decreasing. In this orientation `X Rn^{-1} Xᴴ + RH^{-1}` is diagonal in
/// `Ũ_RH`, and the objective reduces to `Σ 1/(x_i² a_i + b_i)`, which is
/// water-filled with weights `1/b_i` and gains `a_i/b_i`.
pub fn design_training(rn: &CMatrix, rh: &CMatrix, power: f64) -> Result<DesignReport> {
    let rn_eig = positive_definite_eigen(rn, "noise covariance")?;
    let rh_eig = positive_definite_eigen(rh, "channel covariance")?;
    let (n, m) = (rh.nrows(), rn.nrows());
    let k = n.min(m);

    // Rn^{-1}: eigenvalues 1/λ(Rn), largest first
    let a: Vec<f64> = rn_eig.values.iter().rev().map(|v| 1.0 / v).collect();
    let u_rn = reversed_columns(&rn_eig.vectors);
    // RH^{-1}: eigenvalues 1/λ(RH), smallest first
    let b: Vec<f64> = rh_eig.values.iter().map(|v| 1.0 / v).collect();
    let u_rh = rh_eig.vectors.clone();

    let w: Vec<f64> = b[..k].iter().map(|bi| 1.0 / bi).collect();
    let h_sq: Vec<f64> = a[..k].iter().zip(&b[..k]).map(|(ai, bi)| ai / bi).collect();
    let alloc = waterfill_weighted(&AllocationProblem::new(w, h_sq, power)?)?;
    let gains = alloc.p.iter().map(|&p| libm::sqrt(p)).collect();
    let design = PrecoderDesign::assemble(u_rh, gains, u_rn, None)?;
    let objective = training_objective(rn, rh, &design.f)?;
    Ok(DesignReport::direct(design, objective, Certificate::StructureOnly))
}

fn reversed_columns(a: &CMatrix) -> CMatrix {
    let n = a.ncols();
    CMatrix::from_fn(a.nrows(), n, |i, j| a[(i, n - 1 - j)])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerAntennaOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Exponent applied to the square-root multiplier update.
    pub damping: f64,
}

impl Default for PerAntennaOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            damping: 0.5,
        }
    }
}

/// Per-antenna design `F = Λ_P^{-1/2} Ṽ Λ_F U_Perᴴ`, with `Ṽ` from the SVD of
/// `Rn^{-1/2} H Λ_P^{-1/2}`.
///
/// For fixed `Λ_P` the gains solve the sum-power problem with budget
/// `Σ λ_n P_n`. `Λ_P` is then updated by
/// `λ_n ← λ_n ([FFᴴ]_nn / P_n)^{damping/2}` until every antenna power is
/// within `tol` of its budget. The returned precoder is scaled down if needed
/// so that no budget is exceeded.
pub fn design_per_antenna(
    ch: &ChannelModel,
    w: &DiagonalWeights,
    budgets: &[f64],
    opts: PerAntennaOptions,
) -> Result<DesignReport> {
    let n = w.len();
    check_streams(ch, n)?;
    if budgets.len() != ch.n_tx() {
        return Err(Error::LengthMismatch {
            left: budgets.len(),
            right: ch.n_tx(),
        });
    }
    if budgets.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(Error::InvalidInput("per-antenna budgets must be positive"));
    }
    let perm = descending_argsort(w.as_slice());
    let wp: Vec<f64> = perm.iter().map(|&s| w.as_slice()[s]).collect();
    let u_per = linalg::permutation_matrix(&perm);

    let mut lambda = alloc::vec![1.0; ch.n_tx()];
    let mut trace = Vec::new();
    let mut best: Option<(f64, PrecoderDesign)> = None;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iters {
        iterations = it;
        let inv_sqrt: Vec<f64> = lambda.iter().map(|l| 1.0 / libm::sqrt(*l)).collect();
        let d = linalg::diag(&inv_sqrt);
        let svd = FullSvd::new(&(ch.whitened() * &d))?;
        let h_sq: Vec<f64> = svd.sigma[..n].iter().map(|s| s * s).collect();
        let budget: f64 = lambda.iter().zip(budgets).map(|(l, p)| l * p).sum();
        let alloc = waterfill_weighted(&AllocationProblem::new(wp.clone(), h_sq, budget)?)?;
        let gains: Vec<f64> = alloc.p.iter().map(|&p| libm::sqrt(p)).collect();
        let design = PrecoderDesign::assemble(svd.v, gains, u_per.clone(), Some(d))?;

        let ratios: Vec<f64> = design
            .antenna_powers()
            .iter()
            .zip(budgets)
            .map(|(q, p)| q / p)
            .collect();
        let feasible = scale_to_budgets(&design, &ratios)?;
        let objective = design_objective(ch, w, &feasible.f)?;
        trace.push(objective);
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, feasible));
        }

        let lmax = lambda.iter().copied().fold(0.0, f64::max);
        converged = ratios.iter().zip(&lambda).all(|(r, l)| {
            (r - 1.0).abs() <= opts.tol || (*r < 1.0 && *l <= 1e-12 * lmax)
        });
        if converged {
            let design = best.map(|(_, d)| d).unwrap_or(design);
            return Ok(DesignReport {
                objective: design_objective(ch, w, &design.f)?,
                design,
                candidates_examined: 1,
                certificate: Certificate::FixedPointConverged,
                iterations,
                trace,
            });
        }

        let exponent = 0.5 * opts.damping;
        for (l, r) in lambda.iter_mut().zip(&ratios) {
            *l *= libm::pow(r.max(1e-300), exponent);
        }
        let scale: f64 = lambda.iter().sum::<f64>() / lambda.len() as f64;
        for l in lambda.iter_mut() {
            *l /= scale;
        }
    }

    debug_assert!(!converged);
    let (objective, design) = best.ok_or(Error::DegenerateProblem)?;
    Err(Error::NoConvergence {
        iterations,
        best: Box::new(DesignReport {
            design,
            objective,
            candidates_examined: 1,
            certificate: Certificate::StructureOnly,
            iterations,
            trace,
        }),
    })
}

/// Shrinks the gains uniformly so that `[FFᴴ]_nn ≤ P_n` for every antenna.
fn scale_to_budgets(design: &PrecoderDesign, ratios: &[f64]) -> Result<PrecoderDesign> {
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    if worst <= 1.0 {
        return Ok(design.clone());
    }
    let s = 1.0 / libm::sqrt(worst);
    PrecoderDesign::assemble(
        design.v_left.clone(),
        design.gains.iter().map(|g| g * s).collect(),
        design.u_right.clone(),
        design.prewhiten.clone(),
    )
}

fn check_robust_inputs(h: &CMatrix, sigma_err: &CMatrix, noise_var: f64) -> Result<()> {
    if sigma_err.shape() != (h.ncols(), h.ncols()) {
        return Err(Error::DimensionMismatch("error correlation must be n_tx × n_tx"));
    }
    if !linalg::is_psd(sigma_err) {
        return Err(Error::NotPsd("error correlation"));
    }
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::InvalidInput("noise variance must be positive"));
    }
    if !linalg::is_finite(h) {
        return Err(Error::InvalidInput("channel estimate has non-finite entries"));
    }
    Ok(())
}

/// Weighted MSE under channel-estimation error,
/// `Tr[Λ_w (Fᴴ Ĥᴴ Ĥ F / (σ² + Tr(F Fᴴ Σ_err)) + I)^{-1}]`.
pub fn robust_objective(
    h_est: &CMatrix,
    sigma_err: &CMatrix,
    noise_var: f64,
    w: &DiagonalWeights,
    f: &CMatrix,
) -> Result<f64> {
    check_robust_inputs(h_est, sigma_err, noise_var)?;
    if f.nrows() != h_est.ncols() || f.ncols() != w.len() {
        return Err(Error::DimensionMismatch("precoder must be n_tx × n_streams"));
    }
    let ff = f * f.adjoint();
    let denom = noise_var + linalg::trace_re(&(&ff * sigma_err));
    let hf = h_est * f;
    let n = f.ncols();
    let a = (hf.adjoint() * &hf).map(|z| z / denom) + CMatrix::identity(n, n);
    let phi = linalg::hpd_inverse(&a)?;
    Ok(w.as_slice()
        .iter()
        .enumerate()
        .map(|(i, wi)| wi * phi[(i, i)].re)
        .sum())
}

/// Robust design `F = (P Σ_err + σ² I)^{-1/2} V̂ Λ_F U_Perᴴ` with `V̂` from the
/// SVD of `Ĥ (P Σ_err + σ² I)^{-1/2}`.
///
/// With the full budget spent, the coupled denominator equals `Σ f_i² / P`;
/// the gains come from a damped fixed point on that sum, re-solving the
/// water-filling at each step.
pub fn design_robust(
    h_est: &CMatrix,
    sigma_err: &CMatrix,
    noise_var: f64,
    w: &DiagonalWeights,
    power: f64,
) -> Result<DesignReport> {
    const MAX_ITERS: usize = 1000;
    const FP_TOL: f64 = 1e-10;
    const DAMPING: f64 = 0.5;

    check_robust_inputs(h_est, sigma_err, noise_var)?;
    let n = w.len();
    if n == 0 || n > h_est.nrows().min(h_est.ncols()) {
        return Err(Error::DimensionMismatch("stream count must be in 1..=min(n_tx, n_rx)"));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::InvalidInput("power budget must be positive and finite"));
    }
    let n_tx = h_est.ncols();
    let cov = sigma_err.map(|z| z * power) + CMatrix::identity(n_tx, n_tx) * c(noise_var);
    let cov_eig = HermitianEigen::new(&cov)?;
    let gamma = cov_eig.map_spectrum(|v| 1.0 / libm::sqrt(v));
    let gamma_sq = cov_eig.map_spectrum(|v| 1.0 / v);
    let svd = FullSvd::new(&(h_est * &gamma))?;
    let v = svd.v.columns(0, n);
    let cdiag = linalg::real_diagonal(&(v.adjoint() * &gamma_sq * v));
    let h_hat_sq: Vec<f64> = svd.sigma[..n].iter().map(|s| s * s).collect();

    let perm = descending_argsort(w.as_slice());
    let wp: Vec<f64> = perm.iter().map(|&s| w.as_slice()[s]).collect();

    let solve = |s: f64| -> Result<Vec<f64>> {
        let h_eff = (0..n).map(|i| h_hat_sq[i] * power / (s * cdiag[i])).collect();
        Ok(waterfill_weighted(&AllocationProblem::new(wp.clone(), h_eff, power)?)?.p)
    };
    let total = |q: &[f64]| -> f64 { q.iter().zip(&cdiag).map(|(q, c)| q / c).sum() };

    let mut s = total(&alloc::vec![power / n as f64; n]);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITERS {
        iterations = it;
        let next = (1.0 - DAMPING) * s + DAMPING * total(&solve(s)?);
        let change = (next - s).abs() / s;
        s = next;
        trace.push(s);
        if change < FP_TOL {
            converged = true;
            break;
        }
    }

    let q = solve(s)?;
    let gains = q
        .iter()
        .zip(&cdiag)
        .map(|(q, c)| libm::sqrt(q / c))
        .collect();
    let design = PrecoderDesign::assemble(
        svd.v.clone(),
        gains,
        linalg::permutation_matrix(&perm),
        Some(gamma),
    )?;
    let objective = robust_objective(h_est, sigma_err, noise_var, w, &design.f)?;
    let report = DesignReport {
        design,
        objective,
        candidates_examined: 1,
        certificate: if converged {
            Certificate::FixedPointConverged
        } else {
            Certificate::StructureOnly
        },
        iterations,
        trace,
    };
    if converged {
        Ok(report)
    } else {
        Err(Error::NoConvergence {
            iterations,
            best: Box::new(report),
        })
    }
}
