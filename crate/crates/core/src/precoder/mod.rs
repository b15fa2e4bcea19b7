//! Precoder construction from the SVD structure `F = V Λ_F Uᴴ`.
//!
//! The left factor comes from the (possibly re-weighted) whitened channel, the
//! gains from water-filling, and the right unitary resolves the freedom left
//! by the stationarity conditions: a permutation, the weight eigenbasis, a DFT
//! matrix or the identity.

mod capacity;
mod structured;

use alloc::vec::Vec;

pub use capacity::design_capacity_wmmse;
pub use structured::{
    design_per_antenna, design_robust, design_training, robust_objective, training_objective,
    PerAntennaOptions,
};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianEigen, RECON_TOL};
use crate::power_allocation::{waterfill_ordered, waterfill_weighted, AllocationProblem};
use crate::system_model::{
    matrix_snr, mse_matrix_lmmse, weighted_mse, whitened_svd, ChannelModel, DiagonalWeights,
    GeneralWeight, WhitenedChannelSvd,
};

/// Largest stream count for exhaustive permutation search.
pub const MAX_EXHAUSTIVE_STREAMS: usize = 8;

/// `F = prewhiten · V_left[:, :k] · diag(gains) · U_right[:, :k]ᴴ`, with
/// `k = gains.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderDesign {
    pub v_left: CMatrix,
    pub gains: Vec<f64>,
    pub u_right: CMatrix,
    pub prewhiten: Option<CMatrix>,
    pub f: CMatrix,
}

impl PrecoderDesign {
    pub fn assemble(
        v_left: CMatrix,
        gains: Vec<f64>,
        u_right: CMatrix,
        prewhiten: Option<CMatrix>,
    ) -> Result<Self> {
        let k = gains.len();
        if v_left.ncols() < k || u_right.ncols() < k || !u_right.is_square() {
            return Err(Error::DimensionMismatch("factor sizes do not match the gain count"));
        }
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidInput("gains must be finite and nonnegative"));
        }
        if linalg::unitary_defect(&u_right) > RECON_TOL {
            return Err(Error::InvalidInput("right factor is not unitary"));
        }
        if let Some(pw) = &prewhiten {
            if pw.shape() != (v_left.nrows(), v_left.nrows()) {
                return Err(Error::DimensionMismatch("prewhitener must be n_tx × n_tx"));
            }
        }
        let mut design = Self {
            f: CMatrix::zeros(0, 0),
            v_left,
            gains,
            u_right,
            prewhiten,
        };
        design.f = design.product();
        Ok(design)
    }

    fn product(&self) -> CMatrix {
        let k = self.gains.len();
        let core = self.v_left.columns(0, k)
            * linalg::diag(&self.gains)
            * self.u_right.columns(0, k).adjoint();
        match &self.prewhiten {
            Some(pw) => pw * core,
            None => core,
        }
    }

    /// `‖F − product of factors‖_F`.
    pub fn reconstruction_error(&self) -> f64 {
        linalg::frobenius(&(&self.f - self.product()))
    }

    /// `Tr(F Fᴴ)`.
    pub fn total_power(&self) -> f64 {
        self.f.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Diagonal of `F Fᴴ`.
    pub fn antenna_powers(&self) -> Vec<f64> {
        self.f
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    pub fn n_streams(&self) -> usize {
        self.f.ncols()
    }
}

/// How the objective of a [`DesignReport`] was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// Every candidate permutation was evaluated.
    BruteForcedPermutation,
    /// The relaxed allocation satisfied the implicit ordering constraint.
    OrderingCertified,
    FixedPointConverged,
    IterativeConverged,
    /// The structure was applied without an optimality check.
    StructureOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub design: PrecoderDesign,
    pub objective: f64,
    pub candidates_examined: usize,
    pub certificate: Certificate,
    pub iterations: usize,
    /// Objective after each iteration, for iterative designs.
    pub trace: Vec<f64>,
}

impl DesignReport {
    fn direct(design: PrecoderDesign, objective: f64, certificate: Certificate) -> Self {
        Self {
            design,
            objective,
            candidates_examined: 1,
            certificate,
            iterations: 0,
            trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationStrategy {
    /// Try every distinct stream-to-eigenchannel assignment.
    Exhaustive,
    /// Largest weight on the strongest eigenchannel.
    WeightChannelPairing,
}

fn check_streams(ch: &ChannelModel, n_dat: usize) -> Result<()> {
    if n_dat == 0 || n_dat > ch.n_tx().min(ch.n_rx()) {
        return Err(Error::DimensionMismatch("stream count must be in 1..=min(n_tx, n_rx)"));
    }
    Ok(())
}

/// Stable argsort, largest first.
fn descending_argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    idx
}

fn weights_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Weighted MSE of `F` under the LMMSE receiver.
pub fn design_objective(ch: &ChannelModel, w: &DiagonalWeights, f: &CMatrix) -> Result<f64> {
    weighted_mse(w, &mse_matrix_lmmse(ch, f)?)
}

/// Lagrange structure with a fixed assignment: stream `perm[i]` rides
/// eigenchannel `i`, so `U_Per` has column `i` equal to `e_{perm[i]}`.
pub fn design_with_permutation(
    ch: &ChannelModel,
    w: &DiagonalWeights,
    power: f64,
    perm: &[usize],
) -> Result<DesignReport> {
    let svd = whitened_svd(ch)?;
    let (design, _) = permuted_design(&svd, w, power, perm)?;
    let objective = design_objective(ch, w, &design.f)?;
    Ok(DesignReport::direct(design, objective, Certificate::StructureOnly))
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::LengthMismatch {
            left: perm.len(),
            right: n,
        });
    }
    let mut seen = alloc::vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidInput("not a permutation"));
        }
        seen[p] = true;
    }
    Ok(())
}

fn permuted_problem(
    svd: &WhitenedChannelSvd,
    w: &DiagonalWeights,
    power: f64,
    perm: &[usize],
) -> Result<AllocationProblem> {
    let n = w.len();
    check_permutation(perm, n)?;
    let wp = perm.iter().map(|&s| w.as_slice()[s]).collect();
    AllocationProblem::new(wp, svd.h_sq[..n].to_vec(), power)
}

fn permuted_design(
    svd: &WhitenedChannelSvd,
    w: &DiagonalWeights,
    power: f64,
    perm: &[usize],
) -> Result<(PrecoderDesign, bool)> {
    let prob = permuted_problem(svd, w, power, perm)?;
    let (alloc, ordered) = waterfill_ordered(&prob)?;
    let gains = alloc.p.iter().map(|&p| libm::sqrt(p)).collect();
    let design = PrecoderDesign::assemble(
        svd.v.clone(),
        gains,
        linalg::permutation_matrix(perm),
        None,
    )?;
    Ok((design, ordered))
}

/// Distinct permutations in lexicographic order, treating streams whose
/// weights agree to `1e-12` relative as interchangeable.
fn distinct_permutations(w: &[f64], mut visit: impl FnMut(&[usize])) {
    let n = w.len();
    // class[s] = smallest stream index with an equal weight
    let class: Vec<usize> = (0..n)
        .map(|s| (0..=s).find(|&t| weights_equal(w[t], w[s])).unwrap_or(s))
        .collect();
    let mut used = alloc::vec![false; n];
    let mut perm = Vec::with_capacity(n);

    fn rec(
        class: &[usize],
        used: &mut [bool],
        perm: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        let n = class.len();
        if perm.len() == n {
            visit(perm);
            return;
        }
        for s in 0..n {
            if used[s] {
                continue;
            }
            // equal-weight streams are placed in index order only
            if (0..s).any(|t| class[t] == class[s] && !used[t]) {
                continue;
            }
            used[s] = true;
            perm.push(s);
            rec(class, used, perm, visit);
            perm.pop();
            used[s] = false;
        }
    }
    rec(&class, &mut used, &mut perm, &mut visit);
}

pub fn design_lagrange(
    ch: &ChannelModel,
    w: &DiagonalWeights,
    power: f64,
    strategy: PermutationStrategy,
) -> Result<DesignReport> {
    let n = w.len();
    check_streams(ch, n)?;
    let svd = whitened_svd(ch)?;
    match strategy {
        PermutationStrategy::WeightChannelPairing => {
            let perm = descending_argsort(w.as_slice());
            let (design, _) = permuted_design(&svd, w, power, &perm)?;
            let objective = design_objective(ch, w, &design.f)?;
            Ok(DesignReport::direct(design, objective, Certificate::StructureOnly))
        }
        PermutationStrategy::Exhaustive => {
            if n > MAX_EXHAUSTIVE_STREAMS {
                return Err(Error::TooManyStreams {
                    count: n,
                    max: MAX_EXHAUSTIVE_STREAMS,
                });
            }
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut examined = 0usize;
            let mut failure = None;
            distinct_permutations(w.as_slice(), |perm| {
                examined += 1;
                let value = permuted_problem(&svd, w, power, perm)
                    .and_then(|prob| Ok(prob.objective(&waterfill_weighted(&prob)?.p)));
                match value {
                    Ok(v) => {
                        if best.as_ref().is_none_or(|(b, _)| v < *b) {
                            best = Some((v, perm.to_vec()));
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            let (_, perm) = best.ok_or(Error::DegenerateProblem)?;
            let (design, _) = permuted_design(&svd, w, power, &perm)?;
            let objective = design_objective(ch, w, &design.f)?;
            Ok(DesignReport {
                candidates_examined: examined,
                ..DesignReport::direct(design, objective, Certificate::BruteForcedPermutation)
            })
        }
    }
}

/// Majorization-based design: weights sorted non-increasing against the
/// non-increasing eigenchannel gains, certified when the water-filling
/// output keeps `f_i² h_i²` non-increasing.
pub fn design_majorization(ch: &ChannelModel, w: &DiagonalWeights, power: f64) -> Result<DesignReport> {
    check_streams(ch, w.len())?;
    let svd = whitened_svd(ch)?;
    let perm = descending_argsort(w.as_slice());
    let (design, ordered) = permuted_design(&svd, w, power, &perm)?;
    let objective = design_objective(ch, w, &design.f)?;
    let certificate = if ordered {
        Certificate::OrderingCertified
    } else {
        Certificate::StructureOnly
    };
    Ok(DesignReport::direct(design, objective, certificate))
}

/// `F = V_H Λ_F U_Wᴴ` for the objective `Tr(W Φ)`, with `W = U_W Λ_W U_Wᴴ`
/// and `Λ_W` non-increasing.
pub fn design_general_weight(ch: &ChannelModel, w: &GeneralWeight, power: f64) -> Result<DesignReport> {
    let n = w.dim();
    check_streams(ch, n)?;
    let svd = whitened_svd(ch)?;
    let eig = HermitianEigen::new(w.matrix())?;
    let lambda: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    let prob = AllocationProblem::new(lambda, svd.h_sq[..n].to_vec(), power)?;
    let (alloc, ordered) = waterfill_ordered(&prob)?;
    let gains = alloc.p.iter().map(|&p| libm::sqrt(p)).collect();
    let design = PrecoderDesign::assemble(svd.v.clone(), gains, eig.vectors, None)?;
    let objective = w.objective(&mse_matrix_lmmse(ch, &design.f)?)?;
    let certificate = if ordered {
        Certificate::OrderingCertified
    } else {
        Certificate::StructureOnly
    };
    Ok(DesignReport::direct(design, objective, certificate))
}

/// Sum-MSE water-filling gains on the first `n_dat` eigenchannels.
pub fn sum_mse_gains(ch: &ChannelModel, n_dat: usize, power: f64) -> Result<(WhitenedChannelSvd, Vec<f64>)> {
    check_streams(ch, n_dat)?;
    let svd = whitened_svd(ch)?;
    let prob = AllocationProblem::new(alloc::vec![1.0; n_dat], svd.h_sq[..n_dat].to_vec(), power)?;
    let alloc = waterfill_weighted(&prob)?;
    Ok((svd, alloc.p.iter().map(|&p| libm::sqrt(p)).collect()))
}

/// Sum-MSE gains with an arbitrary unitary right factor. The sum MSE does not
/// depend on the choice.
pub fn design_sum_mse(
    ch: &ChannelModel,
    n_dat: usize,
    power: f64,
    u_right: CMatrix,
) -> Result<DesignReport> {
    let (svd, gains) = sum_mse_gains(ch, n_dat, power)?;
    let design = PrecoderDesign::assemble(svd.v, gains, u_right, None)?;
    let objective = mse_matrix_lmmse(ch, &design.f)?.trace();
    Ok(DesignReport::direct(design, objective, Certificate::StructureOnly))
}

/// Sum-MSE gains rotated by the DFT matrix, which equalizes the per-stream
/// MSEs. The objective is the largest diagonal entry of `Φ`.
pub fn design_minmax(ch: &ChannelModel, n_dat: usize, power: f64) -> Result<DesignReport> {
    let mut report = design_sum_mse(ch, n_dat, power, linalg::dft_matrix(n_dat))?;
    report.objective = mse_matrix_lmmse(ch, &report.design.f)?
        .diagonal()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(report)
}

/// Optimal transmit covariance of the sum-MSE problem in the `Q = F Fᴴ`
/// variable. The rank of `Q` is not tied to the stream count.
#[derive(Debug, Clone, PartialEq)]
pub struct SumMseRelaxation {
    pub q: CMatrix,
    pub powers: Vec<f64>,
    pub rank: usize,
    /// `max(0, rank − n_dat)`.
    pub rank_gap: usize,
}

pub fn design_sum_mse_q(ch: &ChannelModel, power: f64, n_dat: usize) -> Result<SumMseRelaxation> {
    let svd = whitened_svd(ch)?;
    let k = svd.len();
    let prob = AllocationProblem::new(alloc::vec![1.0; k], svd.h_sq.clone(), power)?;
    let powers = waterfill_weighted(&prob)?.p;
    let v = svd.v.columns(0, k);
    let q = linalg::hermitian_part(&(v * linalg::diag(&powers) * v.adjoint()));
    let rank = powers.iter().filter(|&&p| p > 1e-12 * power).count();
    Ok(SumMseRelaxation {
        q,
        powers,
        rank,
        rank_gap: rank.saturating_sub(n_dat),
    })
}

/// `X = V_H Λ_X` with the arbitrary right unitary set to `I`. Requires
/// `x_i² h_i²` non-increasing.
pub fn pareto_structure(ch: &ChannelModel, x_sq: &[f64]) -> Result<PrecoderDesign> {
    check_streams(ch, x_sq.len())?;
    let svd = whitened_svd(ch)?;
    if x_sq.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput("gains must be finite and nonnegative"));
    }
    let snr: Vec<f64> = x_sq.iter().zip(&svd.h_sq).map(|(x, h)| x * h).collect();
    if let Some(index) = snr
        .windows(2)
        .position(|p| p[1] > p[0] + 1e-12 * p[0].abs().max(1.0))
    {
        return Err(Error::OrderingViolation { index: index + 1 });
    }
    let n = x_sq.len();
    PrecoderDesign::assemble(
        svd.v,
        x_sq.iter().map(|&x| libm::sqrt(x)).collect(),
        CMatrix::identity(n, n),
        None,
    )
}

/// Sorted eigenvalues of the matrix SNR `Xᴴ Hᴴ Rn^{-1} H X`.
pub fn matrix_snr_spectrum(ch: &ChannelModel, x: &CMatrix) -> Result<Vec<f64>> {
    Ok(HermitianEigen::new(&matrix_snr(ch, x)?)?.values)
}

/// `F = √(P/N) I[:, :N]`: no transmit processing.
pub fn equalizer_only(n_tx: usize, n_dat: usize, power: f64) -> Result<CMatrix> {
    if n_dat == 0 || n_dat > n_tx {
        return Err(Error::DimensionMismatch("stream count exceeds transmit antennas"));
    }
    Ok(CMatrix::identity(n_tx, n_dat) * c(libm::sqrt(power / n_dat as f64)))
}

#[cfg(test)]
mod tests;
