//! Point-to-point MIMO signal model `y = H F s + n` with `E{ssᴴ} = I`,
//! MSE matrices, the LMMSE equalizer, and the weighted objectives built on
//! top of them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, frobenius, hermitian_defect, hermitian_part, hpd_inverse, hpd_solve, is_finite,
    CMatrix, FullSvd, HermitianEigen, PSD_TOL, RECON_TOL,
};

/// Channel matrix `H` (n_rx × n_tx) and noise covariance `Rn` (n_rx × n_rx).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    h: CMatrix,
    rn: CMatrix,
    rn_inv_sqrt: CMatrix,
    whitened: CMatrix,
}

impl ChannelModel {
    pub fn new(h: CMatrix, rn: CMatrix) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::DimensionMismatch("channel must be at least 1 × 1"));
        }
        if rn.shape() != (h.nrows(), h.nrows()) {
            return Err(Error::DimensionMismatch("noise covariance must be n_rx × n_rx"));
        }
        if !is_finite(&h) || !is_finite(&rn) {
            return Err(Error::InvalidInput("channel model has non-finite entries"));
        }
        if hermitian_defect(&rn) > RECON_TOL * frobenius(&rn).max(1.0) {
            return Err(Error::NonPositiveDefiniteNoise {
                min_eigenvalue: f64::NAN,
            });
        }
        let rn = hermitian_part(&rn);
        let eig = HermitianEigen::new(&rn)?;
        let floor = PSD_TOL * eig.max_value().abs().max(f64::MIN_POSITIVE);
        if eig.min_value() <= floor {
            return Err(Error::NonPositiveDefiniteNoise {
                min_eigenvalue: eig.min_value(),
            });
        }
        let rn_inv_sqrt = eig.map_spectrum(|v| 1.0 / libm::sqrt(v));
        let whitened = &rn_inv_sqrt * &h;
        Ok(Self {
            h,
            rn,
            rn_inv_sqrt,
            whitened,
        })
    }

    /// `Rn = σ² I`.
    pub fn with_white_noise(h: CMatrix, noise_variance: f64) -> Result<Self> {
        let n = h.nrows();
        Self::new(h, CMatrix::identity(n, n) * c(noise_variance))
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn rn(&self) -> &CMatrix {
        &self.rn
    }

    pub fn n_rx(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }

    /// `Rn^{-1/2}` (Hermitian square root).
    pub fn noise_inv_sqrt(&self) -> &CMatrix {
        &self.rn_inv_sqrt
    }

    /// `Rn^{-1/2} H`.
    pub fn whitened(&self) -> &CMatrix {
        &self.whitened
    }

    fn check_precoder(&self, f: &CMatrix) -> Result<()> {
        if f.nrows() != self.n_tx() {
            return Err(Error::DimensionMismatch("precoder must have n_tx rows"));
        }
        Ok(())
    }
}

/// SVD of the whitened channel `Rn^{-1/2} H = U diag(σ) Vᴴ`, σ non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedChannelSvd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
    /// Eigenchannel gains `h_i² = σ_i²`.
    pub h_sq: Vec<f64>,
}

impl WhitenedChannelSvd {
    pub fn reconstruct(&self) -> CMatrix {
        let rows = self.u.nrows();
        let cols = self.v.nrows();
        &self.u * linalg::diag_rect(rows, cols, &self.sigma) * self.v.adjoint()
    }

    /// Number of eigenchannels, `min(n_rx, n_tx)`.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

pub fn whitened_svd(ch: &ChannelModel) -> Result<WhitenedChannelSvd> {
    let FullSvd { u, sigma, v } = FullSvd::new(ch.whitened())?;
    let h_sq = sigma.iter().map(|s| s * s).collect();
    Ok(WhitenedChannelSvd { u, sigma, v, h_sq })
}

/// Hermitian error covariance of the recovered symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct MseMatrix {
    phi: CMatrix,
}

impl MseMatrix {
    /// Wraps a Hermitian PSD matrix, symmetrizing away round-off.
    pub fn new(phi: CMatrix) -> Result<Self> {
        if !phi.is_square() {
            return Err(Error::DimensionMismatch("MSE matrix must be square"));
        }
        if hermitian_defect(&phi) > RECON_TOL * frobenius(&phi).max(1.0) {
            return Err(Error::NotPsd("MSE matrix is not Hermitian"));
        }
        Ok(Self {
            phi: hermitian_part(&phi),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }

    /// Per-stream MSEs.
    pub fn diagonal(&self) -> Vec<f64> {
        linalg::real_diagonal(&self.phi)
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.phi)
    }
}

/// `G = (HF)ᴴ (H F Fᴴ Hᴴ + Rn)^{-1}`, an n_dat × n_rx matrix.
pub fn lmmse_equalizer(ch: &ChannelModel, f: &CMatrix) -> Result<CMatrix> {
    ch.check_precoder(f)?;
    let hf = ch.h() * f;
    let k = &hf * hf.adjoint() + ch.rn();
    // K is Hermitian PD, so G = (K^{-1} HF)ᴴ
    Ok(hpd_solve(&k, &hf)?.adjoint())
}

/// `Φ = (GHF − I)(GHF − I)ᴴ + G Rn Gᴴ` for an arbitrary equalizer.
pub fn mse_matrix_general(ch: &ChannelModel, f: &CMatrix, g: &CMatrix) -> Result<MseMatrix> {
    ch.check_precoder(f)?;
    let n_dat = f.ncols();
    if g.shape() != (n_dat, ch.n_rx()) {
        return Err(Error::DimensionMismatch("equalizer must be n_dat × n_rx"));
    }
    let e = g * ch.h() * f - CMatrix::identity(n_dat, n_dat);
    MseMatrix::new(&e * e.adjoint() + g * ch.rn() * g.adjoint())
}

/// `Φ = (Fᴴ Hᴴ Rn^{-1} H F + I)^{-1}`, the MSE matrix under the LMMSE equalizer.
pub fn mse_matrix_lmmse(ch: &ChannelModel, f: &CMatrix) -> Result<MseMatrix> {
    ch.check_precoder(f)?;
    let b = ch.whitened() * f;
    let n = f.ncols();
    let gram = b.adjoint() * &b + CMatrix::identity(n, n);
    MseMatrix::new(hpd_inverse(&gram)?)
}

/// `Fᴴ Hᴴ Rn^{-1} H F`, the "matrix SNR".
pub fn matrix_snr(ch: &ChannelModel, f: &CMatrix) -> Result<CMatrix> {
    ch.check_precoder(f)?;
    let b = ch.whitened() * f;
    Ok(hermitian_part(&(b.adjoint() * b)))
}

/// `ln |I + Fᴴ Hᴴ Rn^{-1} H F|` in nats.
pub fn achievable_rate(ch: &ChannelModel, f: &CMatrix) -> Result<f64> {
    let snr = matrix_snr(ch, f)?;
    let n = snr.nrows();
    linalg::log_det_hpd(&(snr + CMatrix::identity(n, n)))
}

/// Nonnegative per-stream weights `w_i` (the diagonal of `Λ_w`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeights(Vec<f64>);

impl DiagonalWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("weights must be nonempty"));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative"));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidInput("at least one weight must be positive"));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(alloc::vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Hermitian PSD weight `W` for `Tr(W Φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralWeight(CMatrix);

impl GeneralWeight {
    pub fn new(w: CMatrix) -> Result<Self> {
        if !w.is_square() || w.nrows() == 0 {
            return Err(Error::DimensionMismatch("weight matrix must be square"));
        }
        if !linalg::is_psd(&w) {
            return Err(Error::NotPsd("weight matrix"));
        }
        Ok(Self(hermitian_part(&w)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `Re Tr(W Φ)`.
    pub fn objective(&self, phi: &MseMatrix) -> Result<f64> {
        if phi.dim() != self.dim() {
            return Err(Error::DimensionMismatch("weight and MSE matrix sizes differ"));
        }
        Ok(linalg::trace_re(&(&self.0 * phi.matrix())))
    }
}

/// Matrix-field weighting `Ψ = Σ_k W_kᴴ Φ W_k + Ξ`.
///
/// `Ξ` only has to be Hermitian; it may be indefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    w_list: Vec<CMatrix>,
    xi: CMatrix,
}

impl MatrixField {
    pub fn new(w_list: Vec<CMatrix>, xi: CMatrix) -> Result<Self> {
        let Some(first) = w_list.first() else {
            return Err(Error::InvalidInput("matrix field needs at least one weight"));
        };
        let (rows, cols) = first.shape();
        if w_list.iter().any(|w| w.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch("all W_k must share a shape"));
        }
        if xi.shape() != (cols, cols) {
            return Err(Error::DimensionMismatch("Ξ must match the columns of W_k"));
        }
        if hermitian_defect(&xi) > RECON_TOL * frobenius(&xi).max(1.0) {
            return Err(Error::InvalidInput("Ξ must be Hermitian"));
        }
        Ok(Self {
            w_list,
            xi: hermitian_part(&xi),
        })
    }

    /// The equivalent trace weight `Σ_k W_k W_kᴴ`.
    pub fn trace_weight(&self) -> CMatrix {
        let n = self.w_list[0].nrows();
        self.w_list
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, w| acc + w * w.adjoint())
    }

    pub fn weights(&self) -> &[CMatrix] {
        &self.w_list
    }

    pub fn xi(&self) -> &CMatrix {
        &self.xi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Diagonal(DiagonalWeights),
    General(GeneralWeight),
    MatrixField(MatrixField),
}

/// `Tr(Λ_w Φ) = Σ w_i [Φ]_ii`.
pub fn weighted_mse(w: &DiagonalWeights, phi: &MseMatrix) -> Result<f64> {
    if w.len() != phi.dim() {
        return Err(Error::LengthMismatch {
            left: w.len(),
            right: phi.dim(),
        });
    }
    Ok(w
        .as_slice()
        .iter()
        .zip(phi.diagonal())
        .map(|(wi, d)| wi * d)
        .sum())
}

pub fn matrix_field_mse(field: &MatrixField, phi: &MseMatrix) -> Result<CMatrix> {
    if field.w_list[0].nrows() != phi.dim() {
        return Err(Error::DimensionMismatch("W_k rows must match the MSE matrix"));
    }
    let psi = field
        .w_list
        .iter()
        .fold(field.xi.clone(), |acc, w| acc + w.adjoint() * phi.matrix() * w);
    Ok(hermitian_part(&psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, min_eigenvalue};
    use num_complex::Complex64;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c(x))
    }

    fn random_channel(n_rx: usize, n_tx: usize, salt: u64) -> CMatrix {
        let mut s = 0x2545_F491_4F6C_DD1Du64.wrapping_mul(salt + 1);
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        CMatrix::from_fn(n_rx, n_tx, |_, _| Complex64::new(next(), next()))
    }

    #[test]
    fn identity_channel_svd() {
        let ch = ChannelModel::new(CMatrix::identity(2, 2), CMatrix::identity(2, 2)).unwrap();
        let s = whitened_svd(&ch).unwrap();
        assert_eq!(s.sigma.len(), 2);
        for (&sig, &hs) in s.sigma.iter().zip(&s.h_sq) {
            assert!((sig - 1.0).abs() < 1e-14);
            assert!((hs - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_channel_svd() {
        let ch = ChannelModel::new(diag(&[2.0, 1.0]), CMatrix::identity(2, 2)).unwrap();
        let s = whitened_svd(&ch).unwrap();
        assert!((s.sigma[0] - 2.0).abs() < 1e-14);
        assert!((s.sigma[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn whitened_svd_reconstructs_and_repeats() {
        let ch = ChannelModel::with_white_noise(random_channel(4, 4, 7), 0.5).unwrap();
        let s = whitened_svd(&ch).unwrap();
        assert!(frobenius(&(s.reconstruct() - ch.whitened())) < 1e-10);
        assert_eq!(s, whitened_svd(&ch).unwrap());
    }

    #[test]
    fn rejects_singular_noise() {
        let err = ChannelModel::new(CMatrix::identity(2, 2), diag(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDefiniteNoise { .. }));
        let err = ChannelModel::new(CMatrix::identity(2, 2), CMatrix::identity(3, 3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn scalar_lmmse() {
        let ch = ChannelModel::new(scalar(1.0), scalar(1.0)).unwrap();
        let g = lmmse_equalizer(&ch, &scalar(1.0)).unwrap();
        assert!((g[(0, 0)].re - 0.5).abs() < 1e-15);
        let g0 = lmmse_equalizer(&ch, &scalar(0.0)).unwrap();
        assert_eq!(g0[(0, 0)], c(0.0));
    }

    #[test]
    fn general_mse_edge_cases() {
        let ch = ChannelModel::with_white_noise(random_channel(3, 3, 2), 1.0).unwrap();
        let f = random_channel(3, 2, 9);
        let phi = mse_matrix_general(&ch, &f, &CMatrix::zeros(2, 3)).unwrap();
        assert!(frobenius(&(phi.matrix() - CMatrix::identity(2, 2))) < 1e-15);

        let ch = ChannelModel::with_white_noise(scalar(1.0), 1e-300).unwrap();
        let phi = mse_matrix_general(&ch, &scalar(1.0), &scalar(1.0)).unwrap();
        assert!(phi.trace().abs() < 1e-200);
    }

    #[test]
    fn general_at_lmmse_equals_closed_form() {
        let ch = ChannelModel::with_white_noise(random_channel(4, 4, 3), 0.3).unwrap();
        let f = random_channel(4, 3, 4);
        let g = lmmse_equalizer(&ch, &f).unwrap();
        let a = mse_matrix_general(&ch, &f, &g).unwrap();
        let b = mse_matrix_lmmse(&ch, &f).unwrap();
        assert!(frobenius(&(a.matrix() - b.matrix())) < 1e-10);
    }

    #[test]
    fn lmmse_eigenvalues_in_unit_interval() {
        let ch = ChannelModel::with_white_noise(random_channel(4, 4, 5), 0.1).unwrap();
        let phi = mse_matrix_lmmse(&ch, &random_channel(4, 4, 6)).unwrap();
        let e = HermitianEigen::new(phi.matrix()).unwrap();
        assert!(e.values.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-12));
        assert!(phi.diagonal().iter().all(|&d| d > 0.0 && d <= 1.0 + 1e-12));
        let zero = mse_matrix_lmmse(&ch, &CMatrix::zeros(4, 2)).unwrap();
        assert!(frobenius(&(zero.matrix() - CMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn diagonalized_design_gives_one_over_one_plus_sinr() {
        // f²h² = 3 on the first stream → MSE 1/4
        let ch = ChannelModel::new(diag(&[2.0, 1.0]), CMatrix::identity(2, 2)).unwrap();
        let s = whitened_svd(&ch).unwrap();
        let f = &s.v * diag(&[libm::sqrt(3.0) / 2.0, 1.0]);
        let phi = mse_matrix_lmmse(&ch, &f).unwrap();
        let d = phi.diagonal();
        assert!((d[0] - 0.25).abs() < 1e-14);
        assert!((d[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn weighted_mse_examples() {
        let id = MseMatrix::new(CMatrix::identity(4, 4)).unwrap();
        let w = DiagonalWeights::new(alloc::vec![1.0; 4]).unwrap();
        assert_eq!(weighted_mse(&w, &id).unwrap(), 4.0);
        let w = DiagonalWeights::new(alloc::vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!((weighted_mse(&w, &id).unwrap() - 1.0).abs() < 1e-15);
        let w = DiagonalWeights::new(alloc::vec![1.0, 0.0]).unwrap();
        let phi = MseMatrix::new(diag(&[0.3, 0.7])).unwrap();
        assert_eq!(weighted_mse(&w, &phi).unwrap(), 0.3);
        assert!(weighted_mse(&w, &id).is_err());
        assert!(DiagonalWeights::new(alloc::vec![0.0, 0.0]).is_err());
        assert!(DiagonalWeights::new(alloc::vec![-1.0, 2.0]).is_err());
    }

    #[test]
    fn matrix_field_reductions() {
        let ch = ChannelModel::with_white_noise(random_channel(3, 3, 12), 0.2).unwrap();
        let phi = mse_matrix_lmmse(&ch, &random_channel(3, 3, 13)).unwrap();
        let field = MatrixField::new(alloc::vec![CMatrix::identity(3, 3)], CMatrix::zeros(3, 3))
            .unwrap();
        let psi = matrix_field_mse(&field, &phi).unwrap();
        assert_eq!(&psi, phi.matrix());

        // lower-triangular feedback weighting: Ψ = C Φ Cᴴ with W₁ = Cᴴ
        let mut lower = random_channel(3, 3, 14);
        for i in 0..3 {
            for j in (i + 1)..3 {
                lower[(i, j)] = c(0.0);
            }
        }
        let field = MatrixField::new(alloc::vec![lower.adjoint()], CMatrix::zeros(3, 3)).unwrap();
        let psi = matrix_field_mse(&field, &phi).unwrap();
        let expect = &lower * phi.matrix() * lower.adjoint();
        assert!(frobenius(&(psi - expect)) < 1e-13);
    }

    #[test]
    fn matrix_field_allows_indefinite_xi() {
        let field = MatrixField::new(alloc::vec![CMatrix::identity(2, 2)], diag(&[-1.0, 0.5]));
        assert!(field.is_ok());
        let phi = MseMatrix::new(diag(&[0.5, 0.5])).unwrap();
        let psi = matrix_field_mse(&field.unwrap(), &phi).unwrap();
        assert!(min_eigenvalue(&psi).unwrap() < 0.0);
    }
}
