//! Dense complex linear algebra with the ordering and phase conventions the
//! rest of the crate depends on.
//!
//! Every eigen- and singular-value decomposition returned from here is sorted
//! non-increasing (ties keep the order produced by the underlying
//! factorization), and every eigen/singular vector is rotated so that its
//! largest-magnitude entry is real and positive. Two calls on the same input
//! are bit-identical.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative eigenvalue floor used for positive (semi-)definiteness checks.
pub const PSD_TOL: f64 = 1e-10;
/// Frobenius tolerance for reconstructions, unitarity and Hermitian symmetry.
pub const RECON_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Lifts a real matrix into the complex field.
pub fn complexify(a: &DMatrix<f64>) -> CMatrix {
    a.map(c)
}

/// Square (or rectangular) matrix with `values` on the main diagonal.
pub fn diag_rect(rows: usize, cols: usize, values: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for (i, &v) in values.iter().enumerate().take(rows.min(cols)) {
        m[(i, i)] = c(v);
    }
    m
}

pub fn diag(values: &[f64]) -> CMatrix {
    diag_rect(values.len(), values.len(), values)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    libm::sqrt(a.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Real part of the trace.
pub fn trace_re(a: &CMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

pub fn real_diagonal(a: &CMatrix) -> Vec<f64> {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).collect()
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).map(|z| z * 0.5)
}

/// `‖A − Aᴴ‖_F`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    frobenius(&(a - a.adjoint()))
}

/// `‖UᴴU − I‖_F`.
pub fn unitary_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    frobenius(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Unitary DFT matrix, `[U]_{jk} = e^{-2πi jk/n} / √n`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / libm::sqrt(n as f64);
    CMatrix::from_fn(n, n, |j, k| {
        let angle = -2.0 * core::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
        Complex64::new(libm::cos(angle) * scale, libm::sin(angle) * scale)
    })
}

/// Permutation matrix whose column `i` is `e_{perm[i]}`.
pub fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &p) in perm.iter().enumerate() {
        m[(p, i)] = c(1.0);
    }
    m
}

/// Rotates a vector so its largest-magnitude entry is real positive, returning
/// the unit phase that was applied.
fn fix_phase(mut col: nalgebra::DVectorViewMut<'_, Complex64>) -> Complex64 {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    let pivot = col[best];
    let mag = pivot.norm();
    if mag == 0.0 {
        return c(1.0);
    }
    let phase = pivot.conj() / mag;
    for z in col.iter_mut() {
        *z *= phase;
    }
    col[best] = c(mag);
    phase
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // stable: equal values keep factorization order
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Hermitian eigendecomposition `A = U diag(values) Uᴴ` with `values` non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("eigendecomposition needs a square matrix"));
        }
        if !is_finite(a) {
            return Err(Error::InvalidInput("matrix has non-finite entries"));
        }
        let n = a.nrows();
        if n == 0 {
            return Ok(Self {
                values: Vec::new(),
                vectors: CMatrix::zeros(0, 0),
            });
        }
        let eig = hermitian_part(a).symmetric_eigen();
        let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let order = descending_order(&raw);
        let mut vectors = CMatrix::zeros(n, n);
        let mut values = Vec::with_capacity(n);
        for (dst, &src) in order.iter().enumerate() {
            values.push(raw[src]);
            vectors.set_column(dst, &eig.eigenvectors.column(src));
            fix_phase(vectors.column_mut(dst));
        }
        Ok(Self { values, vectors })
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `U diag(g(λ)) Uᴴ`.
    pub fn map_spectrum(&self, g: impl Fn(f64) -> f64) -> CMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&v| g(v)).collect();
        &self.vectors * diag(&mapped) * self.vectors.adjoint()
    }
}

/// Smallest eigenvalue of the Hermitian part of `a`.
pub fn min_eigenvalue(a: &CMatrix) -> Result<f64> {
    Ok(HermitianEigen::new(a)?.min_value())
}

/// PSD check with the relative floor `PSD_TOL · max(1, λ_max)`.
pub fn is_psd(a: &CMatrix) -> bool {
    if hermitian_defect(a) > RECON_TOL * frobenius(a).max(1.0) {
        return false;
    }
    match HermitianEigen::new(a) {
        Ok(e) => e.min_value() >= -PSD_TOL * e.max_value().abs().max(1.0),
        Err(_) => false,
    }
}

/// Full SVD `A = U Σ Vᴴ` with square unitary `U` and `V`.
///
/// `sigma` has `min(rows, cols)` entries, non-increasing. Zero singular values
/// are retained. The left vector of each pair inherits the phase applied to
/// the right vector, so `u_i σ_i v_iᴴ` is unchanged by the convention.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSvd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

impl FullSvd {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !is_finite(a) {
            return Err(Error::InvalidInput("matrix has non-finite entries"));
        }
        let (m, n) = a.shape();
        let k = m.min(n);
        if k == 0 {
            return Ok(Self {
                u: CMatrix::identity(m, m),
                sigma: Vec::new(),
                v: CMatrix::identity(n, n),
            });
        }
        let svd = a.clone().svd(true, true);
        let (Some(u_thin), Some(v_t)) = (svd.u, svd.v_t) else {
            return Err(Error::InvalidInput("singular value decomposition failed"));
        };
        let raw: Vec<f64> = svd.singular_values.iter().copied().collect();
        let order = descending_order(&raw);

        let mut u = CMatrix::zeros(m, k);
        let mut v = CMatrix::zeros(n, k);
        let mut sigma = Vec::with_capacity(k);
        for (dst, &src) in order.iter().enumerate() {
            sigma.push(raw[src].max(0.0));
            let vcol: DVector<Complex64> = v_t.row(src).adjoint();
            v.set_column(dst, &vcol);
            u.set_column(dst, &u_thin.column(src));
            let phase = fix_phase(v.column_mut(dst));
            for z in u.column_mut(dst).iter_mut() {
                *z *= phase;
            }
        }
        Ok(Self {
            u: complete_basis(&u),
            sigma,
            v: complete_basis(&v),
        })
    }

    pub fn reconstruct(&self) -> CMatrix {
        &self.u * diag_rect(self.u.ncols(), self.v.ncols(), &self.sigma) * self.v.adjoint()
    }
}

/// Extends orthonormal columns `q` (n × k) to an n × n unitary matrix with
/// Gram–Schmidt against the canonical basis, in index order.
pub fn complete_basis(q: &CMatrix) -> CMatrix {
    let (n, k) = q.shape();
    if k >= n {
        return q.columns(0, n).into_owned();
    }
    let mut out = CMatrix::zeros(n, n);
    out.columns_mut(0, k).copy_from(q);
    let mut filled = k;
    for e in 0..n {
        if filled == n {
            break;
        }
        let mut cand = DVector::<Complex64>::zeros(n);
        cand[e] = c(1.0);
        // two passes of classical Gram–Schmidt
        for _ in 0..2 {
            for j in 0..filled {
                let col = out.column(j);
                let proj = col.dotc(&cand);
                cand -= col * proj;
            }
        }
        let norm = cand.norm();
        if norm > 1e-6 {
            cand /= c(norm);
            out.set_column(filled, &cand);
            fix_phase(out.column_mut(filled));
            filled += 1;
        }
    }
    out
}

/// Inverse of a Hermitian positive-definite matrix through its Cholesky factor.
pub fn hpd_inverse(a: &CMatrix) -> Result<CMatrix> {
    Ok(hermitian_part(&cholesky(a)?.inverse()))
}

/// Cholesky factor of the Hermitian part of `a`. The complex factorization
/// takes principal square roots, so a non-real or nonpositive pivot is the
/// signal that `a` is not positive definite.
fn cholesky(a: &CMatrix) -> Result<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let err = Error::NotPositiveDefinite("Cholesky factorization failed");
    let chol = hermitian_part(a).cholesky().ok_or(err.clone())?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.re.is_finite()) || d.im.abs() > 1e-12 * d.re {
            return Err(err);
        }
    }
    Ok(chol)
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn hpd_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    Ok(cholesky(a)?.solve(b))
}

/// `ln det A` for Hermitian positive-definite `A`.
pub fn log_det_hpd(a: &CMatrix) -> Result<f64> {
    let l = cholesky(a)?.l();
    Ok(2.0 * (0..l.nrows()).map(|i| libm::log(l[(i, i)].re)).sum::<f64>())
}
