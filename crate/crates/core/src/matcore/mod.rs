//! Dense real linear algebra kernel.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, stored column-major; `vec` is
//! therefore a plain copy of the storage.

mod eigen;
mod hqr;
pub mod io;
pub mod split;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use eigen::format_root as eigen_format;
pub use eigen::{eig_nonsym, eig_nonsym_with, root_order, spectral_function, RootFlags, Spectrum};
pub use split::{split_spectrum, split_spectrum_with, ConjugateClosure, Region, RootSelector, SpectralSplit};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Numerical thresholds shared by the decomposition and inference layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Roots closer than `cluster_rel · (1 + |λ|)` are treated as equal.
    pub cluster_rel: f64,
    /// Minimum distance between selected and unselected roots.
    pub split_gap: f64,
    /// Roots with `|λ| ≤ zero_root_rel · max|λ|` count as zero.
    pub zero_root_rel: f64,
    /// Smallest singular value allowed for the eigenvectors of a repeated root.
    pub defective_rel: f64,
    /// Smallest `σ_min/σ_max` allowed for the full right-eigenvector matrix.
    pub singular_basis_rel: f64,
    /// Kept eigenvalues of a pseudo-inverse must exceed this fraction of the largest.
    pub pinv_rel: f64,
    /// Column-rank threshold relative to the largest singular value.
    pub rank_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cluster_rel: 1e-8,
            split_gap: 1e-6,
            zero_root_rel: 1e-10,
            defective_rel: 1e-6,
            singular_basis_rel: 1e-13,
            pinv_rel: 1e-12,
            rank_rel: 1e-10,
        }
    }
}

pub(crate) fn check_finite(m: &Mat) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Column-stacking vectorization.
pub fn vec(m: &Mat) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Result<Mat> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot reshape length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Mat::from_column_slice(rows, cols, v.as_slice()))
}

/// Kronecker product; satisfies `vec(B X Aᵀ) = (A ⊗ B) vec(X)`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Permutation `K` with `vec(Xᵀ) = K vec(X)` for `X` of shape `rows × cols`.
pub fn commutation(rows: usize, cols: usize) -> Mat {
    let n = rows * cols;
    let mut k = Mat::zeros(n, n);
    for i in 0..rows {
        for j in 0..cols {
            // X[i,j] sits at j*rows+i in vec(X) and at i*cols+j in vec(Xᵀ)
            k[(i * cols + j, j * rows + i)] = 1.0;
        }
    }
    k
}

/// Number of singular values above `rel · σ_max`.
pub fn numerical_rank(m: &Mat, rel: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * smax).count()
}

/// Spectral generalized inverse `Σ_{λ≠0} λ⁻¹ P_λ` of a diagonalizable matrix.
pub fn spectral_geninv(m: &Mat) -> Result<Mat> {
    spectral_geninv_with(m, &Tolerances::default())
}

pub fn spectral_geninv_with(m: &Mat, tol: &Tolerances) -> Result<Mat> {
    let s = eig_nonsym_with(m, tol)?;
    let scale = s.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cutoff = tol.zero_root_rel * scale;
    Ok(spectral_function(&s, |lam| {
        if lam.norm() <= cutoff {
            Complex64::new(0.0, 0.0)
        } else {
            lam.inv()
        }
    }))
}

/// Result of a rank-truncated pseudo-inverse of a PSD matrix.
#[derive(Debug, Clone)]
pub struct PsdInverse {
    pub inverse: Mat,
    /// Eigenvalues that were inverted, largest first.
    pub kept: Vec<f64>,
    /// Largest eigenvalue that was zeroed (0 when nothing was discarded).
    pub largest_discarded: f64,
}

/// Pseudo-inverse of a symmetric PSD matrix keeping exactly `rank` eigenvalues.
pub fn psd_pseudoinverse(s: &Mat, rank: usize) -> Result<Mat> {
    psd_pseudoinverse_detailed(s, rank, &Tolerances::default()).map(|p| p.inverse)
}

pub fn psd_pseudoinverse_detailed(s: &Mat, rank: usize, tol: &Tolerances) -> Result<PsdInverse> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension(format!(
            "pseudo-inverse needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let n = s.nrows();
    if rank > n {
        return Err(Error::RankDeficient(format!(
            "requested rank {rank} exceeds dimension {n}"
        )));
    }
    check_finite(s)?;
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let largest = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
    let threshold = tol.pinv_rel * largest;
    let mut inverse = Mat::zeros(n, n);
    let mut kept = Vec::with_capacity(rank);
    for &i in order.iter().take(rank) {
        let lam = eig.eigenvalues[i];
        if !(lam > threshold && lam > 0.0) {
            return Err(Error::RankDeficient(format!(
                "eigenvalue {lam:e} of rank-{rank} block does not exceed {threshold:e}"
            )));
        }
        let v = eig.eigenvectors.column(i);
        inverse += (v * v.transpose()) / lam;
        kept.push(lam);
    }
    let largest_discarded = order
        .get(rank)
        .map_or(0.0, |&i| eig.eigenvalues[i].max(0.0));
    Ok(PsdInverse {
        inverse,
        kept,
        largest_discarded,
    })
}

/// Orthonormal basis of the orthogonal complement of `col(v)`.
///
/// Computed from a Householder QR of `[v | I]`; each returned column is
/// sign-fixed so its first non-negligible entry is positive.
pub fn orthocomplement(v: &Mat) -> Result<Mat> {
    orthocomplement_with(v, &Tolerances::default())
}

pub fn orthocomplement_with(v: &Mat, tol: &Tolerances) -> Result<Mat> {
    let (p, s) = v.shape();
    if s >= p {
        return Err(Error::RankDeficient(format!(
            "a {p}x{s} matrix has no proper orthocomplement"
        )));
    }
    check_finite(v)?;
    let vnorm = v.norm();
    if s > 0 && (vnorm == 0.0 || numerical_rank(v, tol.rank_rel) < s) {
        return Err(Error::RankDeficient(format!(
            "candidate matrix ({p}x{s}) is column-rank deficient"
        )));
    }
    let mut aug = Mat::zeros(p, s + p);
    aug.view_mut((0, 0), (p, s)).copy_from(v);
    aug.view_mut((0, s), (p, p)).fill_with_identity();
    let q = aug.qr().q();
    let mut out = q.columns(s, p - s).into_owned();
    for mut col in out.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(out)
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(x.abs()))
}
