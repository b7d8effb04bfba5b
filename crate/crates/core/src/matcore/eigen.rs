use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use super::hqr::real_eigen;
use super::{check_finite, CMat, Mat, Tolerances};
use crate::error::{Error, Result};

/// Clustering metadata for one eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootFlags {
    /// Index of the cluster of numerically equal roots this root belongs to.
    pub cluster: usize,
    /// Number of roots in that cluster.
    pub multiplicity: usize,
    /// Eigenvalue condition number `‖l‖·‖r‖` under `lᵀr = 1`.
    pub condition: f64,
}

/// Eigenvalues with column-aligned right and left eigenvectors.
///
/// Ordering is deterministic: modulus descending, then real part descending,
/// then imaginary part descending. Right vectors have unit Euclidean norm and
/// their last non-negligible entry is real and positive; left vectors carry
/// the remaining scale so that `leftᵀ · right = I`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub right: CMat,
    pub left: CMat,
    pub flags: Vec<RootFlags>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Index of the complex conjugate partner of root `i` (itself for real roots).
    pub fn conjugate_of(&self, i: usize) -> usize {
        let lam = self.eigenvalues[i];
        if lam.im == 0.0 {
            return i;
        }
        let target = lam.conj();
        (0..self.dim())
            .filter(|&j| j != i)
            .min_by(|&a, &b| {
                let da = (self.eigenvalues[a] - target).norm();
                let db = (self.eigenvalues[b] - target).norm();
                da.partial_cmp(&db).unwrap_or(Ordering::Equal)
            })
            .unwrap_or(i)
    }

    pub fn is_real(&self, i: usize) -> bool {
        self.eigenvalues[i].im == 0.0
    }
}

/// Total order used for eigenvalues: modulus desc, real desc, imaginary desc.
pub fn root_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm()
        .partial_cmp(&a.norm())
        .unwrap_or(Ordering::Equal)
        .then(b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal))
        .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
}

pub fn eig_nonsym(m: &Mat) -> Result<Spectrum> {
    eig_nonsym_with(m, &Tolerances::default())
}

pub fn eig_nonsym_with(m: &Mat, tol: &Tolerances) -> Result<Spectrum> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m)?;
    let p = m.nrows();
    if p == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            right: CMat::zeros(0, 0),
            left: CMat::zeros(0, 0),
            flags: vec![],
        });
    }

    let raw = real_eigen(m)?;

    let mut roots: Vec<(Complex64, Vec<Complex64>)> = Vec::with_capacity(p);
    let mut i = 0;
    while i < p {
        if raw.im[i] == 0.0 {
            let v: Vec<Complex64> = (0..p)
                .map(|r| Complex64::new(raw.vectors[(r, i)], 0.0))
                .collect();
            roots.push((Complex64::new(raw.re[i], 0.0), v));
            i += 1;
        } else {
            let lam = Complex64::new(raw.re[i], raw.im[i]);
            let v: Vec<Complex64> = (0..p)
                .map(|r| Complex64::new(raw.vectors[(r, i)], raw.vectors[(r, i + 1)]))
                .collect();
            let vbar: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
            roots.push((lam, v));
            roots.push((lam.conj(), vbar));
            i += 2;
        }
    }

    for (_, v) in roots.iter_mut() {
        normalize_vector(v);
    }
    roots.sort_by(|a, b| root_order(&a.0, &b.0));

    let eigenvalues: Vec<Complex64> = roots.iter().map(|r| r.0).collect();
    let right = CMat::from_fn(p, p, |r, c| roots[c].1[r]);

    let clusters = cluster_roots(&eigenvalues, tol.cluster_rel);
    check_semisimple(&right, &eigenvalues, &clusters, tol)?;

    let inv = right.clone().try_inverse().ok_or_else(|| Error::Defective {
        eigenvalue: format_root(eigenvalues[0]),
    })?;
    let left = inv.transpose();

    let flags = (0..p)
        .map(|j| {
            let cl = clusters[j];
            let multiplicity = clusters.iter().filter(|&&c| c == cl).count();
            RootFlags {
                cluster: cl,
                multiplicity,
                condition: right.column(j).norm() * left.column(j).norm(),
            }
        })
        .collect();

    Ok(Spectrum {
        eigenvalues,
        right,
        left,
        flags,
    })
}

/// Unit norm, last non-negligible entry rotated onto the positive real axis.
fn normalize_vector(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    for z in v.iter_mut() {
        *z /= norm;
    }
    let cutoff = 1e-10;
    if let Some(anchor) = v.iter().rev().find(|z| z.norm() > cutoff).copied() {
        let phase = anchor.conj() / anchor.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
        // exact zero imaginary parts for real vectors
        if v.iter().all(|z| z.im.abs() <= 1e-15) {
            for z in v.iter_mut() {
                z.im = 0.0;
            }
        }
    }
}

fn cluster_roots(eigs: &[Complex64], rel: f64) -> Vec<usize> {
    let p = eigs.len();
    let mut label: Vec<usize> = (0..p).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        let mut j = i;
        while label[j] != r {
            let next = label[j];
            label[j] = r;
            j = next;
        }
        r
    }
    for i in 0..p {
        for j in (i + 1)..p {
            if (eigs[i] - eigs[j]).norm() <= rel * (1.0 + eigs[i].norm()) {
                let a = find(&mut label, i);
                let b = find(&mut label, j);
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    // relabel clusters 0.. in order of first appearance
    let mut map = std::collections::HashMap::new();
    let mut out = vec![0; p];
    for i in 0..p {
        let root = find(&mut label, i);
        let next = map.len();
        out[i] = *map.entry(root).or_insert(next);
    }
    out
}

fn check_semisimple(
    right: &CMat,
    eigs: &[Complex64],
    clusters: &[usize],
    tol: &Tolerances,
) -> Result<()> {
    let n_clusters = clusters.iter().copied().max().map_or(0, |c| c + 1);
    for c in 0..n_clusters {
        let idx: Vec<usize> = (0..eigs.len()).filter(|&j| clusters[j] == c).collect();
        if idx.len() < 2 {
            continue;
        }
        let block = right.select_columns(idx.iter());
        let sv = block.singular_values();
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smin < tol.defective_rel {
            return Err(Error::Defective {
                eigenvalue: format_root(eigs[idx[0]]),
            });
        }
    }
    let sv = right.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smax == 0.0 || smin / smax < tol.singular_basis_rel {
        // report the closest pair of roots, the usual culprit
        let mut worst = (0, f64::INFINITY);
        for i in 0..eigs.len() {
            for j in (i + 1)..eigs.len() {
                let d = (eigs[i] - eigs[j]).norm();
                if d < worst.1 {
                    worst = (i, d);
                }
            }
        }
        return Err(Error::Defective {
            eigenvalue: format_root(eigs[worst.0]),
        });
    }
    Ok(())
}

pub(crate) fn format_root(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im > 0.0 {
        format!("{}+{}i", z.re, z.im)
    } else {
        format!("{}-{}i", z.re, -z.im)
    }
}

/// `R diag(f(λ)) Lᵀ`, projected to the reals. `f` must commute with
/// conjugation (f(λ̄) = conj f(λ)) for the result to be real.
pub fn spectral_function(s: &Spectrum, f: impl Fn(Complex64) -> Complex64) -> Mat {
    let p = s.dim();
    let mut scaled = s.right.clone();
    for j in 0..p {
        let w = f(s.eigenvalues[j]);
        for i in 0..p {
            scaled[(i, j)] *= w;
        }
    }
    let full: CMat = &scaled * s.left.transpose();
    DMatrix::from_fn(p, p, |i, j| full[(i, j)].re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residuals(m: &Mat, s: &Spectrum) -> (f64, f64) {
        let p = s.dim();
        let mc = m.map(|x| Complex64::new(x, 0.0));
        let lam = CMat::from_diagonal(&nalgebra::DVector::from_vec(s.eigenvalues.clone()));
        let r1 = (&mc * &s.right - &s.right * &lam).camax();
        let r2 = (s.left.transpose() * &s.right - CMat::identity(p, p)).camax();
        (r1, r2)
    }

    #[test]
    fn worked_example_vectors() {
        let m = Mat::from_row_slice(2, 2, &[0.8, 0.5, 0.0, 0.4]);
        let s = eig_nonsym(&m).unwrap();
        assert!((s.eigenvalues[0].re - 0.8).abs() < 1e-14);
        assert!((s.eigenvalues[1].re - 0.4).abs() < 1e-14);
        let r = &s.right;
        assert!((r[(0, 0)].re - 1.0).abs() < 1e-12 && r[(1, 0)].re.abs() < 1e-12);
        assert!((r[(0, 1)].re + 0.780_868_8).abs() < 1e-6);
        assert!((r[(1, 1)].re - 0.624_695).abs() < 1e-6);
        let l = &s.left;
        assert!((l[(0, 0)].re - 1.0).abs() < 1e-12 && (l[(1, 0)].re - 1.25).abs() < 1e-12);
        assert!(l[(0, 1)].re.abs() < 1e-12 && (l[(1, 1)].re - 2.5625f64.sqrt()).abs() < 1e-12);
        // the printed 1.6 is this value rounded
        assert!((l[(1, 1)].re - 1.6).abs() < 1e-3);
    }

    #[test]
    fn diagonal_matrix() {
        let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let s = eig_nonsym(&m).unwrap();
        assert_eq!(s.eigenvalues[0].re, 3.0);
        assert_eq!(s.eigenvalues[1].re, 1.0);
        let eye = CMat::identity(2, 2);
        assert!((&s.right - &eye).camax() < 1e-15);
        assert!((&s.left - &eye).camax() < 1e-15);
    }

    #[test]
    fn jordan_block_is_defective() {
        let m = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(eig_nonsym(&m), Err(Error::Defective { .. })));
    }

    #[test]
    fn repeated_semisimple_root_is_fine() {
        let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, 1.0]));
        let s = eig_nonsym(&m).unwrap();
        assert_eq!(s.flags[0].multiplicity, 2);
        let (a, b) = residuals(&m, &s);
        assert!(a < 1e-14 && b < 1e-14);
    }

    #[test]
    fn rotation_has_conjugate_pair() {
        let m = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let s = eig_nonsym(&m).unwrap();
        assert!((s.eigenvalues[0] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert_eq!(s.conjugate_of(0), 1);
        let (a, b) = residuals(&m, &s);
        assert!(a < 1e-14 && b < 1e-14);
    }

    #[test]
    fn companion_matrix_residuals() {
        // roots 1, 2, 3, 4
        let m = Mat::from_row_slice(
            4,
            4,
            &[10.0, -35.0, 50.0, -24.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        );
        let s = eig_nonsym(&m).unwrap();
        for (k, want) in [4.0, 3.0, 2.0, 1.0].iter().enumerate() {
            assert!((s.eigenvalues[k].re - want).abs() < 1e-10);
        }
        let (a, b) = residuals(&m, &s);
        assert!(a < 1e-10 && b < 1e-10, "{a} {b}");
    }

    #[test]
    fn rejects_non_square_and_nan() {
        assert!(eig_nonsym(&Mat::zeros(2, 3)).is_err());
        let mut m = Mat::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(eig_nonsym(&m), Err(Error::NonFinite { .. })));
    }
}
