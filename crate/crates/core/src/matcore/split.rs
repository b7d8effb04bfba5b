use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::format_root;
use super::{Mat, Spectrum, Tolerances};
use crate::error::{Error, Result};

/// Region of the complex plane used by [`RootSelector::Region`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    ModulusAbove(f64),
    ModulusBelow(f64),
    RealAbove(f64),
}

impl Region {
    fn contains(&self, z: Complex64) -> bool {
        match *self {
            Region::ModulusAbove(t) => z.norm() > t,
            Region::ModulusBelow(t) => z.norm() < t,
            Region::RealAbove(t) => z.re > t,
        }
    }
}

/// Identifies the root set of interest within a [`Spectrum`].
///
/// Indices refer to the deterministic root order of the spectrum and are
/// zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootSelector {
    Indices(Vec<usize>),
    Largest(usize),
    Region(Region),
}

/// What to do when a selection contains one member of a conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConjugateClosure {
    /// Fail with [`Error::ConjugationSplit`].
    Strict,
    /// Pull in the missing partner.
    Complete,
}

impl RootSelector {
    /// Parses `largest:k`, `indices:1,3` (one-based) or `modulus>0.9`,
    /// `modulus<0.5`, `real>0`.
    pub fn parse(text: &str) -> Result<RootSelector> {
        let t = text.trim();
        let bad = || Error::Selection(format!("cannot parse selector '{t}'"));
        if let Some(rest) = t.strip_prefix("largest:") {
            let k: usize = rest.trim().parse().map_err(|_| bad())?;
            return Ok(RootSelector::Largest(k));
        }
        if let Some(rest) = t.strip_prefix("indices:") {
            let mut idx = Vec::new();
            for part in rest.split(',') {
                let i: usize = part.trim().parse().map_err(|_| bad())?;
                if i == 0 {
                    return Err(Error::Selection("selector indices are one-based".into()));
                }
                idx.push(i - 1);
            }
            return Ok(RootSelector::Indices(idx));
        }
        for (prefix, make) in [
            ("modulus>", Region::ModulusAbove as fn(f64) -> Region),
            ("modulus<", Region::ModulusBelow),
            ("real>", Region::RealAbove),
        ] {
            if let Some(rest) = t.strip_prefix(prefix) {
                let v: f64 = rest.trim().parse().map_err(|_| bad())?;
                return Ok(RootSelector::Region(make(v)));
            }
        }
        Err(bad())
    }

    /// Sorted indices of the selected roots.
    pub fn resolve(&self, s: &Spectrum, closure: ConjugateClosure) -> Result<Vec<usize>> {
        let p = s.dim();
        let mut idx: Vec<usize> = match self {
            RootSelector::Indices(v) => {
                if let Some(&bad) = v.iter().find(|&&i| i >= p) {
                    return Err(Error::Selection(format!(
                        "root index {bad} out of range for {p} roots"
                    )));
                }
                v.clone()
            }
            RootSelector::Largest(k) => {
                if *k > p {
                    return Err(Error::Selection(format!(
                        "cannot select {k} roots out of {p}"
                    )));
                }
                (0..*k).collect()
            }
            RootSelector::Region(r) => (0..p).filter(|&i| r.contains(s.eigenvalues[i])).collect(),
        };
        idx.sort_unstable();
        idx.dedup();
        close_under_conjugation(s, idx, closure)
    }
}

fn close_under_conjugation(
    s: &Spectrum,
    mut idx: Vec<usize>,
    closure: ConjugateClosure,
) -> Result<Vec<usize>> {
    let mut extra = Vec::new();
    for &i in &idx {
        let j = s.conjugate_of(i);
        if j != i && !idx.contains(&j) {
            match closure {
                ConjugateClosure::Strict => {
                    return Err(Error::ConjugationSplit {
                        eigenvalue: format_root(s.eigenvalues[i]),
                    })
                }
                ConjugateClosure::Complete => extra.push(j),
            }
        }
    }
    idx.extend(extra);
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

/// Real bases of the invariant subspaces for the selected (`I`) and
/// remaining (`J`) roots.
///
/// A conjugate pair `a ± bi` with eigenvector `x + iy` of `a + bi`
/// contributes right columns `[x, -y]`, left columns `[2u, 2w]` (with
/// `u + iw` the left vector) and the block `[[a, -b], [b, a]]`.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub r_i: Mat,
    pub l_i: Mat,
    pub lambda_i: Mat,
    pub r_j: Mat,
    pub l_j: Mat,
    pub lambda_j: Mat,
    /// Indices (into the spectrum) of the selected roots.
    pub selected: Vec<usize>,
    pub eigenvalues_i: Vec<Complex64>,
    pub eigenvalues_j: Vec<Complex64>,
    /// Minimum distance between the two root sets (infinite if `J` is empty).
    pub gap: f64,
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.r_i.nrows()
    }

    pub fn k(&self) -> usize {
        self.r_i.ncols()
    }

    pub fn m(&self) -> usize {
        self.r_j.ncols()
    }

    /// Skew projector `R_I L_Iᵀ` onto the selected invariant subspace.
    pub fn p_i(&self) -> Mat {
        &self.r_i * self.l_i.transpose()
    }

    pub fn p_j(&self) -> Mat {
        &self.r_j * self.l_j.transpose()
    }

    /// `R_I Λ_I L_Iᵀ + R_J Λ_J L_Jᵀ`.
    pub fn reconstruct(&self) -> Mat {
        &self.r_i * &self.lambda_i * self.l_i.transpose()
            + &self.r_j * &self.lambda_j * self.l_j.transpose()
    }

    /// The split of `Mᵀ` whose selected roots are the unselected roots of `M`.
    ///
    /// Left and right bases trade places and the real blocks are transposed.
    pub fn transposed(&self) -> SpectralSplit {
        SpectralSplit {
            r_i: self.l_j.clone(),
            l_i: self.r_j.clone(),
            lambda_i: self.lambda_j.transpose(),
            r_j: self.l_i.clone(),
            l_j: self.r_i.clone(),
            lambda_j: self.lambda_i.transpose(),
            selected: Vec::new(),
            eigenvalues_i: self.eigenvalues_j.clone(),
            eigenvalues_j: self.eigenvalues_i.clone(),
            gap: self.gap,
        }
    }

    /// Coupling block `L_Iᵀ M R_J` of the reconstructed matrix.
    pub fn coupling(&self) -> Mat {
        self.l_i.transpose() * self.reconstruct() * &self.r_j
    }
}

pub fn split_spectrum(s: &Spectrum, sel: &RootSelector) -> Result<SpectralSplit> {
    split_spectrum_with(s, sel, ConjugateClosure::Strict, &Tolerances::default())
}

pub fn split_spectrum_with(
    s: &Spectrum,
    sel: &RootSelector,
    closure: ConjugateClosure,
    tol: &Tolerances,
) -> Result<SpectralSplit> {
    let idx = sel.resolve(s, closure)?;
    split_by_indices(s, &idx, tol)
}

/// Split on the roots of `s` nearest to `reference` (one root per entry).
pub fn split_tracking(s: &Spectrum, reference: &[Complex64], tol: &Tolerances) -> Result<SpectralSplit> {
    let p = s.dim();
    if reference.len() > p {
        return Err(Error::Selection("more reference roots than roots".into()));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(reference.len() * p);
    for (a, z) in reference.iter().enumerate() {
        for b in 0..p {
            pairs.push(((s.eigenvalues[b] - z).norm(), a, b));
        }
    }
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut used_ref = vec![false; reference.len()];
    let mut used_root = vec![false; p];
    let mut idx = Vec::with_capacity(reference.len());
    for (_, a, b) in pairs {
        if !used_ref[a] && !used_root[b] {
            used_ref[a] = true;
            used_root[b] = true;
            idx.push(b);
        }
    }
    idx.sort_unstable();
    let idx = close_under_conjugation(s, idx, ConjugateClosure::Strict)?;
    split_by_indices(s, &idx, tol)
}

pub fn split_by_indices(s: &Spectrum, idx: &[usize], tol: &Tolerances) -> Result<SpectralSplit> {
    let p = s.dim();
    let rest: Vec<usize> = (0..p).filter(|i| !idx.contains(i)).collect();

    let eig_i: Vec<Complex64> = idx.iter().map(|&i| s.eigenvalues[i]).collect();
    let eig_j: Vec<Complex64> = rest.iter().map(|&i| s.eigenvalues[i]).collect();
    let mut gap = f64::INFINITY;
    for a in &eig_i {
        for b in &eig_j {
            gap = gap.min((a - b).norm());
        }
    }
    if gap < tol.split_gap {
        return Err(Error::SpectralOverlap {
            gap,
            threshold: tol.split_gap,
        });
    }

    let (r_i, l_i, lambda_i) = real_basis(s, idx);
    let (r_j, l_j, lambda_j) = real_basis(s, &rest);
    Ok(SpectralSplit {
        r_i,
        l_i,
        lambda_i,
        r_j,
        l_j,
        lambda_j,
        selected: idx.to_vec(),
        eigenvalues_i: eig_i,
        eigenvalues_j: eig_j,
        gap,
    })
}

fn real_basis(s: &Spectrum, idx: &[usize]) -> (Mat, Mat, Mat) {
    let p = s.dim();
    let k = idx.len();
    let mut r = Mat::zeros(p, k);
    let mut l = Mat::zeros(p, k);
    let mut lam = Mat::zeros(k, k);
    let mut col = 0;
    for &i in idx {
        let z = s.eigenvalues[i];
        if z.im == 0.0 {
            for row in 0..p {
                r[(row, col)] = s.right[(row, i)].re;
                l[(row, col)] = s.left[(row, i)].re;
            }
            lam[(col, col)] = z.re;
            col += 1;
        } else if z.im > 0.0 {
            for row in 0..p {
                let v = s.right[(row, i)];
                let w = s.left[(row, i)];
                r[(row, col)] = v.re;
                r[(row, col + 1)] = -v.im;
                l[(row, col)] = 2.0 * w.re;
                l[(row, col + 1)] = 2.0 * w.im;
            }
            lam[(col, col)] = z.re;
            lam[(col, col + 1)] = -z.im;
            lam[(col + 1, col)] = z.im;
            lam[(col + 1, col + 1)] = z.re;
            col += 2;
        }
    }
    (r, l, lam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::eig_nonsym;

    fn example2() -> Mat {
        Mat::from_row_slice(2, 2, &[0.8, 0.5, 0.0, 0.4])
    }

    #[test]
    fn worked_example_split() {
        let s = eig_nonsym(&example2()).unwrap();
        let sp = split_spectrum(&s, &RootSelector::Indices(vec![0])).unwrap();
        assert!((sp.r_i[(0, 0)] - 1.0).abs() < 1e-12 && sp.r_i[(1, 0)].abs() < 1e-12);
        assert!((sp.l_i[(0, 0)] - 1.0).abs() < 1e-12 && (sp.l_i[(1, 0)] - 1.25).abs() < 1e-12);
        assert!((sp.lambda_i[(0, 0)] - 0.8).abs() < 1e-14);
        assert!((sp.r_j[(0, 0)] / sp.r_j[(1, 0)] + 1.25).abs() < 1e-12);
        assert!(sp.l_j[(0, 0)].abs() < 1e-12 && (sp.l_j[(1, 0)] - 2.5625f64.sqrt()).abs() < 1e-12);
        let p1 = Mat::from_row_slice(2, 2, &[1.0, 1.25, 0.0, 0.0]);
        let p2 = Mat::from_row_slice(2, 2, &[0.0, -1.25, 0.0, 1.0]);
        assert!((sp.p_i() - p1).amax() < 1e-12);
        assert!((sp.p_j() - p2).amax() < 1e-12);
    }

    #[test]
    fn rotation_whole_space() {
        let m = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let s = eig_nonsym(&m).unwrap();
        let sp = split_spectrum(&s, &RootSelector::Largest(2)).unwrap();
        assert_eq!(sp.m(), 0);
        assert!((&sp.lambda_i - &m).amax() < 1e-14);
        assert!((sp.p_i() - Mat::identity(2, 2)).amax() < 1e-14);
        assert!((sp.reconstruct() - &m).amax() < 1e-14);
    }

    #[test]
    fn conjugation_split_is_rejected_or_completed() {
        let m = Mat::from_row_slice(3, 3, &[0.0, -2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let s = eig_nonsym(&m).unwrap();
        assert!(matches!(
            split_spectrum(&s, &RootSelector::Largest(1)),
            Err(Error::ConjugationSplit { .. })
        ));
        let sp = split_spectrum_with(
            &s,
            &RootSelector::Largest(1),
            ConjugateClosure::Complete,
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(sp.k(), 2);
        assert!((sp.reconstruct() - &m).amax() < 1e-13);
        assert!((sp.l_i.transpose() * &sp.r_i - Mat::identity(2, 2)).amax() < 1e-13);
    }

    #[test]
    fn overlap_is_rejected() {
        let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, 1.0]));
        let s = eig_nonsym(&m).unwrap();
        assert!(matches!(
            split_spectrum(&s, &RootSelector::Largest(1)),
            Err(Error::SpectralOverlap { .. })
        ));
        assert!(split_spectrum(&s, &RootSelector::Largest(2)).is_ok());
    }

    #[test]
    fn transposed_split_decomposes_transpose() {
        let m = Mat::from_row_slice(3, 3, &[0.9, 0.2, -0.1, 0.3, 0.1, 0.4, 0.0, -0.5, -0.6]);
        let s = eig_nonsym(&m).unwrap();
        let sp = split_spectrum(&s, &RootSelector::Largest(1)).unwrap().transposed();
        let mt = m.transpose();
        assert!((&mt * &sp.r_i - &sp.r_i * &sp.lambda_i).amax() < 1e-12);
        assert!((sp.l_i.transpose() * &sp.r_i - Mat::identity(2, 2)).amax() < 1e-12);
        assert!((sp.reconstruct() - mt).amax() < 1e-12);
    }

    #[test]
    fn selector_grammar() {
        assert_eq!(RootSelector::parse("largest:2").unwrap(), RootSelector::Largest(2));
        assert_eq!(
            RootSelector::parse("indices:1,3").unwrap(),
            RootSelector::Indices(vec![0, 2])
        );
        assert_eq!(
            RootSelector::parse("modulus>0.9").unwrap(),
            RootSelector::Region(Region::ModulusAbove(0.9))
        );
        assert!(RootSelector::parse("indices:0").is_err());
        assert!(RootSelector::parse("biggest").is_err());
    }

    #[test]
    fn tracking_follows_reference_roots() {
        let s = eig_nonsym(&example2()).unwrap();
        let sp = split_tracking(&s, &[Complex64::new(0.41, 0.0)], &Tolerances::default()).unwrap();
        assert_eq!(sp.selected, vec![1]);
    }
}
