//! First- and second-order perturbation of eigenprojections.
//!
//! For a split of `M` into selected roots `I` and remaining roots `J`, the
//! maps here describe how `ψ(M) = υ⊥ᵀ P_I(M)` and the normalized
//! coordinates `D(M) = R_{I,1} R_{I,2}⁻¹` respond to `M → M + E`. The
//! first-order forms are the derivatives at points where `υ⊥ᵀ R_I = 0`,
//! which is where the tests evaluate them.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::split::split_tracking;
use crate::matcore::{
    eig_nonsym_with, kron, split_spectrum_with, vec, ConjugateClosure, Mat, RootSelector,
    SpectralSplit, Tolerances,
};

/// `S(Q) = QΛ_I − Λ_J Q`.
pub fn sylvester_apply(q: &Mat, lambda_i: &Mat, lambda_j: &Mat) -> Mat {
    q * lambda_i - lambda_j * q
}

/// Kronecker form `Λ_Iᵀ ⊗ I_m − I_k ⊗ Λ_J` of the Sylvester operator on `vec Q`.
pub fn sylvester_matrix(lambda_i: &Mat, lambda_j: &Mat) -> Mat {
    let k = lambda_i.nrows();
    let m = lambda_j.nrows();
    kron(&lambda_i.transpose(), &Mat::identity(m, m)) - kron(&Mat::identity(k, k), lambda_j)
}

fn spectral_gap(lambda_i: &Mat, lambda_j: &Mat) -> f64 {
    if lambda_i.is_empty() || lambda_j.is_empty() {
        return f64::INFINITY;
    }
    let ei = lambda_i.complex_eigenvalues();
    let ej = lambda_j.complex_eigenvalues();
    let mut gap = f64::INFINITY;
    for a in ei.iter() {
        for b in ej.iter() {
            gap = gap.min((a - b).norm());
        }
    }
    gap
}

fn sylvester_lu(lambda_i: &Mat, lambda_j: &Mat, tol: &Tolerances) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let gap = spectral_gap(lambda_i, lambda_j);
    if gap <= tol.split_gap {
        return Err(Error::SingularOperator {
            gap,
            threshold: tol.split_gap,
        });
    }
    Ok(sylvester_matrix(lambda_i, lambda_j).lu())
}

/// Solves `QΛ_I − Λ_J Q = C` through the dense Kronecker system.
pub fn sylvester_solve(c: &Mat, lambda_i: &Mat, lambda_j: &Mat) -> Result<Mat> {
    sylvester_solve_with(c, lambda_i, lambda_j, &Tolerances::default())
}

pub fn sylvester_solve_with(c: &Mat, lambda_i: &Mat, lambda_j: &Mat, tol: &Tolerances) -> Result<Mat> {
    let (m, k) = c.shape();
    if lambda_i.shape() != (k, k) || lambda_j.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "Sylvester right-hand side {m}x{k} does not match blocks {:?} and {:?}",
            lambda_i.shape(),
            lambda_j.shape()
        )));
    }
    if m == 0 || k == 0 {
        return Ok(Mat::zeros(m, k));
    }
    let lu = sylvester_lu(lambda_i, lambda_j, tol)?;
    let sol = lu.solve(&vec(c)).ok_or(Error::SingularOperator {
        gap: 0.0,
        threshold: tol.split_gap,
    })?;
    Ok(Mat::from_column_slice(m, k, sol.as_slice()))
}

/// Projections of a perturbation `E = M̂ − M` onto the blocks of a split.
#[derive(Debug, Clone)]
pub struct DeltaBlocks {
    /// `L_Iᵀ E R_I`, k×k.
    pub delta_i: Mat,
    /// `L_Jᵀ E R_I`, m×k.
    pub delta_ij: Mat,
    /// `L_Jᵀ E R_J`, m×m.
    pub delta_j: Mat,
}

pub fn delta_blocks(m_hat: &Mat, m: &Mat, split: &SpectralSplit) -> DeltaBlocks {
    blocks_of(&(m_hat - m), split)
}

fn blocks_of(e: &Mat, split: &SpectralSplit) -> DeltaBlocks {
    let er_i = e * &split.r_i;
    DeltaBlocks {
        delta_i: split.l_i.transpose() * &er_i,
        delta_ij: split.l_j.transpose() * &er_i,
        delta_j: split.l_j.transpose() * e * &split.r_j,
    }
}

/// `υ⊥ᵀ P_I(M̂)` using the roots of `M̂` picked by `sel`.
pub fn psi(m_hat: &Mat, v_perp: &Mat, sel: &RootSelector) -> Result<Mat> {
    let tol = Tolerances::default();
    let s = eig_nonsym_with(m_hat, &tol)?;
    let split = split_spectrum_with(&s, sel, ConjugateClosure::Strict, &tol)?;
    check_v_perp(v_perp, split.dim())?;
    Ok(v_perp.transpose() * split.p_i())
}

/// `υ⊥ᵀ P_I(M̂)` where the selected roots of `M̂` are those nearest the
/// selected roots of `reference`.
pub fn psi_tracking(m_hat: &Mat, v_perp: &Mat, reference: &SpectralSplit) -> Result<Mat> {
    let split = tracked_split(m_hat, reference)?;
    check_v_perp(v_perp, split.dim())?;
    Ok(v_perp.transpose() * split.p_i())
}

/// `υ⊥ᵀ R_I R_{I,2}⁻¹`; equals `D(M) − D` for `υ⊥ = [I; −Dᵀ]`. Independent of
/// the basis chosen for the invariant subspace.
pub fn psi_d(split: &SpectralSplit, v_perp: &Mat) -> Result<Mat> {
    check_v_perp(v_perp, split.dim())?;
    let inv = bottom_block_inverse(&split.r_i)?;
    Ok(v_perp.transpose() * &split.r_i * inv)
}

pub fn psi_d_tracking(m_hat: &Mat, v_perp: &Mat, reference: &SpectralSplit) -> Result<Mat> {
    psi_d(&tracked_split(m_hat, reference)?, v_perp)
}

fn tracked_split(m_hat: &Mat, reference: &SpectralSplit) -> Result<SpectralSplit> {
    let tol = Tolerances::default();
    let s = eig_nonsym_with(m_hat, &tol)?;
    split_tracking(&s, &reference.eigenvalues_i, &tol)
}

/// Inverse of the bottom `k×k` block of a `p×k` basis.
pub(crate) fn bottom_block_inverse(r_i: &Mat) -> Result<Mat> {
    let (p, k) = r_i.shape();
    let block = r_i.rows(p - k, k).into_owned();
    let sv = block.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond < 1e12) {
        return Err(Error::SingularNormalization { condition: cond });
    }
    block
        .try_inverse()
        .ok_or(Error::SingularNormalization { condition: cond })
}

fn check_v_perp(v_perp: &Mat, p: usize) -> Result<()> {
    if v_perp.nrows() != p {
        return Err(Error::Dimension(format!(
            "annihilator has {} rows, matrix dimension is {p}",
            v_perp.nrows()
        )));
    }
    Ok(())
}

fn check_e(e: &Mat, split: &SpectralSplit) -> Result<()> {
    let p = split.dim();
    if e.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "perturbation is {}x{}, expected {p}x{p}",
            e.nrows(),
            e.ncols()
        )));
    }
    Ok(())
}

/// First-order term `υ⊥ᵀ R_J S⁻¹(L_Jᵀ E R_I) L_Iᵀ`.
pub fn psi_dot(e: &Mat, split: &SpectralSplit, v_perp: &Mat) -> Result<Mat> {
    check_e(e, split)?;
    check_v_perp(v_perp, split.dim())?;
    let b = blocks_of(e, split);
    let v = sylvester_solve(&b.delta_ij, &split.lambda_i, &split.lambda_j)?;
    Ok(v_perp.transpose() * &split.r_j * v * split.l_i.transpose())
}

/// Second derivative, so that `ψ(M+tE) = ψ(M) + tψ̇ + (t²/2)ψ̈ + O(t³)`.
///
/// With `V = S⁻¹(Δ_IJ)`, `W = S⁻¹(Δ_J V − V Δ_I − V A_IJ V)` and `G` solving
/// `Λ_I G − G Λ_J = L_Iᵀ E R_J`, returns `2 υ⊥ᵀ R_J (W L_Iᵀ + V G L_Jᵀ)`.
/// The second term is the rotation of the left subspace.
pub fn psi_ddot(e: &Mat, split: &SpectralSplit, v_perp: &Mat) -> Result<Mat> {
    check_e(e, split)?;
    check_v_perp(v_perp, split.dim())?;
    let b = blocks_of(e, split);
    let v = sylvester_solve(&b.delta_ij, &split.lambda_i, &split.lambda_j)?;
    let a_ij = split.coupling();
    let rhs = &b.delta_j * &v - &v * &b.delta_i - &v * a_ij * &v;
    let w = sylvester_solve(&rhs, &split.lambda_i, &split.lambda_j)?;
    // Λ_I G − G Λ_J = C  ⇔  Gᵀ Λ_Iᵀ − Λ_Jᵀ Gᵀ = Cᵀ
    let c = split.l_i.transpose() * e * &split.r_j;
    let g = sylvester_solve(
        &c.transpose(),
        &split.lambda_i.transpose(),
        &split.lambda_j.transpose(),
    )?
    .transpose();
    let inner = w * split.l_i.transpose() + &v * g * split.l_j.transpose();
    Ok(v_perp.transpose() * &split.r_j * inner * 2.0)
}

/// Which map a Jacobian differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianKind {
    /// `vec(υ⊥ᵀ P_I)`, rows `c·p`.
    Projection,
    /// `vec(υ⊥ᵀ R_I R_{I,2}⁻¹)`, rows `c·k`.
    Normalized,
}

/// Jacobian with respect to `vec M`.
#[derive(Debug, Clone)]
pub struct Jacobian {
    pub matrix: Mat,
    pub kind: JacobianKind,
    /// Shape of the differentiated matrix-valued map.
    pub out_shape: (usize, usize),
}

impl Jacobian {
    pub fn rank(&self, rel: f64) -> usize {
        crate::matcore::numerical_rank(&self.matrix, rel)
    }

    pub fn to_csv(&self) -> String {
        crate::matcore::io::to_csv(&self.matrix)
    }

    /// Applies the Jacobian to `vec E`.
    pub fn apply(&self, e: &Mat) -> Mat {
        let out = &self.matrix * vec(e);
        Mat::from_column_slice(self.out_shape.0, self.out_shape.1, out.as_slice())
    }
}

/// `K⁻¹ (R_Iᵀ ⊗ L_Jᵀ)`: maps `vec E` to `vec V`.
fn inner_factor(split: &SpectralSplit) -> Result<Mat> {
    let tol = Tolerances::default();
    let right = kron(&split.r_i.transpose(), &split.l_j.transpose());
    if split.m() == 0 || split.k() == 0 {
        return Ok(right);
    }
    let lu = sylvester_lu(&split.lambda_i, &split.lambda_j, &tol)?;
    lu.solve(&right).ok_or(Error::SingularOperator {
        gap: 0.0,
        threshold: tol.split_gap,
    })
}

/// `B_W = (L_I ⊗ υ⊥ᵀR_J) K⁻¹ (R_Iᵀ ⊗ L_Jᵀ)`, so `vec ψ̇(E) = B_W vec E`.
pub fn jacobian_bw(split: &SpectralSplit, v_perp: &Mat) -> Result<Jacobian> {
    check_v_perp(v_perp, split.dim())?;
    let left = kron(&split.l_i, &(v_perp.transpose() * &split.r_j));
    Ok(Jacobian {
        matrix: left * inner_factor(split)?,
        kind: JacobianKind::Projection,
        out_shape: (v_perp.ncols(), split.dim()),
    })
}

/// `B_A = (R_{I,2}⁻ᵀ ⊗ υ⊥ᵀR_J) K⁻¹ (R_Iᵀ ⊗ L_Jᵀ)`, the Jacobian of
/// [`psi_d`].
pub fn jacobian_ba(split: &SpectralSplit, v_perp: &Mat) -> Result<Jacobian> {
    check_v_perp(v_perp, split.dim())?;
    let inv = bottom_block_inverse(&split.r_i)?;
    let left = kron(&inv.transpose(), &(v_perp.transpose() * &split.r_j));
    Ok(Jacobian {
        matrix: left * inner_factor(split)?,
        kind: JacobianKind::Normalized,
        out_shape: (v_perp.ncols(), split.k()),
    })
}

/// Central-difference Jacobian over the `p²` unit perturbations.
///
/// Perturbed decompositions keep the roots nearest the reference selection.
/// Both maps are invariant to the basis of the invariant subspace, so no
/// eigenvector sign alignment is needed.
pub fn fd_jacobian(
    m: &Mat,
    v_perp: &Mat,
    sel: &RootSelector,
    eps: f64,
    kind: JacobianKind,
) -> Result<Jacobian> {
    if !(1e-8..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {eps:e} outside [1e-8, 1e-3]"
        )));
    }
    let tol = Tolerances::default();
    let s = eig_nonsym_with(m, &tol)?;
    let reference = split_spectrum_with(&s, sel, ConjugateClosure::Strict, &tol)?;
    let p = m.nrows();
    check_v_perp(v_perp, p)?;
    let eval = |x: &Mat| -> Result<Mat> {
        match kind {
            JacobianKind::Projection => psi_tracking(x, v_perp, &reference),
            JacobianKind::Normalized => psi_d_tracking(x, v_perp, &reference),
        }
    };
    let columns: Vec<DVector<f64>> = (0..p * p)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % p, idx / p);
            let mut plus = m.clone();
            let mut minus = m.clone();
            plus[(i, j)] += eps;
            minus[(i, j)] -= eps;
            let d = (eval(&plus)? - eval(&minus)?) / (2.0 * eps);
            Ok(vec(&d))
        })
        .collect::<Result<_>>()?;
    let out_shape = match kind {
        JacobianKind::Projection => (v_perp.ncols(), p),
        JacobianKind::Normalized => (v_perp.ncols(), reference.k()),
    };
    Ok(Jacobian {
        matrix: Mat::from_columns(&columns),
        kind,
        out_shape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{eig_nonsym, orthocomplement, split_spectrum};

    fn example2() -> SpectralSplit {
        let m = Mat::from_row_slice(2, 2, &[0.8, 0.5, 0.0, 0.4]);
        split_spectrum(&eig_nonsym(&m).unwrap(), &RootSelector::Indices(vec![0])).unwrap()
    }

    #[test]
    fn sylvester_scalar_cases() {
        let li = Mat::from_element(1, 1, 0.8);
        let lj = Mat::from_element(1, 1, 0.4);
        let q = Mat::from_element(1, 1, 1.0);
        assert!((sylvester_apply(&q, &li, &lj)[(0, 0)] - 0.4).abs() < 1e-15);
        assert!((sylvester_solve(&q, &li, &lj).unwrap()[(0, 0)] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn sylvester_identity_cases() {
        let q = Mat::from_row_slice(3, 2, &[1.0, -2.0, 0.5, 3.0, 4.0, -1.0]);
        let li = Mat::identity(2, 2);
        let lj = Mat::zeros(3, 3);
        assert_eq!(sylvester_apply(&q, &li, &lj), q);
        let sol = sylvester_solve(&q, &(li * 2.0), &Mat::identity(3, 3)).unwrap();
        assert!((sol - &q).amax() < 1e-14);
    }

    #[test]
    fn sylvester_entrywise_and_round_trip() {
        let li = Mat::from_diagonal(&DVector::from_vec(vec![1.5, -0.3]));
        let lj = Mat::from_diagonal(&DVector::from_vec(vec![0.2, 0.9, -1.1]));
        let q = Mat::from_row_slice(3, 2, &[0.3, -1.0, 2.0, 0.7, -0.4, 1.2]);
        let s = sylvester_apply(&q, &li, &lj);
        for i in 0..3 {
            for j in 0..2 {
                let want = q[(i, j)] * (li[(j, j)] - lj[(i, i)]);
                assert!((s[(i, j)] - want).abs() < 1e-15);
            }
        }
        let back = sylvester_solve(&s, &li, &lj).unwrap();
        assert!((back - q).amax() < 1e-12);
    }

    #[test]
    fn sylvester_singular() {
        let li = Mat::from_element(1, 1, 0.5);
        let lj = Mat::from_diagonal(&DVector::from_vec(vec![0.5, 0.1]));
        assert!(matches!(
            sylvester_solve(&Mat::zeros(2, 1), &li, &lj),
            Err(Error::SingularOperator { .. })
        ));
    }

    #[test]
    fn delta_blocks_example() {
        let sp = example2();
        let m = sp.reconstruct();
        let e = Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.1, 0.0]);
        let b = delta_blocks(&(&m + &e), &m, &sp);
        // (0, 1.6008)·E·(1, 0)ᵀ; the printed 0.16 uses the rounded left vector
        assert!((b.delta_ij[(0, 0)] - 0.1 * 2.5625f64.sqrt()).abs() < 1e-12);
        assert!((b.delta_ij[(0, 0)] - 0.16).abs() < 1e-3);
        let z = delta_blocks(&m, &m, &sp);
        assert_eq!(z.delta_i.amax() + z.delta_ij.amax() + z.delta_j.amax(), 0.0);
    }

    #[test]
    fn delta_blocks_of_cross_perturbation() {
        let sp = example2();
        let x = Mat::from_element(1, 1, 0.37);
        let e = &sp.r_j * &x * sp.l_i.transpose();
        let b = blocks_of(&e, &sp);
        assert!((b.delta_ij[(0, 0)] - 0.37).abs() < 1e-12);
        assert!(b.delta_i.amax() < 1e-12 && b.delta_j.amax() < 1e-12);
    }

    #[test]
    fn psi_example_values() {
        let m = Mat::from_row_slice(2, 2, &[0.8, 0.5, 0.0, 0.4]);
        let sel = RootSelector::Indices(vec![0]);
        let e2 = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(psi(&m, &e2, &sel).unwrap().amax() < 1e-12);
        let e1 = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let val = psi(&m, &e1, &sel).unwrap();
        assert!((val[(0, 0)] - 1.0).abs() < 1e-12 && (val[(0, 1)] - 1.25).abs() < 1e-12);
        let all = psi(&m, &Mat::identity(2, 2), &RootSelector::Largest(2)).unwrap();
        assert!((all - Mat::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn psi_dot_matches_bw_on_example() {
        let sp = example2();
        let vp = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let bw = jacobian_bw(&sp, &vp).unwrap();
        for t in 0..10 {
            let e = Mat::from_fn(2, 2, |i, j| ((t * 7 + i * 3 + j * 5) % 11) as f64 / 11.0 - 0.45);
            let direct = psi_dot(&e, &sp, &vp).unwrap();
            assert!((bw.apply(&e) - direct).amax() < 1e-12);
        }
        let zero = jacobian_bw(&sp, &Mat::zeros(2, 1)).unwrap();
        assert_eq!(zero.matrix.amax(), 0.0);
    }

    #[test]
    fn derivatives_of_zero_vanish() {
        let sp = example2();
        let vp = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        let z = Mat::zeros(2, 2);
        assert_eq!(psi_dot(&z, &sp, &vp).unwrap().amax(), 0.0);
        assert_eq!(psi_ddot(&z, &sp, &vp).unwrap().amax(), 0.0);
        let ba = jacobian_ba(&sp, &vp);
        // the selected eigenvector e₁ has a zero bottom entry
        assert!(matches!(ba, Err(Error::SingularNormalization { .. })));
    }

    #[test]
    fn ba_on_diagonal_matrix() {
        // M = diag(0.5, 2), selected root 2 with eigenvector e₂: D = 0.
        // Perturbing the (0,1) entry by e moves the eigenvector to (e/1.5, 1).
        let m = Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]);
        let sp = split_spectrum(&eig_nonsym(&m).unwrap(), &RootSelector::Largest(1)).unwrap();
        let vp = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let ba = jacobian_ba(&sp, &vp).unwrap();
        let e = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!((ba.apply(&e)[(0, 0)] - 1.0 / 1.5).abs() < 1e-12);
        let e = Mat::from_row_slice(2, 2, &[0.3, 0.0, 0.7, -0.2]);
        assert!(ba.apply(&e).amax() < 1e-12);
    }

    #[test]
    fn fd_agrees_with_bw_on_null_instance() {
        let m = Mat::from_row_slice(
            3,
            3,
            &[1.2, 0.3, -0.1, 0.2, 0.5, 0.4, -0.3, 0.1, -0.6],
        );
        let sel = RootSelector::Largest(1);
        let sp = split_spectrum(&eig_nonsym(&m).unwrap(), &sel).unwrap();
        let vp = orthocomplement(&sp.r_i).unwrap();
        let bw = jacobian_bw(&sp, &vp).unwrap();
        let fd = fd_jacobian(&m, &vp, &sel, 1e-5, JacobianKind::Projection).unwrap();
        assert!((&bw.matrix - &fd.matrix).amax() < 1e-6);
        let fd4 = fd_jacobian(&m, &vp, &sel, 1e-4, JacobianKind::Projection).unwrap();
        let fd6 = fd_jacobian(&m, &vp, &sel, 1e-6, JacobianKind::Projection).unwrap();
        assert!((fd4.matrix - fd6.matrix).amax() < 1e-4);
        assert!(fd_jacobian(&m, &vp, &sel, 1e-2, JacobianKind::Projection).is_err());
    }

    #[test]
    fn commuting_perturbation_has_no_effect() {
        let m = Mat::from_row_slice(2, 2, &[0.8, 0.5, 0.0, 0.4]);
        let sp = example2();
        let vp = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        // any polynomial in M shares its eigenprojections
        let e = &m * &m - &m * 0.3;
        assert!(psi_dot(&e, &sp, &vp).unwrap().amax() < 1e-12);
    }

    #[test]
    fn coupling_block_vanishes() {
        let sp = example2();
        assert!(sp.coupling().amax() < 1e-10);
    }
}
