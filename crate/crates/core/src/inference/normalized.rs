use num_complex::Complex64;

use super::{decisions, two_sided_normal, MatrixSample, Reference, TestReport, DEFAULT_LEVELS};
use crate::error::{Error, Result};
use crate::inference::Diagnostics;
use crate::matcore::{eig_nonsym_with, split_spectrum_with, ConjugateClosure, Mat, RootSelector, Tolerances};
use crate::perturb::{bottom_block_inverse, jacobian_ba};

/// Coordinates `D̂` with `[D̂; I_k]` spanning the selected invariant subspace.
#[derive(Debug, Clone)]
pub struct NormalizedEstimate {
    /// `(p−k) × k`.
    pub d_hat: Mat,
    /// Covariance of `vec D̂` (column-stacked), per observation.
    pub omega_d: Mat,
    pub n: usize,
    pub eigenvalues: Vec<Complex64>,
}

impl NormalizedEstimate {
    pub fn k(&self) -> usize {
        self.d_hat.ncols()
    }

    /// Standard error of `d̂_ij`, i.e. `sqrt(Ω̂_D[idx, idx] / n)`.
    pub fn variance(&self, i: usize, j: usize) -> f64 {
        let idx = j * self.d_hat.nrows() + i;
        self.omega_d[(idx, idx)] / self.n as f64
    }
}

pub fn estimate_d(sample: &MatrixSample, sel: &RootSelector) -> Result<NormalizedEstimate> {
    estimate_d_with(sample, sel, ConjugateClosure::Strict, &Tolerances::default())
}

pub fn estimate_d_with(
    sample: &MatrixSample,
    sel: &RootSelector,
    closure: ConjugateClosure,
    tol: &Tolerances,
) -> Result<NormalizedEstimate> {
    let p = sample.dim();
    let s = eig_nonsym_with(&sample.m_hat, tol)?;
    let split = split_spectrum_with(&s, sel, closure, tol)?;
    let k = split.k();
    if k == 0 || k == p {
        return Err(Error::Selection(format!(
            "normalization needs between 1 and {} selected roots, got {k}",
            p - 1
        )));
    }
    let inv = bottom_block_inverse(&split.r_i)?;
    let d_hat = split.r_i.rows(0, p - k) * inv;
    let mut v_perp = Mat::zeros(p, p - k);
    v_perp.view_mut((0, 0), (p - k, p - k)).fill_with_identity();
    v_perp.view_mut((p - k, 0), (k, p - k)).copy_from(&(-d_hat.transpose()));
    let ba = jacobian_ba(&split, &v_perp)?;
    let omega_d = &ba.matrix * &sample.omega_hat * ba.matrix.transpose();
    Ok(NormalizedEstimate {
        d_hat,
        omega_d: (&omega_d + omega_d.transpose()) * 0.5,
        n: sample.n,
        eigenvalues: split.eigenvalues_i,
    })
}

/// Two-sided normal test of `d_ij = d0`.
pub fn t_test(est: &NormalizedEstimate, i: usize, j: usize, d0: f64) -> Result<TestReport> {
    let (rows, cols) = est.d_hat.shape();
    if i >= rows || j >= cols {
        return Err(Error::InvalidArgument(format!(
            "coefficient ({i}, {j}) outside a {rows}x{cols} coordinate matrix"
        )));
    }
    let var = est.variance(i, j);
    if !(var > 0.0) {
        return Err(Error::NonPositiveVariance {
            row: i,
            col: j,
            variance: var,
        });
    }
    let statistic = (est.d_hat[(i, j)] - d0) / var.sqrt();
    let p_value = two_sided_normal(statistic);
    Ok(TestReport {
        statistic,
        df: 1,
        reference: Reference::StandardNormal,
        p_value,
        reject_at: decisions(p_value, &DEFAULT_LEVELS),
        diagnostics: Diagnostics {
            form: None,
            k: cols,
            c: rows,
            rank_used: 1,
            numerical_rank: 1,
            smallest_kept_eigenvalue: var,
            largest_discarded_eigenvalue: 0.0,
            eigen_gap: f64::NAN,
            basis_condition: f64::NAN,
            coupling: 0.0,
            n: est.n,
            degenerate: false,
        },
    })
}
