//! Hypothesis tests on invariant subspaces of a sample mean matrix.

mod dist;
mod normalized;
mod sample;
mod symmetry;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    commutation, eig_nonsym_with, numerical_rank, orthocomplement_with, psd_pseudoinverse_detailed, vec,
    split_spectrum_with, ConjugateClosure, Mat, RootSelector, SpectralSplit, Tolerances,
};
use crate::perturb::jacobian_bw;

pub use dist::{
    chi2_cdf, chi2_quantile, ks_distance, normal_cdf, normal_quantile, tail_probability, two_sided_normal,
    Reference,
};
pub use normalized::{estimate_d, estimate_d_with, t_test, NormalizedEstimate};
pub use sample::{estimate_from_sample, CovStructure, MatrixSample, SampleAccumulator};
pub use symmetry::{quasi_symmetry_check, symmetric_in_metric, QuasiSymmetry};

/// Levels reported in [`TestReport::reject_at`] unless others are requested.
pub const DEFAULT_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

/// The subspace restriction under test.
#[derive(Debug, Clone)]
pub enum Candidate {
    /// `υ` (p×s). With `s ≥ k` the null is `eig_I M ⊆ span υ`; with `s < k`
    /// it is `span υ ⊆ eig_I M`.
    Span(Mat),
    /// `υ⊥` (p×c) given directly; the null is `υ⊥ᵀ P_I = 0`.
    Annihilator(Mat),
}

#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub candidate: Candidate,
    pub selector: RootSelector,
    pub closure: ConjugateClosure,
}

impl Hypothesis {
    pub fn span(v: Mat, selector: RootSelector) -> Self {
        Hypothesis {
            candidate: Candidate::Span(v),
            selector,
            closure: ConjugateClosure::Strict,
        }
    }

    pub fn annihilator(v_perp: Mat, selector: RootSelector) -> Self {
        Hypothesis {
            candidate: Candidate::Annihilator(v_perp),
            selector,
            closure: ConjugateClosure::Strict,
        }
    }

    pub fn with_closure(mut self, closure: ConjugateClosure) -> Self {
        self.closure = closure;
        self
    }
}

/// How the hypothesis was reduced to a restriction `υ⊥ᵀ P_I = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestForm {
    /// `eig_I ⊆ span υ`, tested with `υ⊥ = orthocomplement(υ)`.
    Containing,
    /// `span υ ⊆ eig_I` with fewer columns than roots, tested on `Mᵀ` as
    /// `υᵀ P_J(Mᵀ) = 0`.
    ContainedDual,
    /// Annihilator supplied by the caller.
    Annihilator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    pub alpha: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub form: Option<TestForm>,
    pub k: usize,
    pub c: usize,
    /// Rank at which the covariance was pseudo-inverted.
    pub rank_used: usize,
    /// Singular-value rank of the statistic's covariance at `1e-8 · σ_max`.
    pub numerical_rank: usize,
    pub smallest_kept_eigenvalue: f64,
    pub largest_discarded_eigenvalue: f64,
    pub eigen_gap: f64,
    /// `σ_max / σ_min` of the full eigenvector basis.
    pub basis_condition: f64,
    /// Largest entry of `L_Iᵀ M R_J`; zero up to rounding.
    pub coupling: f64,
    pub n: usize,
    /// Set when the covariance vanished and the restriction held exactly.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub df: usize,
    pub reference: Reference,
    /// Upper-tail probability for χ²; two-sided for the normal reference.
    pub p_value: f64,
    pub reject_at: Vec<LevelDecision>,
    pub diagnostics: Diagnostics,
}

impl TestReport {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }

    pub fn with_levels(mut self, levels: &[f64]) -> Self {
        self.reject_at = decisions(self.p_value, levels);
        self
    }
}

pub(crate) fn decisions(p_value: f64, levels: &[f64]) -> Vec<LevelDecision> {
    levels
        .iter()
        .map(|&alpha| LevelDecision {
            alpha,
            reject: p_value < alpha,
        })
        .collect()
}

/// Split, annihilator and covariance after reducing the hypothesis.
pub(crate) struct Restriction {
    pub split: SpectralSplit,
    pub v_perp: Mat,
    pub omega: Mat,
    pub form: TestForm,
}

pub(crate) fn reduce(sample: &MatrixSample, hyp: &Hypothesis, tol: &Tolerances) -> Result<Restriction> {
    let p = sample.dim();
    let spectrum = eig_nonsym_with(&sample.m_hat, tol)?;
    let split = split_spectrum_with(&spectrum, &hyp.selector, hyp.closure, tol)?;
    let k = split.k();
    if k == 0 {
        return Err(Error::Selection("the selector picked no roots".into()));
    }
    if k == p {
        return Err(Error::Selection(
            "the selection covers the whole spectrum; the hypothesis holds trivially".into(),
        ));
    }
    let check_rows = |x: &Mat| -> Result<()> {
        if x.nrows() != p {
            return Err(Error::Dimension(format!(
                "candidate has {} rows, matrix dimension is {p}",
                x.nrows()
            )));
        }
        Ok(())
    };
    let (split, v_perp, omega, form) = match &hyp.candidate {
        Candidate::Annihilator(vp) => {
            check_rows(vp)?;
            if vp.ncols() == 0 || numerical_rank(vp, tol.rank_rel) < vp.ncols() {
                return Err(Error::RankDeficient("annihilator is column-rank deficient".into()));
            }
            (split, vp.clone(), sample.omega_hat.clone(), TestForm::Annihilator)
        }
        Candidate::Span(v) => {
            check_rows(v)?;
            let s = v.ncols();
            if s == 0 || s >= p {
                return Err(Error::InvalidArgument(format!(
                    "candidate must have between 1 and {} columns, got {s}",
                    p - 1
                )));
            }
            if s >= k {
                let vp = orthocomplement_with(v, tol)?;
                (split, vp, sample.omega_hat.clone(), TestForm::Containing)
            } else {
                if numerical_rank(v, tol.rank_rel) < s {
                    return Err(Error::RankDeficient("candidate is column-rank deficient".into()));
                }
                let kc = commutation(p, p);
                let omega = &kc * &sample.omega_hat * kc.transpose();
                (split.transposed(), v.clone(), omega, TestForm::ContainedDual)
            }
        }
    };
    if v_perp.ncols() > split.m() {
        return Err(Error::RankDeficient(format!(
            "annihilator has {} columns but only {} roots lie outside the selection",
            v_perp.ncols(),
            split.m()
        )));
    }
    Ok(Restriction {
        split,
        v_perp,
        omega,
        form,
    })
}

fn basis_condition(split: &SpectralSplit) -> f64 {
    let mut r = Mat::zeros(split.dim(), split.k() + split.m());
    r.columns_mut(0, split.k()).copy_from(&split.r_i);
    r.columns_mut(split.k(), split.m()).copy_from(&split.r_j);
    let sv = r.singular_values();
    let smin = sv.min();
    if smin > 0.0 {
        sv.max() / smin
    } else {
        f64::INFINITY
    }
}

/// Wald test of `υ⊥ᵀ P_I(M) = 0`, asymptotically `χ²` with `k·c` degrees of freedom.
pub fn wald_test(sample: &MatrixSample, hyp: &Hypothesis) -> Result<TestReport> {
    wald_test_with(sample, hyp, &Tolerances::default())
}

pub fn wald_test_with(sample: &MatrixSample, hyp: &Hypothesis, tol: &Tolerances) -> Result<TestReport> {
    let r = reduce(sample, hyp, tol)?;
    let (k, c) = (r.split.k(), r.v_perp.ncols());
    let df = k * c;
    let psi = r.v_perp.transpose() * r.split.p_i();
    let bw = jacobian_bw(&r.split, &r.v_perp)?;
    let omega_w = &bw.matrix * &r.omega * bw.matrix.transpose();
    let omega_w = (&omega_w + omega_w.transpose()) * 0.5;

    let mut diagnostics = Diagnostics {
        form: Some(r.form),
        k,
        c,
        rank_used: df,
        numerical_rank: numerical_rank(&omega_w, 1e-8),
        smallest_kept_eigenvalue: 0.0,
        largest_discarded_eigenvalue: 0.0,
        eigen_gap: r.split.gap,
        basis_condition: basis_condition(&r.split),
        coupling: crate::matcore::max_abs(&r.split.coupling()),
        n: sample.n,
        degenerate: false,
    };

    let statistic = if omega_w.amax() == 0.0 {
        let scale = 1.0 + crate::matcore::max_abs(&sample.m_hat);
        if crate::matcore::max_abs(&psi) > 1e-10 * scale {
            return Err(Error::RankDeficient(
                "the statistic's covariance is zero but the restriction does not hold".into(),
            ));
        }
        diagnostics.degenerate = true;
        0.0
    } else {
        let pinv = psd_pseudoinverse_detailed(&omega_w, df, tol)?;
        diagnostics.smallest_kept_eigenvalue = pinv.kept.last().copied().unwrap_or(0.0);
        diagnostics.largest_discarded_eigenvalue = pinv.largest_discarded;
        let x = vec(&psi);
        let q = (x.transpose() * &pinv.inverse * &x)[(0, 0)];
        (sample.n as f64 * q).max(0.0)
    };
    let reference = Reference::ChiSquared { df };
    let p_value = tail_probability(statistic, reference);
    Ok(TestReport {
        statistic,
        df,
        reference,
        p_value,
        reject_at: decisions(p_value, &DEFAULT_LEVELS),
        diagnostics,
    })
}
