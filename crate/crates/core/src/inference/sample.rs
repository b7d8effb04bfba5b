use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{check_finite, kron, vec, Mat};

/// Structure imposed on the covariance of `vec M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovStructure {
    /// Unrestricted `p² × p²` sample covariance.
    #[default]
    Full,
    /// `I_p ⊗ Ω_M`: columns iid with a common covariance pooled across columns.
    KroneckerColumns,
}

/// Sufficient statistics of an iid sample of `p × p` matrices.
///
/// `omega_hat` estimates the per-observation covariance `Ω`, with the
/// convention `√n (M̂ − M) ⇝ N(0, Ω)`.
#[derive(Debug, Clone)]
pub struct MatrixSample {
    pub n: usize,
    pub m_hat: Mat,
    pub omega_hat: Mat,
    pub structure: CovStructure,
}

impl MatrixSample {
    /// Builds a sample summary from known moments.
    pub fn from_moments(m_hat: Mat, omega_hat: Mat, n: usize) -> Result<MatrixSample> {
        let p = m_hat.nrows();
        if m_hat.ncols() != p || omega_hat.shape() != (p * p, p * p) {
            return Err(Error::Dimension(format!(
                "mean {}x{} and covariance {}x{} are incompatible",
                m_hat.nrows(),
                m_hat.ncols(),
                omega_hat.nrows(),
                omega_hat.ncols()
            )));
        }
        check_finite(&m_hat)?;
        check_finite(&omega_hat)?;
        Ok(MatrixSample {
            n,
            m_hat,
            omega_hat,
            structure: CovStructure::Full,
        })
    }

    pub fn dim(&self) -> usize {
        self.m_hat.nrows()
    }

    /// Pooled column covariance `Ω̂_M`: the average diagonal `p × p` block.
    pub fn column_covariance(&self) -> Mat {
        pooled_columns(&self.omega_hat, self.dim())
    }
}

fn pooled_columns(omega: &Mat, p: usize) -> Mat {
    let mut acc = Mat::zeros(p, p);
    for j in 0..p {
        acc += omega.view((j * p, j * p), (p, p));
    }
    acc / p as f64
}

/// Streaming mean and covariance of `vec M` (Welford's update).
#[derive(Debug, Clone)]
pub struct SampleAccumulator {
    p: usize,
    n: usize,
    mean: DVector<f64>,
    m2: Mat,
}

impl SampleAccumulator {
    pub fn new(p: usize) -> Self {
        SampleAccumulator {
            p,
            n: 0,
            mean: DVector::zeros(p * p),
            m2: Mat::zeros(p * p, p * p),
        }
    }

    pub fn push(&mut self, obs: &Mat) -> Result<()> {
        if obs.shape() != (self.p, self.p) {
            return Err(Error::Dimension(format!(
                "observation {} is {}x{}, expected {}x{}",
                self.n + 1,
                obs.nrows(),
                obs.ncols(),
                self.p,
                self.p
            )));
        }
        check_finite(obs)?;
        self.n += 1;
        let x = vec(obs);
        let d_old = &x - &self.mean;
        self.mean += &d_old / self.n as f64;
        let d_new = &x - &self.mean;
        self.m2.ger(1.0, &d_old, &d_new, 1.0);
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(&self, structure: CovStructure) -> Result<MatrixSample> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 observations, got {}",
                self.n
            )));
        }
        let p = self.p;
        let raw = &self.m2 / (self.n - 1) as f64;
        let full = (&raw + raw.transpose()) * 0.5;
        let omega_hat = match structure {
            CovStructure::Full => full,
            CovStructure::KroneckerColumns => kron(&Mat::identity(p, p), &pooled_columns(&full, p)),
        };
        Ok(MatrixSample {
            n: self.n,
            m_hat: Mat::from_column_slice(p, p, self.mean.as_slice()),
            omega_hat,
            structure,
        })
    }
}

/// Mean and covariance of a list of observations.
pub fn estimate_from_sample(obs: &[Mat], structure: CovStructure) -> Result<MatrixSample> {
    let p = obs.first().map_or(0, |m| m.nrows());
    if let Some(first) = obs.first() {
        if first.ncols() != p {
            return Err(Error::Dimension(format!(
                "observations must be square, got {}x{}",
                first.nrows(),
                first.ncols()
            )));
        }
    }
    let mut acc = SampleAccumulator::new(p);
    for m in obs {
        acc.push(m)?;
    }
    acc.finish(structure)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_observations() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = estimate_from_sample(&[a.clone(), a.clone(), a.clone()], CovStructure::Full).unwrap();
        assert!((s.m_hat - a).amax() < 1e-15);
        assert_eq!(s.omega_hat.amax(), 0.0);
    }

    #[test]
    fn two_observations_by_hand() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 2.0, -1.0]);
        let b = Mat::from_row_slice(2, 2, &[3.0, 1.0, 0.0, 1.0]);
        let s = estimate_from_sample(&[a.clone(), b.clone()], CovStructure::Full).unwrap();
        assert!((&s.m_hat - (&a + &b) / 2.0).amax() < 1e-15);
        // deviations are ±(A−B)/2, so (1/(n−1))·Σ dᵢdᵢᵀ = ½ vec(A−B)vec(A−B)ᵀ
        let d = vec(&(&a - &b));
        let want = &d * d.transpose() * 0.5;
        assert!((s.omega_hat - want).amax() < 1e-14);
    }

    #[test]
    fn kronecker_structure_pools_columns() {
        let obs: Vec<Mat> = (0..5)
            .map(|t| Mat::from_fn(2, 2, |i, j| ((t * 3 + i * 5 + j * 7) % 4) as f64))
            .collect();
        let full = estimate_from_sample(&obs, CovStructure::Full).unwrap();
        let kr = estimate_from_sample(&obs, CovStructure::KroneckerColumns).unwrap();
        let pooled = full.column_covariance();
        assert!((kr.omega_hat.view((0, 0), (2, 2)) - &pooled).amax() < 1e-15);
        assert!((kr.omega_hat.view((2, 2), (2, 2)) - &pooled).amax() < 1e-15);
        assert_eq!(kr.omega_hat.view((0, 2), (2, 2)).amax(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let a = Mat::identity(2, 2);
        assert!(estimate_from_sample(std::slice::from_ref(&a), CovStructure::Full).is_err());
        assert!(estimate_from_sample(&[a.clone(), Mat::identity(3, 3)], CovStructure::Full).is_err());
    }
}
