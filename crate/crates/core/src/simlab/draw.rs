use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{CovStructure, MatrixSample, SampleAccumulator};
use crate::matcore::{check_finite, Mat};

/// Column noise law.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// Columns iid `N(0, Ω_M)`.
    #[default]
    Gaussian,
    /// Columns iid multivariate Student-t rescaled to covariance `Ω_M`.
    /// Heavier tails than the asymptotic theory assumes.
    StudentT { df: f64 },
}

/// Factor `F` with `F Fᵀ = Ω_M`: Cholesky when positive definite, otherwise
/// the symmetric square root of the clipped spectrum.
pub fn noise_factor(omega_m: &Mat) -> Result<Mat> {
    let p = omega_m.nrows();
    if omega_m.ncols() != p {
        return Err(Error::Dimension("column covariance must be square".into()));
    }
    check_finite(omega_m)?;
    let sym = (omega_m + omega_m.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if let Some(&low) = eig.eigenvalues.iter().find(|&&x| x < -1e-10 * top.max(1e-300)) {
        return Err(Error::NotPositiveSemidefinite(format!(
            "column covariance has eigenvalue {low:e}"
        )));
    }
    let root = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    Ok(&eig.eigenvectors * Mat::from_diagonal(&root))
}

/// One observation `M + F·N` with the columns of `N` drawn from `noise`.
pub fn draw_matrix<R: Rng + ?Sized>(m: &Mat, factor: &Mat, noise: Noise, rng: &mut R) -> Mat {
    let p = m.nrows();
    let mut z = Mat::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    if let Noise::StudentT { df } = noise {
        let chi = ChiSquared::new(df).expect("positive degrees of freedom");
        for mut col in z.column_iter_mut() {
            let w: f64 = chi.sample(rng);
            col *= ((df - 2.0) / w).sqrt();
        }
    }
    m + factor * z
}

/// Draws `n` observations and returns their summary statistics.
pub fn draw_sample<R: Rng + ?Sized>(m: &Mat, omega_m: &Mat, n: usize, rng: &mut R) -> Result<MatrixSample> {
    let factor = noise_factor(omega_m)?;
    draw_sample_with(m, &factor, n, Noise::Gaussian, CovStructure::Full, rng)
}

pub fn draw_sample_with<R: Rng + ?Sized>(
    m: &Mat,
    factor: &Mat,
    n: usize,
    noise: Noise,
    structure: CovStructure,
    rng: &mut R,
) -> Result<MatrixSample> {
    if let Noise::StudentT { df } = noise {
        if !(df > 2.0) {
            return Err(Error::InvalidArgument(format!(
                "Student-t noise needs df > 2 for a finite variance, got {df}"
            )));
        }
    }
    let mut acc = SampleAccumulator::new(m.nrows());
    for _ in 0..n {
        acc.push(&draw_matrix(m, factor, noise, rng))?;
    }
    acc.finish(structure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_covariance_reproduces_mean() {
        let m = Mat::from_row_slice(2, 2, &[0.8, 0.5, 0.0, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = draw_sample(&m, &Mat::zeros(2, 2), 5, &mut rng).unwrap();
        assert_eq!(s.m_hat, m);
        assert_eq!(s.omega_hat.amax(), 0.0);
    }

    #[test]
    fn factor_of_singular_covariance() {
        let om = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = noise_factor(&om).unwrap();
        assert!((&f * f.transpose() - &om).amax() < 1e-12);
        let bad = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(noise_factor(&bad), Err(Error::NotPositiveSemidefinite(_))));
    }

    #[test]
    fn scalar_mean_within_clt_band() {
        let m = Mat::from_element(1, 1, 0.3);
        let om = Mat::from_element(1, 1, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let s = draw_sample(&m, &om, n, &mut rng).unwrap();
        let se = (4.0 / n as f64).sqrt();
        assert!((s.m_hat[(0, 0)] - 0.3).abs() < 5.0 * se);
    }

    #[test]
    fn student_noise_has_target_variance() {
        let m = Mat::zeros(1, 1);
        let om = Mat::from_element(1, 1, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = noise_factor(&om).unwrap();
        let s = draw_sample_with(&m, &f, 200_000, Noise::StudentT { df: 8.0 }, CovStructure::Full, &mut rng)
            .unwrap();
        // var of the sample variance for t₈ scaled to variance 2: 4·(2 + κ)/n with excess kurtosis κ = 3
        let se = (4.0 * 5.0 / 200_000f64).sqrt();
        assert!((s.omega_hat[(0, 0)] - 2.0).abs() < 5.0 * se);
        assert!(draw_sample_with(&m, &f, 10, Noise::StudentT { df: 2.0 }, CovStructure::Full, &mut rng).is_err());
    }
}
