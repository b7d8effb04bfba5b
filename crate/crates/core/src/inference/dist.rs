use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use libm::erfc;
use statrs::function::gamma::gamma_ur;

/// Reference law of a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Reference {
    ChiSquared { df: usize },
    StandardNormal,
}

/// Upper-tail probability `P(X > x)`.
pub fn tail_probability(x: f64, dist: Reference) -> f64 {
    match dist {
        Reference::ChiSquared { df } => {
            if x <= 0.0 {
                1.0
            } else if x.is_infinite() {
                0.0
            } else {
                gamma_ur(df as f64 / 2.0, x / 2.0)
            }
        }
        Reference::StandardNormal => 0.5 * erfc(x / std::f64::consts::SQRT_2),
    }
}

/// Two-sided normal p-value `P(|Z| > |t|)`.
pub fn two_sided_normal(t: f64) -> f64 {
    erfc(t.abs() / std::f64::consts::SQRT_2)
}

/// `(1 − alpha)` quantile of `χ²_df`.
pub fn chi2_quantile(alpha: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}

/// `(1 − alpha)` quantile of the standard normal.
pub fn normal_quantile(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha)
}

pub fn chi2_cdf(x: f64, df: usize) -> f64 {
    1.0 - tail_probability(x, Reference::ChiSquared { df })
}

pub fn normal_cdf(x: f64) -> f64 {
    tail_probability(-x, Reference::StandardNormal)
}

/// Kolmogorov–Smirnov distance between the empirical law of `draws` and `cdf`.
pub fn ks_distance(draws: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs: Vec<f64> = draws.iter().copied().filter(|x| !x.is_nan()).collect();
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}
