use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{eig_nonsym, max_abs, split_spectrum, Mat, RootSelector};
use crate::perturb::{psi_ddot, psi_dot, psi_tracking};

/// Remainder norms below this are treated as rounding noise.
pub const UNDERFLOW_GUARD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderSlopes {
    /// Log-log slope of `‖ψ(M+tE) − ψ(M) − tψ̇(E)‖`.
    pub first_order: Option<f64>,
    /// Same with `(t²/2)ψ̈(E)` also subtracted.
    pub second_order: Option<f64>,
    /// Grid points kept after the underflow guard.
    pub first_points: usize,
    pub second_points: usize,
    /// Every first-order remainder fell below the guard.
    pub exact: bool,
}

/// `count` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Least-squares slope of `ln y` on `ln t`.
pub fn log_log_slope(ts: &[f64], ys: &[f64]) -> Option<f64> {
    if ts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn check_grid(ts: &[f64]) -> Result<()> {
    if ts.len() < 6 {
        return Err(Error::InvalidArgument(format!("need at least 6 grid points, got {}", ts.len())));
    }
    if ts.iter().any(|&t| !(1e-5..=1e-1).contains(&t)) {
        return Err(Error::InvalidArgument("grid points must lie in [1e-5, 1e-1]".into()));
    }
    let ratio = ts[1] / ts[0];
    let even = ts
        .windows(2)
        .all(|w| w[1] > w[0] && ((w[1] / w[0]) / ratio - 1.0).abs() < 1e-6);
    if !even {
        return Err(Error::InvalidArgument("grid must be increasing and log-spaced".into()));
    }
    Ok(())
}

/// Taylor remainder orders of `ψ` along `M + tE`. `v_perp` must annihilate
/// the selected invariant subspace of `M`.
pub fn remainder_order(m: &Mat, e: &Mat, sel: &RootSelector, v_perp: &Mat, t_grid: &[f64]) -> Result<RemainderSlopes> {
    check_grid(t_grid)?;
    let split = split_spectrum(&eig_nonsym(m)?, sel)?;
    let off = max_abs(&(v_perp.transpose() * &split.r_i));
    if off > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "annihilator is not orthogonal to the selected subspace (max |υ⊥ᵀR_I| = {off:e})"
        )));
    }
    let base = v_perp.transpose() * split.p_i();
    let d1 = psi_dot(e, &split, v_perp)?;
    let d2 = psi_ddot(e, &split, v_perp)?;
    let mut first = (Vec::new(), Vec::new());
    let mut second = (Vec::new(), Vec::new());
    for &t in t_grid {
        let val = psi_tracking(&(m + e * t), v_perp, &split)?;
        let r1 = &val - &base - &d1 * t;
        let r2 = &r1 - &d2 * (t * t / 2.0);
        let (n1, n2) = (r1.norm(), r2.norm());
        if n1 >= UNDERFLOW_GUARD {
            first.0.push(t);
            first.1.push(n1);
        }
        if n2 >= UNDERFLOW_GUARD {
            second.0.push(t);
            second.1.push(n2);
        }
    }
    Ok(RemainderSlopes {
        first_order: log_log_slope(&first.0, &first.1),
        second_order: log_log_slope(&second.0, &second.1),
        first_points: first.0.len(),
        second_points: second.0.len(),
        exact: first.0.is_empty(),
    })
}
