use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matcore::{eig_nonsym, max_abs, Mat};

/// Whether some `Γ ≻ 0` makes `ΓM` symmetric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasiSymmetry {
    pub symmetrizable: bool,
    /// `Γ = Σ lᵢlᵢᵀ` over the left eigenvectors, when one exists.
    #[serde(with = "crate::matcore::io::as_json_opt")]
    pub certificate: Option<Mat>,
}

/// A diagonalizable matrix is symmetrizable exactly when its spectrum is real.
pub fn quasi_symmetry_check(m: &Mat) -> Result<QuasiSymmetry> {
    let s = eig_nonsym(m)?;
    if s.eigenvalues.iter().any(|z| z.im != 0.0) {
        return Ok(QuasiSymmetry {
            symmetrizable: false,
            certificate: None,
        });
    }
    let l = s.left.map(|z| z.re);
    let gamma = &l * l.transpose();
    let gamma = (&gamma + gamma.transpose()) * 0.5;
    let ok = SymmetricEigen::new(gamma.clone()).eigenvalues.min() > 0.0 && symmetric_in_metric(m, &gamma);
    Ok(QuasiSymmetry {
        symmetrizable: ok,
        certificate: ok.then_some(gamma),
    })
}

/// `‖ΓM − (ΓM)ᵀ‖_max ≤ 1e-8 · max(1, ‖ΓM‖_max)`.
pub fn symmetric_in_metric(m: &Mat, gamma: &Mat) -> bool {
    let gm = gamma * m;
    max_abs(&(&gm - gm.transpose())) <= 1e-8 * max_abs(&gm).max(1.0)
}
