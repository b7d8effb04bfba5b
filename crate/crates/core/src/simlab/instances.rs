use rand::Rng;

use crate::error::{Error, Result};
use crate::matcore::{eig_nonsym, orthocomplement, split_spectrum, Mat, RootSelector, SpectralSplit};

/// A diagonalizable matrix, its split on the `k` largest roots, and an
/// annihilator of the selected subspace.
#[derive(Debug, Clone)]
pub struct NullInstance {
    pub m: Mat,
    pub split: SpectralSplit,
    pub v_perp: Mat,
    pub selector: RootSelector,
}

/// `M = R Λ R⁻¹` with `R = I + 0.3·G`, `G` uniform on `[-½, ½]`.
///
/// The roots are spread over `(0.5, 3]` with gaps of about `2.5/p`; the `k`
/// largest are real and the rest may contain conjugate pairs. The selected
/// roots occupy the last `k` coordinates, so the bottom block of their
/// eigenvectors is close to the identity.
pub fn random_null_instance<R: Rng + ?Sized>(rng: &mut R, p: usize, k: usize) -> Result<NullInstance> {
    if k == 0 || k >= p {
        return Err(Error::InvalidArgument(format!("need 0 < k < p, got k = {k}, p = {p}")));
    }
    let mut lam = Mat::zeros(p, p);
    let mut i = 0;
    while i < p {
        let pos = p - 1 - i;
        let base = 3.0 - 2.5 * i as f64 / p as f64;
        if i >= k && i + 1 < p && rng.random_bool(0.4) {
            let b = 0.2 + 0.3 * rng.random::<f64>();
            let q = pos - 1;
            lam[(q, q)] = base;
            lam[(pos, pos)] = base;
            lam[(q, pos)] = -b;
            lam[(pos, q)] = b;
            i += 2;
        } else {
            lam[(pos, pos)] = base + 0.05 * rng.random::<f64>();
            i += 1;
        }
    }
    let g = Mat::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
    let r = Mat::identity(p, p) + g * 0.3;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(Error::SingularNormalization { condition: f64::INFINITY })?;
    let m = &r * lam * r_inv;
    let selector = RootSelector::Largest(k);
    let split = split_spectrum(&eig_nonsym(&m)?, &selector)?;
    let v_perp = orthocomplement(&split.r_i)?;
    Ok(NullInstance {
        m,
        split,
        v_perp,
        selector,
    })
}

/// Random symmetric positive definite matrix with condition number below about 50.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Mat {
    let a = Mat::from_fn(dim, dim, |_, _| rng.random::<f64>() - 0.5);
    let s = &a * a.transpose() / dim as f64;
    let scale = s.trace() / dim as f64;
    s + Mat::identity(dim, dim) * (0.1 * scale.max(1e-3))
}
