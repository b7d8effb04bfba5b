//! Real nonsymmetric eigensolver: Householder reduction to upper Hessenberg
//! form followed by Francis double-shift QR iterations to real Schur form,
//! with back-substitution for the eigenvectors.
//!
//! Derived from the Algol procedures `orthes` and `hqr2` (Martin and
//! Wilkinson, Handbook for Automatic Computation, Vol. II) by way of the
//! public-domain JAMA port.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Raw output of the real Schur eigensolver.
///
/// `re[i] + i*im[i]` are the eigenvalues. For a real root, column `i` of
/// `vectors` is its eigenvector. For a complex pair stored at `(i, i+1)` with
/// `im[i] > 0`, `vectors[:, i] + i*vectors[:, i+1]` is the eigenvector of
/// `re[i] + i*im[i]`.
pub(crate) struct RealEigen {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

const MAX_ITER_PER_ROOT: usize = 200;

macro_rules! at {
    ($m:expr, $i:expr, $j:expr) => {
        $m[(($i) as usize, ($j) as usize)]
    };
}

pub(crate) fn real_eigen(a: &DMatrix<f64>) -> Result<RealEigen> {
    let n = a.nrows();
    let mut h = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 0 {
        return Ok(RealEigen { re: d, im: e, vectors: v });
    }
    orthes(&mut h, &mut v);
    hqr2(&mut h, &mut v, &mut d, &mut e)?;
    Ok(RealEigen {
        re: d,
        im: e,
        vectors: v,
    })
}

fn orthes(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let n = h.nrows() as isize;
    let low: isize = 0;
    let high: isize = n - 1;
    let mut ort = vec![0.0; n as usize];

    let mut m = low + 1;
    while m < high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += at!(h, i, m - 1).abs();
        }
        if scale != 0.0 {
            let mut hh = 0.0;
            let mut i = high;
            while i >= m {
                ort[i as usize] = at!(h, i, m - 1) / scale;
                hh += ort[i as usize] * ort[i as usize];
                i -= 1;
            }
            let mut g = hh.sqrt();
            if ort[m as usize] > 0.0 {
                g = -g;
            }
            hh -= ort[m as usize] * g;
            ort[m as usize] -= g;

            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i as usize] * at!(h, i, j);
                }
                f /= hh;
                for i in m..=high {
                    at!(h, i, j) -= f * ort[i as usize];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j as usize] * at!(h, i, j);
                }
                f /= hh;
                for j in m..=high {
                    at!(h, i, j) -= f * ort[j as usize];
                }
            }
            ort[m as usize] *= scale;
            at!(h, m, m - 1) = scale * g;
        }
        m += 1;
    }

    // accumulate the orthogonal similarity
    v.fill_with_identity();
    let mut m = high - 1;
    while m > low {
        if at!(h, m, m - 1) != 0.0 {
            for i in (m + 1)..=high {
                ort[i as usize] = at!(h, i, m - 1);
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i as usize] * at!(v, i, j);
                }
                g = (g / ort[m as usize]) / at!(h, m, m - 1);
                for i in m..=high {
                    at!(v, i, j) += g * ort[i as usize];
                }
            }
        }
        m -= 1;
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr2(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let nn = h.nrows() as isize;
    let mut n = nn - 1;
    let low: isize = 0;
    let high = nn - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut t, mut w, mut x, mut y): (f64, f64, f64, f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += at!(h, i, j).abs();
        }
    }

    let mut iter = 0usize;
    while n >= low {
        // look for a single small sub-diagonal element
        let mut l = n;
        while l > low {
            s = at!(h, l - 1, l - 1).abs() + at!(h, l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if at!(h, l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // one root
            at!(h, n, n) += exshift;
            d[n as usize] = at!(h, n, n);
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // two roots
            w = at!(h, n, n - 1) * at!(h, n - 1, n);
            p = (at!(h, n - 1, n - 1) - at!(h, n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            at!(h, n, n) += exshift;
            at!(h, n - 1, n - 1) += exshift;
            x = at!(h, n, n);

            if q >= 0.0 {
                // real pair
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = at!(h, n, n - 1);
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;

                for j in (n - 1)..nn {
                    z = at!(h, n - 1, j);
                    at!(h, n - 1, j) = q * z + p * at!(h, n, j);
                    at!(h, n, j) = q * at!(h, n, j) - p * z;
                }
                for i in 0..=n {
                    z = at!(h, i, n - 1);
                    at!(h, i, n - 1) = q * z + p * at!(h, i, n);
                    at!(h, i, n) = q * at!(h, i, n) - p * z;
                }
                for i in low..=high {
                    z = at!(v, i, n - 1);
                    at!(v, i, n - 1) = q * z + p * at!(v, i, n);
                    at!(v, i, n) = q * at!(v, i, n) - p * z;
                }
            } else {
                // complex pair
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // no convergence yet; form shift
            x = at!(h, n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = at!(h, n - 1, n - 1);
                w = at!(h, n, n - 1) * at!(h, n - 1, n);
            }

            // Wilkinson's exceptional shift
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    at!(h, i, i) -= x;
                }
                s = at!(h, n, n - 1).abs() + at!(h, n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            // second exceptional shift
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        at!(h, i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            if iter > MAX_ITER_PER_ROOT {
                return Err(Error::NonConvergence {
                    iterations: MAX_ITER_PER_ROOT,
                });
            }

            // look for two consecutive small sub-diagonal elements
            let mut m = n - 2;
            while m >= l {
                z = at!(h, m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at!(h, m + 1, m) + at!(h, m, m + 1);
                q = at!(h, m + 1, m + 1) - z - r - s;
                r = at!(h, m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if at!(h, m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (at!(h, m - 1, m - 1).abs() + z.abs() + at!(h, m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                at!(h, i, i - 2) = 0.0;
                if i > m + 2 {
                    at!(h, i, i - 3) = 0.0;
                }
            }

            // double QR step on rows l..=n and columns m..=n
            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = at!(h, k, k - 1);
                    q = at!(h, k + 1, k - 1);
                    r = if notlast { at!(h, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        at!(h, k, k - 1) = -s * x;
                    } else if l != m {
                        at!(h, k, k - 1) = -at!(h, k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = at!(h, k, j) + q * at!(h, k + 1, j);
                        if notlast {
                            p += r * at!(h, k + 2, j);
                            at!(h, k + 2, j) -= p * z;
                        }
                        at!(h, k, j) -= p * x;
                        at!(h, k + 1, j) -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * at!(h, i, k) + y * at!(h, i, k + 1);
                        if notlast {
                            p += z * at!(h, i, k + 2);
                            at!(h, i, k + 2) -= p * r;
                        }
                        at!(h, i, k) -= p;
                        at!(h, i, k + 1) -= p * q;
                    }
                    for i in low..=high {
                        p = x * at!(v, i, k) + y * at!(v, i, k + 1);
                        if notlast {
                            p += z * at!(v, i, k + 2);
                            at!(v, i, k + 2) -= p * r;
                        }
                        at!(v, i, k) -= p;
                        at!(v, i, k + 1) -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    // back-substitute to find vectors of the upper (quasi-)triangular form
    if norm == 0.0 {
        return Ok(());
    }

    let mut n = nn - 1;
    while n >= 0 {
        p = d[n as usize];
        q = e[n as usize];

        if q == 0.0 {
            // real vector
            let mut l = n;
            at!(h, n, n) = 1.0;
            let mut i = n - 1;
            while i >= 0 {
                w = at!(h, i, i) - p;
                r = 0.0;
                for j in l..=n {
                    r += at!(h, i, j) * at!(h, j, n);
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        at!(h, i, n) = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        // solve real equations
                        x = at!(h, i, i + 1);
                        y = at!(h, i + 1, i);
                        q = (d[i as usize] - p) * (d[i as usize] - p) + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        at!(h, i, n) = t;
                        at!(h, i + 1, n) = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    // overflow control
                    t = at!(h, i, n).abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            at!(h, j, n) /= t;
                        }
                    }
                }
                i -= 1;
            }
        } else if q < 0.0 {
            // complex vector
            let mut l = n - 1;
            if at!(h, n, n - 1).abs() > at!(h, n - 1, n).abs() {
                at!(h, n - 1, n - 1) = q / at!(h, n, n - 1);
                at!(h, n - 1, n) = -(at!(h, n, n) - p) / at!(h, n, n - 1);
            } else {
                let (cr, ci) = cdiv(0.0, -at!(h, n - 1, n), at!(h, n - 1, n - 1) - p, q);
                at!(h, n - 1, n - 1) = cr;
                at!(h, n - 1, n) = ci;
            }
            at!(h, n, n - 1) = 0.0;
            at!(h, n, n) = 1.0;
            let mut i = n - 2;
            while i >= 0 {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += at!(h, i, j) * at!(h, j, n - 1);
                    sa += at!(h, i, j) * at!(h, j, n);
                }
                w = at!(h, i, i) - p;

                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        at!(h, i, n - 1) = cr;
                        at!(h, i, n) = ci;
                    } else {
                        // solve complex equations
                        x = at!(h, i, i + 1);
                        y = at!(h, i + 1, i);
                        let di = d[i as usize] - p;
                        let mut vr = di * di + e[i as usize] * e[i as usize] - q * q;
                        let vi = di * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        at!(h, i, n - 1) = cr;
                        at!(h, i, n) = ci;
                        if x.abs() > z.abs() + q.abs() {
                            at!(h, i + 1, n - 1) =
                                (-ra - w * at!(h, i, n - 1) + q * at!(h, i, n)) / x;
                            at!(h, i + 1, n) = (-sa - w * at!(h, i, n) - q * at!(h, i, n - 1)) / x;
                        } else {
                            let (cr, ci) = cdiv(
                                -r - y * at!(h, i, n - 1),
                                -s - y * at!(h, i, n),
                                z,
                                q,
                            );
                            at!(h, i + 1, n - 1) = cr;
                            at!(h, i + 1, n) = ci;
                        }
                    }

                    t = at!(h, i, n - 1).abs().max(at!(h, i, n).abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            at!(h, j, n - 1) /= t;
                            at!(h, j, n) /= t;
                        }
                    }
                }
                i -= 1;
            }
        }
        n -= 1;
    }

    // back transformation to eigenvectors of the original matrix
    let mut j = nn - 1;
    while j >= low {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += at!(v, i, k) * at!(h, k, j);
            }
            at!(v, i, j) = z;
        }
        j -= 1;
    }
    Ok(())
}
