//! Spectral radius and operator 2-norm.

use super::{dot, matvec_into, norm2, Matrix, MAX_ITERATIONS, RELATIVE_TOLERANCE};
use crate::error::{Error, Result};

/// Largest eigenvalue magnitude of a square matrix.
///
/// The matrix is reduced to upper Hessenberg form with Householder
/// reflections and all eigenvalues are extracted with the Francis
/// double-shift QR iteration, so complex-conjugate dominant pairs are handled
/// without any subspace heuristics.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::config(format!(
            "spectral radius of a non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() {
        return Err(Error::data(
            "spectral radius of a matrix with non-finite entries",
        ));
    }
    let eig = eigenvalues(m)?;
    Ok(eig
        .iter()
        .fold(0.0f64, |acc, &(re, im)| acc.max(re.hypot(im))))
}

/// All eigenvalues of a square matrix as `(re, im)` pairs, in deflation order.
pub(crate) fn eigenvalues(m: &Matrix) -> Result<Vec<(f64, f64)>> {
    let mut h = m.clone();
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(&mut h)
}

fn reduce_to_hessenberg(a: &mut Matrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let len = n - k - 1;
        let v = &mut v[..len];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = a[(k + 1 + i, k)];
        }
        let alpha_norm = norm2(v);
        if alpha_norm == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -alpha_norm } else { alpha_norm };
        v[0] -= alpha;
        let vnorm2 = dot(v, v);
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;

        // H A: rows k+1.., columns k..
        for j in k..n {
            let mut s = 0.0;
            for (i, vi) in v.iter().enumerate() {
                s += vi * a[(k + 1 + i, j)];
            }
            let f = beta * s;
            for (i, vi) in v.iter().enumerate() {
                a[(k + 1 + i, j)] -= f * vi;
            }
        }
        // (H A) H: all rows, columns k+1..
        for r in 0..n {
            let row = &mut a.row_mut(r)[k + 1..];
            let f = beta * dot(row, v);
            for (x, vi) in row.iter_mut().zip(v.iter()) {
                *x -= f * vi;
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

#[inline]
fn sign(magnitude: f64, of: f64) -> f64 {
    if of >= 0.0 {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
/// `a` is destroyed.
fn hessenberg_qr(a: &mut Matrix) -> Result<Vec<(f64, f64)>> {
    let n = a.rows();
    let mut eig = vec![(0.0, 0.0); n];
    if n == 0 {
        return Ok(eig);
    }
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    // `active` is one past the last undeflated row.
    let mut active = n;
    let mut shift_total = 0.0;
    let mut its = 0usize;
    let mut total_its = 0usize;

    while active > 0 {
        let nn = active - 1;
        let mut l = nn;
        while l > 0 {
            let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
            if s == 0.0 {
                s = anorm;
            }
            if a[(l, l - 1)].abs() <= eps * s {
                a[(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }

        let mut x = a[(nn, nn)];
        if l == nn {
            eig[nn] = (x + shift_total, 0.0);
            active -= 1;
            its = 0;
            continue;
        }
        let mut y = a[(nn - 1, nn - 1)];
        let mut w = a[(nn, nn - 1)] * a[(nn - 1, nn)];
        if l == nn - 1 {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let z = q.abs().sqrt();
            x += shift_total;
            if q >= 0.0 {
                let z = p + sign(z, p);
                let mut lower = x + z;
                let upper = x + z;
                if z != 0.0 {
                    lower = x - w / z;
                }
                eig[nn - 1] = (upper, 0.0);
                eig[nn] = (lower, 0.0);
            } else {
                eig[nn - 1] = (x + p, z);
                eig[nn] = (x + p, -z);
            }
            active -= 2;
            its = 0;
            continue;
        }

        if total_its >= MAX_ITERATIONS {
            return Err(Error::Numerical {
                operation: "spectral radius (Hessenberg QR)",
                iterations: total_its,
                residual: a[(nn, nn - 1)].abs(),
            });
        }
        if its > 0 && its.is_multiple_of(10) {
            // Exceptional shift to break cycles.
            shift_total += x;
            for i in 0..=nn {
                a[(i, i)] -= x;
            }
            let s = a[(nn, nn - 1)].abs() + a[(nn - 1, nn - 2)].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;
        total_its += 1;

        // Look for two consecutive small subdiagonal elements.
        let mut m = nn - 2;
        let (mut p, mut q, mut r);
        loop {
            let z = a[(m, m)];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
            q = a[(m + 1, m + 1)] - z - rr - ss;
            r = a[(m + 2, m + 1)];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
            let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
            if u <= eps * v {
                break;
            }
            m -= 1;
        }
        for i in m..nn - 1 {
            a[(i + 2, i)] = 0.0;
            if i != m {
                a[(i + 2, i - 1)] = 0.0;
            }
        }

        // Double-shift QR step on rows l..=nn, columns m..=nn.
        for k in m..nn {
            if k != m {
                p = a[(k, k - 1)];
                q = a[(k + 1, k - 1)];
                r = if k + 1 != nn { a[(k + 2, k - 1)] } else { 0.0 };
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = sign((p * p + q * q + r * r).sqrt(), p);
            if s == 0.0 {
                continue;
            }
            if k == m {
                if l != m {
                    a[(k, k - 1)] = -a[(k, k - 1)];
                }
            } else {
                a[(k, k - 1)] = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            let z = r / s;
            q /= p;
            r /= p;
            for j in k..=nn {
                let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                if k + 1 != nn {
                    pp += r * a[(k + 2, j)];
                    a[(k + 2, j)] -= pp * z;
                }
                a[(k + 1, j)] -= pp * y;
                a[(k, j)] -= pp * x;
            }
            let mmin = if nn < k + 3 { nn } else { k + 3 };
            for i in l..=mmin {
                let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                if k + 1 != nn {
                    pp += z * a[(i, k + 2)];
                    a[(i, k + 2)] -= pp * r;
                }
                a[(i, k + 1)] -= pp * q;
                a[(i, k)] -= pp;
            }
        }
    }
    Ok(eig)
}

/// Largest singular value, by power iteration on `MᵀM`.
///
/// Starts from the all-ones vector; if an iterate collapses (the start lies in
/// the null space) the unit basis vectors are tried in order. A matrix that
/// annihilates every start vector is zero and has norm 0.
pub fn operator_norm_2(m: &Matrix) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    if !m.is_finite() {
        return Err(Error::data(
            "operator norm of a matrix with non-finite entries",
        ));
    }
    let n = m.cols();
    if let Some(sigma) = gram_power_iteration(m, vec![1.0; n])? {
        return Ok(sigma);
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        if let Some(sigma) = gram_power_iteration(m, e)? {
            return Ok(sigma);
        }
    }
    Ok(0.0)
}

const COLLAPSE_THRESHOLD: f64 = 1e-300;

fn gram_power_iteration(m: &Matrix, mut v: Vec<f64>) -> Result<Option<f64>> {
    let start_norm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= start_norm);
    let mut mv = vec![0.0; m.rows()];
    let mut w = vec![0.0; m.cols()];
    let mut previous: Option<f64> = None;
    let mut change = f64::INFINITY;

    for _ in 0..MAX_ITERATIONS {
        matvec_into(m, &v, &mut mv);
        // Rayleigh quotient of MᵀM at the unit vector v.
        let lambda = dot(&mv, &mv);
        transpose_matvec_into(m, &mv, &mut w);
        let wn = norm2(&w);
        if wn < COLLAPSE_THRESHOLD {
            return Ok(None);
        }
        if let Some(prev) = previous {
            change = (lambda - prev).abs() / lambda;
            if change <= RELATIVE_TOLERANCE {
                return Ok(Some(lambda.sqrt()));
            }
        }
        previous = Some(lambda);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    Err(Error::Numerical {
        operation: "operator 2-norm (power iteration)",
        iterations: MAX_ITERATIONS,
        residual: change,
    })
}

/// `out = Mᵀ v`, each entry accumulated over rows in ascending order.
fn transpose_matvec_into(m: &Matrix, v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (r, &vr) in v.iter().enumerate() {
        for (o, &a) in out.iter_mut().zip(m.row(r)) {
            *o += a * vr;
        }
    }
}
