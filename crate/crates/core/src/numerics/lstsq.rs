//! Minimum-norm and ridge least squares.
//!
//! `X` is first reduced by Householder QR, `X = Q R`, and the small triangular
//! factor is then decomposed with one-sided Jacobi SVD. The pseudo-inverse is
//! applied through that SVD, so no normal equations are ever formed and
//! rank-deficient designs get the minimum-norm solution.

use super::{dot, Matrix, MAX_ITERATIONS};
use crate::error::{Error, Result};

/// Width of the column blocks used when applying `Qᵀ` to a right-hand side.
const RHS_BLOCK: usize = 32;

/// Solves `min ‖XB − Y‖² + ridge·‖B‖²`; with `ridge = 0` the minimum-norm
/// least-squares solution `B = X⁺Y` is returned.
pub fn least_squares_fit(x: &Matrix, y: &Matrix, ridge: f64) -> Result<Matrix> {
    LeastSquares::factor(x, ridge)?.solve(y)
}

#[derive(Debug, Clone)]
struct Reflector {
    start: usize,
    v: Vec<f64>,
    beta: f64,
}

/// A factored design matrix that can be solved against many right-hand sides.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    n: usize,
    p: usize,
    reflectors: Vec<Reflector>,
    /// Pseudo-inverse of `R` as `Σ_j coef_j · right_j ⊗ left_j`.
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    coef: Vec<f64>,
    singular_values: Vec<f64>,
}

impl LeastSquares {
    pub fn factor(x: &Matrix, ridge: f64) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        if n == 0 || p == 0 {
            return Err(Error::config(format!(
                "least squares with empty {n}x{p} design"
            )));
        }
        if !ridge.is_finite() || ridge < 0.0 {
            return Err(Error::config(format!(
                "ridge must be finite and >= 0, got {ridge}"
            )));
        }
        if !x.is_finite() {
            return Err(Error::data(
                "least squares design matrix contains NaN or infinite entries",
            ));
        }

        let r_rows = n.min(p);
        let mut work = x.clone();
        let mut reflectors = Vec::with_capacity(r_rows);
        let mut w = vec![0.0; p];
        for k in 0..r_rows {
            let mut v: Vec<f64> = (k..n).map(|i| work[(i, k)]).collect();
            let norm = dot(&v, &v).sqrt();
            let mut beta = 0.0;
            if norm > 0.0 {
                let alpha = if v[0] >= 0.0 { -norm } else { norm };
                v[0] -= alpha;
                let vnorm2 = dot(&v, &v);
                if vnorm2 > 0.0 {
                    beta = 2.0 / vnorm2;
                    apply_reflector(&mut work, k, k, p, &v, beta, &mut w[..p - k]);
                }
            }
            reflectors.push(Reflector { start: k, v, beta });
        }

        // R is the upper-trapezoidal r_rows x p block.
        let r = Matrix::from_fn(r_rows, p, |i, j| if j >= i { work[(i, j)] } else { 0.0 });

        // Jacobi operates on columns of a tall matrix: R itself when n >= p,
        // otherwise Rᵀ (whose columns are the rows of R).
        let tall = n >= p;
        let mut vectors: Vec<Vec<f64>> = if tall {
            (0..p).map(|j| r.col(j)).collect()
        } else {
            (0..r_rows).map(|i| r.row(i).to_vec()).collect()
        };
        let rotations = one_sided_jacobi(&mut vectors)?;

        let singular_values: Vec<f64> = vectors.iter().map(|c| dot(c, c).sqrt()).collect();
        let sigma_max = singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
        let cutoff = n.max(p) as f64 * f64::EPSILON * sigma_max;

        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut coef = Vec::new();
        for ((u, v), &sigma) in vectors.into_iter().zip(rotations).zip(&singular_values) {
            let c = if ridge > 0.0 {
                sigma / (sigma * sigma + ridge)
            } else if sigma > cutoff {
                1.0 / sigma
            } else {
                0.0
            };
            if c == 0.0 || sigma == 0.0 {
                continue;
            }
            let u: Vec<f64> = u.iter().map(|e| e / sigma).collect();
            // tall: R = U Σ Vᵀ, R⁺ = V Σ⁺ Uᵀ.  wide: Rᵀ = U Σ Vᵀ, R⁺ = U Σ⁺ Vᵀ.
            if tall {
                left.push(u);
                right.push(v);
            } else {
                left.push(v);
                right.push(u);
            }
            coef.push(c);
        }

        Ok(LeastSquares {
            n,
            p,
            reflectors,
            left,
            right,
            coef,
            singular_values,
        })
    }

    /// Singular values of the design matrix, unsorted.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Number of singular directions used by the solution.
    pub fn rank(&self) -> usize {
        self.coef.len()
    }

    pub fn solve(&self, y: &Matrix) -> Result<Matrix> {
        if y.rows() != self.n {
            return Err(Error::config(format!(
                "least squares target has {} rows, design has {}",
                y.rows(),
                self.n
            )));
        }
        if !y.is_finite() {
            return Err(Error::data(
                "least squares target contains NaN or infinite entries",
            ));
        }
        let q = y.cols();
        let c = self.apply_qt(y);
        let r_rows = self.n.min(self.p);

        let mut b = Matrix::zeros(self.p, q);
        let mut w = vec![0.0; q];
        for ((left, right), &coef) in self.left.iter().zip(&self.right).zip(&self.coef) {
            w.iter_mut().for_each(|e| *e = 0.0);
            for (i, &li) in left.iter().enumerate().take(r_rows) {
                for (e, &ci) in w.iter_mut().zip(c.row(i)) {
                    *e += li * ci;
                }
            }
            w.iter_mut().for_each(|e| *e *= coef);
            for (i, &ri) in right.iter().enumerate() {
                for (e, &wi) in b.row_mut(i).iter_mut().zip(&w) {
                    *e += ri * wi;
                }
            }
        }
        Ok(b)
    }

    /// First `min(n, p)` rows of `Qᵀ Y`.
    fn apply_qt(&self, y: &Matrix) -> Matrix {
        let (n, q) = (y.rows(), y.cols());
        let r_rows = self.n.min(self.p);
        let mut out = Matrix::zeros(r_rows, q);
        let mut w = vec![0.0; RHS_BLOCK];
        let mut c0 = 0;
        while c0 < q {
            let width = RHS_BLOCK.min(q - c0);
            let mut block = Matrix::from_fn(n, width, |r, c| y[(r, c0 + c)]);
            for refl in &self.reflectors {
                if refl.beta != 0.0 {
                    apply_reflector(
                        &mut block,
                        refl.start,
                        0,
                        width,
                        &refl.v,
                        refl.beta,
                        &mut w[..width],
                    );
                }
            }
            for r in 0..r_rows {
                out.row_mut(r)[c0..c0 + width].copy_from_slice(block.row(r));
            }
            c0 += width;
        }
        out
    }
}

/// Applies `I − beta·v·vᵀ` to rows `start..` and columns `c0..c1` of `a`.
/// Each inner product is accumulated over rows in ascending order.
fn apply_reflector(
    a: &mut Matrix,
    start: usize,
    c0: usize,
    c1: usize,
    v: &[f64],
    beta: f64,
    w: &mut [f64],
) {
    debug_assert_eq!(w.len(), c1 - c0);
    w.iter_mut().for_each(|e| *e = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        let row = &a.row(start + i)[c0..c1];
        for (e, &x) in w.iter_mut().zip(row) {
            *e += vi * x;
        }
    }
    w.iter_mut().for_each(|e| *e *= beta);
    for (i, &vi) in v.iter().enumerate() {
        let row = &mut a.row_mut(start + i)[c0..c1];
        for (x, &e) in row.iter_mut().zip(w.iter()) {
            *x -= vi * e;
        }
    }
}

/// Hestenes one-sided Jacobi: rotates `columns` until they are mutually
/// orthogonal and returns the accumulated rotations (columns of `V`).
fn one_sided_jacobi(columns: &mut [Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = columns.len();
    let m = columns.first().map_or(0, Vec::len);
    let tol = (m.max(1) as f64) * f64::EPSILON;
    let mut v: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            e
        })
        .collect();

    let mut worst = 0.0;
    for _ in 0..MAX_ITERATIONS {
        worst = 0.0f64;
        for i in 0..k {
            for j in i + 1..k {
                let (ci, cj) = pair_mut(columns, i, j);
                let alpha = dot(ci, ci);
                let beta = dot(cj, cj);
                let gamma = dot(ci, cj);
                if gamma == 0.0 {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                let off = gamma.abs() / scale;
                if off <= tol {
                    continue;
                }
                worst = worst.max(off);
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(ci, cj, c, s);
                let (vi, vj) = pair_mut(&mut v, i, j);
                rotate(vi, vj, c, s);
            }
        }
        if worst == 0.0 {
            return Ok(v);
        }
    }
    Err(Error::Numerical {
        operation: "least squares (Jacobi SVD)",
        iterations: MAX_ITERATIONS,
        residual: worst,
    })
}

#[inline]
fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

fn pair_mut<T>(items: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (head, tail) = items.split_at_mut(j);
    (&mut head[i], &mut tail[0])
}
