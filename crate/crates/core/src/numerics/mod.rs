//! Dense kernels used by the reservoir and readout code.
//!
//! Every reduction accumulates in a fixed order (ascending index), so all
//! results are bit-reproducible for identical inputs regardless of how many
//! threads the caller uses.

mod lstsq;
mod matrix;
mod spectral;

pub use lstsq::{least_squares_fit, LeastSquares};
pub use matrix::Matrix;
pub use spectral::{operator_norm_2, spectral_radius};

use crate::error::{Error, Result};

/// Iteration cap shared by all iterative solvers.
pub const MAX_ITERATIONS: usize = 10_000;

/// Relative-change stopping threshold for power iterations.
pub const RELATIVE_TOLERANCE: f64 = 1e-12;

/// Matrix-vector product `m · v`.
pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != m.cols() {
        return Err(Error::config(format!(
            "matvec: vector of length {} against {}x{} matrix",
            v.len(),
            m.rows(),
            m.cols()
        )));
    }
    let mut out = vec![0.0; m.rows()];
    matvec_into(m, v, &mut out);
    Ok(out)
}

/// Unchecked kernel behind [`matvec`]. Each output entry is summed left to
/// right over the columns; four rows are carried at once for instruction-level
/// parallelism without changing the per-row order.
pub(crate) fn matvec_into(m: &Matrix, v: &[f64], out: &mut [f64]) {
    let cols = m.cols();
    let data = m.as_slice();
    debug_assert_eq!(v.len(), cols);
    debug_assert_eq!(out.len(), m.rows());
    let v = &v[..cols];

    let mut r = 0;
    while r + 4 <= m.rows() {
        let a0 = &data[r * cols..(r + 1) * cols];
        let a1 = &data[(r + 1) * cols..(r + 2) * cols];
        let a2 = &data[(r + 2) * cols..(r + 3) * cols];
        let a3 = &data[(r + 3) * cols..(r + 4) * cols];
        let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
        for c in 0..cols {
            let x = v[c];
            s0 += a0[c] * x;
            s1 += a1[c] * x;
            s2 += a2[c] * x;
            s3 += a3[c] * x;
        }
        out[r] = s0;
        out[r + 1] = s1;
        out[r + 2] = s2;
        out[r + 3] = s3;
        r += 4;
    }
    while r < m.rows() {
        out[r] = dot(m.row(r), v);
        r += 1;
    }
}

/// Left-to-right dot product.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
