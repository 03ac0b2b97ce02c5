use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest matrix order accepted by [`permanent`].
pub const MAX_PERMANENT_ORDER: usize = 6;

/// Matrix permanent.
///
/// Orders up to two are expanded directly; larger matrices use Ryser's
/// inclusion-exclusion formula visited in Gray-code order, so each subset
/// update touches a single column.
pub fn permanent(matrix: &DMatrix<Complex64>) -> Result<Complex64> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::Dimension(format!(
            "permanent needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let k = matrix.nrows();
    if k > MAX_PERMANENT_ORDER {
        return Err(Error::Unsupported(format!(
            "permanent of order {k} exceeds the supported maximum {MAX_PERMANENT_ORDER}"
        )));
    }
    let mut rows = [Complex64::new(0.0, 0.0); MAX_PERMANENT_ORDER * MAX_PERMANENT_ORDER];
    for r in 0..k {
        for c in 0..k {
            rows[r * k + c] = matrix[(r, c)];
        }
    }
    Ok(permanent_row_major(k, &rows[..k * k]))
}

/// Permanent of a `k x k` row-major matrix. Caller guarantees `k <= MAX_PERMANENT_ORDER`.
pub(crate) fn permanent_row_major(k: usize, a: &[Complex64]) -> Complex64 {
    match k {
        0 => Complex64::new(1.0, 0.0),
        1 => a[0],
        2 => a[0] * a[3] + a[1] * a[2],
        _ => ryser(k, a),
    }
}

fn ryser(k: usize, a: &[Complex64]) -> Complex64 {
    let mut row_sums = [Complex64::new(0.0, 0.0); MAX_PERMANENT_ORDER];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: usize = 0;
    for step in 1usize..(1 << k) {
        let col = step.trailing_zeros() as usize;
        let bit = 1 << col;
        gray ^= bit;
        let sign = if gray & bit != 0 { 1.0 } else { -1.0 };
        for r in 0..k {
            row_sums[r] += a[r * k + col] * sign;
        }
        let prod = row_sums[..k]
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &x| acc * x);
        if gray.count_ones() % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if k % 2 == 0 {
        total
    } else {
        -total
    }
}
