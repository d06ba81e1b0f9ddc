//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Cholesky factorization with a descriptive error.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// `log det` of a symmetric positive-definite matrix. Empty matrices give 0.
pub fn spd_logdet(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let ch = cholesky(m, what)?;
    Ok(2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Symmetrize in place: `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Relative asymmetry `‖m − mᵀ‖ / ‖m‖`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / n
}

/// Solve a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` couples row `i + 1` to column `i`, `upper[i]` couples row `i`
/// to column `i + 1`. Returns `None` on a zero pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return None;
    }
    if n > 1 {
        c[0] = upper[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if pivot == 0.0 {
            return None;
        }
        if i < n - 1 {
            c[i] = upper[i] / pivot;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

/// `log det` of a symmetric positive-definite tridiagonal matrix via its LDLᵀ pivots.
pub fn tridiagonal_spd_logdet(diag: &[f64], off: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    let mut prev = 0.0;
    for (i, &d) in diag.iter().enumerate() {
        let pivot = if i == 0 { d } else { d - off[i - 1] * off[i - 1] / prev };
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "tridiagonal pivot {i} is {pivot}"
            )));
        }
        acc += pivot.ln();
        prev = pivot;
    }
    Ok(acc)
}

/// Quadratic form `xᵀ m x`.
pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solve() {
        let lower = [-1.0, -0.5, -2.0];
        let diag = [4.0, 5.0, 6.0, 7.0];
        let upper = [-1.0, -0.5, -2.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let mut m = DMatrix::zeros(4, 4);
        for i in 0..4 {
            m[(i, i)] = diag[i];
            if i < 3 {
                m[(i + 1, i)] = lower[i];
                m[(i, i + 1)] = upper[i];
            }
        }
        let dense = m.lu().solve(&DVector::from_row_slice(&rhs)).unwrap();
        for i in 0..4 {
            assert!((x[i] - dense[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_logdet_matches_cholesky() {
        let diag = [3.0, 3.0, 3.0, 3.0, 3.0];
        let off = [-1.0, -1.2, -0.7, -1.0];
        let mut m = DMatrix::zeros(5, 5);
        for i in 0..5 {
            m[(i, i)] = diag[i];
            if i < 4 {
                m[(i + 1, i)] = off[i];
                m[(i, i + 1)] = off[i];
            }
        }
        let a = tridiagonal_spd_logdet(&diag, &off).unwrap();
        let b = spd_logdet(&m, "test").unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(spd_logdet(&m, "x"), Err(Error::NotPositiveDefinite(_))));
        assert!(tridiagonal_spd_logdet(&[1.0, 1.0], &[2.0]).is_err());
    }
}
