//! Matrix exponentials: Hermitian eigendecomposition and Taylor
//! scaling-and-squaring.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(m: &DMatrix<C64>, tol: f64) -> Result<()> {
    let scale = max_abs(m).max(1.0);
    let err = hermiticity_error(m);
    if err > tol * scale {
        Err(Error::NotHermitian(err))
    } else {
        Ok(())
    }
}

/// `exp(-i H t)` for Hermitian `H` via eigendecomposition.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> Result<DMatrix<C64>> {
    check_hermitian(h, 1e-10)?;
    // symmetrize so the eigensolver sees an exactly Hermitian input
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    Ok(v * phases * v.adjoint())
}

/// General matrix exponential `exp(A)` by Taylor series with scaling and
/// squaring.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * C64::new(scale, 0.0);
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &x * C64::new(1.0 / k as f64, 0.0);
        result += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_rotation() {
        let x = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let t = 0.37;
        let u = expm_hermitian(&x, t).unwrap();
        assert!((u[(0, 0)] - C64::new(t.cos(), 0.0)).norm() < 1e-14);
        assert!((u[(1, 0)] - C64::new(0.0, -t.sin())).norm() < 1e-14);
        let v = expm(&(x * C64::new(0.0, -t)));
        assert!(max_abs(&(u - v)) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(expm_hermitian(&m, 1.0), Err(Error::NotHermitian(_))));
    }
}
