//! Thin LAPACK wrappers for the complex decompositions nalgebra lacks
//! (Hermitian eigendecomposition, general complex eigenvalues).
//!
//! nalgebra matrices are column-major, so they can be handed to LAPACK
//! directly; everything here operates on owned copies and never exposes
//! LAPACK's in-place semantics to callers.

use crate::{Complex, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. Only the lower triangle of `a` is referenced.
pub fn eigh(a: &DMatrix<Complex>) -> Result<(Vec<f64>, DMatrix<Complex>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid("eigh: matrix not square"));
    }
    if n == 0 {
        return Ok((vec![], DMatrix::zeros(0, 0)));
    }
    let mut af = a.clone();
    let mut w = vec![0.0; n];
    let mut rwork = vec![0.0; 3 * n.max(1)];
    let mut info = 0;
    // workspace query
    let mut wkopt = [Complex::new(0.0, 0.0)];
    unsafe {
        lapack::zheev(
            b'V',
            b'L',
            n as i32,
            af.as_mut_slice(),
            n as i32,
            &mut w,
            &mut wkopt,
            -1,
            &mut rwork,
            &mut info,
        );
    }
    let lwork = wkopt[0].re as usize;
    let mut work = vec![Complex::new(0.0, 0.0); lwork.max(1)];
    unsafe {
        lapack::zheev(
            b'V',
            b'L',
            n as i32,
            af.as_mut_slice(),
            n as i32,
            &mut w,
            &mut work,
            lwork as i32,
            &mut rwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::numerical(format!("zheev failed (info={info})")));
    }
    Ok((w, af))
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order (the natural order for rank inspection).
pub fn eigh_desc(a: &DMatrix<Complex>) -> Result<(Vec<f64>, DMatrix<Complex>)> {
    let (w, v) = eigh(a)?;
    let n = w.len();
    let wr: Vec<f64> = w.iter().rev().copied().collect();
    let mut vr = DMatrix::zeros(n, n);
    for k in 0..n {
        vr.set_column(k, &v.column(n - 1 - k));
    }
    Ok((wr, vr))
}

/// Eigenvalues of a general complex matrix (no eigenvectors).
pub fn eigvals(a: &DMatrix<Complex>) -> Result<Vec<Complex>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid("eigvals: matrix not square"));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let mut af = a.clone();
    let mut w = vec![Complex::new(0.0, 0.0); n];
    let mut vl = [Complex::new(0.0, 0.0)];
    let mut vr = [Complex::new(0.0, 0.0)];
    let mut rwork = vec![0.0; 2 * n];
    let mut info = 0;
    let mut wkopt = [Complex::new(0.0, 0.0)];
    unsafe {
        lapack::zgeev(
            b'N',
            b'N',
            n as i32,
            af.as_mut_slice(),
            n as i32,
            &mut w,
            &mut vl,
            1,
            &mut vr,
            1,
            &mut wkopt,
            -1,
            &mut rwork,
            &mut info,
        );
    }
    let lwork = wkopt[0].re as usize;
    let mut work = vec![Complex::new(0.0, 0.0); lwork.max(1)];
    unsafe {
        lapack::zgeev(
            b'N',
            b'N',
            n as i32,
            af.as_mut_slice(),
            n as i32,
            &mut w,
            &mut vl,
            1,
            &mut vr,
            1,
            &mut work,
            lwork as i32,
            &mut rwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::numerical(format!("zgeev failed (info={info})")));
    }
    Ok(w)
}

/// Minimum-norm least-squares solution of A x = b via SVD.
pub fn lstsq(a: &DMatrix<Complex>, b: &DVector<Complex>) -> Result<DVector<Complex>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-13)
        .map_err(|e| Error::numerical(format!("lstsq: {e}")))
}

/// Least squares with a matrix right-hand side (one SVD, many columns).
pub fn lstsq_mat(a: &DMatrix<Complex>, b: &DMatrix<Complex>) -> Result<DMatrix<Complex>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-13)
        .map_err(|e| Error::numerical(format!("lstsq: {e}")))
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
/// Only the lower triangle of `a` is referenced.
pub fn eigh_real(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid("eigh_real: matrix not square"));
    }
    if n == 0 {
        return Ok((vec![], DMatrix::zeros(0, 0)));
    }
    let mut af = a.clone();
    let mut w = vec![0.0; n];
    let mut info = 0;
    let mut wkopt = [0.0];
    unsafe {
        lapack::dsyev(b'V', b'L', n as i32, af.as_mut_slice(), n as i32, &mut w, &mut wkopt, -1, &mut info);
    }
    let lwork = wkopt[0] as usize;
    let mut work = vec![0.0; lwork.max(1)];
    unsafe {
        lapack::dsyev(
            b'V',
            b'L',
            n as i32,
            af.as_mut_slice(),
            n as i32,
            &mut w,
            &mut work,
            lwork as i32,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::numerical(format!("dsyev failed (info={info})")));
    }
    Ok((w, af))
}

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on P_n from the Chebyshev-based initial guess; accurate
/// to machine precision for the orders used here (up to a few thousand).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(z) and P_n'(z) by upward recurrence
            let (mut p0, mut p1) = (1.0, z);
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn eigh_recovers_known_spectrum() {
        // A = U diag(3,1) U* for a hand-built unitary U
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = DMatrix::from_column_slice(2, 2, &[c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0)]);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0)]));
        let a = &u * d * u.adjoint();
        let (w, v) = eigh(&a).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 3.0).abs() < 1e-12);
        // residual ||Av - wv||
        for k in 0..2 {
            let r = &a * v.column(k) - v.column(k) * c(w[k], 0.0);
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn eigvals_of_diagonal_complex() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 1.0), c(2.0, -1.0)]));
        let mut w = eigvals(&a).unwrap();
        w.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert!((w[0] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((w[1] - c(2.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // an n-point rule is exact through degree 2n-1
        let (x, w) = gauss_legendre(8);
        for deg in 0..16 {
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg)).sum();
            let want = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((got - want).abs() < 1e-14, "degree {deg}: {got} vs {want}");
        }
    }

    #[test]
    fn gauss_legendre_oscillatory_reference() {
        // integral of cos(10x) over [-1,1] = 2 sin(10)/10
        let (x, w) = gauss_legendre(60);
        let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (10.0 * xi).cos()).sum();
        assert!((got - 2.0 * (10.0f64).sin() / 10.0).abs() < 1e-14);
    }

    #[test]
    fn lstsq_consistent_overdetermined() {
        let a = DMatrix::from_column_slice(
            3,
            2,
            &[c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(2.0, 0.0), c(1.0, -1.0), c(0.0, 3.0)],
        );
        let x = DVector::from_vec(vec![c(1.5, -0.5), c(0.25, 2.0)]);
        let b = &a * &x;
        let xh = lstsq(&a, &b).unwrap();
        assert!((xh - x).norm() < 1e-12);
    }
}
