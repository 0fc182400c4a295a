//! Prolate spheroidal wave functions (PSWFs) for bandwidth parameter
//! c = π·B_max: the eigenfunctions φ_j of
//!
//!   (ξφ)(f) = ∫_{-1}^{1} e^{i c f ζ} φ(ζ) dζ = λ_j φ_j(f),
//!
//! orthonormal on [-1, 1]. This module builds the basis, selects the
//! truncation order d from the eigenvalue plunge, and provides the two
//! ingredients the lifted SDP needs: the interpolation matrix
//! Φ_{kj} = φ_{j-1}((k-d-1)/d) and the kernel sample vectors
//! h(k) = φ_{k-1}(Δf/B_max).
//!
//! Construction uses the classical Legendre-coefficient method: φ_j is
//! expanded in normalized Legendre polynomials, whose coefficients are an
//! eigenvector of a symmetric tridiagonal matrix (the prolate differential
//! operator commutes with ξ). This stays stable for c in the hundreds,
//! unlike direct discretization of the kernel.

use crate::{la, Complex, Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Bump when the construction method changes in a way that invalidates
/// cached bases.
pub const METHOD_VERSION: u32 = 1;

/// Hard cap on the number of expansion orders attempted before concluding
/// the eigenvalues never decay below ε (B_max too large for this build).
const MAX_ORDERS: usize = 2000;

/// A built PSWF basis: evaluators for φ_0..φ_2d and the operator
/// eigenvalues λ_0..λ_2d.
#[derive(Debug, Clone)]
pub struct PswfBasis {
    pub b_max: f64,
    /// Bandwidth parameter c = π·B_max.
    pub c: f64,
    /// Precision used for the d-rule.
    pub eps: f64,
    /// Truncation order: 2d+1 basis functions are kept.
    pub d: usize,
    /// Normalized-Legendre coefficient rows, one per order 0..=2d.
    coeffs: Vec<Vec<f64>>,
    /// Operator eigenvalues; λ_j = i^j |λ_j| up to numerical error.
    pub lambdas: Vec<Complex>,
}

/// Evaluate the normalized Legendre polynomials √(k+1/2)·P_k(f) for
/// k = 0..n-1 by upward recurrence.
fn scaled_legendre(n: usize, f: f64) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[0] = 1.0;
    if n > 1 {
        p[1] = f;
    }
    for k in 1..n.saturating_sub(1) {
        p[k + 1] = ((2 * k + 1) as f64 * f * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    for (k, v) in p.iter_mut().enumerate() {
        *v *= (k as f64 + 0.5).sqrt();
    }
    p
}

/// Spherical Bessel functions j_0(x)..j_{n-1}(x) by Miller's downward
/// recurrence with rescaling, normalized against whichever of j_0, j_1 is
/// better conditioned at this x.
fn spherical_bessel(n: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; n];
        out[0] = 1.0;
        return out;
    }
    let start = n + 50 + x as usize;
    let mut buf = vec![0.0; start + 2];
    buf[start + 1] = 0.0;
    buf[start] = 1e-280;
    for k in (1..=start).rev() {
        buf[k - 1] = (2 * k + 1) as f64 / x * buf[k] - buf[k + 1];
        if buf[k - 1].abs() > 1e250 {
            let s = 1.0 / buf[k - 1].abs();
            for v in buf[k - 1..].iter_mut() {
                *v *= s;
            }
        }
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let scale = if j0.abs() >= j1.abs() { j0 / buf[0] } else { j1 / buf[1] };
    buf[..n].iter().map(|v| v * scale).collect()
}

/// Legendre coefficient rows for orders 0..n_orders-1 via the parity-split
/// tridiagonal eigenproblem of the commuting differential operator.
fn build_coeffs(c: f64, n_orders: usize) -> Result<Vec<Vec<f64>>> {
    let n_leg = (2 * n_orders + 60).max((2.0 * c / std::f64::consts::PI + 120.0) as usize);
    let diag: Vec<f64> = (0..n_leg)
        .map(|k| {
            let kf = k as f64;
            kf * (kf + 1.0) + c * c * (2.0 * kf * (kf + 1.0) - 1.0) / ((2.0 * kf + 3.0) * (2.0 * kf - 1.0))
        })
        .collect();
    // coupling between Legendre orders k and k+2
    let off: Vec<f64> = (0..n_leg.saturating_sub(2))
        .map(|k| {
            let kf = k as f64;
            c * c * (kf + 2.0) * (kf + 1.0) / ((2.0 * kf + 3.0) * ((2.0 * kf + 1.0) * (2.0 * kf + 5.0)).sqrt())
        })
        .collect();
    let mut coeffs = vec![vec![0.0; n_leg]; n_orders];
    for par in 0..2usize {
        let idx: Vec<usize> = (par..n_leg).step_by(2).collect();
        let m = idx.len();
        let mut t = DMatrix::zeros(m, m);
        for (i, &k) in idx.iter().enumerate() {
            t[(i, i)] = diag[k];
            if i + 1 < m {
                t[(i + 1, i)] = off[k];
                t[(i, i + 1)] = off[k];
            }
        }
        let (_, vecs) = la::eigh_real(&t)?;
        let mut jj = 0;
        loop {
            let j = 2 * jj + par;
            if j >= n_orders || jj >= m {
                break;
            }
            for (i, &k) in idx.iter().enumerate() {
                coeffs[j][k] = vecs[(i, jj)];
            }
            jj += 1;
        }
    }
    // sign convention: φ_j(1) > 0
    for row in coeffs.iter_mut() {
        let at1: f64 = row.iter().enumerate().map(|(k, v)| v * (k as f64 + 0.5).sqrt()).sum();
        if at1 < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
    Ok(coeffs)
}

/// Operator eigenvalues λ_j from the integral relation (ξφ_j)(f*) = λ_jφ_j(f*),
/// evaluated where |φ_j| is largest so the quotient stays well conditioned.
/// (The classical fixed-point choice f* = 1 collapses for j ≪ 2c/π at large c
/// because φ_j(1) underflows relative to the integral.)
fn eigenvalues(c: f64, coeffs: &[Vec<f64>]) -> Vec<Complex> {
    let n_orders = coeffs.len();
    let n_leg = coeffs[0].len();
    let ngrid = 81;
    let grid: Vec<f64> = (0..ngrid).map(|i| i as f64 / (ngrid - 1) as f64).collect();
    let vals: Vec<Vec<f64>> = grid
        .iter()
        .map(|&f| {
            let p = scaled_legendre(n_leg, f);
            coeffs.iter().map(|row| row.iter().zip(&p).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();
    let ik = [Complex::new(1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(-1.0, 0.0), Complex::new(0.0, -1.0)];
    (0..n_orders)
        .map(|j| {
            let mut best = 0;
            for i in 1..ngrid {
                if vals[i][j].abs() > vals[best][j].abs() {
                    best = i;
                }
            }
            let fstar = grid[best];
            let jk = spherical_bessel(n_leg, c * fstar);
            // ∫ e^{icf*ζ}P̄_k(ζ)dζ = 2 i^k √(k+1/2) j_k(cf*) -- expand φ_j and sum
            let mut lam = Complex::new(0.0, 0.0);
            for k in 0..n_leg {
                lam += ik[k % 4] * (2.0 * (k as f64 + 0.5).sqrt() * jk[k] * coeffs[j][k]);
            }
            lam / vals[best][j]
        })
        .collect()
}

/// Build the basis for bandwidth B_max at precision ε.
///
/// The truncation order is d = min{⌈j/2⌉ : |λ_j| < ε}, floored at
/// ⌊B_max⌋ + 1 so that θ0 = c/d stays below π (the arc condition in the SDP
/// is undefined at θ0 = π).
pub fn build_basis(b_max: f64, eps: f64) -> Result<PswfBasis> {
    if b_max <= 0.0 {
        return Err(Error::invalid("build_basis: B_max must be positive"));
    }
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::invalid("build_basis: eps must be in (0, 1)"));
    }
    let c = std::f64::consts::PI * b_max;
    // past the plunge at 2c/π the eigenvalues decay superexponentially;
    // 3·ln(1/ε) + 30 extra orders is far more than enough to cross ε
    let n_orders = (2.0 * b_max + 3.0 * (1.0 / eps).ln() + 30.0) as usize;
    if n_orders > MAX_ORDERS {
        return Err(Error::invalid(format!(
            "build_basis: B_max = {b_max} needs {n_orders} expansion orders (limit {MAX_ORDERS})"
        )));
    }
    let coeffs = build_coeffs(c, n_orders)?;
    let lambdas = eigenvalues(c, &coeffs);
    let jstar = lambdas
        .iter()
        .position(|l| l.norm() < eps)
        .ok_or_else(|| Error::numerical(format!("build_basis: |λ_j| never fell below ε = {eps} within {n_orders} orders")))?;
    let d = (jstar.div_ceil(2)).max(b_max.floor() as usize + 1);
    if 2 * d >= n_orders {
        return Err(Error::numerical("build_basis: truncation order exceeds computed expansion orders"));
    }
    Ok(PswfBasis {
        b_max,
        c,
        eps,
        d,
        coeffs: coeffs[..=2 * d].to_vec(),
        lambdas: lambdas[..=2 * d].to_vec(),
    })
}

impl PswfBasis {
    /// Number of basis functions, 2d+1.
    pub fn n_funcs(&self) -> usize {
        2 * self.d + 1
    }

    /// θ0 = c/d, the half-width of the arc the spike frequencies land on.
    pub fn theta0(&self) -> f64 {
        self.c / self.d as f64
    }

    /// φ_j(f) for a single order.
    pub fn evaluate_pswf(&self, j: usize, f: f64) -> Result<f64> {
        if j > 2 * self.d {
            return Err(Error::invalid(format!("evaluate_pswf: order {j} > 2d = {}", 2 * self.d)));
        }
        if !(-1.0..=1.0).contains(&f) {
            return Err(Error::invalid(format!("evaluate_pswf: argument {f} outside [-1, 1]")));
        }
        let p = scaled_legendre(self.coeffs[j].len(), f);
        Ok(self.coeffs[j].iter().zip(&p).map(|(a, b)| a * b).sum())
    }

    /// All of φ_0(f)..φ_2d(f) in one pass (shares the Legendre recurrence).
    pub fn evaluate_all(&self, f: f64) -> Result<Vec<f64>> {
        if !(-1.0..=1.0).contains(&f) {
            return Err(Error::invalid(format!("evaluate_pswf: argument {f} outside [-1, 1]")));
        }
        let p = scaled_legendre(self.coeffs[0].len(), f);
        Ok(self.coeffs.iter().map(|row| row.iter().zip(&p).map(|(a, b)| a * b).sum()).collect())
    }

    /// h(k) = φ_{k-1}(delta), k = 1..2d+1: the kernel samples at a
    /// normalized frequency difference delta = (f_j - f_l)/B_max.
    pub fn h_vector(&self, delta: f64) -> Result<Vec<f64>> {
        if !(-1.0..=1.0).contains(&delta) {
            return Err(Error::invalid(format!(
                "h_vector: |Δf|/B_max = {} exceeds 1 (frequency pair outside the band)",
                delta.abs()
            )));
        }
        self.evaluate_all(delta)
    }

    /// The (2d+1)×(2d+1) interpolation matrix Φ_{kj} = φ_{j-1}((k-d-1)/d)
    /// with rows indexed by the equispaced nodes -d..d (scaled by 1/d).
    pub fn phi_matrix(&self) -> Result<PhiMatrix> {
        let n = self.n_funcs();
        let d = self.d as f64;
        let mut mat = DMatrix::zeros(n, n);
        for k in 0..n {
            let node = (k as f64 - d) / d;
            let row = self.evaluate_all(node)?;
            for j in 0..n {
                mat[(k, j)] = row[j];
            }
        }
        let svd = mat.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = smax / smin;
        if smin <= f64::EPSILON * smax * n as f64 {
            return Err(Error::numerical(format!("phi_matrix: singular to working precision (cond ≈ {cond:.3e})")));
        }
        let lu = mat.clone().lu();
        let lu_t = mat.transpose().lu();
        Ok(PhiMatrix { mat, lu, lu_t, cond })
    }

    /// Write this basis to `dir`, keyed by (B_max, ε, method version).
    pub fn save_cache(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(cache_name(self.b_max, self.eps));
        let file = CacheFile {
            version: METHOD_VERSION,
            b_max: self.b_max,
            eps: self.eps,
            d: self.d,
            coeffs: self.coeffs.clone(),
            lambda_re: self.lambdas.iter().map(|l| l.re).collect(),
            lambda_im: self.lambdas.iter().map(|l| l.im).collect(),
        };
        std::fs::write(&path, serde_json::to_vec(&file)?)?;
        Ok(path)
    }
}

/// Load a cached basis if a file with matching key and method version
/// exists in `dir`; otherwise build and cache.
pub fn build_or_load(b_max: f64, eps: f64, dir: &Path) -> Result<PswfBasis> {
    let path = dir.join(cache_name(b_max, eps));
    if let Ok(bytes) = std::fs::read(&path) {
        if let Ok(file) = serde_json::from_slice::<CacheFile>(&bytes) {
            if file.version == METHOD_VERSION && file.b_max == b_max && file.eps == eps {
                let lambdas = file
                    .lambda_re
                    .iter()
                    .zip(&file.lambda_im)
                    .map(|(&re, &im)| Complex::new(re, im))
                    .collect();
                return Ok(PswfBasis {
                    b_max,
                    c: std::f64::consts::PI * b_max,
                    eps,
                    d: file.d,
                    coeffs: file.coeffs,
                    lambdas,
                });
            }
        }
        // stale or foreign cache contents: fall through and rebuild
    }
    let basis = build_basis(b_max, eps)?;
    basis.save_cache(dir)?;
    Ok(basis)
}

fn cache_name(b_max: f64, eps: f64) -> String {
    format!("pswf-b{b_max}-eps{eps:e}-v{METHOD_VERSION}.json")
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    b_max: f64,
    eps: f64,
    d: usize,
    coeffs: Vec<Vec<f64>>,
    lambda_re: Vec<f64>,
    lambda_im: Vec<f64>,
}

/// Φ with factorizations for repeated solves against Φ and Φᵀ.
pub struct PhiMatrix {
    pub mat: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_t: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// 2-norm condition number (reported; Φ is ill conditioned by nature,
    /// which is why the SDP is solved in the coefficient domain).
    pub cond: f64,
}

impl PhiMatrix {
    pub fn solve(&self, rhs: &nalgebra::DVector<f64>) -> Result<nalgebra::DVector<f64>> {
        self.lu.solve(rhs).ok_or_else(|| Error::numerical("Φ solve failed"))
    }

    pub fn solve_t(&self, rhs: &nalgebra::DVector<f64>) -> Result<nalgebra::DVector<f64>> {
        self.lu_t.solve(rhs).ok_or_else(|| Error::numerical("Φᵀ solve failed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_parameter_formula() {
        let b = build_basis(4.0, 1e-10).unwrap();
        assert!((b.c - std::f64::consts::PI * 4.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_orders_match_quadrature_oracle() {
        // pinned against the dense-quadrature oracle (see tests/pswf_oracle.rs)
        assert_eq!(build_basis(4.0, 1e-10).unwrap().d, 12);
        assert_eq!(build_basis(8.0, 1e-10).unwrap().d, 17);
    }

    #[test]
    fn odd_orders_vanish_at_zero() {
        let b = build_basis(8.0, 1e-10).unwrap();
        for j in (1..=2 * b.d).step_by(2) {
            assert!(b.evaluate_pswf(j, 0.0).unwrap().abs() < 1e-12, "φ_{j}(0) ≠ 0");
        }
    }

    #[test]
    fn parity_symmetry() {
        let b = build_basis(4.0, 1e-10).unwrap();
        for j in 0..=6 {
            for &f in &[0.13, 0.52, 0.97] {
                let plus = b.evaluate_pswf(j, f).unwrap();
                let minus = b.evaluate_pswf(j, -f).unwrap();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                assert!((minus - sign * plus).abs() < 1e-10 * plus.abs().max(1.0));
            }
        }
    }

    #[test]
    fn eigenvalue_magnitudes_nonincreasing_and_truncated() {
        for &bmax in &[4.0, 8.0] {
            let b = build_basis(bmax, 1e-10).unwrap();
            for j in 1..b.lambdas.len() {
                let prev = b.lambdas[j - 1].norm();
                let cur = b.lambdas[j].norm();
                assert!(cur <= prev * (1.0 + 1e-12), "|λ| increased at j={j} for B={bmax}");
            }
            assert!(b.lambdas[2 * b.d].norm() < b.eps);
        }
    }

    #[test]
    fn eigenvalue_phase_pattern() {
        // λ_j = i^j |λ_j| for the e^{+icfζ} kernel
        let b = build_basis(8.0, 1e-10).unwrap();
        for (j, l) in b.lambdas.iter().enumerate() {
            if l.norm() < 1e-8 {
                continue;
            }
            let expected = match j % 4 {
                0 => Complex::new(1.0, 0.0),
                1 => Complex::new(0.0, 1.0),
                2 => Complex::new(-1.0, 0.0),
                _ => Complex::new(0.0, -1.0),
            };
            let phase = l / l.norm();
            assert!((phase - expected).norm() < 1e-6, "order {j}: phase {phase}");
        }
    }

    #[test]
    fn d_rule_monotone_in_eps() {
        let loose = build_basis(4.0, 1e-6).unwrap().d;
        let tight = build_basis(4.0, 1e-10).unwrap().d;
        assert!(tight >= loose);
    }

    #[test]
    fn phi_matrix_shape_and_parity_of_middle_row() {
        let b = build_basis(4.0, 1e-10).unwrap();
        let phi = b.phi_matrix().unwrap();
        let n = 2 * b.d + 1;
        assert_eq!(phi.mat.nrows(), n);
        assert_eq!(phi.mat.ncols(), n);
        // middle row has node 0: odd orders vanish there
        for j in (1..n).step_by(2) {
            assert!(phi.mat[(b.d, j)].abs() < 1e-12);
        }
        // first and last rows use nodes ∓1
        let at1 = b.evaluate_all(1.0).unwrap();
        for j in 0..n {
            assert!((phi.mat[(n - 1, j)] - at1[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_solve_round_trip() {
        let b = build_basis(4.0, 1e-10).unwrap();
        let phi = b.phi_matrix().unwrap();
        let n = 2 * b.d + 1;
        let x = nalgebra::DVector::from_fn(n, |i, _| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4);
        let y = &phi.mat * &x;
        let back = phi.solve(&y).unwrap();
        assert!((back - &x).norm() < 1e-8 * x.norm().max(1.0));
        let yt = phi.mat.transpose() * &x;
        let back_t = phi.solve_t(&yt).unwrap();
        assert!((back_t - &x).norm() < 1e-8 * x.norm().max(1.0));
    }

    #[test]
    fn h_vector_parity_relation() {
        let b = build_basis(4.0, 1e-10).unwrap();
        let hp = b.h_vector(0.37).unwrap();
        let hm = b.h_vector(-0.37).unwrap();
        for k in 0..hp.len() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((hm[k] - sign * hp[k]).abs() < 1e-10 * hp[k].abs().max(1.0));
        }
    }

    #[test]
    fn argument_validation() {
        let b = build_basis(4.0, 1e-10).unwrap();
        assert!(b.evaluate_pswf(2 * b.d + 1, 0.0).is_err());
        assert!(b.evaluate_pswf(0, 1.0 + 1e-9).is_err());
        assert!(b.h_vector(-1.01).is_err());
        assert!(build_basis(-1.0, 1e-10).is_err());
        assert!(build_basis(4.0, 2.0).is_err());
    }

    #[test]
    fn cache_round_trip_and_version_mismatch() {
        let dir = std::env::temp_dir().join(format!("pswf-cache-test-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let built = build_or_load(4.0, 1e-8, &dir).unwrap();
        let loaded = build_or_load(4.0, 1e-8, &dir).unwrap();
        assert_eq!(built.d, loaded.d);
        assert_eq!(built.coeffs, loaded.coeffs);
        // corrupt the version field: loader must rebuild, not fail
        let path = dir.join(cache_name(4.0, 1e-8));
        let txt = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, txt.replace("\"version\":1", "\"version\":0")).unwrap();
        let rebuilt = build_or_load(4.0, 1e-8, &dir).unwrap();
        assert_eq!(rebuilt.d, built.d);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn spherical_bessel_reference_values() {
        // j_0(2) = sin(2)/2, j_1(2) = sin(2)/4 - cos(2)/2, j_5(1) ≈ 9.256115861e-5
        let j2 = spherical_bessel(6, 2.0);
        assert!((j2[0] - (2.0f64).sin() / 2.0).abs() < 1e-15);
        assert!((j2[1] - ((2.0f64).sin() / 4.0 - (2.0f64).cos() / 2.0)).abs() < 1e-15);
        let j1 = spherical_bessel(6, 1.0);
        assert!((j1[5] - 9.256115861125816e-5).abs() < 1e-17);
    }
}
