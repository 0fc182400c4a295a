//! Independent oracles shared by the integration and acceptance tests.
//!
//! Everything here recomputes quantities by a route disjoint from the
//! library implementation (dense quadrature instead of Legendre expansions,
//! direct steering-vector sums instead of the Φ/h machinery), so agreement
//! is meaningful evidence rather than an identity check.
#![allow(dead_code)]

use blindsr::la::{eigh_real, gauss_legendre};
use blindsr::Complex;
use nalgebra::DMatrix;

/// Eigenvalues of (ξφ)(f) = ∫_{-1}^{1} e^{icfζ}φ(ζ)dζ by dense quadrature.
///
/// The kernel commutes with parity, so a 2n-point discretization of [-1, 1]
/// splits exactly into an n-point cosine (even) and sine (odd) problem on
/// [0, 1]; the symmetrized matrices 2√(w_i w_k)·cos/sin(c x_i x_k) have the
/// operator eigenvalues for even/odd orders directly. Order j is even-rank
/// or odd-rank by parity, each sorted by |λ| descending, and the phase
/// pattern of the e^{+icfζ} kernel makes even eigenvalues real and odd ones
/// purely imaginary (λ_j = i^j|λ_j|).
pub fn oracle_kernel_eigenvalues(c: f64, n_half: usize, n_out: usize) -> Vec<Complex> {
    let (x01, w01) = gauss_legendre(n_half);
    let x: Vec<f64> = x01.iter().map(|v| (v + 1.0) / 2.0).collect();
    let w: Vec<f64> = w01.iter().map(|v| v / 2.0).collect();
    let mut ce = DMatrix::zeros(n_half, n_half);
    let mut se = DMatrix::zeros(n_half, n_half);
    for i in 0..n_half {
        for k in 0..n_half {
            let s = 2.0 * (w[i] * w[k]).sqrt();
            ce[(i, k)] = s * (c * x[i] * x[k]).cos();
            se[(i, k)] = s * (c * x[i] * x[k]).sin();
        }
    }
    let (mu_e, _) = eigh_real(&ce).unwrap();
    let (mu_o, _) = eigh_real(&se).unwrap();
    // within each parity class the signs alternate exactly (λ_j = i^j|λ_j|),
    // and the leading moduli are near-tied, so a plain modulus sort would
    // scramble the order; interleave the positive and negative subsequences
    let alternate = |mu: &[f64]| -> Vec<f64> {
        let mut pos: Vec<f64> = mu.iter().copied().filter(|v| *v >= 0.0).collect();
        let mut neg: Vec<f64> = mu.iter().copied().filter(|v| *v < 0.0).collect();
        pos.sort_by(|a, b| b.partial_cmp(a).unwrap());
        neg.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out = Vec::with_capacity(mu.len());
        let (mut i, mut k) = (0, 0);
        while i < pos.len() || k < neg.len() {
            if i < pos.len() {
                out.push(pos[i]);
                i += 1;
            }
            if k < neg.len() {
                out.push(neg[k]);
                k += 1;
            }
        }
        out
    };
    let mu_e = alternate(&mu_e);
    let mu_o = alternate(&mu_o);
    (0..n_out)
        .map(|j| {
            if j % 2 == 0 {
                Complex::new(mu_e[j / 2], 0.0)
            } else {
                Complex::new(0.0, mu_o[(j - 1) / 2])
            }
        })
        .collect()
}

/// The d-rule applied to oracle eigenvalues: d = min{⌈j/2⌉ : |λ_j| < ε},
/// floored at ⌊B_max⌋+1.
pub fn oracle_truncation_order(b_max: f64, eps: f64, n_half: usize) -> usize {
    let c = std::f64::consts::PI * b_max;
    let lams = oracle_kernel_eigenvalues(c, n_half, n_half);
    let jstar = lams.iter().position(|l| l.norm() < eps).expect("oracle eigenvalues never decayed below eps");
    jstar.div_ceil(2).max(b_max.floor() as usize + 1)
}

/// Gram matrix of the basis under a dense Gauss-Legendre rule on [-1, 1].
pub fn oracle_gram(basis: &blindsr::pswf::PswfBasis, n_quad: usize) -> DMatrix<f64> {
    let (x, w) = gauss_legendre(n_quad);
    let n = basis.n_funcs();
    let mut g = DMatrix::zeros(n, n);
    for (xq, wq) in x.iter().zip(&w) {
        let row = basis.evaluate_all(*xq).unwrap();
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] += wq * row[i] * row[j];
            }
        }
    }
    g
}

/// Worst-case residual ‖(ξφ_j) - λ_jφ_j‖∞ over a uniform grid, with ξ
/// applied by quadrature, maximized over all orders j.
pub fn oracle_operator_residual(basis: &blindsr::pswf::PswfBasis, n_quad: usize, n_grid: usize) -> f64 {
    let (x, w) = gauss_legendre(n_quad);
    let c = basis.c;
    let n = basis.n_funcs();
    // φ_j at all quadrature nodes
    let phi_at: Vec<Vec<f64>> = x.iter().map(|&xq| basis.evaluate_all(xq).unwrap()).collect();
    let mut worst: f64 = 0.0;
    for g in 0..n_grid {
        let f = -1.0 + 2.0 * g as f64 / (n_grid - 1) as f64;
        let phi_f = basis.evaluate_all(f).unwrap();
        // ξφ_j(f) = Σ_q w_q e^{icf x_q} φ_j(x_q)
        let mut xi = vec![Complex::new(0.0, 0.0); n];
        for (q, (xq, wq)) in x.iter().zip(&w).enumerate() {
            let e = Complex::new(0.0, c * f * xq).exp() * *wq;
            for j in 0..n {
                xi[j] += e * phi_at[q][j];
            }
        }
        for j in 0..n {
            let r = (xi[j] - basis.lambdas[j] * phi_f[j]).norm();
            worst = worst.max(r);
        }
    }
    worst
}

/// Steering vector [e^{-i2πf_mτ}]_m, the direct definition.
pub fn steering(freqs: &[f64], tau: f64) -> Vec<Complex> {
    freqs.iter().map(|&f| Complex::new(0.0, -2.0 * std::f64::consts::PI * f * tau).exp()).collect()
}

/// Direct evaluation of Q_true = Σ_k c_k·c(τ_k)c(τ_k)* for a discrete
/// measure, the quantity Lemma 2's parametrization reconstructs.
pub fn oracle_measure_gram(freqs: &[f64], taus: &[f64], cks: &[f64]) -> DMatrix<Complex> {
    let m = freqs.len();
    let mut q = DMatrix::zeros(m, m);
    for (tau, ck) in taus.iter().zip(cks) {
        let s = steering(freqs, *tau);
        for j in 0..m {
            for l in 0..m {
                q[(j, l)] += Complex::new(*ck, 0.0) * s[j] * s[l].conj();
            }
        }
    }
    q
}
