//! Demixing the solved lifted matrix back into signal and PSF factors.
//!
//! Ẑ ≈ x hᵀ only determines the pair up to a nonzero complex scale, so
//! the factorization fixes a convention: ‖ĥ‖ = 1 with the
//! largest-modulus entry of ĥ real positive. Amplitudes over given spike
//! locations and the sampled PSF g = Sĥ are provided as optional
//! post-processing; the program itself never needs them.

use crate::signal::{steering_vector, SamplingScheme, SubspaceModel};
use crate::{la, Complex, Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Rank1Factors {
    pub x_hat: DVector<Complex>,
    /// Unit norm; largest-modulus entry real positive.
    pub h_hat: DVector<Complex>,
    pub sigma1: f64,
    /// σ₂/σ₁ — how far the input is from exactly rank 1 (0 for a 1-column
    /// input, which is always rank ≤ 1).
    pub spectral_ratio: f64,
}

/// Factor Ẑ into its best rank-1 approximation σ₁u₁v₁* and resolve the
/// scale ambiguity so that x̂ĥᵀ = σ₁u₁v₁*.
pub fn factor_rank1(z_hat: &DMatrix<Complex>) -> Result<Rank1Factors> {
    let svd = z_hat.clone().svd(true, true);
    let sv = &svd.singular_values;
    let sigma1 = sv[0];
    if !(sigma1 > 0.0) {
        return Err(Error::numerical("factor_rank1: zero matrix has no rank-1 factor"));
    }
    let u1 = svd.u.as_ref().unwrap().column(0).into_owned();
    // nalgebra stores V*, so its first row is already conj(v₁)ᵀ
    let h0: DVector<Complex> = svd.v_t.as_ref().unwrap().row(0).transpose().into_owned();
    let lead = (0..h0.len()).max_by(|&a, &b| h0[a].norm().partial_cmp(&h0[b].norm()).unwrap()).unwrap();
    let phase = h0[lead] / h0[lead].norm();
    let h_hat = h0.map(|v| v / phase);
    let x_hat = u1.map(|v| v * phase * sigma1);
    let spectral_ratio = if sv.len() > 1 { sv[1] / sigma1 } else { 0.0 };
    Ok(Rank1Factors { x_hat, h_hat, sigma1, spectral_ratio })
}

#[derive(Debug, Clone)]
pub struct AmplitudeFit {
    /// Aligned with the input delays.
    pub a_hat: Vec<Complex>,
    /// ‖x̂ − C â‖ / ‖x̂‖.
    pub residual: f64,
    /// Condition number of the steering matrix.
    pub cond: f64,
    /// Set when cond exceeds 1e8 and the fit should not be trusted.
    pub ill_conditioned: bool,
}

/// Least-squares amplitudes over the steering matrix C = [c(τ̂_1) … c(τ̂_K)].
pub fn solve_amplitudes(
    x_hat: &DVector<Complex>,
    taus_hat: &[f64],
    scheme: &SamplingScheme,
) -> Result<AmplitudeFit> {
    if taus_hat.is_empty() {
        return Err(Error::invalid("solve_amplitudes: need at least one delay"));
    }
    let m = scheme.m();
    if x_hat.len() != m {
        return Err(Error::invalid("solve_amplitudes: x length must match the scheme"));
    }
    let mut c = DMatrix::zeros(m, taus_hat.len());
    for (k, &tau) in taus_hat.iter().enumerate() {
        c.set_column(k, &steering_vector(tau, scheme)?);
    }
    let sv = c.clone().svd(false, false).singular_values;
    let smin = sv[sv.len() - 1];
    let cond = if smin > 0.0 { sv[0] / smin } else { f64::INFINITY };
    let a = la::lstsq(&c, x_hat)?;
    let xn = x_hat.norm();
    let residual = if xn > 0.0 { (x_hat - &c * &a).norm() / xn } else { 0.0 };
    Ok(AmplitudeFit { a_hat: a.iter().copied().collect(), residual, cond, ill_conditioned: cond > 1e8 })
}

/// The PSF on the sampling grid: ĝ = S ĥ.
pub fn reconstruct_psf(subspace: &SubspaceModel, h_hat: &DVector<Complex>) -> Result<DVector<Complex>> {
    if h_hat.len() != subspace.l() {
        return Err(Error::invalid("reconstruct_psf: h length must equal the subspace dimension"));
    }
    Ok(&subspace.s_matrix * h_hat)
}

/// |⟨a, b⟩| / (‖a‖‖b‖): 1 means equal up to a complex scale.
pub fn correlation(a: &DVector<Complex>, b: &DVector<Complex>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dotc(b).norm() / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rand_vec(n: usize, rng: &mut ChaCha20Rng) -> DVector<Complex> {
        DVector::from_iterator(n, (0..n).map(|_| Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)))
    }

    fn outer(x: &DVector<Complex>, h: &DVector<Complex>) -> DMatrix<Complex> {
        x * h.transpose()
    }

    #[test]
    fn exact_rank1_round_trips_within_1e10() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let x = rand_vec(9, &mut rng);
        let h = rand_vec(3, &mut rng);
        let z = outer(&x, &h);
        let f = factor_rank1(&z).unwrap();
        let back = outer(&f.x_hat, &f.h_hat);
        assert!((&back - &z).norm() < 1e-10 * z.norm());
        assert!((f.h_hat.norm() - 1.0).abs() < 1e-12);
        let lead = (0..3).max_by(|&a, &b| f.h_hat[a].norm().partial_cmp(&f.h_hat[b].norm()).unwrap()).unwrap();
        assert!(f.h_hat[lead].im.abs() < 1e-12 && f.h_hat[lead].re > 0.0);
        assert!(f.spectral_ratio < 1e-14);
    }

    #[test]
    fn global_phase_is_absorbed_by_the_convention() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let x = rand_vec(7, &mut rng);
        let h = rand_vec(2, &mut rng);
        let z = outer(&x, &h);
        let rot = z.map(|v| v * Complex::from_polar(1.0, 1.2345));
        let a = factor_rank1(&z).unwrap();
        let b = factor_rank1(&rot).unwrap();
        assert!((&a.h_hat - &b.h_hat).norm() < 1e-10);
    }

    #[test]
    fn scaling_z_scales_x_and_leaves_h_fixed() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let x = rand_vec(8, &mut rng);
        let h = rand_vec(3, &mut rng);
        let z = outer(&x, &h);
        let alpha = Complex::new(-2.2, 0.7);
        let scaled = z.map(|v| v * alpha);
        let a = factor_rank1(&z).unwrap();
        let b = factor_rank1(&scaled).unwrap();
        assert!((&a.h_hat - &b.h_hat).norm() < 1e-10);
        assert!((&b.x_hat - a.x_hat.map(|v| v * alpha)).norm() < 1e-10 * b.x_hat.norm());
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let z: DMatrix<Complex> = DMatrix::zeros(5, 2);
        assert!(factor_rank1(&z).is_err());
    }

    #[test]
    fn spectral_ratio_tracks_the_rank2_contamination() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let x = rand_vec(10, &mut rng);
        let h = rand_vec(3, &mut rng);
        let x2 = rand_vec(10, &mut rng);
        let h2 = rand_vec(3, &mut rng);
        let z = outer(&x, &h);
        let eps = 1e-6;
        let contaminated = &z + outer(&x2, &h2).map(|v| v * eps);
        let f = factor_rank1(&contaminated).unwrap();
        assert!(f.spectral_ratio > 1e-8 && f.spectral_ratio < 1e-4, "ratio {}", f.spectral_ratio);
    }

    fn test_scheme(m: usize, b_max: f64, seed: u64) -> SamplingScheme {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        crate::signal::sample_frequencies(m, b_max, &mut rng).unwrap()
    }

    #[test]
    fn amplitudes_of_a_consistent_system_are_exact() {
        let scheme = test_scheme(12, 6.0, 21);
        let taus = [-0.3, 0.05, 0.42];
        let amps = [Complex::new(1.0, 0.5), Complex::new(-0.7, 0.2), Complex::new(0.3, -1.1)];
        let mut x = DVector::from_element(12, Complex::new(0.0, 0.0));
        for (&t, &a) in taus.iter().zip(&amps) {
            x += steering_vector(t, &scheme).unwrap() * a;
        }
        let fit = solve_amplitudes(&x, &taus, &scheme).unwrap();
        for (got, want) in fit.a_hat.iter().zip(&amps) {
            assert!((got - want).norm() < 1e-10);
        }
        assert!(fit.residual < 1e-12);
        assert!(!fit.ill_conditioned);
    }

    #[test]
    fn single_spike_at_zero_gives_the_mean() {
        let scheme = test_scheme(9, 4.0, 22);
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let x = rand_vec(9, &mut rng);
        let fit = solve_amplitudes(&x, &[0.0], &scheme).unwrap();
        let mean = x.iter().sum::<Complex>() / Complex::new(9.0, 0.0);
        assert!((fit.a_hat[0] - mean).norm() < 1e-12);
    }

    #[test]
    fn amplitude_error_grows_linearly_and_is_bounded_by_the_pseudoinverse() {
        let scheme = test_scheme(14, 6.0, 24);
        let taus = [-0.25, 0.1, 0.37];
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        let mut c = DMatrix::zeros(14, 3);
        for (k, &tau) in taus.iter().enumerate() {
            c.set_column(k, &steering_vector(tau, &scheme).unwrap());
        }
        let a_true = rand_vec(3, &mut rng);
        let x = &c * &a_true;
        let delta = rand_vec(14, &mut rng);
        let sv = c.clone().svd(false, false).singular_values;
        let pinv_norm = 1.0 / sv[sv.len() - 1];
        let mut errs = Vec::new();
        for scale in [1e-6, 1e-4] {
            let xp = &x + delta.map(|v| v * scale);
            let fit = solve_amplitudes(&xp, &taus, &scheme).unwrap();
            let err = DVector::from_iterator(3, fit.a_hat.iter().copied())
                .iter()
                .zip(a_true.iter())
                .map(|(g, w)| (g - w).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err <= pinv_norm * scale * delta.norm() * (1.0 + 1e-8), "bound violated");
            errs.push(err);
        }
        // least squares is linear in the data: same direction, 100× size
        let ratio = errs[1] / errs[0];
        assert!((ratio - 100.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn near_duplicate_delays_set_the_conditioning_flag() {
        let scheme = test_scheme(10, 5.0, 26);
        let mut rng = ChaCha20Rng::seed_from_u64(27);
        let x = rand_vec(10, &mut rng);
        let fit = solve_amplitudes(&x, &[0.2, 0.2 + 1e-12], &scheme).unwrap();
        assert!(fit.ill_conditioned);
        assert!(fit.cond > 1e8);
    }

    #[test]
    fn psf_from_an_orthogonal_subspace_picks_the_first_column() {
        let mut s: DMatrix<Complex> = DMatrix::zeros(6, 2);
        for i in 0..3 {
            s[(i, 0)] = Complex::new(1.0, 0.0);
            s[(3 + i, 1)] = Complex::new(1.0, 0.0);
        }
        let subspace = SubspaceModel::new(s.clone(), DVector::from_element(2, Complex::new(1.0, 0.0))).unwrap();
        let h = DVector::from_iterator(2, [Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)]);
        let g = reconstruct_psf(&subspace, &h).unwrap();
        assert_eq!(g, s.column(0).into_owned());
    }

    #[test]
    fn true_h_reconstructs_a_perfectly_correlated_psf() {
        let mut rng = ChaCha20Rng::seed_from_u64(28);
        let s = DMatrix::from_fn(8, 3, |_, _| Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let h = rand_vec(3, &mut rng);
        let subspace = SubspaceModel::new(s, h.clone()).unwrap();
        let g_true = reconstruct_psf(&subspace, &h).unwrap();
        // any unit-phase, unit-norm rescaling of h gives correlation 1
        let h_conv = h.map(|v| v * Complex::from_polar(0.5, 0.9));
        let g_hat = reconstruct_psf(&subspace, &h_conv).unwrap();
        assert!((correlation(&g_hat, &g_true) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn factor_then_amplitudes_reproduces_scaled_ground_truth() {
        // composition: â_k ĥ = a_k h for every k, whatever phase/scale the
        // convention picked
        let scheme = test_scheme(11, 5.0, 29);
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        let taus = [-0.2, 0.15];
        let amps = [Complex::new(0.8, -0.3), Complex::new(-0.4, 1.1)];
        let h = rand_vec(3, &mut rng);
        let mut x = DVector::from_element(11, Complex::new(0.0, 0.0));
        for (&t, &a) in taus.iter().zip(&amps) {
            x += steering_vector(t, &scheme).unwrap() * a;
        }
        let z = outer(&x, &h);
        let f = factor_rank1(&z).unwrap();
        let fit = solve_amplitudes(&f.x_hat, &taus, &scheme).unwrap();
        for (ah, &a) in fit.a_hat.iter().zip(&amps) {
            let lhs = f.h_hat.map(|v| v * *ah);
            let rhs = h.map(|v| v * a);
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }
}
