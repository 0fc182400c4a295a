//! Spike extraction from the recovered Toeplitz moment matrix.
//!
//! A solved program leaves T = Σ_k c_k ω(θ_k)ω(θ_k)* with ω_p(θ) = e^{ipθ}
//! and c_k > 0. The frequencies θ_k come out of a matrix-pencil eigenvalue
//! problem on T's dominant column space (robust down to low SNR, no
//! polynomial rooting); masses come from nonnegative least squares against
//! the recovered rank-1 terms. A classical linear-prediction variant is
//! kept as a cross-check. Delays map back through τ = θ·d/(2πB_max).

use crate::{la, Complex, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Eigenvalues below this absolute level mean "T is numerically zero".
pub const RANK_ABS_FLOOR: f64 = 1e-12;

/// Default relative eigenvalue threshold for rank selection.
pub const RANK_REL_TOL: f64 = 1e-6;

/// Pencil eigenvalues closer than this are treated as degenerate. A
/// numerically double eigenvalue (confluent/Jordan pair) splits by
/// ~sqrt(machine eps) ≈ 1e-8 in f64, so the tolerance must sit above
/// that; 1e-7 still corresponds to spike separations far below anything
/// resolvable.
pub const PENCIL_GAP_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LocalizationResult {
    /// Estimated delays, sorted ascending, in [-1/2, 1/2].
    pub taus_hat: Vec<f64>,
    /// Nonnegative masses, aligned with `taus_hat`.
    pub masses: Vec<f64>,
    pub rank_used: usize,
    /// ‖T − Σ ĉ_k ω(θ̂_k)ω(θ̂_k)*‖_F / ‖T‖_F.
    pub residual: f64,
    /// Set when an estimate fell marginally outside [-1/2, 1/2] and was
    /// clipped to the boundary.
    pub clipped: bool,
}

/// Number of eigenvalues at or above `rel_tol` times the largest, capped
/// at d (a valid moment matrix of d+1 rows has rank ≤ d at re coverable
/// spike counts). A numerically-zero T reports rank 0.
pub fn estimate_rank(t: &DMatrix<Complex>, rel_tol: f64) -> Result<usize> {
    let n = t.nrows();
    if n != t.ncols() || n == 0 {
        return Err(Error::invalid("estimate_rank: T must be square and nonempty"));
    }
    let (w, _) = la::eigh_desc(t)?;
    let lam_max = w[0];
    if !(lam_max > RANK_ABS_FLOOR) {
        return Ok(0);
    }
    let k = w.iter().take_while(|&&lam| lam >= rel_tol * lam_max).count();
    Ok(k.min(n - 1))
}

/// Matrix-pencil recovery of K̂ spike delays and masses from T.
pub fn vandermonde_recover(t: &DMatrix<Complex>, k_hat: usize, b_max: f64) -> Result<LocalizationResult> {
    let n = t.nrows();
    if n != t.ncols() || n < 2 {
        return Err(Error::invalid("vandermonde_recover: T must be square with at least 2 rows"));
    }
    let d = n - 1;
    if k_hat == 0 || k_hat > d {
        return Err(Error::invalid(format!("vandermonde_recover: K̂ = {k_hat} outside 1..=d = {d}")));
    }
    if b_max <= 0.0 {
        return Err(Error::invalid("vandermonde_recover: B_max must be positive"));
    }
    let (_, vecs) = la::eigh_desc(t)?;
    let us = vecs.columns(0, k_hat).into_owned();
    // shift invariance of the signal space: rows 1.. equal rows ..n-1 times
    // a matrix similar to diag(e^{iθ_k})
    let head = us.rows(0, n - 1).into_owned();
    let tail = us.rows(1, n - 1).into_owned();
    let pencil = la::lstsq_mat(&head, &tail)?;
    let mu = la::eigvals(&pencil)?;
    let mut thetas: Vec<f64> = mu.iter().map(|m| m.arg()).collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // map to delays; clip marginal boundary overshoot and flag it
    let mut clipped = false;
    let taus: Vec<f64> = thetas
        .iter()
        .map(|&th| {
            let tau = th * d as f64 / (2.0 * std::f64::consts::PI * b_max);
            if tau.abs() > 0.5 {
                clipped = true;
                tau.clamp(-0.5, 0.5)
            } else {
                tau
            }
        })
        .collect();

    // atoms that carry no mass are not part of the recovered measure
    let masses_all = fit_masses(t, &thetas)?;
    let floor = 1e-12 * masses_all.iter().cloned().fold(0.0f64, f64::max);
    let kept: Vec<usize> = (0..thetas.len()).filter(|&i| masses_all[i] > floor).collect();
    let (taus, masses, thetas): (Vec<f64>, Vec<f64>, Vec<f64>) = if kept.is_empty() {
        (taus, masses_all, thetas)
    } else {
        (
            kept.iter().map(|&i| taus[i]).collect(),
            kept.iter().map(|&i| masses_all[i]).collect(),
            kept.iter().map(|&i| thetas[i]).collect(),
        )
    };
    let residual = reconstruction_residual(t, &thetas, &masses);
    let result = LocalizationResult { taus_hat: taus, masses, rank_used: k_hat, residual, clipped };

    // clustered pencil eigenvalues mean the Vandermonde system is singular
    // and the split into individual atoms is not trustworthy
    let mut min_gap = f64::INFINITY;
    for i in 0..mu.len() {
        for j in 0..i {
            min_gap = min_gap.min((mu[i] - mu[j]).norm());
        }
    }
    if min_gap < PENCIL_GAP_TOL {
        return Err(Error::DegenerateSpectrum {
            msg: format!("pencil eigenvalues separated by only {min_gap:.2e}"),
            partial: Box::new(result),
        });
    }
    Ok(result)
}

fn steering_dft(theta: f64, n: usize) -> DVector<Complex> {
    DVector::from_iterator(n, (0..n).map(|p| Complex::from_polar(1.0, p as f64 * theta)))
}

/// Best nonnegative masses for given frequencies: NNLS of vec(T) against
/// the stacked rank-1 terms vec(ω_kω_k*), real and imaginary parts split.
fn fit_masses(t: &DMatrix<Complex>, thetas: &[f64]) -> Result<Vec<f64>> {
    let n = t.nrows();
    let k = thetas.len();
    let mut a = DMatrix::zeros(2 * n * n, k);
    for (col, &th) in thetas.iter().enumerate() {
        let om = steering_dft(th, n);
        for q in 0..n {
            for p in 0..n {
                let val = om[p] * om[q].conj();
                a[(q * n + p, col)] = val.re;
                a[(n * n + q * n + p, col)] = val.im;
            }
        }
    }
    let mut b = DVector::zeros(2 * n * n);
    for q in 0..n {
        for p in 0..n {
            b[q * n + p] = t[(p, q)].re;
            b[n * n + q * n + p] = t[(p, q)].im;
        }
    }
    nnls(&a, &b)
}

fn reconstruction_residual(t: &DMatrix<Complex>, thetas: &[f64], masses: &[f64]) -> f64 {
    let n = t.nrows();
    let mut model: DMatrix<Complex> = DMatrix::zeros(n, n);
    for (&th, &c) in thetas.iter().zip(masses) {
        let om = steering_dft(th, n);
        for q in 0..n {
            for p in 0..n {
                model[(p, q)] += om[p] * om[q].conj() * c;
            }
        }
    }
    let tn = t.norm();
    if tn == 0.0 {
        return 0.0;
    }
    (t - model).norm() / tn
}

/// Lawson–Hanson nonnegative least squares: minimize ‖Ax − b‖ with x ≥ 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::invalid("nnls: dimension mismatch"));
    }
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut resid = b.clone();
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);
    for _outer in 0..(10 * n.max(3)) {
        // most positive gradient among the active (zero) coordinates
        let grad = a.transpose() * &resid;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && grad[j] > tol {
                if best.map_or(true, |(_, g)| grad[j] > g) {
                    best = Some((j, grad[j]));
                }
            }
        }
        let Some((enter, _)) = best else { break };
        passive[enter] = true;

        loop {
            // least squares on the passive set
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ap = a.select_columns(cols.iter());
            let sol = ap
                .svd(true, true)
                .solve(b, 1e-13)
                .map_err(|e| Error::numerical(format!("nnls inner solve: {e}")))?;
            if sol.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (idx, &j) in cols.iter().enumerate() {
                    x[j] = sol[idx];
                }
                break;
            }
            // step toward the solution until the first coordinate hits zero
            let mut alpha = f64::INFINITY;
            for (idx, &j) in cols.iter().enumerate() {
                if sol[idx] <= 0.0 {
                    let denom = x[j] - sol[idx];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (idx, &j) in cols.iter().enumerate() {
                x[j] += alpha * (sol[idx] - x[j]);
                if x[j] <= tol.max(1e-14) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        resid = b - a * &x;
    }
    Ok(x.iter().copied().collect())
}

/// Classical linear-prediction (root-finding) frequency recovery from the
/// conjugate-symmetric moment sequence, kept as a cross-check on the
/// pencil. Returns θ̂ sorted ascending.
pub fn prony_thetas(vbar: &[Complex], k: usize) -> Result<Vec<f64>> {
    let n = vbar.len();
    if k == 0 || n < 2 * k {
        return Err(Error::invalid("prony_thetas: need at least 2K moments"));
    }
    // v_{m+k} + Σ_{j<k} p_j v_{m+j} = 0 for the annihilating polynomial
    let rows = n - k;
    let mut a = DMatrix::zeros(rows, k);
    let mut rhs = DVector::zeros(rows);
    for r in 0..rows {
        for j in 0..k {
            a[(r, j)] = vbar[r + j];
        }
        rhs[r] = -vbar[r + k];
    }
    let p = la::lstsq(&a, &rhs)?;
    // companion matrix of x^k + p_{k-1}x^{k-1} + … + p_0
    let mut comp: DMatrix<Complex> = DMatrix::zeros(k, k);
    for i in 1..k {
        comp[(i, i - 1)] = Complex::new(1.0, 0.0);
    }
    for i in 0..k {
        comp[(i, k - 1)] = -p[i];
    }
    let roots = la::eigvals(&comp)?;
    // roots approximate e^{−iθ}
    let mut thetas: Vec<f64> = roots.iter().map(|r| -r.arg()).collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(thetas)
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    /// (estimated index, true index) pairs for the matched subset.
    pub pairs: Vec<(usize, usize)>,
    /// Maximum |τ̂ − τ| over matched pairs.
    pub max_error: f64,
    /// Per-pair absolute errors, aligned with `pairs`.
    pub errors: Vec<f64>,
    /// False when the cardinalities differ (counts as a failed recovery
    /// regardless of the matched errors).
    pub cardinality_match: bool,
}

/// Optimal assignment between estimated and true delays minimizing the
/// maximum absolute error (brute force; spike counts here are small).
pub fn match_spikes(taus_hat: &[f64], taus_true: &[f64]) -> Result<MatchResult> {
    if taus_hat.is_empty() || taus_true.is_empty() {
        return Err(Error::invalid("match_spikes: both lists must be nonempty"));
    }
    let (small, large, hat_is_small) = if taus_hat.len() <= taus_true.len() {
        (taus_hat, taus_true, true)
    } else {
        (taus_true, taus_hat, false)
    };
    let k = small.len();
    if large.len() > 12 {
        return Err(Error::invalid("match_spikes: more than 12 spikes is out of scope"));
    }
    // lexicographic bottleneck: try every injection of the smaller list
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut idx: Vec<usize> = (0..large.len()).collect();
    permute_injections(&mut idx, k, &mut |sel| {
        let worst = small.iter().zip(sel).map(|(&s, &j)| (s - large[j]).abs()).fold(0.0f64, f64::max);
        if best.as_ref().map_or(true, |(b, _)| worst < *b) {
            best = Some((worst, sel.to_vec()));
        }
    });
    let (max_error, sel) = best.unwrap();
    let mut pairs = Vec::with_capacity(k);
    let mut errors = Vec::with_capacity(k);
    for (i, &j) in sel.iter().enumerate() {
        let (hi, ti) = if hat_is_small { (i, j) } else { (j, i) };
        pairs.push((hi, ti));
        errors.push((taus_hat[hi] - taus_true[ti]).abs());
    }
    Ok(MatchResult { pairs, max_error, errors, cardinality_match: taus_hat.len() == taus_true.len() })
}

/// Visit every ordered selection of `k` distinct entries of `idx`
/// (prefix-swap enumeration).
fn permute_injections(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(idx: &mut Vec<usize>, pos: usize, k: usize, visit: &mut impl FnMut(&[usize])) {
        if pos == k {
            visit(&idx[..k]);
            return;
        }
        for i in pos..idx.len() {
            idx.swap(pos, i);
            rec(idx, pos + 1, k, visit);
            idx.swap(pos, i);
        }
    }
    rec(idx, 0, k, visit);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::MomentVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const PI: f64 = std::f64::consts::PI;

    fn synth_t(thetas: &[f64], masses: &[f64], d: usize) -> DMatrix<Complex> {
        MomentVector::from_point_masses(thetas, masses, d).toeplitz()
    }

    #[test]
    fn all_ones_matrix_has_rank_one() {
        let t = synth_t(&[0.0], &[1.0], 10);
        assert_eq!(estimate_rank(&t, RANK_REL_TOL).unwrap(), 1);
    }

    #[test]
    fn exact_four_spike_matrix_has_rank_four() {
        let d = 12;
        let thetas = [-1.4, -0.3, 0.55, 1.9];
        let masses = [0.5, 1.0, 0.75, 1.25];
        let t = synth_t(&thetas, &masses, d);
        assert_eq!(estimate_rank(&t, RANK_REL_TOL).unwrap(), 4);
    }

    #[test]
    fn rank_is_stable_under_tiny_perturbations() {
        let d = 12;
        let t0 = synth_t(&[-0.9, 0.2, 1.1], &[1.0, 0.6, 0.9], d);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut t = t0.clone();
        for q in 0..=d {
            for p in 0..=q {
                let dz = Complex::new(rng.gen::<f64>() - 0.5, if p == q { 0.0 } else { rng.gen::<f64>() - 0.5 })
                    * 1e-9;
                t[(p, q)] += dz;
                if p != q {
                    t[(q, p)] += dz.conj();
                }
            }
        }
        assert_eq!(estimate_rank(&t0, RANK_REL_TOL).unwrap(), estimate_rank(&t, RANK_REL_TOL).unwrap());
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let t: DMatrix<Complex> = DMatrix::zeros(8, 8);
        assert_eq!(estimate_rank(&t, RANK_REL_TOL).unwrap(), 0);
    }

    #[test]
    fn single_spike_at_origin_recovers_exactly() {
        let t = synth_t(&[0.0], &[2.5], 9);
        let res = vandermonde_recover(&t, 1, 8.0).unwrap();
        assert!(res.taus_hat[0].abs() < 1e-12);
        assert!((res.masses[0] - 2.5).abs() < 1e-10);
        assert!(res.residual < 1e-12);
        assert!(!res.clipped);
    }

    #[test]
    fn three_spikes_from_exact_moments_are_recovered_to_machine_precision() {
        let d = 14;
        let b_max = 8.0;
        let taus = [-0.31, 0.02, 0.4];
        let masses = [1.3, 0.7, 2.1];
        let thetas: Vec<f64> = taus.iter().map(|t| 2.0 * PI * t * b_max / d as f64).collect();
        let t = synth_t(&thetas, &masses, d);
        let res = vandermonde_recover(&t, 3, b_max).unwrap();
        for (i, &tau) in taus.iter().enumerate() {
            assert!((res.taus_hat[i] - tau).abs() < 1e-10, "τ {i}: {} vs {tau}", res.taus_hat[i]);
            assert!((res.masses[i] - masses[i]).abs() < 1e-10, "mass {i}");
        }
        assert!(res.residual < 1e-12);
    }

    #[test]
    fn recovery_is_exact_across_random_well_separated_draws() {
        // property: K ≤ d/2 spikes inside the arc with |θ_i − θ_j| ≥ 2π/d
        // reconstruct to better than 1e-9 in both θ and mass
        let d = 16;
        let b_max = 8.0;
        let theta0 = PI * b_max / d as f64;
        let gap = 2.0 * PI / d as f64;
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for trial in 0..25 {
            let k = 1 + (trial % (d / 2));
            // uniform over valid configurations: sort k draws in the free
            // volume, then re-insert the mandatory gaps
            let arc = 2.0 * theta0 * 0.999;
            let free = arc - (k as f64 - 1.0) * gap;
            assert!(free > 0.0, "arc cannot hold {k} separated spikes");
            let mut offs: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * free).collect();
            offs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let thetas: Vec<f64> =
                offs.iter().enumerate().map(|(i, o)| -arc / 2.0 + o + i as f64 * gap).collect();
            let masses: Vec<f64> = (0..k).map(|_| 0.2 + rng.gen::<f64>()).collect();
            let t = synth_t(&thetas, &masses, d);
            let res = vandermonde_recover(&t, k, b_max).unwrap();
            assert_eq!(res.taus_hat.len(), k, "trial {trial} cardinality");
            for i in 0..k {
                let theta_hat = res.taus_hat[i] * 2.0 * PI * b_max / d as f64;
                assert!((theta_hat - thetas[i]).abs() < 1e-9, "trial {trial} θ error");
                assert!((res.masses[i] - masses[i]).abs() < 1e-9, "trial {trial} mass error");
            }
        }
    }

    #[test]
    fn boundary_delays_round_trip_to_the_arc_edges() {
        // τ = ±1/2 ↔ θ = ±πB_max/d exactly
        let d = 11;
        let b_max = 4.0;
        let theta0 = PI * b_max / d as f64;
        for (tau, theta) in [(0.5, theta0), (-0.5, -theta0)] {
            let got = theta * d as f64 / (2.0 * PI * b_max);
            assert_eq!(got, tau);
        }
    }

    #[test]
    fn conjugating_t_negates_every_frequency() {
        let d = 12;
        let b_max = 6.0;
        let thetas = [-1.2, 0.4, 1.7];
        let masses = [1.0, 0.5, 0.8];
        let t = synth_t(&thetas, &masses, d);
        let a = vandermonde_recover(&t, 3, b_max).unwrap();
        let b = vandermonde_recover(&t.map(|z| z.conj()), 3, b_max).unwrap();
        for (ta, tb) in a.taus_hat.iter().zip(b.taus_hat.iter().rev()) {
            assert!((ta + tb).abs() < 1e-10, "{ta} vs {tb}");
        }
    }

    #[test]
    fn reported_residual_matches_an_independent_recomputation() {
        let d = 10;
        let thetas = [-0.8, 0.9];
        let masses = [1.0, 1.4];
        let mut t = synth_t(&thetas, &masses, d);
        // perturb so the residual is nonzero
        t[(0, 0)] += Complex::new(1e-3, 0.0);
        let res = vandermonde_recover(&t, 2, 8.0).unwrap();
        let om = |th: f64| steering_dft(th, d + 1);
        let mut model: DMatrix<Complex> = DMatrix::zeros(d + 1, d + 1);
        for (i, &tau) in res.taus_hat.iter().enumerate() {
            let th = tau * 2.0 * PI * 8.0 / d as f64;
            let o = om(th);
            for q in 0..=d {
                for p in 0..=d {
                    model[(p, q)] += o[p] * o[q].conj() * res.masses[i];
                }
            }
        }
        let independent = (&t - model).norm() / t.norm();
        assert!((independent - res.residual).abs() < 1e-12);
    }

    #[test]
    fn confluent_pair_raises_a_degenerate_spectrum_error() {
        // T = AA* with A = [ω(θ), 0.1·ω̇(θ)] is genuinely rank 2 but its
        // column space is shift-invariant with a double eigenvalue e^{iθ}
        // (a Jordan pair), so the atoms cannot be separated
        let d = 10;
        let theta = 0.7;
        let mut a: DMatrix<Complex> = DMatrix::zeros(d + 1, 2);
        for p in 0..=d {
            let e = Complex::from_polar(1.0, p as f64 * theta);
            a[(p, 0)] = e;
            a[(p, 1)] = Complex::new(0.0, 0.1 * p as f64) * e;
        }
        let t = &a * a.adjoint();
        assert_eq!(estimate_rank(&t, RANK_REL_TOL).unwrap(), 2);
        match vandermonde_recover(&t, 2, 8.0) {
            Err(Error::DegenerateSpectrum { partial, .. }) => {
                assert_eq!(partial.rank_used, 2);
                // the shared frequency is still localized correctly
                let tau = theta * d as f64 / (2.0 * PI * 8.0);
                assert!(partial.taus_hat.iter().all(|t| (t - tau).abs() < 1e-6));
            }
            other => panic!("expected degenerate-spectrum error, got {other:?}"),
        }
    }

    #[test]
    fn prony_cross_check_agrees_with_the_pencil() {
        let d = 14;
        let thetas = [-1.1, -0.2, 0.9];
        let masses = [0.9, 1.2, 0.4];
        let v = MomentVector::from_point_masses(&thetas, &masses, d);
        let got = prony_thetas(&v.bar(), 3).unwrap();
        for (g, e) in got.iter().zip(&thetas) {
            assert!((g - e).abs() < 1e-9, "{g} vs {e}");
        }
        let res = vandermonde_recover(&v.toeplitz(), 3, 8.0).unwrap();
        let taus_from_prony: Vec<f64> =
            got.iter().map(|&th| th * d as f64 / (2.0 * PI * 8.0)).collect();
        for (a, b) in res.taus_hat.iter().zip(&taus_from_prony) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_and_permuted_lists_match_exactly() {
        let a = [-0.3, 0.1, 0.4];
        let m = match_spikes(&a, &a).unwrap();
        assert_eq!(m.max_error, 0.0);
        assert!(m.cardinality_match);

        let b = [0.4, -0.3, 0.1];
        let m = match_spikes(&b, &a).unwrap();
        assert_eq!(m.max_error, 0.0);
    }

    #[test]
    fn spurious_extra_spike_fails_the_cardinality_check() {
        let truth = [-0.2, 0.3];
        let est = [-0.2, 0.1, 0.3];
        let m = match_spikes(&est, &truth).unwrap();
        assert!(!m.cardinality_match);
        assert!(m.max_error < 1e-12, "matched subset should align perfectly");
    }

    #[test]
    fn bottleneck_matching_beats_greedy_pairing() {
        // sorted greedy pairing of these lists gives max error 0.3; the
        // optimal assignment is 0.2
        let truth = [0.0, 0.5];
        let est = [0.2, 0.3];
        let m = match_spikes(&est, &truth).unwrap();
        assert!((m.max_error - 0.2).abs() < 1e-12, "max err {}", m.max_error);
    }

    #[test]
    fn nnls_matches_a_clamped_small_problem() {
        // unconstrained optimum has a negative coordinate; NNLS clamps it
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_row_slice(&[1.0, -2.0, 0.0]);
        let x = nnls(&a, &b).unwrap();
        assert!(x.iter().all(|&v| v >= 0.0));
        // grid oracle over x ≥ 0
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=200 {
            for j in 0..=200 {
                let (x0, x1) = (i as f64 * 0.01, j as f64 * 0.01);
                let r = (x0 - 1.0).powi(2) + (x1 + 2.0).powi(2) + (x0 + x1).powi(2);
                if r < best.0 {
                    best = (r, x0, x1);
                }
            }
        }
        assert!((x[0] - best.1).abs() < 0.02 && (x[1] - best.2).abs() < 0.02, "{x:?} vs {best:?}");
    }
}
