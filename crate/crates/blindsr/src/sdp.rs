//! Atomic-norm SDP for the lifted blind-deconvolution problem.
//!
//! The decision matrix Z = x hᵀ (M×L) is characterized by the program
//!
//!   minimize ½(Tr W + e*Q e)
//!   s.t. [[W, Z*], [Z, Q]] ⪰ 0,   Q_jl = h_jlᵀ Φ⁻¹ v̄,
//!        T = toep(v_0..v_d) ⪰ 0,   Ψ(T) ⪰ 0,
//!
//! plus either exact measurement equalities y = Υ(Z) or a quadratic data
//! penalty (1/γ)‖ŷ − Υ(Z)‖² when the samples are noisy. Here v̄ is the
//! conjugate-symmetric moment vector [v_d*,…,v_0,…,v_d] of a positive
//! measure supported on the arc |θ| ≤ θ0, and Ψ is the linear map whose
//! joint positivity with T certifies that arc support.
//!
//! Conditioning note: the solver never sees v̄ directly. We optimize over
//! the basis coefficients g = Φ⁻¹v̄ (conjugate symmetry of v̄ makes g_j real
//! for even j and purely imaginary for odd j, so g packs into one real
//! vector r). Then Q_jl = h_jlᵀg and v̄_n = Σ_j φ_j(n/d)·g_j are both O(1)
//! maps, whereas eliminating g against Φ (condition number ~1e8 at
//! B_max = 16) produces coefficient vectors with entries in the millions
//! and defeats f64 interior-point solvers.

use crate::conic::{
    solve_conic, ConicProgram, ConicSolution, ProgramBuilder, SolveOptions, SolveStatus,
};
use crate::pswf::PswfBasis;
use crate::signal::SamplingScheme;
use crate::{Complex, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Generalized trigonometric moments v_0..v_d of the recovered measure;
/// v_0 is real and v_{-k} = v_k* is implied.
#[derive(Debug, Clone)]
pub struct MomentVector {
    pub v: Vec<Complex>,
}

impl MomentVector {
    pub fn new(v: Vec<Complex>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::invalid("MomentVector: need at least v_0"));
        }
        if v[0].im.abs() > 1e-9 * (1.0 + v[0].re.abs()) {
            return Err(Error::invalid(format!("MomentVector: v_0 must be real, got im {}", v[0].im)));
        }
        Ok(MomentVector { v })
    }

    /// Moments of the point measure Σ_k c_k δ_{θ_k}: v_n = Σ_k c_k e^{-inθ_k}.
    pub fn from_point_masses(thetas: &[f64], masses: &[f64], d: usize) -> Self {
        let v = (0..=d)
            .map(|n| {
                thetas
                    .iter()
                    .zip(masses)
                    .map(|(&th, &c)| Complex::from_polar(c, -(n as f64) * th))
                    .sum()
            })
            .collect();
        MomentVector { v }
    }

    pub fn d(&self) -> usize {
        self.v.len() - 1
    }

    /// Full conjugate-symmetric vector [v_d*,…,v_1*,v_0,v_1,…,v_d].
    pub fn bar(&self) -> Vec<Complex> {
        let d = self.d();
        let mut out = Vec::with_capacity(2 * d + 1);
        for k in (1..=d).rev() {
            out.push(self.v[k].conj());
        }
        out.extend(self.v.iter().copied());
        out
    }

    /// Hermitian Toeplitz matrix T with T[p, q] = v_{q−p}.
    pub fn toeplitz(&self) -> DMatrix<Complex> {
        let n = self.v.len();
        DMatrix::from_fn(n, n, |p, q| {
            if q >= p {
                self.v[q - p]
            } else {
                self.v[p - q].conj()
            }
        })
    }
}

/// Arc-support test operator: for T = toep(v), Ψ(T) ⪰ 0 together with
/// T ⪰ 0 certifies that v are the moments of a positive measure supported
/// on |θ| ≤ θ0. Defined for any Hermitian (d+1)×(d+1) input by
/// tan²(θ0/2)·(J1+J2)T(J1+J2)* − (J1−J2)T(J1−J2)* with J1 = [I_d 0],
/// J2 = [0 I_d].
pub fn psi_operator(t: &DMatrix<Complex>, theta0: f64) -> Result<DMatrix<Complex>> {
    if !(theta0 > 0.0 && theta0 < std::f64::consts::PI) {
        return Err(Error::Config(format!("psi_operator: θ0 = {theta0} outside (0, π)")));
    }
    let n = t.nrows();
    if n != t.ncols() || n < 2 {
        return Err(Error::invalid("psi_operator: need a square matrix of size ≥ 2"));
    }
    let d = n - 1;
    let t2 = (theta0 / 2.0).tan().powi(2);
    let mut out = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let sum = t[(a, b)] + t[(a, b + 1)] + t[(a + 1, b)] + t[(a + 1, b + 1)];
            let dif = t[(a, b)] - t[(a, b + 1)] - t[(a + 1, b)] + t[(a + 1, b + 1)];
            out[(a, b)] = sum * t2 - dif;
        }
    }
    Ok(out)
}

/// Default noisy-fit weight γ = σ·√(M·ln B_max).
pub fn gamma_default(sigma: f64, m: usize, b_max: f64) -> f64 {
    sigma * (m as f64 * b_max.ln()).sqrt()
}

/// Cached coefficient vectors m_jl with Q_jl = m_jlᵀ·[v_d*,…,v_0,…,v_d]ᵀ.
///
/// Obtained by solving Φᵀ m = h_jl per frequency pair (no explicit
/// inverse); only the upper triangle is solved — reversing m_jl gives
/// m_lj exactly, by the parity symmetry of the PSWF nodes.
pub struct QParametrization {
    m: usize,
    d: usize,
    coeffs: Vec<DVector<f64>>,
}

pub fn q_parametrization(basis: &PswfBasis, scheme: &SamplingScheme) -> Result<QParametrization> {
    check_band(basis, scheme)?;
    let m = scheme.m();
    let phi = basis.phi_matrix()?;
    let n = basis.n_funcs();
    let mut coeffs = vec![DVector::zeros(n); m * m];
    for j in 0..m {
        for l in j..m {
            let delta = (scheme.freqs[j] - scheme.freqs[l]) / scheme.b_max;
            let h = DVector::from_vec(basis.h_vector(delta)?);
            let mjl = phi.solve_t(&h)?;
            coeffs[l * m + j] = DVector::from_iterator(n, mjl.iter().rev().copied());
            coeffs[j * m + l] = mjl;
        }
    }
    Ok(QParametrization { m, d: basis.d, coeffs })
}

impl QParametrization {
    pub fn coefficient(&self, j: usize, l: usize) -> &DVector<f64> {
        &self.coeffs[j * self.m + l]
    }

    pub fn q_entry(&self, j: usize, l: usize, v: &MomentVector) -> Result<Complex> {
        if v.d() != self.d {
            return Err(Error::invalid("q_entry: moment vector length does not match basis order"));
        }
        let vbar = v.bar();
        Ok(self.coefficient(j, l).iter().zip(&vbar).map(|(&m, &vb)| vb * m).sum())
    }

    pub fn q_matrix(&self, v: &MomentVector) -> Result<DMatrix<Complex>> {
        if v.d() != self.d {
            return Err(Error::invalid("q_matrix: moment vector length does not match basis order"));
        }
        let vbar = v.bar();
        let m = self.m;
        let mut q = DMatrix::zeros(m, m);
        for j in 0..m {
            for l in 0..m {
                q[(j, l)] = self.coefficient(j, l).iter().zip(&vbar).map(|(&mm, &vb)| vb * mm).sum();
            }
        }
        Ok(q)
    }
}

fn check_band(basis: &PswfBasis, scheme: &SamplingScheme) -> Result<()> {
    if (basis.b_max - scheme.b_max).abs() > 1e-12 * basis.b_max {
        return Err(Error::invalid(format!(
            "basis bandwidth {} does not match sampling bandwidth {}",
            basis.b_max, scheme.b_max
        )));
    }
    Ok(())
}

/// Variable layout of the assembled program: basis coefficients r, the
/// Gram block W (diagonal, then lower-pair re/im), then Z split re/im.
#[derive(Debug, Clone, Copy)]
pub struct VarLayout {
    pub d: usize,
    pub m: usize,
    pub l: usize,
    pub n_r: usize,
    pub w_off: usize,
    pub n_w: usize,
    pub z_off: Option<usize>,
    pub n_vars: usize,
    pub real_w: bool,
}

impl VarLayout {
    fn new(d: usize, m: usize, l: usize, real_w: bool, with_z: bool) -> Self {
        let n_r = 2 * d + 1;
        let per_pair = if real_w { 1 } else { 2 };
        let n_w = l + l * (l - 1) / 2 * per_pair;
        let z_off = with_z.then_some(n_r + n_w);
        let n_vars = n_r + n_w + if with_z { 2 * m * l } else { 0 };
        VarLayout { d, m, l, n_r, w_off: n_r, n_w, z_off, n_vars, real_w }
    }

    pub fn r(&self, k: usize) -> usize {
        debug_assert!(k < self.n_r);
        k
    }

    pub fn w_diag(&self, p: usize) -> usize {
        self.w_off + p
    }

    /// Variables holding W[p, q] for p > q: (re, im); im is absent when W
    /// is restricted to real symmetric.
    pub fn w_pair(&self, p: usize, q: usize) -> (usize, Option<usize>) {
        debug_assert!(p > q);
        let per_pair = if self.real_w { 1 } else { 2 };
        let base = self.w_off + self.l + (p * (p - 1) / 2 + q) * per_pair;
        (base, (!self.real_w).then_some(base + 1))
    }

    pub fn z_re(&self, i: usize, l: usize) -> usize {
        self.z_off.expect("layout has no Z variables") + i * self.l + l
    }

    pub fn z_im(&self, i: usize, l: usize) -> usize {
        self.z_off.expect("layout has no Z variables") + self.m * self.l + i * self.l + l
    }
}

/// Recovered blocks of a solved program, plus the solver report.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub w: DMatrix<Complex>,
    pub v: MomentVector,
    pub q: DMatrix<Complex>,
    pub z: DMatrix<Complex>,
    pub objective: f64,
    pub report: ConicSolution,
    pub warnings: Vec<String>,
}

impl SdpSolution {
    pub fn t(&self) -> DMatrix<Complex> {
        self.v.toeplitz()
    }

    /// Assemble [[W, Z*], [Z, Q]] for feasibility checks.
    pub fn lmi(&self) -> DMatrix<Complex> {
        let (m, l) = self.z.shape();
        let n = l + m;
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (l, l)).copy_from(&self.w);
        out.view_mut((0, l), (l, m)).copy_from(&self.z.adjoint());
        out.view_mut((l, 0), (m, l)).copy_from(&self.z);
        for j in 0..m {
            for i in 0..m {
                out[(l + j, l + i)] = self.q[(j, i)];
            }
        }
        out
    }

    pub fn trace_identity_gap(&self, e_index: usize) -> f64 {
        let trw: f64 = (0..self.w.nrows()).map(|p| self.w[(p, p)].re).sum();
        (trw - self.q[(e_index, e_index)].re).abs()
    }

    pub fn q_diag_spread(&self) -> f64 {
        let q00 = self.q[(0, 0)];
        (0..self.q.nrows()).map(|j| (self.q[(j, j)] - q00).norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let cplx = |z: &Complex| serde_json::json!({"re": z.re, "im": z.im});
        let mat = |m: &DMatrix<Complex>| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| cplx(&m[(i, j)])).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        serde_json::json!({
            "objective": self.objective,
            "status": self.report.status.to_string(),
            "iterations": self.report.iterations,
            "solve_ms": self.report.solve_ms,
            "r_primal": self.report.r_primal,
            "r_dual": self.report.r_dual,
            "duality_gap": self.report.gap(),
            "v": self.v.v.iter().map(&cplx).collect::<Vec<_>>(),
            "w": mat(&self.w),
            "z": mat(&self.z),
            "warnings": self.warnings,
        })
    }
}

enum DataTerm<'a> {
    /// Noiseless: y = Υ(Z) as equality rows.
    Equalities(&'a [Complex]),
    /// Noisy: add (1/γ)‖y − Υ(Z)‖² to the objective.
    Penalty { y: &'a [Complex], gamma: f64 },
    /// Atomic-norm evaluation: Z is a constant, no data constraint.
    FixedZ(&'a DMatrix<Complex>),
}

/// Assembly context: kernel samples h_jl, the node evaluations that map
/// coefficients to moments, and the subspace matrix S.
pub struct AtomicSdp {
    d: usize,
    m: usize,
    l: usize,
    theta0: f64,
    /// h_jl = [φ_0..φ_2d]((f_j − f_l)/B_max), index j·M + l.
    hjl: Vec<Vec<f64>>,
    /// pn[k][j] = φ_j(k/d): maps coefficients g to moments v_k = pn[k]·g.
    pn: Vec<Vec<f64>>,
    s: DMatrix<Complex>,
    e_index: usize,
    real_w: bool,
}

impl AtomicSdp {
    pub fn new(basis: &PswfBasis, scheme: &SamplingScheme, s: &DMatrix<Complex>) -> Result<Self> {
        check_band(basis, scheme)?;
        let m = scheme.m();
        let l = s.ncols();
        if s.nrows() != m {
            return Err(Error::invalid(format!(
                "subspace matrix has {} rows but the scheme has {} frequencies",
                s.nrows(),
                m
            )));
        }
        if l == 0 {
            return Err(Error::invalid("subspace matrix has no columns"));
        }
        let mut hjl = Vec::with_capacity(m * m);
        for j in 0..m {
            for ll in 0..m {
                let delta = (scheme.freqs[j] - scheme.freqs[ll]) / scheme.b_max;
                hjl.push(basis.h_vector(delta)?);
            }
        }
        let d = basis.d;
        let pn = (0..=d).map(|k| basis.evaluate_all(k as f64 / d as f64)).collect::<Result<_>>()?;
        Ok(AtomicSdp { d, m, l, theta0: basis.theta0(), hjl, pn, s: s.clone(), e_index: 0, real_w: false })
    }

    /// Index of the basis vector e in the objective term e*Qe. Any index
    /// gives the same objective (Q has constant diagonal on the cone), so
    /// this is exposed for auditability rather than effect.
    pub fn with_e_index(mut self, e: usize) -> Result<Self> {
        if e >= self.m {
            return Err(Error::invalid(format!("e index {e} out of range for M = {}", self.m)));
        }
        self.e_index = e;
        Ok(self)
    }

    /// Restrict W to real symmetric. Lossless when the PSF subspace
    /// coefficients are real; kept as an option for experiments.
    pub fn with_real_w(mut self, real_w: bool) -> Self {
        self.real_w = real_w;
        self
    }

    pub fn layout(&self) -> VarLayout {
        VarLayout::new(self.d, self.m, self.l, self.real_w, true)
    }

    pub fn build_noiseless(&self, y: &[Complex]) -> Result<ConicProgram> {
        self.assemble(DataTerm::Equalities(y))
    }

    pub fn build_noisy(&self, y: &[Complex], gamma: f64) -> Result<ConicProgram> {
        if gamma <= 0.0 {
            return Err(Error::invalid(format!("noisy fit weight γ = {gamma} must be positive")));
        }
        self.assemble(DataTerm::Penalty { y, gamma })
    }

    pub fn solve_noiseless(&self, y: &[Complex], opts: &SolveOptions) -> Result<SdpSolution> {
        let prog = self.build_noiseless(y)?;
        let sol = solve_conic(&prog, opts)?;
        self.extract(&self.layout(), sol, None)
    }

    pub fn solve_noisy(&self, y: &[Complex], gamma: f64, opts: &SolveOptions) -> Result<SdpSolution> {
        let prog = self.build_noisy(y, gamma)?;
        let sol = solve_conic(&prog, opts)?;
        self.extract(&self.layout(), sol, Some((y, gamma)))
    }

    /// Data-fit penalty (1/γ)‖y − Υ(Z)‖² at a candidate Z.
    pub fn penalty(&self, z: &DMatrix<Complex>, y: &[Complex], gamma: f64) -> f64 {
        (0..self.m)
            .map(|i| {
                let pred: Complex = (0..self.l).map(|ll| z[(i, ll)] * self.s[(i, ll)]).sum();
                (y[i] - pred).norm_sqr()
            })
            .sum::<f64>()
            / gamma
    }

    fn check_y(&self, y: &[Complex]) -> Result<()> {
        if y.len() != self.m {
            return Err(Error::invalid(format!(
                "measurement vector has {} entries but the scheme has {} frequencies",
                y.len(),
                self.m
            )));
        }
        Ok(())
    }

    fn assemble(&self, term: DataTerm) -> Result<ConicProgram> {
        let (d, m, l) = (self.d, self.m, self.l);
        let n = 2 * d + 1;
        let with_z = !matches!(term, DataTerm::FixedZ(_));
        let lay = VarLayout::new(d, m, l, self.real_w, with_z);

        let mut pb = ProgramBuilder::new();
        pb.add_vars("coeffs", n);
        pb.add_vars("w", lay.n_w);
        if with_z {
            pb.add_vars("z", 2 * m * l);
        }

        match term {
            DataTerm::Equalities(y) => {
                self.check_y(y)?;
                for i in 0..m {
                    let mut re_row = Vec::with_capacity(2 * l);
                    let mut im_row = Vec::with_capacity(2 * l);
                    for ll in 0..l {
                        let s = self.s[(i, ll)];
                        re_row.push((lay.z_re(i, ll), s.re));
                        re_row.push((lay.z_im(i, ll), -s.im));
                        im_row.push((lay.z_re(i, ll), s.im));
                        im_row.push((lay.z_im(i, ll), s.re));
                    }
                    pb.equality(&re_row, y[i].re);
                    pb.equality(&im_row, y[i].im);
                }
            }
            DataTerm::Penalty { y, gamma } => {
                self.check_y(y)?;
                // (1/γ)‖y − E·z‖² with E block-diagonal per measurement:
                // quadratic term per-row outer products, linear term −(2/γ)Eᵀy
                for i in 0..m {
                    let vars: Vec<usize> = (0..l)
                        .map(|ll| lay.z_re(i, ll))
                        .chain((0..l).map(|ll| lay.z_im(i, ll)))
                        .collect();
                    let vre: Vec<f64> = (0..l)
                        .map(|ll| self.s[(i, ll)].re)
                        .chain((0..l).map(|ll| -self.s[(i, ll)].im))
                        .collect();
                    let vim: Vec<f64> = (0..l)
                        .map(|ll| self.s[(i, ll)].im)
                        .chain((0..l).map(|ll| self.s[(i, ll)].re))
                        .collect();
                    for a in 0..2 * l {
                        for b in a..2 * l {
                            let g = (vre[a] * vre[b] + vim[a] * vim[b]) / gamma;
                            if g != 0.0 {
                                pb.obj_quadratic(vars[a], vars[b], if a == b { g } else { 2.0 * g });
                            }
                        }
                        pb.obj_linear(vars[a], -2.0 / gamma * (vre[a] * y[i].re + vim[a] * y[i].im));
                    }
                }
            }
            DataTerm::FixedZ(z) => {
                if z.shape() != (m, l) {
                    return Err(Error::invalid("fixed Z has the wrong shape"));
                }
            }
        }

        // objective ½(Tr W + e*Q e); Q_ee = h(0)ᵀg touches even coefficients
        for p in 0..l {
            pb.obj_linear(lay.w_diag(p), 0.5);
        }
        let h0 = &self.hjl[self.e_index * m + self.e_index];
        for k in (0..n).step_by(2) {
            pb.obj_linear(lay.r(k), 0.5 * h0[k]);
        }

        // main block [[W, Z*], [Z, Q]] of complex size L+M
        let nb = l + m;
        let blk = pb.herm_block(nb);
        for p in 0..l {
            pb.herm_entry(&blk, p, p, lay.w_diag(p), 1.0, 0.0)?;
            for q in 0..p {
                // upper entry (q, p) is W[q,p] = conj(W[p,q])
                let (re, im) = lay.w_pair(p, q);
                pb.herm_entry(&blk, q, p, re, 1.0, 0.0)?;
                if let Some(im) = im {
                    pb.herm_entry(&blk, q, p, im, 0.0, -1.0)?;
                }
            }
        }
        match term {
            DataTerm::FixedZ(z) => {
                for p in 0..l {
                    for j in 0..m {
                        // upper entry (p, L+j) is conj(Z[j,p])
                        pb.herm_const(&blk, p, l + j, z[(j, p)].re, -z[(j, p)].im)?;
                    }
                }
            }
            _ => {
                for p in 0..l {
                    for j in 0..m {
                        pb.herm_entry(&blk, p, l + j, lay.z_re(j, p), 1.0, 0.0)?;
                        pb.herm_entry(&blk, p, l + j, lay.z_im(j, p), 0.0, -1.0)?;
                    }
                }
            }
        }
        // Q[j,l'] = h_jl'ᵀg: even coefficients feed the real part, odd the
        // imaginary part (they vanish on the diagonal by parity)
        for j in 0..m {
            for ll in j..m {
                let h = &self.hjl[j * m + ll];
                for k in (0..n).step_by(2) {
                    if h[k] != 0.0 {
                        pb.herm_entry(&blk, l + j, l + ll, lay.r(k), h[k], 0.0)?;
                    }
                }
                if j != ll {
                    for k in (1..n).step_by(2) {
                        if h[k] != 0.0 {
                            pb.herm_entry(&blk, l + j, l + ll, lay.r(k), 0.0, h[k])?;
                        }
                    }
                }
            }
        }

        // Toeplitz moment block T[p,q] = v_{q−p}, v_k = pn[k]·g
        let nt = d + 1;
        let tb = pb.herm_block(nt);
        for p in 0..nt {
            for q in p..nt {
                let row = &self.pn[q - p];
                for k in (0..n).step_by(2) {
                    if row[k] != 0.0 {
                        pb.herm_entry(&tb, p, q, lay.r(k), row[k], 0.0)?;
                    }
                }
                if q != p {
                    for k in (1..n).step_by(2) {
                        if row[k] != 0.0 {
                            pb.herm_entry(&tb, p, q, lay.r(k), 0.0, row[k])?;
                        }
                    }
                }
            }
        }

        // arc-support block Ψ(T), complex size d; entries combine the
        // moments v_{b−a}, v_{b−a±1}, with v_{−k} = v_k* handled by sign
        let t2 = (self.theta0 / 2.0).tan().powi(2);
        let psib = pb.herm_block(d);
        for a in 0..d {
            for b in a..d {
                let kk = (b - a) as i64;
                let mut acc = vec![Complex::new(0.0, 0.0); n];
                for (kap, wgt) in [(kk, 2.0 * (t2 - 1.0)), (kk - 1, t2 + 1.0), (kk + 1, t2 + 1.0)] {
                    let ka = kap.unsigned_abs() as usize;
                    let sign = if kap >= 0 { 1.0 } else { -1.0 };
                    let row = &self.pn[ka];
                    for k in (0..n).step_by(2) {
                        acc[k].re += wgt * row[k];
                    }
                    if ka != 0 {
                        for k in (1..n).step_by(2) {
                            acc[k].im += sign * wgt * row[k];
                        }
                    }
                }
                for (k, c) in acc.iter().enumerate() {
                    // diagonal imaginary parts cancel pairwise in exact
                    // f64 arithmetic; force the zero to be robust
                    let im = if a == b { 0.0 } else { c.im };
                    if c.re != 0.0 || im != 0.0 {
                        pb.herm_entry(&psib, a, b, lay.r(k), c.re, im)?;
                    }
                }
            }
        }

        Ok(pb.build())
    }

    /// Decode a solver point into the complex blocks, balance the scaling
    /// degree of freedom, and validate the solution-quality identities
    /// (violations become warnings).
    ///
    /// Balancing: feasibility is invariant under (W, Q) → (tW, Q/t) for
    /// t > 0 (a congruence of the main block; the moment cone is a cone),
    /// and the objective ½(t·TrW + e*Qe/t) is minimized at the equalized
    /// split. An interior-point iterate leaves an O(√gap) imbalance along
    /// this flat direction, so we return the balanced representative —
    /// never a worse point, and the trace identity then holds exactly.
    pub fn extract(
        &self,
        lay: &VarLayout,
        sol: ConicSolution,
        data: Option<(&[Complex], f64)>,
    ) -> Result<SdpSolution> {
        let (d, m, l) = (lay.d, lay.m, lay.l);
        let n = lay.n_r;
        let mut sol = sol;
        if sol.usable() {
            let trw: f64 = (0..l).map(|p| sol.x[lay.w_diag(p)]).sum();
            let qee: f64 = self.hjl[self.e_index * m + self.e_index]
                .iter()
                .enumerate()
                .filter(|(k, _)| k % 2 == 0)
                .map(|(k, &h)| h * sol.x[lay.r(k)])
                .sum();
            if trw > 1e-12 && qee > 1e-12 {
                let t = (qee / trw).sqrt();
                if (1e-3..1e3).contains(&t) {
                    for p in 0..lay.n_w {
                        sol.x[lay.w_off + p] *= t;
                    }
                    for k in 0..n {
                        sol.x[lay.r(k)] /= t;
                    }
                }
            }
        }
        let x = &sol.x;
        if x.len() != lay.n_vars {
            return Err(Error::invalid("extract: solution length does not match layout"));
        }

        // g_j = r_j (even) or i·r_j (odd)
        let g: Vec<Complex> = (0..n)
            .map(|k| if k % 2 == 0 { Complex::new(x[k], 0.0) } else { Complex::new(0.0, x[k]) })
            .collect();
        let v: Vec<Complex> = (0..=d)
            .map(|k| self.pn[k].iter().zip(&g).map(|(&p, &gg)| gg * p).sum())
            .collect();
        let v = MomentVector::new(v)?;

        let mut q: DMatrix<Complex> = DMatrix::zeros(m, m);
        for j in 0..m {
            for ll in 0..m {
                q[(j, ll)] = self.hjl[j * m + ll].iter().zip(&g).map(|(&h, &gg)| gg * h).sum();
            }
        }

        let mut w = DMatrix::zeros(l, l);
        for p in 0..l {
            w[(p, p)] = Complex::new(x[lay.w_diag(p)], 0.0);
            for qq in 0..p {
                let (re, im) = lay.w_pair(p, qq);
                let val = Complex::new(x[re], im.map_or(0.0, |i| x[i]));
                w[(p, qq)] = val;
                w[(qq, p)] = val.conj();
            }
        }

        let z = match lay.z_off {
            Some(_) => DMatrix::from_fn(m, l, |i, ll| Complex::new(x[lay.z_re(i, ll)], x[lay.z_im(i, ll)])),
            None => DMatrix::zeros(m, l),
        };

        // recompute the objective from the (balanced) blocks; for the noisy
        // variant this also restores the constant (1/γ)‖y‖² the quadratic
        // form drops
        let trw: f64 = (0..l).map(|p| w[(p, p)].re).sum();
        let mut objective = 0.5 * (trw + q[(self.e_index, self.e_index)].re);
        if let Some((y, gamma)) = data {
            objective += self.penalty(&z, y, gamma);
        }
        let mut warnings = Vec::new();
        if !sol.usable() {
            warnings.push(format!(
                "solver ended {} (r_prim {:.2e}, r_dual {:.2e}, gap {:.2e})",
                sol.status,
                sol.r_primal,
                sol.r_dual,
                sol.gap()
            ));
        }
        if sol.status == SolveStatus::NearOptimal {
            warnings.push(format!(
                "near-optimal: r_prim {:.2e}, r_dual {:.2e}, gap {:.2e} after {} iterations",
                sol.r_primal,
                sol.r_dual,
                sol.gap(),
                sol.iterations
            ));
        }
        let partial = SdpSolution { w, v, q, z, objective, report: sol, warnings };
        let mut out = partial;
        let scale = 1.0 + out.objective.abs();
        let spread = out.q_diag_spread();
        if spread > 1e-6 * out.q[(0, 0)].re.abs().max(1e-12) {
            out.warnings.push(format!("Q diagonal varies by {spread:.2e}"));
        }
        if out.report.status == SolveStatus::Optimal {
            let gap = out.trace_identity_gap(self.e_index);
            if gap > 1e-6 * scale {
                out.warnings.push(format!("Tr(W) − e*Qe = {gap:.2e} at claimed optimum"));
            }
        }
        Ok(out)
    }
}

/// Atomic norm of Z under the sampling scheme: the optimal value of the
/// characterization SDP with Z held fixed and no data constraint.
pub fn atomic_norm(
    z: &DMatrix<Complex>,
    basis: &PswfBasis,
    scheme: &SamplingScheme,
    opts: &SolveOptions,
) -> Result<f64> {
    if z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::invalid("atomic_norm: Z has non-finite entries"));
    }
    if z.nrows() != scheme.m() {
        return Err(Error::invalid("atomic_norm: Z row count does not match the scheme"));
    }
    let sdp = AtomicSdp::new(basis, scheme, &DMatrix::zeros(scheme.m(), z.ncols()))?;
    let prog = sdp.assemble(DataTerm::FixedZ(z))?;
    let sol = solve_conic(&prog, opts)?;
    if !sol.usable() {
        return Err(Error::Solver(format!(
            "atomic norm solve ended {} (r_prim {:.2e}, r_dual {:.2e})",
            sol.status, sol.r_primal, sol.r_dual
        )));
    }
    Ok(sol.objective)
}
