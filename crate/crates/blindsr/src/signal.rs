//! Problem instances: spike trains, arbitrary sampling schemes, PSF
//! subspaces, the measurement operator Υ and the noise model.
//!
//! An instance is y_m = e_mᵀ Z s_m (+ noise) with Z = x hᵀ,
//! x = Σ_k a_k c(τ_k), where c(τ) is the steering vector of the sampling
//! frequencies and s_mᵀ is row m of the known subspace matrix S. All delays
//! are normalized to [-1/2, 1/2] (τ = τ̄/T_max) and all frequencies to
//! [0, B_max].

use crate::{Complex, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Schema version of the instance JSON files.
pub const INSTANCE_SCHEMA: u32 = 1;

/// Cap on rejection-sampling attempts when drawing separated spikes.
const MAX_REJECTIONS: usize = 10_000;

/// Ground-truth spike locations and amplitudes (normalized delays).
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    /// Sorted delays in [-1/2, 1/2].
    pub taus: Vec<f64>,
    pub amps: Vec<Complex>,
    /// Original window length, for de-normalization τ̄ = τ·T_max.
    pub t_max: f64,
}

impl SpikeTrain {
    pub fn new(taus: Vec<f64>, amps: Vec<Complex>, t_max: f64) -> Result<Self> {
        if taus.is_empty() || taus.len() != amps.len() {
            return Err(Error::invalid("SpikeTrain: need K ≥ 1 delays with matching amplitudes"));
        }
        if t_max <= 0.0 {
            return Err(Error::invalid("SpikeTrain: T_max must be positive"));
        }
        if taus.iter().any(|t| t.abs() > 0.5) {
            return Err(Error::invalid("SpikeTrain: delays must lie in [-1/2, 1/2]"));
        }
        if amps.iter().any(|a| a.norm() == 0.0) {
            return Err(Error::invalid("SpikeTrain: amplitudes must be nonzero"));
        }
        Ok(SpikeTrain { taus, amps, t_max })
    }

    pub fn k(&self) -> usize {
        self.taus.len()
    }

    /// Minimum pairwise delay separation (infinite for K = 1).
    pub fn min_separation(&self) -> f64 {
        let mut sep = f64::INFINITY;
        for i in 0..self.taus.len() {
            for j in 0..i {
                sep = sep.min((self.taus[i] - self.taus[j]).abs());
            }
        }
        sep
    }
}

/// The measurement frequencies: strictly increasing, f_1 = 0, f_M = B_max.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingScheme {
    pub freqs: Vec<f64>,
    pub b_max: f64,
}

impl SamplingScheme {
    pub fn new(freqs: Vec<f64>, b_max: f64) -> Result<Self> {
        if freqs.len() < 2 {
            return Err(Error::invalid("SamplingScheme: need M ≥ 2 frequencies"));
        }
        if b_max <= 0.0 {
            return Err(Error::invalid("SamplingScheme: B_max must be positive"));
        }
        if freqs[0] != 0.0 || *freqs.last().unwrap() != b_max {
            return Err(Error::invalid("SamplingScheme: endpoints must be f_1 = 0 and f_M = B_max"));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("SamplingScheme: frequencies must be strictly increasing"));
        }
        Ok(SamplingScheme { freqs, b_max })
    }

    pub fn m(&self) -> usize {
        self.freqs.len()
    }
}

/// The known PSF subspace: g = S h with S known and h unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    /// M×L, rows s_mᵀ.
    pub s_matrix: DMatrix<Complex>,
    pub h: DVector<Complex>,
}

impl SubspaceModel {
    pub fn new(s_matrix: DMatrix<Complex>, h: DVector<Complex>) -> Result<Self> {
        let (m, l) = s_matrix.shape();
        if h.len() != l {
            return Err(Error::invalid("SubspaceModel: h length must equal the subspace dimension"));
        }
        if l >= m {
            return Err(Error::invalid("SubspaceModel: need L < M (low-dimensional subspace)"));
        }
        Ok(SubspaceModel { s_matrix, h })
    }

    pub fn l(&self) -> usize {
        self.s_matrix.ncols()
    }
}

/// A full problem instance with ground truth attached.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spikes: SpikeTrain,
    pub scheme: SamplingScheme,
    pub subspace: SubspaceModel,
    pub z_true: DMatrix<Complex>,
    pub y: Vec<Complex>,
    /// Noise standard deviation actually applied (0 = noiseless).
    pub sigma: f64,
    pub seed: u64,
}

/// Draw a sampling scheme: endpoints pinned at 0 and B_max, the M-2
/// interior frequencies uniform on (0, B_max), sorted; draws closer than
/// 1e-9·B_max to an existing point are rejected and redrawn.
pub fn sample_frequencies(m: usize, b_max: f64, rng: &mut ChaCha20Rng) -> Result<SamplingScheme> {
    if m < 2 {
        return Err(Error::invalid("sample_frequencies: need M ≥ 2"));
    }
    if b_max <= 0.0 {
        return Err(Error::invalid("sample_frequencies: B_max must be positive"));
    }
    let tol = 1e-9 * b_max;
    let mut freqs = vec![0.0, b_max];
    let mut attempts = 0;
    while freqs.len() < m {
        let f = rng.gen_range(0.0..b_max);
        if freqs.iter().any(|g| (g - f).abs() < tol) {
            attempts += 1;
            if attempts > MAX_REJECTIONS {
                return Err(Error::numerical("sample_frequencies: could not draw distinct frequencies"));
            }
            continue;
        }
        freqs.push(f);
    }
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    SamplingScheme::new(freqs, b_max)
}

/// c(τ) = [e^{-i2πf_1τ}, …, e^{-i2πf_Mτ}]ᵀ.
pub fn steering_vector(tau: f64, scheme: &SamplingScheme) -> Result<DVector<Complex>> {
    if tau.abs() > 0.5 {
        return Err(Error::invalid(format!("steering_vector: |τ| = {} exceeds 1/2", tau.abs())));
    }
    Ok(DVector::from_iterator(
        scheme.m(),
        scheme.freqs.iter().map(|&f| Complex::new(0.0, -2.0 * std::f64::consts::PI * f * tau).exp()),
    ))
}

/// Z = x hᵀ with x = Σ_k a_k c(τ_k). Returns (Z, x).
pub fn synthesize(
    spikes: &SpikeTrain,
    subspace: &SubspaceModel,
    scheme: &SamplingScheme,
) -> Result<(DMatrix<Complex>, DVector<Complex>)> {
    let mut x = DVector::from_element(scheme.m(), Complex::new(0.0, 0.0));
    for (tau, a) in spikes.taus.iter().zip(&spikes.amps) {
        x += steering_vector(*tau, scheme)? * *a;
    }
    let z = &x * subspace.h.transpose();
    Ok((z, x))
}

/// The measurement operator Υ: y_m = e_mᵀ Z s_m = Σ_l Z_{ml} S_{ml}.
pub fn forward_operator(z: &DMatrix<Complex>, subspace: &SubspaceModel) -> Vec<Complex> {
    let (m, l) = z.shape();
    assert_eq!((m, l), subspace.s_matrix.shape(), "forward_operator: shape mismatch");
    (0..m)
        .map(|mm| (0..l).map(|ll| z[(mm, ll)] * subspace.s_matrix[(mm, ll)]).sum())
        .collect()
}

/// Add circularly-symmetric complex Gaussian noise at the requested SNR,
/// defined as 10·log10(‖y‖² / (M σ²)). An infinite SNR means no noise.
/// Returns the noisy measurements and the σ used.
pub fn add_noise(y: &[Complex], snr_db: f64, rng: &mut ChaCha20Rng) -> (Vec<Complex>, f64) {
    if snr_db.is_infinite() {
        return (y.to_vec(), 0.0);
    }
    let power: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    let m = y.len() as f64;
    let sigma = (power / (m * 10f64.powf(snr_db / 10.0))).sqrt();
    let noisy = y
        .iter()
        .map(|v| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v + Complex::new(re, im) * (sigma / 2f64.sqrt())
        })
        .collect();
    (noisy, sigma)
}

/// How instance randomness is drawn; the defaults match the experiment
/// configurations used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AmplitudeLaw {
    /// |a_k| = 1 with uniform phase (default; isolates localization
    /// difficulty from dynamic range).
    UnitModulus,
    /// Complex Gaussian amplitudes.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SubspaceLaw {
    /// S and h real i.i.d. standard Gaussian (default).
    RealGaussian,
    /// S and h complex Gaussian.
    ComplexGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingLaw {
    /// Endpoints pinned, interior frequencies uniform at random (default).
    Random,
    /// Equispaced grid (what the grid comparator requires).
    Uniform,
}

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub amp_law: AmplitudeLaw,
    pub subspace_law: SubspaceLaw,
    pub sampling: SamplingLaw,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            amp_law: AmplitudeLaw::UnitModulus,
            subspace_law: SubspaceLaw::RealGaussian,
            sampling: SamplingLaw::Random,
        }
    }
}

/// Generate a full instance. Spikes are drawn uniformly on [-1/2, 1/2] by
/// rejection until the pairwise separation reaches `min_sep`; S and h are
/// i.i.d. Gaussian; the noise is calibrated to `snr_db` (infinite =
/// noiseless).
pub fn generate_instance(
    k: usize,
    l: usize,
    m: usize,
    b_max: f64,
    min_sep: f64,
    snr_db: f64,
    seed: u64,
    opts: GenOptions,
) -> Result<Instance> {
    if k == 0 {
        return Err(Error::invalid("generate_instance: need K ≥ 1"));
    }
    if k as f64 * min_sep >= 1.0 {
        return Err(Error::invalid("generate_instance: K·min_sep must be < 1"));
    }
    if l >= m {
        return Err(Error::invalid("generate_instance: need L < M"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // spikes
    let mut taus = Vec::with_capacity(k);
    let mut attempts = 0;
    while taus.len() < k {
        let t = rng.gen_range(-0.5..0.5);
        if taus.iter().any(|u: &f64| (u - t).abs() < min_sep) {
            attempts += 1;
            if attempts > MAX_REJECTIONS {
                return Err(Error::invalid(format!(
                    "generate_instance: could not place {k} spikes with separation {min_sep} after {MAX_REJECTIONS} attempts"
                )));
            }
            continue;
        }
        taus.push(t);
    }
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let amps: Vec<Complex> = (0..k)
        .map(|_| match opts.amp_law {
            AmplitudeLaw::UnitModulus => {
                let phase = rng.gen_range(0.0..(2.0 * std::f64::consts::PI));
                Complex::new(0.0, phase).exp()
            }
            AmplitudeLaw::Gaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(re, im) / 2f64.sqrt()
            }
        })
        .collect();
    let spikes = SpikeTrain::new(taus, amps, 1.0)?;

    let scheme = match opts.sampling {
        SamplingLaw::Random => sample_frequencies(m, b_max, &mut rng)?,
        SamplingLaw::Uniform => SamplingScheme::new(
            (0..m).map(|i| b_max * (i as f64 / (m - 1) as f64)).collect(),
            b_max,
        )?,
    };

    // subspace; Gaussian S is full rank with probability 1, but verify
    let draw_entry = |rng: &mut ChaCha20Rng| -> Complex {
        match opts.subspace_law {
            SubspaceLaw::RealGaussian => Complex::new(rng.sample(StandardNormal), 0.0),
            SubspaceLaw::ComplexGaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(re, im) / 2f64.sqrt()
            }
        }
    };
    let subspace = loop {
        let s = DMatrix::from_fn(m, l, |_, _| draw_entry(&mut rng));
        let h = DVector::from_fn(l, |_, _| draw_entry(&mut rng));
        let sv = s.clone().svd(false, false);
        if sv.singular_values.min() > 1e-10 * sv.singular_values.max() {
            break SubspaceModel::new(s, h)?;
        }
    };

    let (z_true, _) = synthesize(&spikes, &subspace, &scheme)?;
    let clean = forward_operator(&z_true, &subspace);
    let (y, sigma) = add_noise(&clean, snr_db, &mut rng);

    Ok(Instance { spikes, scheme, subspace, z_true, y, sigma, seed })
}

// --- serialization -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CNum {
    re: f64,
    im: f64,
}

impl From<Complex> for CNum {
    fn from(z: Complex) -> Self {
        CNum { re: z.re, im: z.im }
    }
}

impl From<&CNum> for Complex {
    fn from(c: &CNum) -> Self {
        Complex::new(c.re, c.im)
    }
}

/// On-disk instance format (JSON, complex numbers as {re, im} objects).
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema: u32,
    seed: u64,
    b_max: f64,
    t_max: f64,
    sigma: f64,
    taus: Vec<f64>,
    amps: Vec<CNum>,
    freqs: Vec<f64>,
    s_matrix: Vec<Vec<CNum>>,
    h: Vec<CNum>,
    z_true: Vec<Vec<CNum>>,
    y: Vec<CNum>,
}

fn rows_to_vec(m: &DMatrix<Complex>) -> Vec<Vec<CNum>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

fn vec_to_rows(v: &[Vec<CNum>]) -> Result<DMatrix<Complex>> {
    let rows = v.len();
    let cols = v.first().map(|r| r.len()).unwrap_or(0);
    if rows == 0 || cols == 0 || v.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("instance file: ragged or empty matrix"));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| (&v[i][j]).into()))
}

pub fn write_instance(inst: &Instance, path: &Path) -> Result<()> {
    let file = InstanceFile {
        schema: INSTANCE_SCHEMA,
        seed: inst.seed,
        b_max: inst.scheme.b_max,
        t_max: inst.spikes.t_max,
        sigma: inst.sigma,
        taus: inst.spikes.taus.clone(),
        amps: inst.spikes.amps.iter().map(|&a| a.into()).collect(),
        freqs: inst.scheme.freqs.clone(),
        s_matrix: rows_to_vec(&inst.subspace.s_matrix),
        h: inst.subspace.h.iter().map(|&a| a.into()).collect(),
        z_true: rows_to_vec(&inst.z_true),
        y: inst.y.iter().map(|&a| a.into()).collect(),
    };
    std::fs::write(path, serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let bytes = std::fs::read(path)?;
    let file: InstanceFile = serde_json::from_slice(&bytes)?;
    if file.schema != INSTANCE_SCHEMA {
        return Err(Error::Config(format!(
            "instance file {} has schema {} (expected {INSTANCE_SCHEMA})",
            path.display(),
            file.schema
        )));
    }
    let spikes = SpikeTrain::new(file.taus, file.amps.iter().map(Complex::from).collect(), file.t_max)?;
    let scheme = SamplingScheme::new(file.freqs, file.b_max)?;
    let subspace = SubspaceModel::new(
        vec_to_rows(&file.s_matrix)?,
        DVector::from_iterator(file.h.len(), file.h.iter().map(Complex::from)),
    )?;
    let z_true = vec_to_rows(&file.z_true)?;
    if z_true.shape() != subspace.s_matrix.shape() || file.y.len() != scheme.m() {
        return Err(Error::invalid("instance file: inconsistent dimensions"));
    }
    Ok(Instance {
        spikes,
        scheme,
        subspace,
        z_true,
        y: file.y.iter().map(Complex::from).collect(),
        sigma: file.sigma,
        seed: file.seed,
    })
}
