//! Command-line front end: single solves, instance generation, Monte-Carlo
//! sweeps, basis table dumps, and standalone localization.

use blindsr::conic::SolveOptions;
use blindsr::demix::{correlation, factor_rank1, reconstruct_psf, solve_amplitudes};
use blindsr::experiments::{run_method, run_monte_carlo, ExperimentConfig, Method, MethodRun};
use blindsr::localize::{estimate_rank, vandermonde_recover, RANK_REL_TOL};
use blindsr::pswf::{build_basis, build_or_load, PswfBasis};
use blindsr::signal::{generate_instance, read_instance, write_instance, Instance};
use blindsr::{Complex, Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "blindsr", version, about = "Blind super-resolution of spike trains from bandlimited measurements")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Pswf,
    Baseline,
    Both,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Pswf => vec![Method::Pswf],
            MethodArg::Baseline => vec![Method::Baseline],
            MethodArg::Both => vec![Method::Pswf, Method::Baseline],
        }
    }
    fn key(self) -> &'static str {
        match self {
            MethodArg::Pswf => "pswf",
            MethodArg::Baseline => "baseline",
            MethodArg::Both => "both",
        }
    }
}

fn parse_snr(s: &str) -> std::result::Result<f64, String> {
    if s.eq_ignore_ascii_case("inf") {
        Ok(f64::INFINITY)
    } else {
        s.parse::<f64>().map_err(|e| e.to_string())
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance file and emit the solution as JSON.
    Solve {
        /// Instance JSON produced by `generate`.
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "pswf")]
        method: MethodArg,
        /// Directory for solution.json (default: print to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol_gap: Option<f64>,
        /// Relative eigenvalue threshold for rank selection.
        #[arg(long)]
        tol_rank: Option<f64>,
        /// Basis cache directory (default: rebuild in memory).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Basis accuracy.
        #[arg(long)]
        eps: Option<f64>,
        /// Also write the assembled program in sparse triplet form.
        #[arg(long)]
        dump_program: bool,
    },
    /// Generate instance files from an experiment config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the instance files.
        #[arg(long, default_value = "instances")]
        out: PathBuf,
        /// Override the config's seed base.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's SNR (dB, or `inf`).
        #[arg(long, value_parser = parse_snr)]
        snr: Option<f64>,
    },
    /// Run a Monte-Carlo sweep from an experiment config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        tol_gap: Option<f64>,
        #[arg(long)]
        tol_rank: Option<f64>,
        /// Worker threads (default: one per core).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_parser = parse_snr)]
        snr: Option<f64>,
        /// Swap in the config's full_* values (full-scale run).
        #[arg(long)]
        full: bool,
    },
    /// Dump the basis function table for a bandwidth.
    Pswf {
        b_max: f64,
        #[arg(long)]
        eps: Option<f64>,
        /// Evaluation points on [-1, 1].
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Directory for the CSV (default: print to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Extract spikes from a moment matrix file.
    Localize {
        /// JSON file: {"schema": 1, "b_max": <f64>, "t": [[{re, im}, …], …]},
        /// where T[p][q] = Σ_k c_k·exp(−i(q−p)·2πτ_k·B_max/d), d = dim − 1.
        t_file: PathBuf,
        /// Convention: pswf = arc moments, baseline = uniform-grid moments.
        #[arg(long, value_enum, default_value = "pswf")]
        method: MethodArg,
        #[arg(long)]
        tol_rank: Option<f64>,
        /// Directory for spikes.json (default: print to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Solve { instance, method, out, tol_gap, tol_rank, cache_dir, eps, dump_program } => {
            cmd_solve(&instance, method, out.as_deref(), tol_gap, tol_rank, cache_dir.as_deref(), eps, dump_program)
        }
        Cmd::Generate { config, out, seed, snr } => cmd_generate(&config, &out, seed, snr),
        Cmd::Sweep { config, out, seed, method, tol_gap, tol_rank, jobs, snr, full } => {
            cmd_sweep(&config, out, seed, method, tol_gap, tol_rank, jobs, snr, full)
        }
        Cmd::Pswf { b_max, eps, points, out, cache_dir } => {
            cmd_pswf(b_max, eps, points, out.as_deref(), cache_dir.as_deref())
        }
        Cmd::Localize { t_file, method, tol_rank, out } => {
            cmd_localize(&t_file, method, tol_rank, out.as_deref())
        }
    }
}

fn load_basis(b_max: f64, eps: f64, cache_dir: Option<&Path>) -> Result<PswfBasis> {
    match cache_dir {
        Some(dir) => build_or_load(b_max, eps, dir),
        None => build_basis(b_max, eps),
    }
}

fn cjson(z: Complex) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn vec_json(v: &DVector<Complex>) -> Value {
    Value::Array(v.iter().map(|&z| cjson(z)).collect())
}

fn mat_json(m: &DMatrix<Complex>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| cjson(m[(i, j)])).collect()))
            .collect(),
    )
}

fn solution_json(inst: &Instance, run: &MethodRun) -> Value {
    let mut v = json!({
        "method": run.method.name(),
        "status": run.status.to_string(),
        "usable": run.usable,
        "objective": run.objective,
        "nmse": run.nmse,
        "max_tau_err": run.max_tau_err,
        "success": run.success,
        "solve_ms": run.solve_ms,
        "warnings": run.warnings,
        "z_hat": mat_json(&run.z_hat),
    });
    if let Some(loc) = &run.localization {
        v["localization"] = json!({
            "taus_hat": loc.taus_hat,
            "masses": loc.masses,
            "rank_used": loc.rank_used,
            "residual": loc.residual,
            "clipped": loc.clipped,
            "degenerate": run.degenerate,
        });
    }
    if run.usable {
        if let Ok(f) = factor_rank1(&run.z_hat) {
            let mut demix = json!({
                "x_hat": vec_json(&f.x_hat),
                "h_hat": vec_json(&f.h_hat),
                "sigma1": f.sigma1,
                "spectral_ratio": f.spectral_ratio,
            });
            let g_true = &inst.subspace.s_matrix * &inst.subspace.h;
            if let Ok(g_hat) = reconstruct_psf(&inst.subspace, &f.h_hat) {
                demix["psf_correlation"] = json!(correlation(&g_hat, &g_true));
                demix["g_hat"] = vec_json(&g_hat);
            }
            if let Some(loc) = &run.localization {
                if let Ok(fit) = solve_amplitudes(&f.x_hat, &loc.taus_hat, &inst.scheme) {
                    demix["amplitudes"] = json!({
                        "a_hat": fit.a_hat.iter().map(|&z| cjson(z)).collect::<Vec<_>>(),
                        "residual": fit.residual,
                        "cond": fit.cond,
                        "ill_conditioned": fit.ill_conditioned,
                    });
                }
            }
            v["demix"] = demix;
        }
    }
    v
}

fn write_or_print(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            println!("{}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    instance: &Path,
    method: MethodArg,
    out: Option<&Path>,
    tol_gap: Option<f64>,
    tol_rank: Option<f64>,
    cache_dir: Option<&Path>,
    eps: Option<f64>,
    dump_program: bool,
) -> Result<()> {
    let inst = read_instance(instance)?;
    let methods = method.methods();
    let mut opts = SolveOptions::default();
    if let Some(g) = tol_gap {
        opts.tol_gap = g;
    }
    let rank_tol = tol_rank.unwrap_or(RANK_REL_TOL);
    let basis = if methods.contains(&Method::Pswf) {
        Some(load_basis(inst.scheme.b_max, eps.unwrap_or(1e-10), cache_dir)?)
    } else {
        None
    };
    if dump_program {
        if let Some(b) = &basis {
            let sdp = blindsr::sdp::AtomicSdp::new(b, &inst.scheme, &inst.subspace.s_matrix)?;
            let prog = if inst.sigma == 0.0 {
                sdp.build_noiseless(&inst.y)?
            } else {
                sdp.build_noisy(&inst.y, blindsr::sdp::gamma_default(inst.sigma, inst.scheme.m(), inst.scheme.b_max))?
            };
            write_or_print(out, "program.txt", &prog.dump())?;
        }
    }
    let mut doc = serde_json::Map::new();
    for m in methods {
        let run = run_method(&inst, m, basis.as_ref(), &opts, rank_tol)?;
        eprintln!(
            "{}: {} objective {:.6e} nmse {:.3e} success {}",
            m.name(),
            run.status,
            run.objective,
            run.nmse,
            run.success
        );
        doc.insert(m.name().into(), solution_json(&inst, &run));
    }
    let text = serde_json::to_string_pretty(&Value::Object(doc))?;
    write_or_print(out, "solution.json", &text)
}

fn cmd_generate(config: &Path, out: &Path, seed: Option<u64>, snr: Option<f64>) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed_base = s;
    }
    if let Some(s) = snr {
        cfg.snr_db = Some(s);
    }
    cfg.validate()?;
    let gen = cfg.gen_options()?;
    std::fs::create_dir_all(out)?;
    for trial in 0..cfg.trials {
        let sd = cfg.seed_base + trial as u64;
        let inst = generate_instance(
            cfg.k,
            cfg.l,
            cfg.m,
            cfg.b_max,
            cfg.min_sep,
            cfg.snr_db.unwrap_or(f64::INFINITY),
            sd,
            gen,
        )?;
        let path = out.join(format!("instance_{sd}.json"));
        write_instance(&inst, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    method: Option<MethodArg>,
    tol_gap: Option<f64>,
    tol_rank: Option<f64>,
    jobs: Option<usize>,
    snr: Option<f64>,
    full: bool,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed_base = s;
    }
    if let Some(o) = out {
        cfg.out_dir = Some(o.to_string_lossy().into_owned());
    }
    if let Some(m) = method {
        cfg.methods = m.key().into();
    }
    if let Some(g) = tol_gap {
        cfg.tol_gap = Some(g);
    }
    if let Some(r) = tol_rank {
        cfg.tol_rank = Some(r);
    }
    if let Some(s) = snr {
        cfg.snr_db = Some(s);
    }
    if full {
        cfg.apply_full();
    }
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    let res = run_monte_carlo(&cfg)?;
    for a in &res.aggregates {
        println!(
            "{} value {} M {}: success {:.2} mean NMSE {:.3e} median {:.3e} spike MSE {:.3e} ({}/{} usable)",
            a.method, a.value, a.m, a.success_rate, a.mean_nmse, a.median_nmse, a.spike_mse, a.usable, a.trials
        );
    }
    if let Some(dir) = &cfg.out_dir {
        println!("results written to {dir}");
    }
    Ok(())
}

fn cmd_pswf(
    b_max: f64,
    eps: Option<f64>,
    points: usize,
    out: Option<&Path>,
    cache_dir: Option<&Path>,
) -> Result<()> {
    if points < 2 {
        return Err(Error::invalid("need at least 2 table points"));
    }
    let basis = load_basis(b_max, eps.unwrap_or(1e-10), cache_dir)?;
    let n = basis.n_funcs();
    eprintln!(
        "B_max = {b_max}: d = {}, {} functions, theta0 = {:.6}",
        basis.d,
        n,
        basis.theta0()
    );
    let mut csv = String::from("t");
    for j in 0..n {
        csv.push_str(&format!(",phi_{j}"));
    }
    csv.push('\n');
    for i in 0..points {
        let t = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
        csv.push_str(&format!("{t}"));
        for val in basis.evaluate_all(t)? {
            csv.push_str(&format!(",{val}"));
        }
        csv.push('\n');
    }
    write_or_print(out, &format!("pswf_b{b_max}.csv"), &csv)
}

#[derive(Deserialize)]
struct CNum {
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
struct TFile {
    schema: u32,
    b_max: f64,
    t: Vec<Vec<CNum>>,
}

fn cmd_localize(t_file: &Path, method: MethodArg, tol_rank: Option<f64>, out: Option<&Path>) -> Result<()> {
    let bytes = std::fs::read(t_file)?;
    let file: TFile = serde_json::from_slice(&bytes)?;
    if file.schema != 1 {
        return Err(Error::Config(format!("moment file has schema {} (expected 1)", file.schema)));
    }
    let n = file.t.len();
    if n == 0 || file.t.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("moment file: T must be square and nonempty"));
    }
    let t = DMatrix::from_fn(n, n, |i, j| Complex::new(file.t[i][j].re, file.t[i][j].im));
    let rel = tol_rank.unwrap_or(RANK_REL_TOL);
    let loc = match method {
        MethodArg::Baseline => blindsr::baseline::localize_grid(&t, rel, file.b_max)?,
        _ => {
            let k_hat = estimate_rank(&t, rel)?;
            if k_hat == 0 {
                return Err(Error::numerical("moment matrix is numerically zero"));
            }
            vandermonde_recover(&t, k_hat, file.b_max)?
        }
    };
    let text = serde_json::to_string_pretty(&json!({
        "taus_hat": loc.taus_hat,
        "masses": loc.masses,
        "rank_used": loc.rank_used,
        "residual": loc.residual,
        "clipped": loc.clipped,
    }))?;
    write_or_print(out, "spikes.json", &text)
}
