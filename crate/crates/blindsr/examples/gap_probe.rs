//! Scratch probe: single-solve timings at the acceptance-criterion scales.

use blindsr::conic::SolveOptions;
use blindsr::experiments::{run_method, Method};
use blindsr::pswf::build_basis;
use blindsr::signal::{generate_instance, GenOptions, SamplingLaw};
use std::time::Instant;

fn main() {
    let opts = SolveOptions::default();

    // criterion 7 scale: K=4, L=3, M=50, B=32, noisy
    let t0 = Instant::now();
    let basis32 = build_basis(32.0, 1e-10).unwrap();
    println!("basis B=32 build: {:.1}s, d = {}", t0.elapsed().as_secs_f64(), basis32.d);
    let gen = GenOptions::default();
    let inst = generate_instance(4, 3, 50, 32.0, 1.0 / 50.0, 20.0, 7, gen).unwrap();
    let t0 = Instant::now();
    let run = run_method(&inst, Method::Pswf, Some(&basis32), &opts, 1e-6).unwrap();
    println!(
        "criterion-7 solve: {:.1}s wall, status {}, nmse {:.3e}, max_tau_err {:.3e}",
        t0.elapsed().as_secs_f64(),
        run.status,
        run.nmse,
        run.max_tau_err
    );

    // criterion 6 scale: K=3, L=2, M=14, B=16, noiseless
    let t0 = Instant::now();
    let basis16 = build_basis(16.0, 1e-10).unwrap();
    println!("basis B=16 build: {:.1}s, d = {}", t0.elapsed().as_secs_f64(), basis16.d);
    let inst = generate_instance(3, 2, 14, 16.0, 1.0 / 14.0, f64::INFINITY, 100, gen).unwrap();
    let t0 = Instant::now();
    let run = run_method(&inst, Method::Pswf, Some(&basis16), &opts, 1e-6).unwrap();
    println!(
        "criterion-6 solve: {:.1}s wall, status {}, nmse {:.3e}, max_tau_err {:.3e}",
        t0.elapsed().as_secs_f64(),
        run.status,
        run.nmse,
        run.max_tau_err
    );

    // criterion 8 scale: K=2, L=2, M=17 grid, B=16, both methods
    let mut gu = GenOptions::default();
    gu.sampling = SamplingLaw::Uniform;
    let inst = generate_instance(2, 2, 17, 16.0, 2.0 / 17.0, f64::INFINITY, 200, gu).unwrap();
    for m in [Method::Pswf, Method::Baseline] {
        let t0 = Instant::now();
        let run = run_method(&inst, m, Some(&basis16), &opts, 1e-6).unwrap();
        println!(
            "criterion-8 {} solve: {:.1}s wall, status {}, nmse {:.3e}",
            m.name(),
            t0.elapsed().as_secs_f64(),
            run.status,
            run.nmse
        );
    }
}
