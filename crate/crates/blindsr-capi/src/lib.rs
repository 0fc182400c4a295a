//! C ABI for the blindsr library.
//!
//! Conventions:
//! - Every fallible call returns a `BlindsrCode`; `BLINDSR_CODE_OK` (0) means
//!   success. On failure, `blindsr_last_error_message` retrieves a
//!   human-readable description for the calling thread.
//! - Objects are opaque handles created by `*_new`/`*_build` calls and
//!   released with the matching `*_free`. Passing NULL to a `_free` is a
//!   no-op; passing NULL anywhere else yields `BLINDSR_CODE_NULL_POINTER`.
//! - Complex arrays cross the boundary as separate re/im buffers, row-major.

use blindsr::conic::{SolveOptions, SolveStatus};
use blindsr::experiments::{run_method, Method, MethodRun};
use blindsr::localize::RANK_REL_TOL;
use blindsr::pswf::{build_basis, build_or_load, PswfBasis};
use blindsr::signal::{generate_instance, read_instance, write_instance, GenOptions, Instance, SamplingLaw};
use libc::{c_char, c_double, c_int, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Return code for every fallible entry point.
#[repr(C)]
#[derive(Copy, Clone, PartialEq, Eq)]
pub enum BlindsrCode {
    Ok = 0,
    InvalidArgument = 1,
    Numerical = 2,
    Solver = 3,
    Config = 4,
    DegenerateSpectrum = 5,
    Io = 6,
    Serde = 7,
    NullPointer = 8,
    Utf8 = 9,
    Panic = 10,
}

/// Recovery method selector.
#[repr(C)]
#[derive(Copy, Clone, PartialEq, Eq)]
pub enum BlindsrMethod {
    Pswf = 0,
    Baseline = 1,
}

/// Solver termination status as reported in a solution handle.
#[repr(C)]
#[derive(Copy, Clone, PartialEq, Eq)]
pub enum BlindsrStatus {
    Optimal = 0,
    NearOptimal = 1,
    Infeasible = 2,
    Unbounded = 3,
    NumericalFailure = 4,
}

/// Opaque: prolate basis for one (B_max, eps) pair.
pub struct BlindsrBasis(PswfBasis);

/// Opaque: one problem instance (ground truth, sampling scheme, data).
pub struct BlindsrInstance(Instance);

/// Opaque: result of solving one instance with one method.
pub struct BlindsrSolution(MethodRun);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code_of(err: &blindsr::Error) -> BlindsrCode {
    use blindsr::Error::*;
    match err {
        InvalidArgument(_) => BlindsrCode::InvalidArgument,
        Numerical(_) => BlindsrCode::Numerical,
        Solver(_) => BlindsrCode::Solver,
        Config(_) => BlindsrCode::Config,
        DegenerateSpectrum { .. } => BlindsrCode::DegenerateSpectrum,
        Io(_) => BlindsrCode::Io,
        Serde(_) => BlindsrCode::Serde,
    }
}

/// Run `f`, converting library errors and panics into codes.
fn guarded(f: impl FnOnce() -> Result<(), BlindsrCode>) -> BlindsrCode {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BlindsrCode::Ok,
        Ok(Err(code)) => code,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            remember(msg);
            BlindsrCode::Panic
        }
    }
}

fn lib_err(e: blindsr::Error) -> BlindsrCode {
    let code = code_of(&e);
    remember(e.to_string());
    code
}

fn null_err(what: &str) -> BlindsrCode {
    remember(format!("{what} is NULL"));
    BlindsrCode::NullPointer
}

unsafe fn path_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a Path, BlindsrCode> {
    if ptr.is_null() {
        return Err(null_err(what));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            remember(format!("{what} is not valid UTF-8"));
            Err(BlindsrCode::Utf8)
        }
    }
}

/// Copy the last error message for this thread into `buf` (NUL-terminated,
/// truncated to `len` bytes). Returns the full message length in bytes,
/// excluding the terminator. `buf` may be NULL to query the length.
#[no_mangle]
pub unsafe extern "C" fn blindsr_last_error_message(buf: *mut c_char, len: size_t) -> size_t {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blindsr_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Build the prolate basis for bandwidth `b_max` at accuracy `eps`
/// (pass eps <= 0 for the default 1e-10). When `cache_dir` is non-NULL the
/// basis is loaded from / saved to that directory.
#[no_mangle]
pub unsafe extern "C" fn blindsr_basis_build(
    b_max: c_double,
    eps: c_double,
    cache_dir: *const c_char,
    out: *mut *mut BlindsrBasis,
) -> BlindsrCode {
    guarded(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        let eps = if eps > 0.0 { eps } else { 1e-10 };
        let basis = if cache_dir.is_null() {
            build_basis(b_max, eps)
        } else {
            build_or_load(b_max, eps, path_arg(cache_dir, "cache_dir")?)
        }
        .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BlindsrBasis(basis)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn blindsr_basis_free(basis: *mut BlindsrBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Truncation order d; the basis spans 2d+1 functions.
#[no_mangle]
pub unsafe extern "C" fn blindsr_basis_order(basis: *const BlindsrBasis) -> size_t {
    if basis.is_null() {
        return 0;
    }
    (*basis).0.d
}

/// Evaluate all 2d+1 basis functions at `t` in [-1, 1]. `values` must hold
/// at least 2d+1 doubles.
#[no_mangle]
pub unsafe extern "C" fn blindsr_basis_evaluate(
    basis: *const BlindsrBasis,
    t: c_double,
    values: *mut c_double,
    len: size_t,
) -> BlindsrCode {
    guarded(|| {
        if basis.is_null() {
            return Err(null_err("basis"));
        }
        if values.is_null() {
            return Err(null_err("values"));
        }
        let b = &(*basis).0;
        let vals = b.evaluate_all(t).map_err(lib_err)?;
        if len < vals.len() {
            remember(format!("values buffer holds {len} < {}", vals.len()));
            return Err(BlindsrCode::InvalidArgument);
        }
        std::ptr::copy_nonoverlapping(vals.as_ptr(), values, vals.len());
        Ok(())
    })
}

/// Draw a random instance: `k` spikes, `l`-dimensional calibration subspace,
/// `m` frequencies up to `b_max`, pairwise spike separation at least
/// `min_sep`, noise at `snr_db` (pass INFINITY for noiseless), seeded by
/// `seed`. `uniform_grid` nonzero places the frequencies on an equispaced
/// grid (required by the baseline method).
#[no_mangle]
pub unsafe extern "C" fn blindsr_instance_generate(
    k: size_t,
    l: size_t,
    m: size_t,
    b_max: c_double,
    min_sep: c_double,
    snr_db: c_double,
    seed: u64,
    uniform_grid: c_int,
    out: *mut *mut BlindsrInstance,
) -> BlindsrCode {
    guarded(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        let mut opts = GenOptions::default();
        if uniform_grid != 0 {
            opts.sampling = SamplingLaw::Uniform;
        }
        let inst = generate_instance(k, l, m, b_max, min_sep, snr_db, seed, opts).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BlindsrInstance(inst)));
        Ok(())
    })
}

/// Load an instance from a JSON file produced by `blindsr_instance_write`
/// or the CLI `generate` subcommand.
#[no_mangle]
pub unsafe extern "C" fn blindsr_instance_read(
    path: *const c_char,
    out: *mut *mut BlindsrInstance,
) -> BlindsrCode {
    guarded(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        let inst = read_instance(path_arg(path, "path")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BlindsrInstance(inst)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn blindsr_instance_write(
    inst: *const BlindsrInstance,
    path: *const c_char,
) -> BlindsrCode {
    guarded(|| {
        if inst.is_null() {
            return Err(null_err("inst"));
        }
        write_instance(&(*inst).0, path_arg(path, "path")?).map_err(lib_err)
    })
}

#[no_mangle]
pub unsafe extern "C" fn blindsr_instance_free(inst: *mut BlindsrInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Problem dimensions of an instance. NULL out-pointers are skipped.
#[no_mangle]
pub unsafe extern "C" fn blindsr_instance_dims(
    inst: *const BlindsrInstance,
    k: *mut size_t,
    l: *mut size_t,
    m: *mut size_t,
) -> BlindsrCode {
    guarded(|| {
        if inst.is_null() {
            return Err(null_err("inst"));
        }
        let i = &(*inst).0;
        if !k.is_null() {
            *k = i.spikes.taus.len();
        }
        if !l.is_null() {
            *l = i.subspace.l();
        }
        if !m.is_null() {
            *m = i.scheme.m();
        }
        Ok(())
    })
}

/// Solve `inst` with `method` and score against the instance's ground truth.
/// `basis` is required for `BLINDSR_METHOD_PSWF` and ignored by the baseline.
/// Pass `tol_gap` <= 0 and/or `tol_rank` <= 0 for the defaults (1e-8, 1e-6).
#[no_mangle]
pub unsafe extern "C" fn blindsr_solve(
    inst: *const BlindsrInstance,
    basis: *const BlindsrBasis,
    method: BlindsrMethod,
    tol_gap: c_double,
    tol_rank: c_double,
    out: *mut *mut BlindsrSolution,
) -> BlindsrCode {
    guarded(|| {
        if inst.is_null() {
            return Err(null_err("inst"));
        }
        if out.is_null() {
            return Err(null_err("out"));
        }
        let m = match method {
            BlindsrMethod::Pswf => Method::Pswf,
            BlindsrMethod::Baseline => Method::Baseline,
        };
        let mut opts = SolveOptions::default();
        if tol_gap > 0.0 {
            opts.tol_gap = tol_gap;
        }
        let rank = if tol_rank > 0.0 { tol_rank } else { RANK_REL_TOL };
        let basis_ref = if basis.is_null() { None } else { Some(&(*basis).0) };
        let run = run_method(&(*inst).0, m, basis_ref, &opts, rank).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(BlindsrSolution(run)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_free(sol: *mut BlindsrSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_status(sol: *const BlindsrSolution) -> BlindsrStatus {
    if sol.is_null() {
        return BlindsrStatus::NumericalFailure;
    }
    match (*sol).0.status {
        SolveStatus::Optimal => BlindsrStatus::Optimal,
        SolveStatus::NearOptimal => BlindsrStatus::NearOptimal,
        SolveStatus::Infeasible => BlindsrStatus::Infeasible,
        SolveStatus::Unbounded => BlindsrStatus::Unbounded,
        SolveStatus::NumericalFailure => BlindsrStatus::NumericalFailure,
    }
}

/// Nonzero when the iterate is accurate enough to use.
#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_usable(sol: *const BlindsrSolution) -> c_int {
    if sol.is_null() {
        return 0;
    }
    (*sol).0.usable as c_int
}

/// Nonzero when the recovered spikes match the ground truth in number and
/// every location error is below the success threshold.
#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_success(sol: *const BlindsrSolution) -> c_int {
    if sol.is_null() {
        return 0;
    }
    (*sol).0.success as c_int
}

#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_objective(sol: *const BlindsrSolution) -> c_double {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).0.objective
}

/// Relative squared reconstruction error against the ground-truth lift.
#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_nmse(sol: *const BlindsrSolution) -> c_double {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).0.nmse
}

/// Largest matched spike-location error (NaN when nothing was localized).
#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_max_tau_err(sol: *const BlindsrSolution) -> c_double {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).0.max_tau_err
}

#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_solve_ms(sol: *const BlindsrSolution) -> c_double {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).0.solve_ms
}

/// Number of recovered spikes (0 when localization did not run).
#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_num_spikes(sol: *const BlindsrSolution) -> size_t {
    if sol.is_null() {
        return 0;
    }
    (*sol).0.localization.as_ref().map_or(0, |l| l.taus_hat.len())
}

/// Copy recovered spike locations (and masses, when `masses` is non-NULL)
/// into caller buffers of capacity `len`. Returns the spike count written.
#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_spikes(
    sol: *const BlindsrSolution,
    taus: *mut c_double,
    masses: *mut c_double,
    len: size_t,
) -> size_t {
    if sol.is_null() {
        return 0;
    }
    let Some(loc) = (*sol).0.localization.as_ref() else {
        return 0;
    };
    let n = loc.taus_hat.len().min(len);
    if !taus.is_null() {
        std::ptr::copy_nonoverlapping(loc.taus_hat.as_ptr(), taus, n);
    }
    if !masses.is_null() {
        std::ptr::copy_nonoverlapping(loc.masses.as_ptr(), masses, n);
    }
    n
}

/// Copy the recovered lift Ẑ (M×L, row-major) into `re`/`im` buffers of
/// capacity `len` each. Returns the number of entries written.
#[no_mangle]
pub unsafe extern "C" fn blindsr_solution_z(
    sol: *const BlindsrSolution,
    re: *mut c_double,
    im: *mut c_double,
    len: size_t,
) -> size_t {
    if sol.is_null() {
        return 0;
    }
    let z = &(*sol).0.z_hat;
    let total = z.nrows() * z.ncols();
    let n = total.min(len);
    let mut written = 0;
    'outer: for i in 0..z.nrows() {
        for j in 0..z.ncols() {
            if written == n {
                break 'outer;
            }
            let v = z[(i, j)];
            if !re.is_null() {
                *re.add(written) = v.re;
            }
            if !im.is_null() {
                *im.add(written) = v.im;
            }
            written += 1;
        }
    }
    written
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn a_generated_instance_round_trips_through_the_abi() {
        unsafe {
            let mut inst: *mut BlindsrInstance = ptr::null_mut();
            let code = blindsr_instance_generate(2, 2, 10, 6.0, 0.2, f64::INFINITY, 41, 1, &mut inst);
            assert!(code == BlindsrCode::Ok);
            let (mut k, mut l, mut m) = (0usize, 0usize, 0usize);
            assert!(blindsr_instance_dims(inst, &mut k, &mut l, &mut m) == BlindsrCode::Ok);
            assert_eq!((k, l, m), (2, 2, 10));

            let mut basis: *mut BlindsrBasis = ptr::null_mut();
            assert!(blindsr_basis_build(6.0, -1.0, ptr::null(), &mut basis) == BlindsrCode::Ok);
            assert!(blindsr_basis_order(basis) > 0);

            let mut sol: *mut BlindsrSolution = ptr::null_mut();
            let code = blindsr_solve(inst, basis, BlindsrMethod::Pswf, -1.0, 1e-4, &mut sol);
            assert!(code == BlindsrCode::Ok);
            assert_eq!(blindsr_solution_usable(sol), 1);
            assert!(blindsr_solution_nmse(sol) < 1e-6);
            assert_eq!(blindsr_solution_num_spikes(sol), 2);
            let mut taus = [0.0; 2];
            let mut masses = [0.0; 2];
            assert_eq!(blindsr_solution_spikes(sol, taus.as_mut_ptr(), masses.as_mut_ptr(), 2), 2);
            assert!(taus[0] < taus[1]);
            assert!(masses.iter().all(|&c| c > 0.0));

            blindsr_solution_free(sol);
            blindsr_basis_free(basis);
            blindsr_instance_free(inst);
        }
    }

    #[test]
    fn errors_come_back_as_codes_with_messages() {
        unsafe {
            let mut inst: *mut BlindsrInstance = ptr::null_mut();
            // K·min_sep ≥ 1 is rejected by the generator
            let code = blindsr_instance_generate(5, 2, 10, 6.0, 0.5, f64::INFINITY, 1, 0, &mut inst);
            assert!(code == BlindsrCode::InvalidArgument);
            let len = blindsr_last_error_message(ptr::null_mut(), 0);
            assert!(len > 0);
            let mut buf = vec![0i8; len + 1];
            blindsr_last_error_message(buf.as_mut_ptr() as *mut c_char, buf.len());
            let msg = CStr::from_ptr(buf.as_ptr() as *const c_char).to_str().unwrap();
            assert!(msg.contains("min_sep"), "message: {msg}");

            assert!(blindsr_instance_read(ptr::null(), &mut inst) == BlindsrCode::NullPointer);
            assert!(blindsr_solve(ptr::null(), ptr::null(), BlindsrMethod::Pswf, -1.0, -1.0, &mut (ptr::null_mut() as *mut BlindsrSolution)) == BlindsrCode::NullPointer);
        }
    }

    #[test]
    fn null_handles_degrade_to_defaults_not_crashes() {
        unsafe {
            assert!(blindsr_solution_objective(ptr::null()).is_nan());
            assert_eq!(blindsr_solution_num_spikes(ptr::null()), 0);
            assert_eq!(blindsr_solution_spikes(ptr::null(), ptr::null_mut(), ptr::null_mut(), 4), 0);
            blindsr_solution_free(ptr::null_mut());
            blindsr_basis_free(ptr::null_mut());
            blindsr_instance_free(ptr::null_mut());
        }
    }
}
