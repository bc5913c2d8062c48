//! C ABI for the solver: opaque handles, integer status codes, and a
//! thread-local last-error message.
//!
//! Every function is panic-safe (panics are caught and reported as
//! `DYNKIN_STATUS_INTERNAL`) and NULL-tolerant. Handles own their data; each
//! `*_new`/`*_solve` has a matching `*_free`, and freeing NULL is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dynkin::experiment::{run, ExperimentSpec, RunOptions};
use dynkin::game::{estimate_value, optimal_policies};
use dynkin::solver::{solve_ode, solve_pde, ValueSurface};
use dynkin::{Error, MarkovModel};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DynkinStatus {
    DynkinStatusOk = 0,
    /// A required pointer argument was NULL.
    DynkinStatusNullArgument = 1,
    /// A string argument was not valid UTF-8.
    DynkinStatusUtf8 = 2,
    /// The experiment document failed to parse.
    DynkinStatusParse = 3,
    /// The experiment document failed validation.
    DynkinStatusValidation = 4,
    /// A value left the criterion's validity interval.
    DynkinStatusDomain = 5,
    /// The requested operation does not apply to this configuration.
    DynkinStatusMode = 6,
    /// The explicit scheme's stability bound was violated.
    DynkinStatusCfl = 7,
    /// Exponential overflow in the quadratic driver.
    DynkinStatusOverflow = 8,
    /// Any other runtime failure; see the last-error message.
    DynkinStatusRuntime = 9,
    /// A panic was caught at the boundary.
    DynkinStatusInternal = 10,
}

use DynkinStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap();
    });
}

fn status_of(err: &Error) -> DynkinStatus {
    match err {
        Error::Parse(_) => DynkinStatusParse,
        Error::Validation { .. } | Error::InvalidParameter { .. } => DynkinStatusValidation,
        Error::DomainViolation { .. } | Error::PathDomain { .. } => DynkinStatusDomain,
        Error::Mode(_) | Error::SurfaceMismatch(_) => DynkinStatusMode,
        Error::CflViolation { .. } => DynkinStatusCfl,
        Error::Overflow { .. } => DynkinStatusOverflow,
        _ => DynkinStatusRuntime,
    }
}

fn fail(err: &Error) -> DynkinStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guarded<F: FnOnce() -> DynkinStatus>(f: F) -> DynkinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic at the C boundary");
            DynkinStatusInternal
        }
    }
}

/// Opaque experiment handle: a parsed and validated document plus its model.
pub struct DynkinExperiment {
    spec: ExperimentSpec,
    model: MarkovModel,
}

/// Opaque solved-surface handle.
pub struct DynkinSurface {
    surface: ValueSurface,
}

/// Copy the last error message into `buf` (NUL-terminated, truncated to
/// `cap`); returns the full message length in bytes excluding the NUL.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be NULL (query mode).
#[no_mangle]
pub unsafe extern "C" fn dynkin_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Ensure termination even when truncated.
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dynkin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse and validate an experiment TOML document.
///
/// On success writes a handle to `out`; the caller frees it with
/// [`dynkin_experiment_free`].
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dynkin_experiment_from_toml(
    text: *const c_char,
    out: *mut *mut DynkinExperiment,
) -> DynkinStatus {
    guarded(|| {
        if text.is_null() || out.is_null() {
            set_error("NULL argument");
            return DynkinStatusNullArgument;
        }
        let text = match CStr::from_ptr(text).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("experiment text is not valid UTF-8");
                return DynkinStatusUtf8;
            }
        };
        let spec = match ExperimentSpec::parse(text) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let model = match spec.validate() {
            Ok(m) => m,
            Err(e) => return fail(&e),
        };
        *out = Box::into_raw(Box::new(DynkinExperiment { spec, model }));
        DynkinStatusOk
    })
}

/// Free an experiment handle (NULL is ignored).
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dynkin_experiment_free(handle: *mut DynkinExperiment) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Solve the experiment's equation with its configured grid solver (`ode` or
/// `pde` mode) and return an owned surface handle.
///
/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dynkin_solve(
    handle: *const DynkinExperiment,
    out: *mut *mut DynkinSurface,
) -> DynkinStatus {
    guarded(|| {
        let Some(exp) = handle.as_ref() else {
            set_error("NULL experiment handle");
            return DynkinStatusNullArgument;
        };
        if out.is_null() {
            set_error("NULL output pointer");
            return DynkinStatusNullArgument;
        }
        let solver = &exp.spec.solver;
        let solved = match solver.mode.as_str() {
            "ode" => solve_ode(&exp.model, solver.n_t),
            "pde" => solve_pde(
                &exp.model,
                solver.n_t,
                solver.n_x.unwrap_or(0),
                solver.x_min.unwrap_or(0.0),
                solver.x_max.unwrap_or(0.0),
            ),
            other => {
                set_error(&format!(
                    "solver mode `{other}` has no surface; use ode or pde"
                ));
                return DynkinStatusMode;
            }
        };
        match solved {
            Ok(surface) => {
                *out = Box::into_raw(Box::new(DynkinSurface { surface }));
                DynkinStatusOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Free a surface handle (NULL is ignored).
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dynkin_surface_free(handle: *mut DynkinSurface) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Game value at `(t, x)` by bilinear interpolation.
///
/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dynkin_surface_value(
    handle: *const DynkinSurface,
    t: f64,
    x: f64,
    out: *mut f64,
) -> DynkinStatus {
    guarded(|| {
        let Some(s) = handle.as_ref() else {
            set_error("NULL surface handle");
            return DynkinStatusNullArgument;
        };
        if out.is_null() {
            set_error("NULL output pointer");
            return DynkinStatusNullArgument;
        }
        let mut clamps = 0u64;
        *out = s.surface.interp_q(t, x, &mut clamps);
        DynkinStatusOk
    })
}

/// Game value at `(0, x0)`.
///
/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dynkin_surface_value0(
    handle: *const DynkinSurface,
    out: *mut f64,
) -> DynkinStatus {
    guarded(|| {
        let Some(s) = handle.as_ref() else {
            set_error("NULL surface handle");
            return DynkinStatusNullArgument;
        };
        if out.is_null() {
            set_error("NULL output pointer");
            return DynkinStatusNullArgument;
        }
        *out = s.surface.value_at_initial();
        DynkinStatusOk
    })
}

/// Monte Carlo estimate of the game value under the optimal threshold
/// policies read from `surface`; writes the estimate and its delta-method
/// standard error.
///
/// # Safety
/// All pointer arguments must be valid; `out_value`/`out_stderr` may be NULL
/// to skip that output.
#[no_mangle]
pub unsafe extern "C" fn dynkin_estimate_value(
    handle: *const DynkinExperiment,
    surface: *const DynkinSurface,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    out_value: *mut f64,
    out_stderr: *mut f64,
) -> DynkinStatus {
    guarded(|| {
        let (Some(exp), Some(surf)) = (handle.as_ref(), surface.as_ref()) else {
            set_error("NULL handle");
            return DynkinStatusNullArgument;
        };
        let (p1, p2) = match optimal_policies(&surf.surface, &exp.model.bundle) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        match estimate_value(
            &exp.model,
            Some(&surf.surface),
            &p1,
            &p2,
            n_paths,
            n_steps,
            seed,
        ) {
            Ok(est) => {
                if !out_value.is_null() {
                    *out_value = est.value;
                }
                if !out_stderr.is_null() {
                    *out_stderr = est.stderr_value;
                }
                DynkinStatusOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Execute the experiment end to end (solver, checks, artifacts), as the CLI
/// `run` subcommand does. `out_dir` may be NULL to use the document's output
/// directory. Writes 1 to `out_all_passed` iff every configured check passed.
///
/// # Safety
/// `handle` must be valid; `out_dir`, when non-NULL, must be NUL-terminated;
/// `out_all_passed` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dynkin_experiment_run(
    handle: *const DynkinExperiment,
    out_dir: *const c_char,
    seed_override: u64,
    has_seed_override: bool,
    out_all_passed: *mut bool,
) -> DynkinStatus {
    guarded(|| {
        let Some(exp) = handle.as_ref() else {
            set_error("NULL experiment handle");
            return DynkinStatusNullArgument;
        };
        let dir = if out_dir.is_null() {
            None
        } else {
            match CStr::from_ptr(out_dir).to_str() {
                Ok(d) => Some(PathBuf::from(d)),
                Err(_) => {
                    set_error("output directory is not valid UTF-8");
                    return DynkinStatusUtf8;
                }
            }
        };
        let options = RunOptions {
            seed_override: has_seed_override.then_some(seed_override),
            out_dir: dir,
            emit_paths: false,
        };
        match run(&exp.spec, &options) {
            Ok(outcome) => {
                if !out_all_passed.is_null() {
                    *out_all_passed = outcome.all_passed;
                }
                DynkinStatusOk
            }
            Err(e) => fail(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    const SPEC: &str = r#"
schema_version = 1

[model]
r = 0.25
lambda1 = 2.0
lambda2 = 3.0
horizon = 1.0
x0 = 0.0
dynamics = { kind = "arithmetic", drift = 0.0, vol = 0.0 }
risk = { kind = "identity" }

[model.payoffs]
running = { kind = "constant", value = 0.0 }
lower = { kind = "constant", value = 0.95 }
upper = { kind = "constant", value = 0.98 }
terminal = { kind = "constant", value = 1.0 }

[solver]
mode = "ode"
n_t = 500
seed = 7
"#;

    fn experiment() -> *mut DynkinExperiment {
        let text = CString::new(SPEC).unwrap();
        let mut handle: *mut DynkinExperiment = ptr::null_mut();
        let status = unsafe { dynkin_experiment_from_toml(text.as_ptr(), &mut handle) };
        assert_eq!(status, DynkinStatusOk);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn solve_and_query_through_the_c_surface() {
        let exp = experiment();
        let mut surface: *mut DynkinSurface = ptr::null_mut();
        assert_eq!(unsafe { dynkin_solve(exp, &mut surface) }, DynkinStatusOk);
        let mut v0 = 0.0f64;
        assert_eq!(unsafe { dynkin_surface_value0(surface, &mut v0) }, DynkinStatusOk);
        assert!((v0 - 0.8823385).abs() < 1e-4, "v0 = {v0}");
        let mut vt = 0.0f64;
        assert_eq!(
            unsafe { dynkin_surface_value(surface, 1.0, 0.0, &mut vt) },
            DynkinStatusOk
        );
        assert!((vt - 1.0).abs() < 1e-10, "terminal value {vt}");

        let mut est = 0.0f64;
        let mut se = 0.0f64;
        assert_eq!(
            unsafe { dynkin_estimate_value(exp, surface, 2000, 32, 5, &mut est, &mut se) },
            DynkinStatusOk
        );
        assert!((est - v0).abs() <= 4.0 * se, "est {est}, v0 {v0}, se {se}");

        unsafe {
            dynkin_surface_free(surface);
            dynkin_experiment_free(exp);
        }
    }

    #[test]
    fn parse_and_validation_errors_map_to_codes() {
        let mut handle: *mut DynkinExperiment = ptr::null_mut();
        let bad_toml = CString::new("schema_version = ").unwrap();
        assert_eq!(
            unsafe { dynkin_experiment_from_toml(bad_toml.as_ptr(), &mut handle) },
            DynkinStatusParse
        );
        let bad_builtin = CString::new(SPEC.replace("\"constant\"", "\"constnt\"")).unwrap();
        assert_eq!(
            unsafe { dynkin_experiment_from_toml(bad_builtin.as_ptr(), &mut handle) },
            DynkinStatusValidation
        );
        let mut buf = vec![0i8; 256];
        let len = unsafe { dynkin_last_error(buf.as_mut_ptr() as *mut c_char, buf.len()) };
        assert!(len > 0);
        let msg = unsafe { CStr::from_ptr(buf.as_ptr() as *const c_char) }
            .to_string_lossy()
            .into_owned();
        assert!(msg.contains("did you mean"), "{msg}");
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut out: *mut DynkinSurface = ptr::null_mut();
        assert_eq!(
            unsafe { dynkin_solve(ptr::null(), &mut out) },
            DynkinStatusNullArgument
        );
        assert_eq!(
            unsafe { dynkin_surface_value0(ptr::null(), ptr::null_mut()) },
            DynkinStatusNullArgument
        );
        unsafe {
            dynkin_surface_free(ptr::null_mut());
            dynkin_experiment_free(ptr::null_mut());
        }
    }

    #[test]
    fn cfl_violation_maps_to_its_code() {
        let text = SPEC
            .replace("mode = \"ode\"", "mode = \"pde\"\nn_x = 100\nx_min = -1.0\nx_max = 1.0")
            .replace("vol = 0.0", "vol = 1.0");
        let ctext = CString::new(text).unwrap();
        let mut exp: *mut DynkinExperiment = ptr::null_mut();
        assert_eq!(
            unsafe { dynkin_experiment_from_toml(ctext.as_ptr(), &mut exp) },
            DynkinStatusOk
        );
        let mut surface: *mut DynkinSurface = ptr::null_mut();
        assert_eq!(unsafe { dynkin_solve(exp, &mut surface) }, DynkinStatusCfl);
        unsafe { dynkin_experiment_free(exp) };
    }

    #[test]
    fn full_run_through_the_c_surface() {
        let text = format!(
            "{SPEC}\n[[checks]]\nkind = \"recursion\"\n\n[output]\nemit_surface = false\n"
        );
        let ctext = CString::new(text).unwrap();
        let mut exp: *mut DynkinExperiment = ptr::null_mut();
        assert_eq!(
            unsafe { dynkin_experiment_from_toml(ctext.as_ptr(), &mut exp) },
            DynkinStatusOk
        );
        let dir = std::env::temp_dir().join("dynkin_ffi_run_test");
        let cdir = CString::new(dir.to_str().unwrap()).unwrap();
        let mut all_passed = false;
        assert_eq!(
            unsafe { dynkin_experiment_run(exp, cdir.as_ptr(), 0, false, &mut all_passed) },
            DynkinStatusOk
        );
        assert!(all_passed);
        assert!(dir.join("summary.json").exists());
        let _ = std::fs::remove_dir_all(&dir);
        unsafe { dynkin_experiment_free(exp) };
    }

    #[test]
    fn version_is_a_readable_string() {
        let v = unsafe { CStr::from_ptr(dynkin_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }
}
