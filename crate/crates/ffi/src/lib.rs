//! C ABI for the nlslab core: opaque handles, integer status codes, and a
//! thread-local last-error message. The header `include/nlslab.h` is
//! generated at build time by cbindgen.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nlslab::config::parse_config;
use nlslab::error::Error;
use nlslab::experiments::run_experiment;
use nlslab::groundstate::{
    default_r_max, evaluate_radial_deriv, evaluate_radial_one, gn_sharp_constant,
    pohozaev_energy, solve_ground_state, RadialProfile, DEFAULT_TOL,
};
use nlslab::spectral::compute_spectral_data;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NlslabStatus {
    /// Success.
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// Invalid argument or configuration (details via nlslab_last_error).
    InvalidArgument = 2,
    /// A numerical routine failed to converge or left its valid regime.
    Numerical = 3,
    /// Filesystem error while writing experiment artifacts.
    Io = 4,
    /// An experiment ran to completion but an invariant check failed.
    InvariantFailed = 5,
    /// Internal panic; the handle states are unchanged.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> NlslabStatus {
    match err {
        Error::InvalidArgument(_) | Error::ParseError(_) | Error::ValidationError { .. } => {
            NlslabStatus::InvalidArgument
        }
        Error::Io(_) => NlslabStatus::Io,
        _ => NlslabStatus::Numerical,
    }
}

fn guard<T>(f: impl FnOnce() -> Result<T, NlslabStatus>, out: impl FnOnce(T)) -> NlslabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            out(v);
            NlslabStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            NlslabStatus::Internal
        }
    }
}

/// Opaque handle to a solved radial ground-state profile.
pub struct NlslabProfile {
    inner: RadialProfile,
}

/// Copy the last error message for the calling thread into `buf`
/// (truncated, always NUL-terminated). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn nlslab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Solve the ground state in dimension `d` (1..=15). On success the handle
/// must be released with `nlslab_profile_free`.
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_solve(
    d: usize,
    out: *mut *mut NlslabProfile,
) -> NlslabStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return NlslabStatus::NullPointer;
    }
    guard(
        || {
            solve_ground_state(d, DEFAULT_TOL, default_r_max(d))
                .map(|p| Box::into_raw(Box::new(NlslabProfile { inner: p })))
                .map_err(|e| {
                    set_error(e.to_string());
                    status_of(&e)
                })
        },
        |p| *out = p,
    )
}

/// Release a profile handle. A null handle is a no-op.
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_free(p: *mut NlslabProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

macro_rules! require_handle {
    ($p:expr) => {
        match $p.as_ref() {
            Some(h) => &h.inner,
            None => {
                set_error("profile handle is null");
                return NlslabStatus::NullPointer;
            }
        }
    };
}

macro_rules! require_out {
    ($out:expr) => {
        if $out.is_null() {
            set_error("out pointer is null");
            return NlslabStatus::NullPointer;
        }
    };
}

/// Evaluate the radial profile at `r >= 0`.
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_eval(
    p: *const NlslabProfile,
    r: f64,
    out: *mut f64,
) -> NlslabStatus {
    let profile = require_handle!(p);
    require_out!(out);
    *out = evaluate_radial_one(profile, r);
    NlslabStatus::Ok
}

/// Evaluate the radial derivative of the profile at `r >= 0`.
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_eval_deriv(
    p: *const NlslabProfile,
    r: f64,
    out: *mut f64,
) -> NlslabStatus {
    let profile = require_handle!(p);
    require_out!(out);
    *out = evaluate_radial_deriv(profile, r);
    NlslabStatus::Ok
}

/// Central value Q(0).
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_q0(
    p: *const NlslabProfile,
    out: *mut f64,
) -> NlslabStatus {
    let profile = require_handle!(p);
    require_out!(out);
    *out = profile.q0;
    NlslabStatus::Ok
}

/// Squared L2 mass of the profile.
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_mass_sq(
    p: *const NlslabProfile,
    out: *mut f64,
) -> NlslabStatus {
    let profile = require_handle!(p);
    require_out!(out);
    *out = profile.mass_sq;
    NlslabStatus::Ok
}

/// Energy of the profile (zero at the ground state up to quadrature error).
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_energy(
    p: *const NlslabProfile,
    out: *mut f64,
) -> NlslabStatus {
    let profile = require_handle!(p);
    require_out!(out);
    match pohozaev_energy(profile) {
        Ok(v) => {
            *out = v;
            NlslabStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// Sharp interpolation-inequality constant attained by the profile.
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_sharp_constant(
    p: *const NlslabProfile,
    out: *mut f64,
) -> NlslabStatus {
    let profile = require_handle!(p);
    require_out!(out);
    *out = gn_sharp_constant(profile);
    NlslabStatus::Ok
}

/// Magnitude of the negative eigenvalue of the linearized operator,
/// computed on an `m`-cell radial grid (m >= 200).
#[no_mangle]
pub unsafe extern "C" fn nlslab_profile_eigenvalue(
    p: *const NlslabProfile,
    m: usize,
    out: *mut f64,
) -> NlslabStatus {
    let profile = require_handle!(p);
    require_out!(out);
    guard(
        || {
            compute_spectral_data(profile, m)
                .map(|data| data.lambda_d)
                .map_err(|e| {
                    set_error(e.to_string());
                    status_of(&e)
                })
        },
        |v| *out = v,
    )
}

/// Parse a TOML experiment configuration and run it; artifacts are written
/// to the configured output directory. Returns Ok when every invariant
/// held, InvariantFailed when the run completed but a check failed (the
/// failed checks are joined into the last-error message).
#[no_mangle]
pub unsafe extern "C" fn nlslab_run_experiment(config_toml: *const c_char) -> NlslabStatus {
    if config_toml.is_null() {
        set_error("config pointer is null");
        return NlslabStatus::NullPointer;
    }
    let text = match CStr::from_ptr(config_toml).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("config is not valid UTF-8");
            return NlslabStatus::InvalidArgument;
        }
    };
    match catch_unwind(AssertUnwindSafe(|| {
        parse_config(text).and_then(|config| run_experiment(&config))
    })) {
        Ok(Ok(report)) => {
            if report.passed() {
                NlslabStatus::Ok
            } else {
                set_error(report.failures.join(", "));
                NlslabStatus::InvariantFailed
            }
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            NlslabStatus::Internal
        }
    }
}
