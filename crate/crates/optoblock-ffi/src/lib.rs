//! C ABI for the optoblock simulator.
//!
//! Conventions: opaque handles own their Rust data and are released with
//! the matching `_free`; every fallible call returns an [`ObStatus`] and
//! leaves a description retrievable through [`ob_last_error_message`] on
//! failure. Panics are caught at the boundary and surfaced as
//! `OB_STATUS_PANIC`. All rates are in units of `gamma_c` (fixed at 1);
//! delays are in units of `1/gamma_c`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use optoblock::error::Error;
use optoblock::liouvillian::{build_liouvillian, steady_state_detailed, EvolveOptions};
use optoblock::model::{OpticalMode, System, SystemParams};
use optoblock::observables::{evaluate_transport, g2_tau};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Arguments failed validation.
    InvalidArgument = 2,
    /// Configuration text could not be parsed.
    Config = 3,
    /// The solver failed (degenerate steady state, integrator failure, ...).
    Solver = 4,
    /// Filesystem failure.
    Io = 5,
    /// A string argument was not valid UTF-8.
    Utf8 = 6,
    /// An internal panic was caught at the boundary.
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(e: &Error) -> ObStatus {
    match e {
        Error::Config(_) => ObStatus::Config,
        Error::Io(_) => ObStatus::Io,
        Error::InvalidDimension { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidFrequency { .. }
        | Error::ModeIndexOutOfRange { .. }
        | Error::DimensionMismatch { .. }
        | Error::SpaceMismatch { .. }
        | Error::CutoffTooSmall { .. }
        | Error::NegativeRate { .. }
        | Error::DegenerateTunneling
        | Error::SingularPump
        | Error::UndefinedTransmission
        | Error::UndefinedCorrelation => ObStatus::InvalidArgument,
        _ => ObStatus::Solver,
    }
}

fn fail(e: &Error) -> ObStatus {
    set_last_error(&e.to_string());
    status_for(e)
}

fn guarded(f: impl FnOnce() -> ObStatus) -> ObStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            ObStatus::Panic
        }
    }
}

/// Opaque handle holding a validated parameter set.
pub struct ObParams {
    inner: SystemParams,
}

/// Scalar transport observables of one operating point.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ObTransport {
    pub t21: f64,
    pub t12: f64,
    pub isolation_db: f64,
    pub g2_21_zero: f64,
    pub g2_12_zero: f64,
    pub n_l: f64,
    pub n_r: f64,
    pub residual_rel_21: f64,
    pub residual_rel_12: f64,
}

/// Crate version as a static C string.
#[no_mangle]
pub extern "C" fn ob_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Description of the last failure on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn ob_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Create a parameter set. Detunings and rates are in units of gamma_c;
/// `coupling` must be the non-negative pair-exchange strength G.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ob_params_new(
    detuning: f64,
    mech_detuning: f64,
    coupling: f64,
    probe_amplitude: f64,
    mech_damping: f64,
    thermal_phonons: f64,
    cutoff_photon: u32,
    cutoff_phonon: u32,
    out: *mut *mut ObParams,
) -> ObStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out pointer is null");
            return ObStatus::NullArgument;
        }
        let params = SystemParams {
            detuning,
            mech_detuning,
            coupling,
            probe_amplitude,
            optical_damping: 1.0,
            mech_damping,
            thermal_phonons,
            cutoff_photon: cutoff_photon as usize,
            cutoff_phonon: cutoff_phonon as usize,
        };
        if let Err(e) = params.validate() {
            return fail(&e);
        }
        unsafe { *out = Box::into_raw(Box::new(ObParams { inner: params })) };
        ObStatus::Ok
    })
}

/// Create the standard operating point (G = 3, eps = 1/10, gamma_m = 1/100,
/// n_th = 0, cutoffs (5, 12)) at a detuning given in units of G, with the
/// mechanical detuning locked to Delta/2.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ob_params_new_blockade(
    detuning_over_g: f64,
    out: *mut *mut ObParams,
) -> ObStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out pointer is null");
            return ObStatus::NullArgument;
        }
        let params = SystemParams::blockade_base(detuning_over_g * 3.0);
        unsafe { *out = Box::into_raw(Box::new(ObParams { inner: params })) };
        ObStatus::Ok
    })
}

/// Release a parameter handle. Null is a no-op.
///
/// # Safety
/// `p` must have come from an `ob_params_new*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ob_params_free(p: *mut ObParams) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Solve both probe directions at this operating point and fill the
/// transport observables.
///
/// # Safety
/// `p` must be a live handle; `out` must point to an `ObTransport`.
#[no_mangle]
pub unsafe extern "C" fn ob_solve_transport(
    p: *const ObParams,
    out: *mut ObTransport,
) -> ObStatus {
    guarded(|| {
        if p.is_null() || out.is_null() {
            set_last_error("params or out pointer is null");
            return ObStatus::NullArgument;
        }
        let params = unsafe { &(*p).inner };
        match evaluate_transport(params) {
            Ok(eval) => {
                unsafe {
                    *out = ObTransport {
                        t21: eval.result.t21,
                        t12: eval.result.t12,
                        isolation_db: eval.result.isolation_db,
                        g2_21_zero: eval.result.g2_21_zero,
                        g2_12_zero: eval.result.g2_12_zero,
                        n_l: eval.result.n_l,
                        n_r: eval.result.n_r,
                        residual_rel_21: eval.residual_rel_21,
                        residual_rel_12: eval.residual_rel_12,
                    };
                }
                ObStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Delayed correlation g2_21(tau) on the port-1 path over an ascending
/// grid of delays (units of 1/gamma_c), written to `out_g2[0..n_taus]`.
///
/// # Safety
/// `p` must be a live handle; `taus` and `out_g2` must each point to
/// `n_taus` doubles.
#[no_mangle]
pub unsafe extern "C" fn ob_g2_delay(
    p: *const ObParams,
    taus: *const f64,
    n_taus: usize,
    out_g2: *mut f64,
) -> ObStatus {
    guarded(|| {
        if p.is_null() || taus.is_null() || out_g2.is_null() {
            set_last_error("params, taus or out pointer is null");
            return ObStatus::NullArgument;
        }
        let params = unsafe { &(*p).inner };
        let taus = unsafe { std::slice::from_raw_parts(taus, n_taus) };
        let run = || -> Result<Vec<f64>, Error> {
            let sys = System::port1(params)?;
            let l = build_liouvillian(&sys.hamiltonian, &sys.channels)?;
            let sol = steady_state_detailed(&l)?;
            g2_tau(&sys, &l, &sol.rho, OpticalMode::Left, taus, &EvolveOptions::default())
        };
        match run() {
            Ok(values) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out_g2, n_taus) };
                out.copy_from_slice(&values);
                ObStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Predicted resonance detunings (units of G) from the dressed ladder up
/// to `max_pair`, ascending and deduplicated. Writes at most `capacity`
/// values and stores the full count in `n_out`; a short buffer is reported
/// as invalid.
///
/// # Safety
/// `out` must point to `capacity` doubles; `n_out` to one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn ob_resonance_detunings(
    max_pair: u32,
    cutoff_photon: u32,
    cutoff_phonon: u32,
    out: *mut f64,
    capacity: usize,
    n_out: *mut usize,
) -> ObStatus {
    guarded(|| {
        if out.is_null() || n_out.is_null() {
            set_last_error("out or n_out pointer is null");
            return ObStatus::NullArgument;
        }
        match optoblock::dressed::predicted_detuning_set(
            max_pair as usize,
            cutoff_photon as usize,
            cutoff_phonon as usize,
        ) {
            Ok(set) => {
                unsafe { *n_out = set.len() };
                if set.len() > capacity {
                    set_last_error("buffer too small for the prediction set");
                    return ObStatus::InvalidArgument;
                }
                let slice = unsafe { std::slice::from_raw_parts_mut(out, set.len()) };
                slice.copy_from_slice(&set);
                ObStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Run a full sweep from configuration text (the flat key = value format)
/// and write the CSV table to `out_csv_path`. `threads` = 0 uses all cores.
///
/// # Safety
/// `config_text` and `out_csv_path` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ob_run_sweep(
    config_text: *const c_char,
    out_csv_path: *const c_char,
    threads: u32,
) -> ObStatus {
    guarded(|| {
        if config_text.is_null() || out_csv_path.is_null() {
            set_last_error("config or path pointer is null");
            return ObStatus::NullArgument;
        }
        let text = match unsafe { CStr::from_ptr(config_text) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_last_error("config text is not valid UTF-8");
                return ObStatus::Utf8;
            }
        };
        let path = match unsafe { CStr::from_ptr(out_csv_path) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_last_error("output path is not valid UTF-8");
                return ObStatus::Utf8;
            }
        };
        let run = || -> Result<usize, Error> {
            let kvs = optoblock::sweep::parse_key_values(text)?;
            let cfg = optoblock::sweep::config_from_key_values(&kvs)?;
            let result = optoblock::sweep::run_sweep(&cfg, &kvs)?;
            std::fs::write(path, result.to_csv_string())?;
            Ok(result.n_failed())
        };
        let outcome = if threads == 0 {
            run()
        } else {
            match rayon::ThreadPoolBuilder::new().num_threads(threads as usize).build() {
                Ok(pool) => pool.install(run),
                Err(e) => {
                    set_last_error(&format!("thread pool construction failed: {e}"));
                    return ObStatus::Solver;
                }
            }
        };
        match outcome {
            Ok(0) => ObStatus::Ok,
            Ok(failed) => {
                set_last_error(&format!("{failed} sweep rows failed; see the status column"));
                ObStatus::Solver
            }
            Err(e) => fail(&e),
        }
    })
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(ob_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
