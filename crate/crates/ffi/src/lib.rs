//! C interface to `dgwve`.
//!
//! Laws and environments are opaque heap handles created by `*_new` style
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`DgwveStatus`]; on failure the message is kept per thread and
//! read back with [`dgwve_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dgwve::simulate::{self, Mode, SimOptions};
use dgwve::{analysis, Environment, Error, OffspringLaw};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgwveStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    Budget = 4,
    Io = 5,
    Panic = 6,
}

/// An offspring law.
pub struct DgwveLaw(OffspringLaw);

/// A varying environment.
pub struct DgwveEnv(Environment);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgwveMode {
    Direct = 0,
    Coupled = 1,
}

/// Monte Carlo summary at the horizon.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DgwveMcSummary {
    pub survival: f64,
    pub survival_se: f64,
    pub p_ext: f64,
    pub p_delta: f64,
    /// `E[Z_n | alive]`; NaN when no replicate survived.
    pub cond_mean: f64,
    pub extinct: u64,
    pub absorbed_delta: u64,
    pub alive: u64,
    pub overflow: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DgwveStatus {
    match e {
        Error::InvalidLaw(_) | Error::InvalidArgument(_) | Error::Json(_) => DgwveStatus::InvalidArgument,
        Error::Precondition(_) => DgwveStatus::Precondition,
        Error::Budget(_) => DgwveStatus::Budget,
        Error::Io(_) | Error::Csv(_) => DgwveStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DgwveStatus>) -> DgwveStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DgwveStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            DgwveStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, DgwveStatus>;
}

impl<T> OrStatus<T> for dgwve::Result<T> {
    fn or_status(self) -> Result<T, DgwveStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, DgwveStatus> {
    if p.is_null() {
        set_error("null pointer argument");
        Err(DgwveStatus::NullPointer)
    } else {
        Ok(&*p)
    }
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), DgwveStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(DgwveStatus::NullPointer);
    }
    unsafe { out.write(value) };
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dgwve_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dgwve_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Finite-support law with `weights[k] = f[k]` for `k < len`.
///
/// # Safety
/// `weights` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_law_finite(weights: *const f64, len: usize, out: *mut *mut DgwveLaw) -> DgwveStatus {
    guard(|| {
        if weights.is_null() && len > 0 {
            set_error("null weights");
            return Err(DgwveStatus::NullPointer);
        }
        let w = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(weights, len).to_vec() };
        let law = OffspringLaw::finite(w).or_status()?;
        write_out(out, Box::into_raw(Box::new(DgwveLaw(law))))
    })
}

/// `f(s) = q + r / (1 - p s)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_law_lf(q: f64, r: f64, p: f64, out: *mut *mut DgwveLaw) -> DgwveStatus {
    guard(|| {
        let law = OffspringLaw::linear_fractional(q, r, p).or_status()?;
        write_out(out, Box::into_raw(Box::new(DgwveLaw(law))))
    })
}

/// # Safety
/// `law` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dgwve_law_free(law: *mut DgwveLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// `f(s)`, `f'(s)` or `f''(s)` for `order` 0, 1, 2.
///
/// # Safety
/// `law` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_law_eval(law: *const DgwveLaw, s: f64, order: u8, out: *mut f64) -> DgwveStatus {
    guard(|| {
        let law = deref(law)?;
        write_out(out, law.0.eval(s, order).or_status()?)
    })
}

/// Smallest fixed point in `(0, 1)`; `*found` is 0 when there is none.
///
/// # Safety
/// `law` must be a live handle, `theta` and `found` writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_law_fixed_point(law: *const DgwveLaw, theta: *mut f64, found: *mut i32) -> DgwveStatus {
    guard(|| {
        let law = deref(law)?;
        let t = law.0.fixed_point();
        write_out(found, t.is_some() as i32)?;
        write_out(theta, t.unwrap_or(f64::NAN))
    })
}

/// The environment `f_n = law` for every `n`. The law is copied.
///
/// # Safety
/// `law` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_env_constant(law: *const DgwveLaw, out: *mut *mut DgwveEnv) -> DgwveStatus {
    guard(|| {
        let law = deref(law)?;
        write_out(out, Box::into_raw(Box::new(DgwveEnv(Environment::constant(law.0.clone())))))
    })
}

/// An environment from its JSON literal, e.g.
/// `{"kind":"named","id":"example-1b"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_env_from_json(json: *const c_char, out: *mut *mut DgwveEnv) -> DgwveStatus {
    guard(|| {
        if json.is_null() {
            set_error("null json");
            return Err(DgwveStatus::NullPointer);
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error(format!("json is not UTF-8: {e}"));
            DgwveStatus::InvalidArgument
        })?;
        let env: Environment = serde_json::from_str(text).map_err(Error::from).or_status()?;
        write_out(out, Box::into_raw(Box::new(DgwveEnv(env))))
    })
}

/// # Safety
/// `env` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dgwve_env_free(env: *mut DgwveEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// `f_{k,n}(s)` or one of its first two derivatives.
///
/// # Safety
/// `env` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_env_compose_eval(
    env: *const DgwveEnv,
    k: usize,
    n: usize,
    s: f64,
    order: u8,
    out: *mut f64,
) -> DgwveStatus {
    guard(|| {
        let env = deref(env)?;
        write_out(out, env.0.compose_eval(k, n, s, order).or_status()?)
    })
}

/// `P[τ_a > n]`.
///
/// # Safety
/// `env` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_env_survival(env: *const DgwveEnv, n: usize, out: *mut f64) -> DgwveStatus {
    guard(|| {
        let env = deref(env)?;
        write_out(out, analysis::absorption_profile(&env.0, n).or_status()?.survival)
    })
}

/// `E[Z_n]` and `E[Z_n²]`.
///
/// # Safety
/// `env` must be a live handle, `mean` and `second` writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_env_moments(env: *const DgwveEnv, n: usize, mean: *mut f64, second: *mut f64) -> DgwveStatus {
    guard(|| {
        let env = deref(env)?;
        let m = analysis::moments(&env.0, n).or_status()?;
        write_out(mean, m.mean)?;
        write_out(second, m.second_moment)
    })
}

/// `P[Z_n = k]` for `k = 0..=d` into `probs` (length `d + 1`), with the
/// `Δ` mass and the mass above `d`.
///
/// # Safety
/// `env` must be a live handle; `probs` must hold `d + 1` doubles; `delta`
/// and `tail` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_env_distribution(
    env: *const DgwveEnv,
    n: usize,
    d: usize,
    probs: *mut f64,
    delta: *mut f64,
    tail: *mut f64,
) -> DgwveStatus {
    guard(|| {
        let env = deref(env)?;
        if probs.is_null() {
            set_error("null probs");
            return Err(DgwveStatus::NullPointer);
        }
        let dist = env.0.compose_coeffs(n, d).or_status()?;
        std::slice::from_raw_parts_mut(probs, d + 1).copy_from_slice(&dist.probs);
        write_out(delta, dist.delta_mass)?;
        write_out(tail, dist.tail_mass)
    })
}

/// Monte Carlo over `reps` replicates. `threads` = 0 uses the global pool.
/// Results depend only on the arguments, not on `threads`.
///
/// # Safety
/// `env` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dgwve_simulate(
    env: *const DgwveEnv,
    horizon: usize,
    reps: u64,
    mode: DgwveMode,
    master_seed: u64,
    threads: usize,
    out: *mut DgwveMcSummary,
) -> DgwveStatus {
    guard(|| {
        let env = deref(env)?;
        let mode = match mode {
            DgwveMode::Direct => Mode::Direct,
            DgwveMode::Coupled => Mode::Coupled,
        };
        let opts = SimOptions { threads: (threads > 0).then_some(threads), ..SimOptions::default() };
        let s = simulate::monte_carlo(&env.0, horizon, reps, mode, master_seed, opts).or_status()?;
        write_out(
            out,
            DgwveMcSummary {
                survival: s.survival.value,
                survival_se: s.survival.se,
                p_ext: s.p_ext.value,
                p_delta: s.p_delta.value,
                cond_mean: s.cond_mean.value,
                extinct: s.counts.extinct,
                absorbed_delta: s.counts.absorbed_delta,
                alive: s.counts.alive,
                overflow: s.counts.overflow,
            },
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Budget("x".into())), DgwveStatus::Budget);
        assert_eq!(status_of(&Error::Precondition("x".into())), DgwveStatus::Precondition);
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), DgwveStatus::Panic);
        let msg = unsafe { CStr::from_ptr(dgwve_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }
}
