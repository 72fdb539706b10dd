//! C interface to `fedsec`.
//!
//! Every fallible function returns a status code: [`FEDSEC_OK`] on success,
//! a positive library error code, or one of the negative interface codes.
//! After a failure, [`fedsec_last_error`] returns a description of the most
//! recent error on the calling thread; free it with [`fedsec_string_free`].
//!
//! Selection state lives behind the opaque [`FedsecSelection`] handle,
//! created by [`fedsec_selection_new`] and released by
//! [`fedsec_selection_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fedsec::montecarlo;
use fedsec::policy::{SelectionState, Verdict};
use fedsec::stopping::{self, AlphaFormula, BudgetSpec};
use fedsec::Error;

pub const FEDSEC_OK: i32 = 0;
/// A required pointer argument was null.
pub const FEDSEC_ERR_NULL: i32 = -1;
/// The library panicked; the handle involved should be freed.
pub const FEDSEC_ERR_PANIC: i32 = -2;
/// A probe callback reported failure.
pub const FEDSEC_ERR_CALLBACK: i32 = -3;
/// An output buffer was too small.
pub const FEDSEC_ERR_BUFFER: i32 = -4;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedsecVerdict {
    Reject = 0,
    Accept = 1,
    AcceptForced = 2,
    SkipUnprobed = 3,
}

impl From<Verdict> for FedsecVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Reject => FedsecVerdict::Reject,
            Verdict::Accept => FedsecVerdict::Accept,
            Verdict::AcceptForced => FedsecVerdict::AcceptForced,
            Verdict::SkipUnprobed => FedsecVerdict::SkipUnprobed,
        }
    }
}

/// Opaque selection state for one stream of candidates.
pub struct FedsecSelection {
    state: SelectionState,
}

/// Supplies the probe accuracy of the candidate at `arrival_index` through
/// `out`; returns 0 on success.
pub type FedsecProbeFn = Option<unsafe extern "C" fn(user_data: *mut c_void, arrival_index: usize, out: *mut f64) -> i32>;

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

enum Failure {
    Lib(Error),
    Code(i32, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Code(FEDSEC_ERR_NULL, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FEDSEC_OK,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            e.code()
        }
        Ok(Err(Failure::Code(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FEDSEC_ERR_PANIC
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Description of the calling thread's last error, or null if none.
/// The string is owned by the caller; release it with
/// [`fedsec_string_free`].
#[no_mangle]
pub extern "C" fn fedsec_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_deref() {
        Some(msg) => CString::new(msg.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fedsec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Optimal observation threshold `α*` for `n` candidates and ranks
/// `r1..=r2`. A nonzero `paper_table_variant` uses the division form.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fedsec_alpha_star(n: u64, r1: u32, r2: u32, paper_table_variant: i32, out: *mut f64) -> i32 {
    guard(|| {
        let formula = if paper_table_variant != 0 { AlphaFormula::PaperTable } else { AlphaFormula::Root };
        write(out, stopping::alpha_star_with(n, r1, r2, formula)?, "out")
    })
}

/// Success probability of the threshold rule at real-valued `alpha`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fedsec_selection_probability(n: u64, alpha: f64, r1: u32, r2: u32, out: *mut f64) -> i32 {
    guard(|| write(out, stopping::selection_probability(n, alpha, r1, r2)?.value, "out"))
}

/// Monte Carlo estimate of the threshold rule's success rate.
///
/// # Safety
/// `p_hat` and `std_err` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fedsec_monte_carlo(
    n: usize,
    budget: usize,
    alpha_index: usize,
    trials: u64,
    seed: u64,
    p_hat: *mut f64,
    std_err: *mut f64,
) -> i32 {
    guard(|| {
        if p_hat.is_null() || std_err.is_null() {
            return Err(null("output pointer"));
        }
        let est = montecarlo::monte_carlo_top_r_probability(n, budget, alpha_index, trials, seed)?;
        write(p_hat, est.value, "p_hat")?;
        write(std_err, est.std_error, "std_err")
    })
}

/// Create selection state for `n` candidates and budget `budget`, with the
/// threshold optimized for ranks `r1..=r2`.
///
/// # Safety
/// `out` must be valid for a write; on success it receives a handle to be
/// released with [`fedsec_selection_free`].
#[no_mangle]
pub unsafe extern "C" fn fedsec_selection_new(
    n: usize,
    budget: usize,
    r1: u32,
    r2: u32,
    out: *mut *mut FedsecSelection,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // small toy streams are legitimate through this interface
        let spec = BudgetSpec::builder(n, budget, r1, r2).allow_small_n().build()?;
        let handle = Box::new(FedsecSelection { state: SelectionState::new(spec) });
        write(out, Box::into_raw(handle), "out")
    })
}

/// # Safety
/// `handle` must be null or a live handle from [`fedsec_selection_new`].
#[no_mangle]
pub unsafe extern "C" fn fedsec_selection_free(handle: *mut FedsecSelection) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of candidates observed and rejected before acceptance starts;
/// 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fedsec_selection_alpha_index(handle: *const FedsecSelection) -> usize {
    handle.as_ref().map_or(0, |h| h.state.spec.alpha_star_index)
}

/// Number of candidates selected so far; 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fedsec_selection_count(handle: *const FedsecSelection) -> usize {
    handle.as_ref().map_or(0, |h| h.state.n_selected())
}

/// Feed the next candidate with a known probe accuracy.
///
/// # Safety
/// `handle` must be a live handle and `verdict` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fedsec_selection_observe(
    handle: *mut FedsecSelection,
    arrival_index: usize,
    accuracy: f64,
    verdict: *mut FedsecVerdict,
) -> i32 {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        let (d, _) = h.state.observe_secretary_with(arrival_index, "", || Ok(accuracy))?;
        write(verdict, d.verdict.into(), "verdict")
    })
}

/// Feed the next candidate, calling `probe` only if the decision needs its
/// accuracy. `*probed` is set to 1 if `probe` was called, else 0.
///
/// # Safety
/// `handle` must be a live handle, `verdict` and `probed` valid for writes,
/// and `probe` safe to call with `user_data`.
#[no_mangle]
pub unsafe extern "C" fn fedsec_selection_observe_lazy(
    handle: *mut FedsecSelection,
    arrival_index: usize,
    probe: FedsecProbeFn,
    user_data: *mut c_void,
    verdict: *mut FedsecVerdict,
    probed: *mut i32,
) -> i32 {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        let probe = probe.ok_or_else(|| null("probe"))?;
        if verdict.is_null() || probed.is_null() {
            return Err(null("output pointer"));
        }
        let mut callback_status = 0;
        let result = h.state.observe_secretary_with(arrival_index, "", || {
            let mut acc = f64::NAN;
            callback_status = probe(user_data, arrival_index, &mut acc);
            if callback_status != 0 {
                return Err(Error::State(format!("probe callback returned {callback_status}")));
            }
            Ok(acc)
        });
        let (d, measured) = match result {
            Err(e) if callback_status != 0 => return Err(Failure::Code(FEDSEC_ERR_CALLBACK, e.to_string())),
            r => r?,
        };
        write(verdict, d.verdict.into(), "verdict")?;
        write(probed, measured.is_some() as i32, "probed")
    })
}

/// Copy the arrival indices of the selected candidates, in acceptance
/// order, into `buf` (capacity `cap`). `*len` receives the count; if it
/// exceeds `cap`, nothing is copied and [`FEDSEC_ERR_BUFFER`] is returned.
///
/// # Safety
/// `handle` must be a live handle, `buf` valid for `cap` writes (or null
/// when `cap` is 0) and `len` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fedsec_selection_selected(
    handle: *const FedsecSelection,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> i32 {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let selected = h.state.selected();
        write(len, selected.len(), "len")?;
        if selected.len() > cap {
            return Err(Failure::Code(
                FEDSEC_ERR_BUFFER,
                format!("buffer holds {cap} entries, {} needed", selected.len()),
            ));
        }
        if selected.is_empty() {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        for (i, c) in selected.iter().enumerate() {
            buf.add(i).write(c.arrival_index);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn last_error() -> String {
        let p = fedsec_last_error();
        assert!(!p.is_null());
        let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
        unsafe { fedsec_string_free(p) };
        s
    }

    #[test]
    fn alpha_and_probability() {
        let mut a = 0.0;
        assert_eq!(unsafe { fedsec_alpha_star(1000, 2, 2, 0, &mut a) }, FEDSEC_OK);
        assert!((a - 135.3353).abs() < 1e-3);
        let mut p = 0.0;
        assert_eq!(unsafe { fedsec_selection_probability(1000, a, 2, 2, &mut p) }, FEDSEC_OK);
        assert!((p - 0.2707).abs() < 1e-3);
        assert_eq!(unsafe { fedsec_alpha_star(1000, 3, 2, 0, &mut a) }, 1);
        assert!(last_error().contains("domain"));
        assert_eq!(unsafe { fedsec_alpha_star(1000, 1, 1, 0, ptr::null_mut()) }, FEDSEC_ERR_NULL);
    }

    #[test]
    fn verdict_mapping_is_total() {
        assert_eq!(FedsecVerdict::from(Verdict::SkipUnprobed) as i32, 3);
        assert_eq!(FedsecVerdict::from(Verdict::AcceptForced) as i32, 2);
    }
}
