//! C ABI for the hold-out size selection toolkit.
//!
//! Conventions:
//! - Curves are opaque handles (`HoldoutCurve*`), created by
//!   `holdout_curve_fit_power` and released with `holdout_curve_free`.
//! - Every fallible function returns a `HoldoutStatus` code and writes its
//!   results through out-pointers, which are left untouched on failure.
//! - `holdout_last_error_message` returns a thread-local, NUL-terminated
//!   description of the most recent failure on the calling thread; the
//!   pointer stays valid until the next failing call on that thread.
//! - No function takes ownership of caller memory; all out-pointers must be
//!   valid for writes.
//!
//! The matching C header is generated by cbindgen at build time into
//! `include/holdout.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use holdout::curve::{eval_loss, eval_variance_bound, fit_power_curve, BoundMode, LossCurve};
use holdout::cv::LossAnchors;
use holdout::optimizer::{implicit_sigma2, optimal_m, sigma2_upper_bound};

/// Status code returned by every fallible FFI function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoldoutStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument was out of range or otherwise invalid.
    InvalidArgument = 2,
    /// The anchor losses are not monotone increasing in m.
    NonMonotoneAnchors = 3,
    /// No hold-out size is feasible at the requested sigma2.
    Infeasible = 4,
    /// m or K lies outside the curve's domain.
    OutOfDomain = 5,
    /// Unexpected internal failure (a bug; details in the error message).
    InternalError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes stripped");
    });
}

fn fail(status: HoldoutStatus, message: &str) -> HoldoutStatus {
    set_error(message);
    status
}

fn from_error(error: &holdout::Error) -> HoldoutStatus {
    use holdout::Error as E;
    let status = match error {
        E::NonMonotoneAnchors { .. } | E::ZeroAnchorScale(_) => HoldoutStatus::NonMonotoneAnchors,
        E::CurveInfeasible | E::NegativeLoss { .. } => HoldoutStatus::Infeasible,
        E::Extrapolation { .. } | E::HoldOutSizeOutOfRange { .. } | E::FoldCountOutOfRange { .. } => {
            HoldoutStatus::OutOfDomain
        }
        _ => HoldoutStatus::InvalidArgument,
    };
    fail(status, &error.to_string())
}

/// Run `body` with panics converted to `InternalError` so unwinding never
/// crosses the FFI boundary.
fn guarded(body: impl FnOnce() -> HoldoutStatus) -> HoldoutStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(HoldoutStatus::InternalError, "internal panic"),
    }
}

/// Opaque loss-curve handle.
pub struct HoldoutCurve {
    inner: LossCurve,
}

/// Power-fit parameters of a curve, for inspection.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldoutPowerFit {
    pub exponent: f64,
    pub scale: f64,
    pub offset: f64,
    pub beta: f64,
    pub alpha: f64,
}

/// Result of minimizing estimated loss + variance bound over m.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldoutOptimalSplit {
    /// Optimal hold-out size.
    pub m_star: usize,
    /// N / m_star.
    pub implied_k: f64,
    /// Negative utility at the minimizer.
    pub utility: f64,
}

fn bound_mode(sigma2: f64, symmetric: bool) -> BoundMode {
    if symmetric {
        BoundMode::symmetric(sigma2)
    } else {
        BoundMode::asymmetric(sigma2)
    }
}

/// Message describing the most recent failure on this thread, or an empty
/// string. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn holdout_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Fit the three-anchor power loss curve.
///
/// `l_loo`, `l_kref`, `l_lmo` are the CV losses at m = 1, m = N/k_ref and
/// m = N/2; `n` is the dataset size. On success writes a handle that the
/// caller must release with `holdout_curve_free`.
///
/// # Safety
/// `out_curve` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn holdout_curve_fit_power(
    l_loo: f64,
    l_kref: f64,
    l_lmo: f64,
    k_ref: usize,
    n: usize,
    out_curve: *mut *mut HoldoutCurve,
) -> HoldoutStatus {
    guarded(|| {
        if out_curve.is_null() {
            return fail(HoldoutStatus::NullPointer, "out_curve is NULL");
        }
        let anchors = match LossAnchors::new(l_loo, l_kref, l_lmo, k_ref, n) {
            Ok(anchors) => anchors,
            Err(e) => return from_error(&e),
        };
        match fit_power_curve(&anchors) {
            Ok(curve) => {
                unsafe {
                    *out_curve = Box::into_raw(Box::new(HoldoutCurve { inner: curve }));
                }
                HoldoutStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Release a curve handle. NULL is a no-op. The handle must not be used
/// afterwards.
///
/// # Safety
/// `curve` must be a handle returned by this library, released at most once.
#[no_mangle]
pub unsafe extern "C" fn holdout_curve_free(curve: *mut HoldoutCurve) {
    if !curve.is_null() {
        drop(unsafe { Box::from_raw(curve) });
    }
}

/// Read back the power-fit parameters.
///
/// # Safety
/// `curve` must be a live handle; `out_fit` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn holdout_curve_power_fit(
    curve: *const HoldoutCurve,
    out_fit: *mut HoldoutPowerFit,
) -> HoldoutStatus {
    guarded(|| {
        let (Some(curve), false) = (unsafe { curve.as_ref() }, out_fit.is_null()) else {
            return fail(HoldoutStatus::NullPointer, "curve or out_fit is NULL");
        };
        let Some(fit) = curve.inner.power() else {
            return fail(HoldoutStatus::InvalidArgument, "curve has no power fit");
        };
        unsafe {
            *out_fit = HoldoutPowerFit {
                exponent: fit.exponent,
                scale: fit.scale,
                offset: fit.offset,
                beta: fit.beta,
                alpha: fit.alpha,
            };
        }
        HoldoutStatus::Ok
    })
}

/// Estimated loss `E(m; sigma2)`. Fails with `OutOfDomain` outside
/// [1, N/2].
///
/// # Safety
/// `curve` must be a live handle; `out_loss` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn holdout_eval_loss(
    curve: *const HoldoutCurve,
    m: usize,
    sigma2: f64,
    out_loss: *mut f64,
) -> HoldoutStatus {
    guarded(|| {
        let (Some(curve), false) = (unsafe { curve.as_ref() }, out_loss.is_null()) else {
            return fail(HoldoutStatus::NullPointer, "curve or out_loss is NULL");
        };
        match eval_loss(&curve.inner, m, sigma2) {
            Ok(loss) => {
                unsafe { *out_loss = loss };
                HoldoutStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Variance bound `C sigma2 E(m; sigma2) / m` with C = 4 (symmetric) or 16.
///
/// # Safety
/// `curve` must be a live handle; `out_bound` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn holdout_eval_variance_bound(
    curve: *const HoldoutCurve,
    m: usize,
    sigma2: f64,
    symmetric: bool,
    out_bound: *mut f64,
) -> HoldoutStatus {
    guarded(|| {
        let (Some(curve), false) = (unsafe { curve.as_ref() }, out_bound.is_null()) else {
            return fail(HoldoutStatus::NullPointer, "curve or out_bound is NULL");
        };
        match eval_variance_bound(&curve.inner, m, &bound_mode(sigma2, symmetric)) {
            Ok(bound) => {
                unsafe { *out_bound = bound };
                HoldoutStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Optimal hold-out size at `sigma2`. Fails with `Infeasible` when the
/// estimated loss is negative for every m.
///
/// # Safety
/// `curve` must be a live handle; `out_split` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn holdout_optimal_m(
    curve: *const HoldoutCurve,
    sigma2: f64,
    symmetric: bool,
    out_split: *mut HoldoutOptimalSplit,
) -> HoldoutStatus {
    guarded(|| {
        let (Some(curve), false) = (unsafe { curve.as_ref() }, out_split.is_null()) else {
            return fail(HoldoutStatus::NullPointer, "curve or out_split is NULL");
        };
        let result = optimal_m(&curve.inner, sigma2, &bound_mode(sigma2, symmetric));
        if !result.feasible {
            return fail(
                HoldoutStatus::Infeasible,
                "no feasible hold-out size at this sigma2",
            );
        }
        unsafe {
            *out_split = HoldoutOptimalSplit {
                m_star: result.m_star,
                implied_k: result.implied_k,
                utility: result.utility_at_min,
            };
        }
        HoldoutStatus::Ok
    })
}

/// Loose upper bound on plausible sigma2: the smallest sigma2 whose optimal
/// m reaches the frontier's maximum.
///
/// # Safety
/// `curve` must be a live handle; `out_sigma2` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn holdout_sigma2_upper_bound(
    curve: *const HoldoutCurve,
    symmetric: bool,
    out_sigma2: *mut f64,
) -> HoldoutStatus {
    guarded(|| {
        let (Some(curve), false) = (unsafe { curve.as_ref() }, out_sigma2.is_null()) else {
            return fail(HoldoutStatus::NullPointer, "curve or out_sigma2 is NULL");
        };
        match sigma2_upper_bound(&curve.inner, &bound_mode(1.0, symmetric), 1e-9) {
            Ok(upper) => {
                unsafe { *out_sigma2 = upper };
                HoldoutStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// The sigma2 under which K-fold CV (m = N/K) would be optimal. Writes
/// `*out_found = false` (and leaves `*out_sigma2` untouched) when no such
/// sigma2 exists — the "-" entries of the implicit-sigma2 table.
///
/// # Safety
/// `curve` must be a live handle; `out_sigma2` and `out_found` valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn holdout_implicit_sigma2(
    curve: *const HoldoutCurve,
    k: usize,
    symmetric: bool,
    out_sigma2: *mut f64,
    out_found: *mut bool,
) -> HoldoutStatus {
    guarded(|| {
        let (Some(curve), false) = (
            unsafe { curve.as_ref() },
            out_sigma2.is_null() || out_found.is_null(),
        ) else {
            return fail(
                HoldoutStatus::NullPointer,
                "curve, out_sigma2, or out_found is NULL",
            );
        };
        match implicit_sigma2(&curve.inner, k, &bound_mode(1.0, symmetric), 1e-9) {
            Ok(Some(sigma2)) => {
                unsafe {
                    *out_sigma2 = sigma2;
                    *out_found = true;
                }
                HoldoutStatus::Ok
            }
            Ok(None) => {
                unsafe { *out_found = false };
                HoldoutStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;
    use std::ptr;

    fn fit_abalone() -> *mut HoldoutCurve {
        let mut curve: *mut HoldoutCurve = ptr::null_mut();
        let status = unsafe {
            holdout_curve_fit_power(4.9394, 4.9426, 4.9594, 5, 4177, &mut curve)
        };
        assert_eq!(status, HoldoutStatus::Ok);
        assert!(!curve.is_null());
        curve
    }

    fn last_error() -> String {
        unsafe {
            CStr::from_ptr(holdout_last_error_message())
                .to_string_lossy()
                .into_owned()
        }
    }

    #[test]
    fn fit_and_inspect_roundtrip() {
        let curve = fit_abalone();
        let mut fit = HoldoutPowerFit {
            exponent: 0.0,
            scale: 0.0,
            offset: 0.0,
            beta: 0.0,
            alpha: 0.0,
        };
        assert_eq!(
            unsafe { holdout_curve_power_fit(curve, &mut fit) },
            HoldoutStatus::Ok
        );
        assert!((fit.exponent - 1.99791).abs() < 1e-4, "{}", fit.exponent);
        assert!((fit.scale - 0.02).abs() < 1e-12);
        assert!((fit.offset - 4.9394).abs() < 1e-12);
        unsafe { holdout_curve_free(curve) };
    }

    #[test]
    fn optimal_m_matches_library() {
        let curve = fit_abalone();
        let mut split = HoldoutOptimalSplit {
            m_star: 0,
            implied_k: 0.0,
            utility: 0.0,
        };
        assert_eq!(
            unsafe { holdout_optimal_m(curve, 1.0, true, &mut split) },
            HoldoutStatus::Ok
        );
        // Oracle: the library call this wraps.
        let anchors = LossAnchors::new(4.9394, 4.9426, 4.9594, 5, 4177).unwrap();
        let oracle = optimal_m(
            &fit_power_curve(&anchors).unwrap(),
            1.0,
            &BoundMode::symmetric(1.0),
        );
        assert_eq!(split.m_star, oracle.m_star);
        assert!((split.implied_k - oracle.implied_k).abs() < 1e-12);
        unsafe { holdout_curve_free(curve) };
    }

    #[test]
    fn eval_loss_and_bound_are_finite_in_domain() {
        let curve = fit_abalone();
        let mut loss = f64::NAN;
        let mut bound = f64::NAN;
        unsafe {
            assert_eq!(
                holdout_eval_loss(curve, 100, 1.0, &mut loss),
                HoldoutStatus::Ok
            );
            assert_eq!(
                holdout_eval_variance_bound(curve, 100, 1.0, true, &mut bound),
                HoldoutStatus::Ok
            );
        }
        assert!(loss.is_finite() && bound.is_finite());
        assert!(bound > 0.0);
        unsafe { holdout_curve_free(curve) };
    }

    #[test]
    fn out_of_domain_m_reports_status_and_message() {
        let curve = fit_abalone();
        let mut loss = f64::NAN;
        let status = unsafe { holdout_eval_loss(curve, 4000, 1.0, &mut loss) };
        assert_eq!(status, HoldoutStatus::OutOfDomain);
        assert!(loss.is_nan(), "out-pointer must be untouched on failure");
        assert!(last_error().contains("extrapolation"), "{}", last_error());
        unsafe { holdout_curve_free(curve) };
    }

    #[test]
    fn nonmonotone_anchors_rejected_with_message() {
        let mut curve: *mut HoldoutCurve = ptr::null_mut();
        let status =
            unsafe { holdout_curve_fit_power(5.0, 4.9, 4.8, 5, 1000, &mut curve) };
        assert_eq!(status, HoldoutStatus::NonMonotoneAnchors);
        assert!(curve.is_null());
        assert!(last_error().contains("monotone"), "{}", last_error());
    }

    #[test]
    fn null_pointers_are_rejected() {
        let curve = fit_abalone();
        unsafe {
            assert_eq!(
                holdout_curve_fit_power(1.0, 2.0, 3.0, 5, 100, ptr::null_mut()),
                HoldoutStatus::NullPointer
            );
            assert_eq!(
                holdout_eval_loss(ptr::null(), 10, 1.0, &mut 0.0),
                HoldoutStatus::NullPointer
            );
            assert_eq!(
                holdout_optimal_m(curve, 1.0, true, ptr::null_mut()),
                HoldoutStatus::NullPointer
            );
            holdout_curve_free(ptr::null_mut()); // no-op, must not crash
            holdout_curve_free(curve);
        }
    }

    #[test]
    fn infeasible_sigma2_reports_infeasible() {
        let mut curve: *mut HoldoutCurve = ptr::null_mut();
        unsafe {
            assert_eq!(
                holdout_curve_fit_power(0.5, 0.52, 0.6, 5, 1000, &mut curve),
                HoldoutStatus::Ok
            );
            let mut split = HoldoutOptimalSplit {
                m_star: 0,
                implied_k: 0.0,
                utility: 0.0,
            };
            assert_eq!(
                holdout_optimal_m(curve, 1.0, true, &mut split),
                HoldoutStatus::Infeasible
            );
            holdout_curve_free(curve);
        }
    }

    #[test]
    fn implicit_sigma2_found_and_dash_cases() {
        let curve = fit_abalone();
        let mut sigma2 = f64::NAN;
        let mut found = false;
        unsafe {
            assert_eq!(
                holdout_implicit_sigma2(curve, 5, true, &mut sigma2, &mut found),
                HoldoutStatus::Ok
            );
        }
        assert!(found);
        assert!((0.0..10.0).contains(&sigma2));
        // K beyond the domain (m_K < 1) is OutOfDomain, not a dash.
        let status = unsafe {
            holdout_implicit_sigma2(curve, 10_000, true, &mut sigma2, &mut found)
        };
        assert_eq!(status, HoldoutStatus::OutOfDomain);
        unsafe { holdout_curve_free(curve) };
    }

    #[test]
    fn upper_bound_positive_for_abalone() {
        let curve = fit_abalone();
        let mut upper = f64::NAN;
        assert_eq!(
            unsafe { holdout_sigma2_upper_bound(curve, true, &mut upper) },
            HoldoutStatus::Ok
        );
        assert!(upper > 0.0 && upper < 4.9594);
        unsafe { holdout_curve_free(curve) };
    }

    #[test]
    fn generated_header_exists_and_declares_api() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/holdout.h");
        let body = std::fs::read_to_string(&header).expect("header generated by build.rs");
        for symbol in [
            "holdout_curve_fit_power",
            "holdout_curve_free",
            "holdout_optimal_m",
            "holdout_implicit_sigma2",
            "holdout_last_error_message",
            "HoldoutStatus",
        ] {
            assert!(body.contains(symbol), "header missing {symbol}");
        }
        // The curve type stays opaque: declared, but without fields.
        assert!(body.contains("HoldoutCurve"));
        assert!(!body.contains("inner"));
    }
}
