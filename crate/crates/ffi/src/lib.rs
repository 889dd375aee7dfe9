//! C interface to the `classicality` library.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible function returns a [`ClStatus`]; on failure
//! [`cl_last_error_message`] describes the error for the calling thread.
//! Results are written through out-pointers, which must be non-null.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use classicality::gcs::{epsilon_support_radius, Epsilon, Spin, SpinEnsemble};
use classicality::geometry::{SpherePoint, Tessellation};
use classicality::monge::monge_su2;
use classicality::povm::{p_null_closed, probability_table, Mode, Outcome, ProbabilityTable};
use classicality::threshold::{delta_for_nt, nt_boson, nt_su11, nt_su2, Threshold};
use classicality::{Error, ErrorKind};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Quadrature = 3,
    Io = 4,
    Domain = 5,
    Panic = 6,
}

/// Handle to a tessellation `T(k)`.
pub struct ClTessellation {
    inner: Tessellation,
}

/// Handle to a probability table.
pub struct ClProbabilityTable {
    inner: ProbabilityTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (ClStatus, String);

fn fail(status: ClStatus, message: impl Into<String>) -> Failure {
    (status, message.into())
}

fn from_error(e: impl Into<Error>) -> Failure {
    let e = e.into();
    let status = match e.kind() {
        ErrorKind::Usage => ClStatus::InvalidArgument,
        ErrorKind::Quadrature => ClStatus::Quadrature,
        ErrorKind::Io => ClStatus::Io,
        ErrorKind::Domain => ClStatus::Domain,
    };
    (status, e.to_string())
}

fn set_last_error(message: Option<String>) {
    let message = message.map(|m| CString::new(m.replace('\0', " ")).expect("interior nul removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ClStatus {
    set_last_error(None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(Some(message));
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(Some(format!("internal error: {message}")));
            ClStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(ClStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn borrow<'a, T>(handle: *const T) -> Result<&'a T, Failure> {
    handle.as_ref().ok_or_else(|| fail(ClStatus::NullPointer, "handle is null"))
}

fn epsilon(value: f64) -> Result<Epsilon, Failure> {
    Epsilon::new(value).map_err(from_error)
}

unsafe fn write_threshold(t: Threshold, real: *mut f64, integer: *mut u64) -> Result<(), Failure> {
    if real.is_null() || integer.is_null() {
        return Err(fail(ClStatus::NullPointer, "output pointer is null"));
    }
    write(real, t.real)?;
    write(integer, t.integer)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Builds `T(k)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_tessellation_new(k: u32, out: *mut *mut ClTessellation) -> ClStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(ClStatus::NullPointer, "output pointer is null"));
        }
        let inner = Tessellation::new(k).map_err(from_error)?;
        write(out, Box::into_raw(Box::new(ClTessellation { inner })))
    })
}

/// Releases a tessellation; null is ignored.
///
/// # Safety
/// `tess` must come from [`cl_tessellation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cl_tessellation_free(tess: *mut ClTessellation) {
    if !tess.is_null() {
        drop(Box::from_raw(tess));
    }
}

/// Number of tiles `L`.
///
/// # Safety
/// `tess` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_tessellation_len(tess: *const ClTessellation, out: *mut usize) -> ClStatus {
    guard(|| write(out, borrow(tess)?.inner.len()))
}

/// Radius of the largest circle around a sampled point inside its tile, minimised over tiles.
///
/// # Safety
/// `tess` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_tessellation_inscribed_delta(tess: *const ClTessellation, out: *mut f64) -> ClStatus {
    guard(|| write(out, borrow(tess)?.inner.inscribed_delta()))
}

/// Resolution that also bounds the gap between each tile and its patch boundary.
///
/// # Safety
/// `tess` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_tessellation_strict_delta(tess: *const ClTessellation, out: *mut f64) -> ClStatus {
    guard(|| write(out, borrow(tess)?.inner.strict_delta()))
}

/// Sampled point of tile `index` (1-based).
///
/// # Safety
/// `tess` must be a live handle and `theta`, `phi` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_tessellation_sampled_point(
    tess: *const ClTessellation,
    index: usize,
    theta: *mut f64,
    phi: *mut f64,
) -> ClStatus {
    guard(|| {
        if theta.is_null() || phi.is_null() {
            return Err(fail(ClStatus::NullPointer, "output pointer is null"));
        }
        let p = borrow(tess)?.inner.tile(index).map_err(from_error)?.sampled_point();
        write(theta, p.theta())?;
        write(phi, p.phi())
    })
}

/// Index of the tile containing `(theta, phi)`.
///
/// # Safety
/// `tess` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_tessellation_locate(tess: *const ClTessellation, theta: f64, phi: f64, out: *mut usize) -> ClStatus {
    guard(|| {
        let p = SpherePoint::new(theta, phi).map_err(from_error)?;
        write(out, borrow(tess)?.inner.locate(&p))
    })
}

/// su(2) threshold `ln ε / ln cos(δ/2) + n` and its ceiling.
///
/// # Safety
/// `real` and `integer` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_nt_su2(eps: f64, delta: f64, n: u64, real: *mut f64, integer: *mut u64) -> ClStatus {
    guard(|| write_threshold(nt_su2(epsilon(eps)?, delta, n).map_err(from_error)?, real, integer))
}

/// su(1,1) threshold for Bargmann index `k`.
///
/// # Safety
/// `real` and `integer` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_nt_su11(eps: f64, delta: f64, k: f64, real: *mut f64, integer: *mut u64) -> ClStatus {
    guard(|| write_threshold(nt_su11(epsilon(eps)?, delta, k).map_err(from_error)?, real, integer))
}

/// Bosonic threshold `−ln ε / δ²`.
///
/// # Safety
/// `real` and `integer` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_nt_boson(eps: f64, delta: f64, real: *mut f64, integer: *mut u64) -> ClStatus {
    guard(|| {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(from_error(classicality::gcs::GcsError::InvalidDelta(delta)));
        }
        write_threshold(nt_boson(epsilon(eps)?, delta), real, integer)
    })
}

/// Resolution `δ` at which the su(2) threshold equals `nt`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_delta_for_nt(eps: f64, nt: f64, n: u64, out: *mut f64) -> ClStatus {
    guard(|| write(out, delta_for_nt(epsilon(eps)?, nt, n).map_err(from_error)?))
}

/// Radius of the ε-support cap for spin `J = twice_j / 2`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_epsilon_support_radius(twice_j: u32, eps: f64, out: *mut f64) -> ClStatus {
    guard(|| write(out, epsilon_support_radius(Spin::from_twice(twice_j), epsilon(eps)?)))
}

/// Null-outcome probability `ε^{2+1/J}`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_p_null(twice_j: u32, eps: f64, out: *mut f64) -> ClStatus {
    guard(|| write(out, p_null_closed(Spin::from_twice(twice_j), epsilon(eps)?)))
}

/// Monge distance between coherent states at geodesic distance `theta`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_monge_su2(twice_j: u32, theta: f64, tol: f64, out: *mut f64) -> ClStatus {
    guard(|| write(out, monge_su2(Spin::from_twice(twice_j), theta, tol).map_err(from_error)?.value))
}

/// Outcome probabilities for the state at `(theta, phi)` of `size` spins
/// reduced by `reduction`. With `truncated` false, `eps` is ignored.
///
/// # Safety
/// `tess` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_probability_table_new(
    tess: *const ClTessellation,
    size: u64,
    reduction: u64,
    theta: f64,
    phi: f64,
    truncated: bool,
    eps: f64,
    tol: f64,
    out: *mut *mut ClProbabilityTable,
) -> ClStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(ClStatus::NullPointer, "output pointer is null"));
        }
        let tess = borrow(tess)?;
        let ensemble = SpinEnsemble::new(size, reduction).map_err(from_error)?;
        let sigma = SpherePoint::new(theta, phi).map_err(from_error)?;
        let mode = if truncated { Mode::Truncated(epsilon(eps)?) } else { Mode::Exact };
        let inner = probability_table(&ensemble, &sigma, &tess.inner, mode, tol).map_err(from_error)?;
        write(out, Box::into_raw(Box::new(ClProbabilityTable { inner })))
    })
}

/// Releases a table; null is ignored.
///
/// # Safety
/// `table` must come from [`cl_probability_table_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cl_probability_table_free(table: *mut ClProbabilityTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of tile entries.
///
/// # Safety
/// `table` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_probability_table_len(table: *const ClProbabilityTable, out: *mut usize) -> ClStatus {
    guard(|| write(out, borrow(table)?.inner.entries.len()))
}

/// Probability of the outcome of tile `index` (1-based).
///
/// # Safety
/// `table` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_probability_table_entry(table: *const ClProbabilityTable, index: usize, out: *mut f64) -> ClStatus {
    guard(|| {
        let p = borrow(table)?
            .inner
            .entry(index)
            .ok_or_else(|| fail(ClStatus::InvalidArgument, format!("no tile with index {index}")))?;
        write(out, p)
    })
}

/// Probability of the null outcome; 0 for exact tables.
///
/// # Safety
/// `table` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cl_probability_table_p_null(table: *const ClProbabilityTable, out: *mut f64) -> ClStatus {
    guard(|| write(out, borrow(table)?.inner.p_null))
}

/// Draws `shots` outcomes from one seeded stream. Each is written as its
/// tile index, or 0 for the null outcome.
///
/// # Safety
/// `table` must be a live handle and `outcomes` valid for `shots` writes.
#[no_mangle]
pub unsafe extern "C" fn cl_probability_table_sample(
    table: *const ClProbabilityTable,
    seed: u64,
    shots: usize,
    outcomes: *mut usize,
) -> ClStatus {
    guard(|| {
        let table = borrow(table)?;
        if shots == 0 {
            return Ok(());
        }
        if outcomes.is_null() {
            return Err(fail(ClStatus::NullPointer, "output pointer is null"));
        }
        let slots = std::slice::from_raw_parts_mut(outcomes, shots);
        for (slot, outcome) in slots.iter_mut().zip(table.inner.weights().sample_many(seed, shots)) {
            *slot = match outcome {
                Outcome::Tile(i) => i,
                Outcome::Null => 0,
            };
        }
        Ok(())
    })
}
