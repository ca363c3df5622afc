//! C ABI over `ordembed`.
//!
//! Objects are opaque handles created by `*_new`/`*_build`/`oe_solve` and
//! released by the matching `*_free`. Fallible calls return an `OeStatus`;
//! on failure the message is kept per thread and read with
//! `oe_last_error_message`. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ordembed::bounds::verify_interval_bound;
use ordembed::geometry::{cheb_fit_1d, procrustes_align, PointConfig};
use ordembed::solver::{solve_embedding, SolverParams};
use ordembed::triplets::{build_table, TripletTable};
use ordembed::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotIsotonic = 4,
    Degenerate = 5,
    SolverFailed = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Internal = 9,
}

/// A set of points in R^d.
pub struct OePoints(PointConfig);

/// All triplet signs of a configuration.
pub struct OeTable(TripletTable);

/// Solver settings, initialized to the library defaults.
pub struct OeSolverParams(SolverParams);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct OeChebFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct OeDisplacement {
    pub d_inf: f64,
    pub d_1: f64,
    pub d_2: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct OeSolveInfo {
    pub satisfied: usize,
    pub constraints: usize,
    pub epochs_used: usize,
    pub final_loss: f64,
    /// 1 when every strict sign holds in the output.
    pub success: i32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct OeBoundCheck {
    pub achieved: f64,
    pub bound: f64,
    pub alpha: f64,
    /// 1 when `achieved <= bound`.
    pub ok: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OeStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::SizeMismatch { .. } => OeStatus::DimensionMismatch,
        Error::NotIsotonic(_) => OeStatus::NotIsotonic,
        Error::Degenerate(_) => OeStatus::Degenerate,
        Error::AllRestartsFailed(_) => OeStatus::SolverFailed,
        Error::Empty
        | Error::TooFewPoints { .. }
        | Error::OutsideUnitCube { .. }
        | Error::InvalidParameter(_)
        | Error::Precondition(_) => OeStatus::InvalidArgument,
        _ => OeStatus::Internal,
    }
}

fn fail(status: OeStatus, msg: impl Into<String>) -> OeStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), OeStatus>) -> OeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OeStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(OeStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lib<T>(r: ordembed::Result<T>) -> Result<T, OeStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, OeStatus> {
    p.as_ref().ok_or_else(|| fail(OeStatus::NullPointer, format!("{name} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, OeStatus> {
    p.as_mut().ok_or_else(|| fail(OeStatus::NullPointer, format!("{name} is null")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Length in bytes of the last error message including the terminating NUL,
/// or 0 when the last call on this thread succeeded.
#[no_mangle]
pub extern "C" fn oe_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes_with_nul().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`). Returns the number of bytes the full message needs including the NUL.
#[no_mangle]
pub unsafe extern "C" fn oe_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(c) = e.as_ref() else { return 0 };
        let bytes = c.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn oe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Creates `n` points of dimension `dim` from row-major `coords` (length `n * dim`).
#[no_mangle]
pub unsafe extern "C" fn oe_points_new(
    coords: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut OePoints,
) -> OeStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        if coords.is_null() {
            return Err(fail(OeStatus::NullPointer, "coords is null"));
        }
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| fail(OeStatus::InvalidArgument, "n * dim overflows"))?;
        let data = std::slice::from_raw_parts(coords, len).to_vec();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(fail(OeStatus::InvalidArgument, "coordinates must be finite"));
        }
        *out = boxed(OePoints(lib(PointConfig::new(dim, data))?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oe_points_free(p: *mut OePoints) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of points, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn oe_points_len(p: *const OePoints) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// Dimension, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn oe_points_dim(p: *const OePoints) -> usize {
    p.as_ref().map_or(0, |p| p.0.dim())
}

/// Copies the row-major coordinates into `buf`, which must hold `n * dim` values.
#[no_mangle]
pub unsafe extern "C" fn oe_points_coords(p: *const OePoints, buf: *mut f64, cap: usize) -> OeStatus {
    guard(|| {
        let p = deref(p, "points")?;
        if buf.is_null() {
            return Err(fail(OeStatus::NullPointer, "buf is null"));
        }
        let src = p.0.as_slice();
        if cap < src.len() {
            return Err(fail(
                OeStatus::BufferTooSmall,
                format!("need {} values, buffer holds {cap}", src.len()),
            ));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// Records every triplet sign of `points`; differences within `tie_tolerance` are ties.
#[no_mangle]
pub unsafe extern "C" fn oe_table_build(
    points: *const OePoints,
    tie_tolerance: f64,
    out: *mut *mut OeTable,
) -> OeStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let p = deref(points, "points")?;
        *out = boxed(OeTable(lib(build_table(&p.0, tie_tolerance))?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oe_table_free(t: *mut OeTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of stored triples, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn oe_table_len(t: *const OeTable) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// Sign of `|x_j - x_i| - |x_k - x_i|` as -1, 0 or 1. Requires distinct indices
/// below n; `j` and `k` may come in either order.
#[no_mangle]
pub unsafe extern "C" fn oe_table_sign(
    t: *const OeTable,
    i: usize,
    j: usize,
    k: usize,
    out: *mut i32,
) -> OeStatus {
    guard(|| {
        let t = deref(t, "table")?;
        let out = deref_mut(out, "out")?;
        let s = t
            .0
            .sign(i, j, k)
            .ok_or_else(|| fail(OeStatus::InvalidArgument, format!("({i}; {j}, {k}) is not a valid triple")))?;
        *out = s.as_i8() as i32;
        Ok(())
    })
}

/// Solver parameters with library defaults for dimension `dim`; null when `dim` is 0.
#[no_mangle]
pub extern "C" fn oe_solver_params_new(dim: usize) -> *mut OeSolverParams {
    if dim == 0 {
        set_error("dim must be positive".into());
        return ptr::null_mut();
    }
    boxed(OeSolverParams(SolverParams::with_dim(dim)))
}

#[no_mangle]
pub unsafe extern "C" fn oe_solver_params_free(p: *mut OeSolverParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

unsafe fn update(p: *mut OeSolverParams, f: impl FnOnce(&mut SolverParams)) -> OeStatus {
    guard(|| {
        let p = deref_mut(p, "params")?;
        let mut next = p.0.clone();
        f(&mut next);
        lib(next.validate())?;
        p.0 = next;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oe_solver_params_set_learning_rate(p: *mut OeSolverParams, value: f64) -> OeStatus {
    update(p, |s| s.learning_rate = value)
}

/// Multiplicative step decay per epoch, in (0, 1].
#[no_mangle]
pub unsafe extern "C" fn oe_solver_params_set_lr_decay(p: *mut OeSolverParams, value: f64) -> OeStatus {
    update(p, |s| s.lr_decay = value)
}

#[no_mangle]
pub unsafe extern "C" fn oe_solver_params_set_max_epochs(p: *mut OeSolverParams, value: usize) -> OeStatus {
    update(p, |s| s.max_epochs = value)
}

#[no_mangle]
pub unsafe extern "C" fn oe_solver_params_set_seed(p: *mut OeSolverParams, value: u64) -> OeStatus {
    update(p, |s| s.rng_seed = value)
}

/// Per-epoch dilation factor, at least 1.
#[no_mangle]
pub unsafe extern "C" fn oe_solver_params_set_expansion(p: *mut OeSolverParams, value: f64) -> OeStatus {
    update(p, |s| s.expansion = value)
}

/// Batch size; 0 restores the default.
#[no_mangle]
pub unsafe extern "C" fn oe_solver_params_set_batch_size(p: *mut OeSolverParams, value: usize) -> OeStatus {
    update(p, |s| s.batch_size = (value > 0).then_some(value))
}

/// One solver run on `table`. `out` receives the embedding even when not every
/// sign is satisfied; check `info.success`. `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn oe_solve(
    table: *const OeTable,
    params: *const OeSolverParams,
    out: *mut *mut OePoints,
    info: *mut OeSolveInfo,
) -> OeStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let t = deref(table, "table")?;
        let p = deref(params, "params")?;
        let r = lib(solve_embedding(&t.0, &p.0))?;
        if let Some(info) = info.as_mut() {
            *info = OeSolveInfo {
                satisfied: r.satisfied,
                constraints: r.constraints,
                epochs_used: r.epochs_used,
                final_loss: r.final_loss,
                success: r.success as i32,
            };
        }
        *out = boxed(OePoints(r.y));
        Ok(())
    })
}

/// Exact minimax fit `x ≈ a y + b` of two 1-D configurations.
#[no_mangle]
pub unsafe extern "C" fn oe_cheb_fit(x: *const OePoints, y: *const OePoints, out: *mut OeChebFit) -> OeStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let f = lib(cheb_fit_1d(&deref(x, "x")?.0, &deref(y, "y")?.0))?;
        *out = OeChebFit {
            a: f.a,
            b: f.b,
            residual: f.residual,
        };
        Ok(())
    })
}

/// Least-squares similarity alignment of `y` onto `x`. `aligned` may be null;
/// otherwise it receives the transformed `y`.
#[no_mangle]
pub unsafe extern "C" fn oe_procrustes(
    x: *const OePoints,
    y: *const OePoints,
    out: *mut OeDisplacement,
    aligned: *mut *mut OePoints,
) -> OeStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let (x, y) = (&deref(x, "x")?.0, &deref(y, "y")?.0);
        let (sim, d) = lib(procrustes_align(x, y))?;
        *out = OeDisplacement {
            d_inf: d.d_inf,
            d_1: d.d_1,
            d_2: d.d_2,
        };
        if let Some(slot) = aligned.as_mut() {
            *slot = boxed(OePoints(lib(ordembed::geometry::apply_similarity(&sim, y))?));
        }
        Ok(())
    })
}

/// Checks the 1-D error bound for a weakly isotonic pair; `x` must contain 0 and 1.
#[no_mangle]
pub unsafe extern "C" fn oe_verify_interval_bound(
    x: *const OePoints,
    y: *const OePoints,
    out: *mut OeBoundCheck,
) -> OeStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let c = lib(verify_interval_bound(&deref(x, "x")?.0, &deref(y, "y")?.0))?;
        *out = OeBoundCheck {
            achieved: c.achieved,
            bound: c.bound,
            alpha: c.alpha,
            ok: c.ok as i32,
        };
        Ok(())
    })
}
