//! C ABI over `lrperc`.
//!
//! Objects are exposed as opaque handles created by `lrperc_*_new`/`_parse`
//! functions and released with the matching `_free`. Every fallible call
//! returns an [`LrpStatus`]; on failure a description is available from
//! [`lrperc_last_error`] on the same thread until the next failing call.

use lrperc::estimators::{phi_value, PhiMode};
use lrperc::{sample_box, BoxConfig, CouplingField, Error, Kernel, LatticeBox, Point};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    DimensionMismatch = 4,
    DivergentTail = 5,
    BudgetInfeasible = 6,
    TooLarge = 7,
    OutOfRange = 8,
    Parse = 9,
    Internal = 10,
    Panic = 11,
}

/// Opaque interaction kernel.
pub struct LrpKernel(Kernel);

/// Opaque sampled configuration on a finite box.
pub struct LrpConfig(BoxConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> LrpStatus {
    match err {
        Error::DimensionMismatch { .. } => LrpStatus::DimensionMismatch,
        Error::DivergentTail { .. } => LrpStatus::DivergentTail,
        Error::BudgetInfeasible(_) => LrpStatus::BudgetInfeasible,
        Error::TooLarge(_) => LrpStatus::TooLarge,
        Error::ConfigParse(_) => LrpStatus::Parse,
        Error::InvalidParameter(_) | Error::ZeroDisplacement | Error::OriginMissing | Error::EmptySet => {
            LrpStatus::InvalidParameter
        }
        _ => LrpStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (LrpStatus, String)>) -> LrpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LrpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside lrperc");
            LrpStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (LrpStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LrpStatus, String) {
    (LrpStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (LrpStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (LrpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (LrpStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lrperc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a kernel description such as `power_law(C=1,s=4)` or `nn(w=1)`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lrperc_kernel_parse(spec: *const c_char, dim: usize, out: *mut *mut LrpKernel) -> LrpStatus {
    guard(|| {
        let text = read_str(spec, "spec")?;
        let k = Kernel::parse(text, dim).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(LrpKernel(k))), "out")
    })
}

/// Kernel value `J(x)` at a nonzero displacement with `dim` coordinates.
///
/// # Safety
/// `kernel` must come from [`lrperc_kernel_parse`]; `x` must point to the
/// kernel's dimension many integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lrperc_kernel_eval(kernel: *const LrpKernel, x: *const i64, out: *mut f64) -> LrpStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if x.is_null() {
            return Err(null("x"));
        }
        let p = Point::new(std::slice::from_raw_parts(x, k.0.dim()));
        let v = k.0.eval(&p).map_err(lib_err)?;
        write_out(out, v, "out")
    })
}

/// Releases a kernel. Null is accepted.
///
/// # Safety
/// `kernel` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn lrperc_kernel_free(kernel: *mut LrpKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Samples the open edges of `β·J` percolation on the box of side
/// `2·radius + 1` centred at the origin. Identical arguments reproduce the
/// same configuration.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrperc_sample_box(
    kernel: *const LrpKernel,
    beta: f64,
    radius: i64,
    seed: u64,
    miss_budget: f64,
    out: *mut *mut LrpConfig,
) -> LrpStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        let g = LatticeBox::centered(k.0.dim(), radius).map_err(lib_err)?;
        let cfg = sample_box(&k.0, beta, &g, CouplingField::new(seed, 0), miss_budget).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(LrpConfig(cfg))), "out")
    })
}

/// Number of vertices in the configuration's box.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lrperc_config_num_vertices(cfg: *const LrpConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.num_vertices())
}

/// Number of open edges.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lrperc_config_num_edges(cfg: *const LrpConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.num_edges())
}

/// Endpoints of edge `i` as vertex indices.
///
/// # Safety
/// `cfg` must be a live handle; `a` and `b` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lrperc_config_edge(cfg: *const LrpConfig, i: usize, a: *mut usize, b: *mut usize) -> LrpStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let &(x, y) = c.0.edges().get(i).ok_or((LrpStatus::OutOfRange, format!("edge {i} out of range")))?;
        write_out(a, x as usize, "a")?;
        write_out(b, y as usize, "b")
    })
}

/// Coordinates of vertex `v`, written to `coords[0..dim]`.
///
/// # Safety
/// `cfg` must be a live handle and `coords` must have room for the
/// configuration's dimension many integers.
#[no_mangle]
pub unsafe extern "C" fn lrperc_config_point(cfg: *const LrpConfig, v: usize, coords: *mut i64) -> LrpStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if v >= c.0.num_vertices() {
            return Err((LrpStatus::OutOfRange, format!("vertex {v} out of range")));
        }
        if coords.is_null() {
            return Err(null("coords"));
        }
        let d = c.0.dim();
        std::slice::from_raw_parts_mut(coords, d).copy_from_slice(c.0.point(v).coords(d));
        Ok(())
    })
}

/// Size of the largest open cluster.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lrperc_config_largest_cluster(cfg: *const LrpConfig) -> usize {
    cfg.as_ref().map_or(0, |c| lrperc::cluster::components(&c.0).largest().0)
}

/// Plain-text serialization. The returned string must be released with
/// [`lrperc_string_free`].
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrperc_config_to_text(cfg: *const LrpConfig, out: *mut *mut c_char) -> LrpStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let s = CString::new(c.0.to_text()).map_err(|e| (LrpStatus::Internal, e.to_string()))?;
        write_out(out, s.into_raw(), "out")
    })
}

/// Rebuilds a configuration from [`lrperc_config_to_text`] output.
///
/// # Safety
/// `text` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lrperc_config_from_text(text: *const c_char, out: *mut *mut LrpConfig) -> LrpStatus {
    guard(|| {
        let t = read_str(text, "text")?;
        let cfg = BoxConfig::from_text(t).map_err(lib_err)?;
        write_out(out, Box::into_raw(Box::new(LrpConfig(cfg))), "out")
    })
}

/// Releases a configuration. Null is accepted.
///
/// # Safety
/// `cfg` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn lrperc_config_free(cfg: *mut LrpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Releases a string returned by this library. Null is accepted.
///
/// # Safety
/// `s` must be null or a string allocated by this library.
#[no_mangle]
pub unsafe extern "C" fn lrperc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Monte Carlo estimate of `P(0 ↔ ∂B_n)`.
///
/// # Safety
/// `kernel` must be a live handle; `value` and `stderr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lrperc_boundary_connection_prob(
    kernel: *const LrpKernel,
    beta: f64,
    n: i64,
    replicates: usize,
    seed: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> LrpStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        let est = lrperc::estimators::boundary_connection_prob(&k.0, beta, n, replicates, seed).map_err(lib_err)?;
        write_out(value, est.value, "value")?;
        write_out(stderr, est.stderr, "stderr")
    })
}

/// Exact `φ_β(S)` for a finite set containing the origin, given as
/// `count` points of the kernel's dimension laid out contiguously. Writes the
/// value and a rigorous upper bound; `upper < 1` certifies `β ≤ β_c`.
///
/// # Safety
/// `kernel` must be a live handle; `points` must hold `count · dim`
/// integers; `value` and `upper` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lrperc_phi(
    kernel: *const LrpKernel,
    beta: f64,
    points: *const i64,
    count: usize,
    value: *mut f64,
    upper: *mut f64,
) -> LrpStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if points.is_null() {
            return Err(null("points"));
        }
        let d = k.0.dim();
        let set: Vec<Point> = std::slice::from_raw_parts(points, count * d).chunks(d).map(Point::new).collect();
        let phi = phi_value(&k.0, beta, &set, PhiMode::Exact).map_err(lib_err)?;
        write_out(value, phi.value, "value")?;
        write_out(upper, phi.upper, "upper")
    })
}
