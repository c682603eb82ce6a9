//! C ABI over `mslab`.
//!
//! Objects cross the boundary as opaque heap handles (`MslabInner`,
//! `MslabOperator`) released with their `*_free` function. Every fallible
//! call returns an [`MslabStatus`]; on failure the message is available from
//! [`mslab_last_error`] on the same thread until the next failing call.
//! Strings handed out by the library are released with [`mslab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mslab::clark::{ClarkMeasure, Window};
use mslab::cli::REFUSAL_RADIUS;
use mslab::qop::{q_matrix_clark, OperatorMatrix};
use mslab::spectral::largest_singular_value;
use mslab::verify::{run_all, run_suite, Suite, VerifyOptions};
use mslab::{BoundaryPoint, Complex64, InnerFunction, MslabError};

const NORM_TOL: f64 = 1e-13;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MslabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Domain = 4,
    /// `ζ` lies within the refusal radius of the boundary spectrum.
    NearSpectrum = 5,
    Quadrature = 6,
    NoConvergence = 7,
    BufferTooSmall = 8,
    Internal = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MslabComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for MslabComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<MslabComplex> for Complex64 {
    fn from(z: MslabComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// `u(ζ)`, `u′(ζ)`, `u″(ζ)` and `|u′(ζ)|`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MslabBoundaryJet {
    pub value: MslabComplex,
    pub first: MslabComplex,
    pub second: MslabComplex,
    pub abs_first: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MslabAtom {
    pub theta: f64,
    pub mass: f64,
}

/// Opaque inner function.
pub struct MslabInner(InnerFunction);

/// Opaque matrix of `Q_ζ` in the Clark basis at `ζ`, with its measure.
pub struct MslabOperator {
    matrix: OperatorMatrix,
    measure: ClarkMeasure,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MslabStatus, String);

impl From<MslabError> for Failure {
    fn from(e: MslabError) -> Self {
        let status = match &e {
            MslabError::Domain(_) => MslabStatus::Domain,
            MslabError::Argument(_) => MslabStatus::InvalidArgument,
            MslabError::Parse(_) => MslabStatus::Parse,
            MslabError::Quadrature(_) => MslabStatus::Quadrature,
            MslabError::NoConvergence { .. } => MslabStatus::NoConvergence,
            MslabError::Internal(_) => MslabStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MslabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MslabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            MslabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MslabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MslabStatus::Parse, format!("{what} is not UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn checked_zeta(u: &InnerFunction, theta: f64) -> Result<BoundaryPoint, Failure> {
    if !theta.is_finite() {
        return Err(Failure(MslabStatus::InvalidArgument, format!("θ = {theta} is not finite")));
    }
    let zeta = BoundaryPoint::new(theta);
    let dist = u.dist_to_boundary_spectrum(&zeta);
    if dist < REFUSAL_RADIUS {
        return Err(Failure(
            MslabStatus::NearSpectrum,
            format!("ζ is at distance {dist:e} from the boundary spectrum (minimum {REFUSAL_RADIUS:e})"),
        ));
    }
    Ok(zeta)
}

fn window_for(u: &InnerFunction, window: usize) -> Window {
    if u.is_finite_blaschke() {
        Window::Full
    } else {
        Window::Symmetric(window)
    }
}

/// Message of the last failing call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mslab_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mslab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses an inner-function spec such as `"blaschke:0.5,0.2+0.1i"` or
/// `"singular:xi=0,s=1"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mslab_inner_parse(spec: *const c_char, out: *mut *mut MslabInner) -> MslabStatus {
    guard(|| {
        let s = read_str(spec, "spec")?;
        let u: InnerFunction = s.parse()?;
        write(out, Box::into_raw(Box::new(MslabInner(u))), "out")
    })
}

/// # Safety
/// `inner` must come from [`mslab_inner_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mslab_inner_free(inner: *mut MslabInner) {
    if !inner.is_null() {
        drop(Box::from_raw(inner));
    }
}

/// # Safety
/// `inner` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_inner_eval(inner: *const MslabInner, z: MslabComplex, out: *mut MslabComplex) -> MslabStatus {
    guard(|| {
        let u = &borrow(inner, "inner")?.0;
        write(out, u.eval(z.into())?.into(), "out")
    })
}

/// # Safety
/// `inner` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_inner_boundary_jet(
    inner: *const MslabInner,
    theta: f64,
    out: *mut MslabBoundaryJet,
) -> MslabStatus {
    guard(|| {
        let u = &borrow(inner, "inner")?.0;
        let d = u.boundary_derivatives(&checked_zeta(u, theta)?)?;
        let jet = MslabBoundaryJet {
            value: d.value.into(),
            first: d.first.into(),
            second: d.second.into(),
            abs_first: d.abs_first,
        };
        write(out, jet, "out")
    })
}

/// Distance from `e^{iθ}` to the boundary spectrum (infinite when empty).
///
/// # Safety
/// `inner` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_inner_spectrum_distance(inner: *const MslabInner, theta: f64, out: *mut f64) -> MslabStatus {
    guard(|| {
        let u = &borrow(inner, "inner")?.0;
        write(out, u.dist_to_boundary_spectrum(&BoundaryPoint::new(theta)), "out")
    })
}

/// Builds `Q_ζ` in the Clark basis for `α = u(e^{iθ})`. `window` is the
/// symmetric atom window for the singular family and ignored otherwise.
///
/// # Safety
/// `inner` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_operator_new(
    inner: *const MslabInner,
    theta: f64,
    window: usize,
    out: *mut *mut MslabOperator,
) -> MslabStatus {
    guard(|| {
        let u = &borrow(inner, "inner")?.0;
        let zeta = checked_zeta(u, theta)?;
        let (measure, matrix) = q_matrix_clark(u, &zeta, window_for(u, window))?;
        write(out, Box::into_raw(Box::new(MslabOperator { matrix, measure })), "out")
    })
}

/// # Safety
/// `op` must come from [`mslab_operator_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mslab_operator_free(op: *mut MslabOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Matrix dimension, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mslab_operator_dim(op: *const MslabOperator) -> usize {
    op.as_ref().map_or(0, |o| o.matrix.dim())
}

/// Index of the atom at `ζ` in the Clark basis.
///
/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_operator_base_index(op: *const MslabOperator, out: *mut usize) -> MslabStatus {
    guard(|| {
        let o = borrow(op, "op")?;
        let ell = o.matrix.ell.ok_or_else(|| Failure(MslabStatus::Internal, "no base atom".into()))?;
        write(out, ell, "out")
    })
}

/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_operator_entry(op: *const MslabOperator, i: usize, j: usize, out: *mut MslabComplex) -> MslabStatus {
    guard(|| {
        let o = borrow(op, "op")?;
        let n = o.matrix.dim();
        if i >= n || j >= n {
            return Err(Failure(MslabStatus::InvalidArgument, format!("entry ({i}, {j}) outside {n}×{n}")));
        }
        write(out, o.matrix.entry(i, j).into(), "out")
    })
}

/// `y = Q x` for `x`, `y` of length `dim`.
///
/// # Safety
/// `x` must point to `len` readable values and `y` to `len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn mslab_operator_apply(
    op: *const MslabOperator,
    x: *const MslabComplex,
    y: *mut MslabComplex,
    len: usize,
) -> MslabStatus {
    guard(|| {
        let o = borrow(op, "op")?;
        if x.is_null() || y.is_null() {
            return Err(null("vector"));
        }
        if len != o.matrix.dim() {
            return Err(Failure(
                MslabStatus::InvalidArgument,
                format!("vector length {len} does not match dimension {}", o.matrix.dim()),
            ));
        }
        let input: Vec<Complex64> = std::slice::from_raw_parts(x, len).iter().map(|&z| z.into()).collect();
        let image = o.matrix.apply(&input);
        let out = std::slice::from_raw_parts_mut(y, len);
        out.iter_mut().zip(image).for_each(|(dst, v)| *dst = v.into());
        Ok(())
    })
}

/// Largest singular value of the matrix.
///
/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_operator_norm(op: *const MslabOperator, out: *mut f64) -> MslabStatus {
    guard(|| {
        let o = borrow(op, "op")?;
        write(out, largest_singular_value(&o.matrix, NORM_TOL)?, "out")
    })
}

/// Copies the Clark atoms in ascending angle. `len` receives the atom count;
/// when `capacity` is smaller nothing is copied and `BufferTooSmall` is
/// returned. `atoms` may be null when `capacity` is 0.
///
/// # Safety
/// `atoms` must point to `capacity` writable values and `len` be writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_operator_atoms(
    op: *const MslabOperator,
    atoms: *mut MslabAtom,
    capacity: usize,
    len: *mut usize,
) -> MslabStatus {
    guard(|| {
        let o = borrow(op, "op")?;
        let n = o.measure.len();
        write(len, n, "len")?;
        if capacity < n {
            return Err(Failure(MslabStatus::BufferTooSmall, format!("{n} atoms, capacity {capacity}")));
        }
        if n > 0 && atoms.is_null() {
            return Err(null("atoms"));
        }
        let dst = std::slice::from_raw_parts_mut(atoms, n);
        for (d, a) in dst.iter_mut().zip(&o.measure.atoms) {
            *d = MslabAtom {
                theta: a.point.theta(),
                mass: a.mass,
            };
        }
        Ok(())
    })
}

/// Runs a verification suite (`"all"` for every applicable one) with default
/// options and the given seed. `out` receives one JSON report per line, to be
/// released with [`mslab_string_free`]; `passed` receives 1 when every margin
/// passes.
///
/// # Safety
/// `inner` must be a live handle, `suite` a NUL-terminated string and `out`,
/// `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn mslab_verify_json(
    inner: *const MslabInner,
    theta: f64,
    suite: *const c_char,
    seed: u64,
    out: *mut *mut c_char,
    passed: *mut i32,
) -> MslabStatus {
    guard(|| {
        let u = &borrow(inner, "inner")?.0;
        let name = read_str(suite, "suite")?;
        let zeta = checked_zeta(u, theta)?;
        let opts = VerifyOptions {
            seed,
            ..VerifyOptions::default()
        };
        let reports = if name == "all" {
            run_all(u, &zeta, &opts)?
        } else {
            vec![run_suite(name.parse::<Suite>()?, u, &zeta, &opts)?]
        };
        let text: String = reports.iter().map(|r| r.to_json() + "\n").collect();
        let c = CString::new(text).map_err(|_| Failure(MslabStatus::Internal, "report contains NUL".into()))?;
        write(passed, i32::from(reports.iter().all(|r| r.pass)), "passed")?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mslab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failures_set_the_last_error() {
        let mut out = ptr::null_mut();
        let status = unsafe { mslab_inner_parse(c"nonsense".as_ptr(), &mut out) };
        assert_eq!(status, MslabStatus::Parse);
        assert!(out.is_null());
        let msg = unsafe { CStr::from_ptr(mslab_last_error()) }.to_str().unwrap();
        assert!(msg.contains("parse"));
    }

    #[test]
    fn null_arguments() {
        assert_eq!(unsafe { mslab_inner_parse(ptr::null(), ptr::null_mut()) }, MslabStatus::NullPointer);
        assert_eq!(unsafe { mslab_operator_dim(ptr::null()) }, 0);
        unsafe {
            mslab_inner_free(ptr::null_mut());
            mslab_operator_free(ptr::null_mut());
            mslab_string_free(ptr::null_mut());
        }
    }
}
