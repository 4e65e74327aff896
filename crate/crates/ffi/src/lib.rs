//! C interface to `sepcov`.
//!
//! Models and support reports are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`SepcovStatus`]; on failure a description is available from
//! [`sepcov_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sepcov::density;
use sepcov::edges::EdgeSide;
use sepcov::num_complex::Complex64;
use sepcov::solver;
use sepcov::support::{self, SupportReport};
use sepcov::{AtomicMeasure, Error, ModelSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepcovStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    PoleHit = 3,
    NoConvergence = 4,
    InconsistentScan = 5,
    Degenerate = 6,
    OutOfRange = 7,
    Panic = 8,
}

pub struct SepcovModel(ModelSpec);

pub struct SepcovSupport(SupportReport);

/// Solution of the master system at one point of the upper half plane.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SepcovSolution {
    pub delta_re: f64,
    pub delta_im: f64,
    pub delta_tilde_re: f64,
    pub delta_tilde_im: f64,
    pub m_re: f64,
    pub m_im: f64,
    pub m_tilde_re: f64,
    pub m_tilde_im: f64,
    pub stab: f64,
    pub residual: f64,
}

/// Support edge. `side` is 0 for a left edge, 1 for a right edge;
/// `h_prime` is NaN for degenerate edges.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SepcovEdge {
    pub a: f64,
    pub delta_tilde_a: f64,
    pub delta_a: f64,
    pub side: i32,
    pub x_second: f64,
    pub h_prime: f64,
    pub f3: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SepcovStatus {
    match e {
        Error::PoleHit => SepcovStatus::PoleHit,
        Error::NoConvergence { .. } | Error::PathNoConvergence { .. } => SepcovStatus::NoConvergence,
        Error::InconsistentScan { .. } => SepcovStatus::InconsistentScan,
        Error::DegenerateEdge { .. } | Error::NoSignChange | Error::OffBranch(_) => SepcovStatus::Degenerate,
        _ => SepcovStatus::InvalidInput,
    }
}

fn guard<F: FnOnce() -> Result<(), SepcovStatus>>(f: F) -> SepcovStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SepcovStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            SepcovStatus::Panic
        }
    }
}

fn fail(e: Error) -> SepcovStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> SepcovStatus {
    set_error(format!("{what} is null"));
    SepcovStatus::NullPointer
}

unsafe fn measure(t: *const f64, w: *const f64, len: usize) -> Result<AtomicMeasure, SepcovStatus> {
    if t.is_null() || w.is_null() {
        return Err(null("atom array"));
    }
    let t = std::slice::from_raw_parts(t, len);
    let w = std::slice::from_raw_parts(w, len);
    AtomicMeasure::new(t.iter().copied().zip(w.iter().copied())).map_err(fail)
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sepcov_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a model from atom arrays `(t, w)` of `nu` and `nu_tilde`.
///
/// # Safety
/// Each array must hold `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepcov_model_new(
    c: f64,
    nu_t: *const f64,
    nu_w: *const f64,
    nu_len: usize,
    nu_tilde_t: *const f64,
    nu_tilde_w: *const f64,
    nu_tilde_len: usize,
    out: *mut *mut SepcovModel,
) -> SepcovStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let nu = measure(nu_t, nu_w, nu_len)?;
        let nt = measure(nu_tilde_t, nu_tilde_w, nu_tilde_len)?;
        let model = ModelSpec::new(c, nu, nt).map_err(fail)?;
        *out = Box::into_raw(Box::new(SepcovModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`sepcov_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sepcov_model_free(model: *mut SepcovModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepcov_solve(
    model: *const SepcovModel,
    z_re: f64,
    z_im: f64,
    out: *mut SepcovSolution,
) -> SepcovStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return Err(null("argument"));
        };
        let p = solver::solve_master(&m.0, Complex64::new(z_re, z_im), None).map_err(fail)?;
        *out = SepcovSolution {
            delta_re: p.delta.re,
            delta_im: p.delta.im,
            delta_tilde_re: p.delta_tilde.re,
            delta_tilde_im: p.delta_tilde.im,
            m_re: p.m.re,
            m_im: p.m.im,
            m_tilde_re: p.m_tilde.re,
            m_tilde_im: p.m_tilde.im,
            stab: p.stab,
            residual: p.residual,
        };
        Ok(())
    })
}

/// Density of the limit measure at real `x != 0`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepcov_density_at(model: *const SepcovModel, x: f64, out: *mut f64) -> SepcovStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return Err(null("argument"));
        };
        *out = density::density_at(&m.0, x).map_err(fail)?.f;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepcov_mass_at_zero(model: *const SepcovModel, out: *mut f64) -> SepcovStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return Err(null("argument"));
        };
        *out = density::mass_at_zero(&m.0);
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepcov_support_new(model: *const SepcovModel, out: *mut *mut SepcovSupport) -> SepcovStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return Err(null("argument"));
        };
        let mut r = support::compute_support(&m.0).map_err(fail)?;
        r.branches.clear();
        *out = Box::into_raw(Box::new(SepcovSupport(r)));
        Ok(())
    })
}

/// # Safety
/// `support` must come from [`sepcov_support_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sepcov_support_free(support: *mut SepcovSupport) {
    if !support.is_null() {
        drop(Box::from_raw(support));
    }
}

/// Number of support intervals, 0 for a null handle.
///
/// # Safety
/// `support` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepcov_support_len(support: *const SepcovSupport) -> usize {
    support.as_ref().map_or(0, |s| s.0.intervals.len())
}

/// # Safety
/// `support` must be a live handle; `lo` and `hi` writable.
#[no_mangle]
pub unsafe extern "C" fn sepcov_support_interval(
    support: *const SepcovSupport,
    index: usize,
    lo: *mut f64,
    hi: *mut f64,
) -> SepcovStatus {
    guard(|| {
        let (Some(s), false) = (support.as_ref(), lo.is_null() || hi.is_null()) else {
            return Err(null("argument"));
        };
        let Some(iv) = s.0.intervals.get(index) else {
            set_error(format!("interval index {index} out of range"));
            return Err(SepcovStatus::OutOfRange);
        };
        *lo = iv[0];
        *hi = iv[1];
        Ok(())
    })
}

/// Mass of the atom at zero, NaN for a null handle.
///
/// # Safety
/// `support` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepcov_support_atom(support: *const SepcovSupport) -> f64 {
    support.as_ref().map_or(f64::NAN, |s| s.0.atom_at_zero)
}

/// # Safety
/// `support` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepcov_support_edge_count(support: *const SepcovSupport) -> usize {
    support.as_ref().map_or(0, |s| s.0.edges.len())
}

/// # Safety
/// `support` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepcov_support_edge(
    support: *const SepcovSupport,
    index: usize,
    out: *mut SepcovEdge,
) -> SepcovStatus {
    guard(|| {
        let (Some(s), false) = (support.as_ref(), out.is_null()) else {
            return Err(null("argument"));
        };
        let Some(e) = s.0.edges.get(index) else {
            set_error(format!("edge index {index} out of range"));
            return Err(SepcovStatus::OutOfRange);
        };
        *out = SepcovEdge {
            a: e.a,
            delta_tilde_a: e.delta_tilde_a,
            delta_a: e.delta_a,
            side: match e.side {
                EdgeSide::Left => 0,
                EdgeSide::Right => 1,
            },
            x_second: e.x_second,
            h_prime: e.h_prime.unwrap_or(f64::NAN),
            f3: e.f3,
        };
        Ok(())
    })
}
