//! C ABI over `tdp-core`.
//!
//! Every entry point returns a [`TdpStatus`]. On failure the message of the
//! last error on the calling thread is available from
//! [`tdp_last_error_message`]. Handles are created with [`tdp_model_new`] and
//! released with [`tdp_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tdp_core::geometry::moments;
use tdp_core::model::{momentum_hamiltonian, CouplingParams, MomentumPoint};
use tdp_core::topology::{loop_flux, monopole_charge, LoopShape, LoopSpec, SphereGrid};
use tdp_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    GapClosed = 3,
    Degenerate = 4,
    NotConverged = 5,
    Numerical = 6,
    Panic = 7,
}

/// Spin-tensor/momentum couplings and the momentum scale.
pub struct TdpModel {
    couplings: CouplingParams,
    k0: f64,
}

/// Berry flux through a loop, split into vector, tensor and boundary parts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TdpFlux {
    pub gamma: f64,
    pub gamma_f: f64,
    pub gamma_t: f64,
    pub boundary: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> TdpStatus {
    match err {
        Error::InvalidInput(_) | Error::NyquistViolation { .. } | Error::NotHermitian(_) => {
            TdpStatus::InvalidInput
        }
        Error::GapClosedOnLoop { .. } | Error::GapClosedOnSphere { .. } => TdpStatus::GapClosed,
        Error::DegenerateBand { .. } | Error::VectorDegenerate(_) | Error::TensorDegenerate(_) => {
            TdpStatus::Degenerate
        }
        Error::NotConverged { .. } => TdpStatus::NotConverged,
        _ => TdpStatus::Numerical,
    }
}

fn guard(body: impl FnOnce() -> Result<(), TdpStatus>) -> TdpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TdpStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("panic inside tdp".into());
            TdpStatus::Panic
        }
    }
}

fn fail(err: Error) -> TdpStatus {
    let status = status_of(&err);
    set_error(format!("{}: {err}", err.name()));
    status
}

fn null(what: &str) -> TdpStatus {
    set_error(format!("{what} is null"));
    TdpStatus::NullPointer
}

unsafe fn model_ref<'a>(model: *const TdpModel) -> Result<&'a TdpModel, TdpStatus> {
    model.as_ref().ok_or_else(|| null("model"))
}

/// Creates a model. `k0` is the momentum radius and must be positive.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tdp_model_new(
    alpha: f64,
    beta: f64,
    k0: f64,
    out: *mut *mut TdpModel,
) -> TdpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if !(alpha.is_finite() && beta.is_finite() && k0.is_finite() && k0 > 0.0) {
            return Err(fail(Error::InvalidInput(format!(
                "need finite couplings and k0 > 0, got alpha={alpha}, beta={beta}, k0={k0}"
            ))));
        }
        let model = TdpModel {
            couplings: CouplingParams::new(alpha, beta),
            k0,
        };
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`tdp_model_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tdp_model_free(model: *mut TdpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Chern number of the lowest band on an `n_theta` x `n_phi` plaquette grid,
/// refined until stable.
///
/// # Safety
/// `model` must be a live handle; `charge` and `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tdp_monopole_charge(
    model: *const TdpModel,
    n_theta: usize,
    n_phi: usize,
    charge: *mut i64,
    residual: *mut f64,
) -> TdpStatus {
    guard(|| {
        let m = model_ref(model)?;
        if charge.is_null() || residual.is_null() {
            return Err(null("output"));
        }
        let grid = SphereGrid {
            n_theta,
            n_phi,
            ..SphereGrid::default()
        };
        let r = monopole_charge(&m.couplings, grid).map_err(fail)?;
        *charge = r.charge;
        *residual = r.residual;
        Ok(())
    })
}

/// Berry flux of the lowest band through the small measurement loop of
/// radius `r` around `(theta, phi) = (3 pi / 4, pi)`, sampled at `samples`
/// points.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tdp_small_loop_flux(
    model: *const TdpModel,
    r: f64,
    samples: usize,
    out: *mut TdpFlux,
) -> TdpStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let lp = LoopSpec::new(LoopShape::small(r), samples, m.k0, m.couplings).map_err(fail)?;
        let f = loop_flux(&lp, 0).map_err(fail)?;
        *out = TdpFlux {
            gamma: f.gamma,
            gamma_f: f.gamma_f,
            gamma_t: f.gamma_t,
            boundary: f.boundary,
        };
        Ok(())
    })
}

/// Spin vector `f[3]` and row-major quadrupole tensor `n[9]` of the ground
/// state at momentum direction `(theta, phi)`.
///
/// # Safety
/// `model` must be a live handle; `f` must hold 3 and `n` 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn tdp_ground_moments(
    model: *const TdpModel,
    theta: f64,
    phi: f64,
    f: *mut f64,
    n: *mut f64,
) -> TdpStatus {
    guard(|| {
        let m = model_ref(model)?;
        if f.is_null() || n.is_null() {
            return Err(null("output"));
        }
        let h = momentum_hamiltonian(&MomentumPoint::new(m.k0, theta, phi), &m.couplings);
        let ground = h.eigensystem().band_state(0, 1e-9 * m.k0).map_err(fail)?;
        let mo = moments(&ground);
        ptr::copy_nonoverlapping(mo.f.as_ptr(), f, 3);
        for (i, row) in mo.n.iter().enumerate() {
            ptr::copy_nonoverlapping(row.as_ptr(), n.add(3 * i), 3);
        }
        Ok(())
    })
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes, into `buf`. Returns the full message length
/// excluding the terminator; pass a null `buf` to query it.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tdp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn tdp_status_name(status: TdpStatus) -> *const c_char {
    let name: &'static CStr = match status {
        TdpStatus::Ok => c"ok",
        TdpStatus::NullPointer => c"null pointer",
        TdpStatus::InvalidInput => c"invalid input",
        TdpStatus::GapClosed => c"gap closed",
        TdpStatus::Degenerate => c"degenerate",
        TdpStatus::NotConverged => c"not converged",
        TdpStatus::Numerical => c"numerical failure",
        TdpStatus::Panic => c"panic",
    };
    name.as_ptr()
}
