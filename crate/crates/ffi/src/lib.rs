//! C ABI over `opinion_core`.
//!
//! Measures, trajectories and profiles are opaque handles owned by the
//! caller and released with their `*_free` function. Every fallible call
//! returns an [`OpStatus`]; on failure a description is available from
//! [`op_last_error_message`] until the next failing call on the same thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use opinion_core::dynamics::{simulate, Integrator, ModelParams, SimConfig, Trajectory};
use opinion_core::measure::{
    sup_slice_distance, wasserstein1_1d, wasserstein1_joint, Atom, ConvictionMarginal,
    EmpiricalMeasure,
};
use opinion_core::steady::{solve_g_given_alpha, solve_profile, SteadyProfile};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMeasure = 3,
    NumericalFailure = 4,
    OutOfRange = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpIntegrator {
    Rk4 = 0,
    Euler = 1,
}

/// Weighted `(y, theta)` cloud.
pub struct OpMeasure(EmpiricalMeasure);

/// Snapshots of a simulation.
pub struct OpTrajectory(Trajectory);

/// Solved mono-opinion profile.
pub struct OpProfile(SteadyProfile);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn fail(status: OpStatus, message: impl Into<String>) -> OpStatus {
    set_error(message);
    status
}

fn guard(body: impl FnOnce() -> OpStatus) -> OpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(OpStatus::Panic, "internal panic"),
    }
}

/// Borrowed array; `len == 0` accepts a null pointer.
unsafe fn array<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(p, len))
    }
}

unsafe fn array_mut<'a>(p: *mut f64, len: usize) -> Option<&'a mut [f64]> {
    if len == 0 {
        Some(&mut [])
    } else if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts_mut(p, len))
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(OpStatus::NullPointer, concat!("null pointer: ", stringify!($p)));
        })+
    };
}

/// Description of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn op_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a measure from `n` atoms. Weights must sum to one.
///
/// # Safety
/// `ys`, `thetas` and `weights` must point to `n` readable doubles and `out`
/// to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn op_measure_new(
    ys: *const f64,
    thetas: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut *mut OpMeasure,
) -> OpStatus {
    guard(|| {
        non_null!(out);
        let (Some(ys), Some(ts), Some(ws)) = (array(ys, n), array(thetas, n), array(weights, n)) else {
            return fail(OpStatus::NullPointer, "null atom array");
        };
        let atoms = (0..n).map(|i| Atom::new(ys[i], ts[i], ws[i])).collect();
        match EmpiricalMeasure::new(atoms) {
            Ok(mu) => {
                *out = Box::into_raw(Box::new(OpMeasure(mu)));
                OpStatus::Ok
            }
            Err(e) => fail(OpStatus::InvalidMeasure, e.to_string()),
        }
    })
}

/// # Safety
/// `mu` must be null or a handle from [`op_measure_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn op_measure_free(mu: *mut OpMeasure) {
    if !mu.is_null() {
        drop(Box::from_raw(mu));
    }
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `mu` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn op_measure_len(mu: *const OpMeasure) -> usize {
    mu.as_ref().map_or(0, |m| m.0.len())
}

/// W1 distance between two weighted point sets on the line.
///
/// # Safety
/// Each position/weight pointer must cover its length; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn op_wasserstein1_1d(
    xa: *const f64,
    wa: *const f64,
    na: usize,
    xb: *const f64,
    wb: *const f64,
    nb: usize,
    out: *mut f64,
) -> OpStatus {
    guard(|| {
        non_null!(out);
        let (Some(xa), Some(wa), Some(xb), Some(wb)) = (array(xa, na), array(wa, na), array(xb, nb), array(wb, nb))
        else {
            return fail(OpStatus::NullPointer, "null point array");
        };
        let a: Vec<(f64, f64)> = xa.iter().copied().zip(wa.iter().copied()).collect();
        let b: Vec<(f64, f64)> = xb.iter().copied().zip(wb.iter().copied()).collect();
        match wasserstein1_1d(&a, &b) {
            Ok(d) => {
                *out = d;
                OpStatus::Ok
            }
            Err(e) => fail(OpStatus::InvalidMeasure, e.to_string()),
        }
    })
}

/// W1 distance on `(y, theta)` space with the `|dy| + |dtheta|` metric.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn op_wasserstein1_joint(
    a: *const OpMeasure,
    b: *const OpMeasure,
    out: *mut f64,
) -> OpStatus {
    guard(|| {
        non_null!(a, b, out);
        match wasserstein1_joint(&(*a).0, &(*b).0) {
            Ok(d) => {
                *out = d;
                OpStatus::Ok
            }
            Err(e) => fail(OpStatus::InvalidMeasure, e.to_string()),
        }
    })
}

/// Largest per-conviction W1 distance between two measures with the same
/// convictions.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn op_sup_slice_distance(
    a: *const OpMeasure,
    b: *const OpMeasure,
    out: *mut f64,
) -> OpStatus {
    guard(|| {
        non_null!(a, b, out);
        match sup_slice_distance(&(*a).0, &(*b).0) {
            Ok(d) => {
                *out = d;
                OpStatus::Ok
            }
            Err(e) => fail(OpStatus::InvalidMeasure, e.to_string()),
        }
    })
}

/// Integrates the model from `mu0`. `integrator` takes an [`OpIntegrator`]
/// value.
///
/// # Safety
/// `mu0` must be a live handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn op_simulate(
    mu0: *const OpMeasure,
    sigma: f64,
    p: f64,
    t_final: f64,
    dt: f64,
    snapshot_stride: usize,
    integrator: u32,
    out: *mut *mut OpTrajectory,
) -> OpStatus {
    guard(|| {
        non_null!(mu0, out);
        let params = match ModelParams::new(sigma, p) {
            Ok(prm) => prm,
            Err(e) => return fail(OpStatus::InvalidArgument, e.to_string()),
        };
        let integrator = match integrator {
            i if i == OpIntegrator::Rk4 as u32 => Integrator::Rk4,
            i if i == OpIntegrator::Euler as u32 => Integrator::Euler,
            other => return fail(OpStatus::InvalidArgument, format!("unknown integrator {other}")),
        };
        let config = SimConfig::new(t_final, dt, snapshot_stride).with_integrator(integrator);
        if let Err(e) = config.validate() {
            return fail(OpStatus::InvalidArgument, e.to_string());
        }
        match simulate(&(*mu0).0, &params, &config) {
            Ok(traj) => {
                *out = Box::into_raw(Box::new(OpTrajectory(traj)));
                OpStatus::Ok
            }
            Err(e) => fail(OpStatus::NumericalFailure, e.to_string()),
        }
    })
}

/// # Safety
/// `traj` must be null or a handle from [`op_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn op_trajectory_free(traj: *mut OpTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of snapshots, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn op_trajectory_len(traj: *const OpTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

/// Number of atoms per snapshot, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn op_trajectory_atoms(traj: *const OpTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.states[0].len())
}

unsafe fn snapshot_scalar(
    traj: *const OpTrajectory,
    k: usize,
    out: *mut f64,
    pick: impl Fn(&Trajectory, usize) -> f64,
) -> OpStatus {
    guard(|| {
        non_null!(traj, out);
        let t = &(*traj).0;
        if k >= t.len() {
            return fail(OpStatus::OutOfRange, format!("snapshot {k} of {}", t.len()));
        }
        *out = pick(t, k);
        OpStatus::Ok
    })
}

/// Time of snapshot `k`.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn op_trajectory_time(traj: *const OpTrajectory, k: usize, out: *mut f64) -> OpStatus {
    snapshot_scalar(traj, k, out, |t, k| t.times[k])
}

/// Energy at snapshot `k`.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn op_trajectory_energy(traj: *const OpTrajectory, k: usize, out: *mut f64) -> OpStatus {
    snapshot_scalar(traj, k, out, |t, k| t.energies[k])
}

/// Dissipation at snapshot `k`.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn op_trajectory_dissipation(
    traj: *const OpTrajectory,
    k: usize,
    out: *mut f64,
) -> OpStatus {
    snapshot_scalar(traj, k, out, |t, k| t.dissipations[k])
}

/// Copies the opinions of snapshot `k` into `ys`, which must hold exactly
/// [`op_trajectory_atoms`] values.
///
/// # Safety
/// `traj` must be a live handle and `ys` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn op_trajectory_positions(
    traj: *const OpTrajectory,
    k: usize,
    ys: *mut f64,
    n: usize,
) -> OpStatus {
    guard(|| {
        non_null!(traj);
        let t = &(*traj).0;
        if k >= t.len() {
            return fail(OpStatus::OutOfRange, format!("snapshot {k} of {}", t.len()));
        }
        let state = &t.states[k];
        if n != state.len() {
            return fail(OpStatus::InvalidArgument, format!("buffer of {n} for {} atoms", state.len()));
        }
        let Some(buf) = array_mut(ys, n) else {
            return fail(OpStatus::NullPointer, "null output buffer");
        };
        for (slot, atom) in buf.iter_mut().zip(state.atoms()) {
            *slot = atom.y;
        }
        OpStatus::Ok
    })
}

/// Positive root `g` of `alpha + (theta - 1) g - g^(p+1) = 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn op_solve_g_given_alpha(theta: f64, alpha: f64, p: f64, out: *mut f64) -> OpStatus {
    guard(|| {
        non_null!(out);
        match solve_g_given_alpha(theta, alpha, p) {
            Ok(g) => {
                *out = g;
                OpStatus::Ok
            }
            Err(e) => fail(OpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Self-consistent profile for the conviction marginal with `n` atoms
/// (`sigma = 1` variables), sampled on `grid_n` points.
///
/// # Safety
/// `thetas` and `masses` must point to `n` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn op_solve_profile(
    thetas: *const f64,
    masses: *const f64,
    n: usize,
    p: f64,
    grid_n: usize,
    out: *mut *mut OpProfile,
) -> OpStatus {
    guard(|| {
        non_null!(out);
        let (Some(ts), Some(ms)) = (array(thetas, n), array(masses, n)) else {
            return fail(OpStatus::NullPointer, "null marginal array");
        };
        let pi = match ConvictionMarginal::new(ts.iter().copied().zip(ms.iter().copied()).collect()) {
            Ok(pi) => pi,
            Err(e) => return fail(OpStatus::InvalidMeasure, e.to_string()),
        };
        match solve_profile(&pi, p, grid_n) {
            Ok(prof) => {
                *out = Box::into_raw(Box::new(OpProfile(prof)));
                OpStatus::Ok
            }
            Err(e) => fail(OpStatus::NumericalFailure, e.to_string()),
        }
    })
}

/// # Safety
/// `profile` must be null or a handle from [`op_solve_profile`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn op_profile_free(profile: *mut OpProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `profile` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn op_profile_len(profile: *const OpProfile) -> usize {
    profile.as_ref().map_or(0, |p| p.0.g.len())
}

/// The self-consistency constant (mean limiting opinion).
///
/// # Safety
/// `profile` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn op_profile_alpha(profile: *const OpProfile, out: *mut f64) -> OpStatus {
    guard(|| {
        non_null!(profile, out);
        *out = (*profile).0.alpha;
        OpStatus::Ok
    })
}

/// Copies the grid and profile values into buffers of exactly
/// [`op_profile_len`] doubles.
///
/// # Safety
/// `profile` must be a live handle; `thetas` and `g` must point to `n`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn op_profile_values(
    profile: *const OpProfile,
    thetas: *mut f64,
    g: *mut f64,
    n: usize,
) -> OpStatus {
    guard(|| {
        non_null!(profile);
        let prof = &(*profile).0;
        if n != prof.g.len() {
            return fail(OpStatus::InvalidArgument, format!("buffer of {n} for {} points", prof.g.len()));
        }
        let (Some(tb), Some(gb)) = (array_mut(thetas, n), array_mut(g, n)) else {
            return fail(OpStatus::NullPointer, "null output buffer");
        };
        tb.copy_from_slice(&prof.thetas);
        gb.copy_from_slice(&prof.g);
        OpStatus::Ok
    })
}

