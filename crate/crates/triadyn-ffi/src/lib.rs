//! C ABI over the `triadyn` simulator.
//!
//! Every function returns a [`TdStatus`]; on failure a message for the
//! calling thread is available from [`td_last_error`]. Handles are opaque and
//! must be released with [`td_simulation_free`]. Buffers are caller-owned:
//! functions writing arrays take a capacity and report the length they
//! needed, returning `TD_STATUS_BUFFER_TOO_SMALL` if it did not fit.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use triadyn::agentstate::init_configuration;
use triadyn::dynamics::Simulation;
use triadyn::exactlab::{enumerate_gibbs, SpinModel};
use triadyn::observables::order_parameters;
use triadyn::simcli::{dynamics_rng, parse_config};
use triadyn::{Error, RoleAssignment};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Refused = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Order parameters of the current state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TdOrderParameters {
    pub psi_form: f64,
    pub phi_align: f64,
    pub c: f64,
    pub psi_mem: f64,
    pub phi_role: f64,
    pub phi_sync: f64,
}

/// Opaque simulation handle.
pub struct TdSimulation {
    sim: Simulation,
    reference: RoleAssignment,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TdStatus {
    match e {
        Error::Config(_) => TdStatus::Config,
        Error::StepSize(_) => TdStatus::Numerical,
        Error::Refused(_) | Error::StateSpace(_) => TdStatus::Refused,
        Error::Io(_) => TdStatus::Io,
        _ => TdStatus::InvalidArgument,
    }
}

type FfiResult = std::result::Result<(), (TdStatus, String)>;

fn fail(status: TdStatus, msg: impl Into<String>) -> FfiResult {
    Err((status, msg.into()))
}

fn lift<T>(r: triadyn::Result<T>) -> std::result::Result<T, (TdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn guard(f: impl FnOnce() -> FfiResult) -> TdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside triadyn");
            TdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> std::result::Result<&'a str, (TdStatus, String)> {
    if p.is_null() {
        return Err((TdStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (TdStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn handle<'a>(p: *mut TdSimulation) -> std::result::Result<&'a mut TdSimulation, (TdStatus, String)> {
    p.as_mut().ok_or((TdStatus::NullPointer, "simulation handle is null".into()))
}

/// Copies `data` into a caller buffer of `cap` elements and stores the
/// needed length in `len_out`.
unsafe fn write_slice<T: Copy>(data: &[T], buf: *mut T, cap: usize, len_out: *mut usize) -> FfiResult {
    if !len_out.is_null() {
        *len_out = data.len();
    }
    if data.len() > cap {
        return fail(TdStatus::BufferTooSmall, format!("buffer holds {cap}, need {}", data.len()));
    }
    if data.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return fail(TdStatus::NullPointer, "output buffer is null");
    }
    ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn td_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn td_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a simulation from TOML config text (the `run` config format).
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_new(config_toml: *const c_char, out: *mut *mut TdSimulation) -> TdStatus {
    guard(|| {
        if out.is_null() {
            return fail(TdStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let cfg = lift(parse_config(str_arg(config_toml, "config_toml")?))?;
        let initial = lift(init_configuration(&cfg.model, cfg.seed))?;
        let reference = initial.roles.clone();
        let sim = lift(Simulation::new(initial, cfg.model.clone(), dynamics_rng(cfg.seed)))?;
        *out = Box::into_raw(Box::new(TdSimulation { sim, reference }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `sim` must come from `td_simulation_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_free(sim: *mut TdSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances by `steps` time steps.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_step(sim: *mut TdSimulation, steps: u64) -> TdStatus {
    guard(|| {
        let h = handle(sim)?;
        for _ in 0..steps {
            lift(h.sim.step())?;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_time(sim: *mut TdSimulation, out: *mut f64) -> TdStatus {
    guard(|| {
        let h = handle(sim)?;
        if out.is_null() {
            return fail(TdStatus::NullPointer, "out is null");
        }
        *out = h.sim.cfg.time;
        Ok(())
    })
}

/// Agent count and opinion length.
///
/// # Safety
/// `sim` must be a live handle; null outputs are skipped.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_shape(sim: *mut TdSimulation, n_agents: *mut usize, opinion_dim: *mut usize) -> TdStatus {
    guard(|| {
        let h = handle(sim)?;
        if !n_agents.is_null() {
            *n_agents = h.sim.cfg.n_agents();
        }
        if !opinion_dim.is_null() {
            *opinion_dim = h.sim.cfg.opinion_dim();
        }
        Ok(())
    })
}

/// Order parameters, with role stability against the initial role map.
///
/// # Safety
/// `sim` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_order_parameters(sim: *mut TdSimulation, out: *mut TdOrderParameters) -> TdStatus {
    guard(|| {
        let h = handle(sim)?;
        if out.is_null() {
            return fail(TdStatus::NullPointer, "out is null");
        }
        let o = order_parameters(&h.sim.cfg, Some(&h.reference));
        *out = TdOrderParameters {
            psi_form: o.psi_form,
            phi_align: o.phi_align,
            c: o.c,
            psi_mem: o.psi_mem,
            phi_role: o.phi_role,
            phi_sync: o.phi_sync,
        };
        Ok(())
    })
}

/// Conserved scalars `Q1` (norm budget plus reservoir) and `Q3` (total
/// memory); `Q2` via [`td_simulation_q2`].
///
/// # Safety
/// `sim` must be a live handle; null outputs are skipped.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_conserved(sim: *mut TdSimulation, q1: *mut f64, q3: *mut f64) -> TdStatus {
    guard(|| {
        let h = handle(sim)?;
        if !q1.is_null() {
            *q1 = h.sim.cfg.q1();
        }
        if !q3.is_null() {
            *q3 = h.sim.cfg.q3();
        }
        Ok(())
    })
}

/// Total opinion per component (`m` values).
///
/// # Safety
/// `sim` must be a live handle; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_q2(sim: *mut TdSimulation, buf: *mut i64, cap: usize, len_out: *mut usize) -> TdStatus {
    guard(|| {
        let h = handle(sim)?;
        write_slice(&h.sim.cfg.q2(), buf, cap, len_out)
    })
}

/// Opinions row-major, `N * m` values of +1 or -1.
///
/// # Safety
/// `sim` must be a live handle; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_opinions(sim: *mut TdSimulation, buf: *mut i8, cap: usize, len_out: *mut usize) -> TdStatus {
    guard(|| {
        let h = handle(sim)?;
        let flat: Vec<i8> = h.sim.cfg.agents.iter().flat_map(|a| a.opinion.iter().copied()).collect();
        write_slice(&flat, buf, cap, len_out)
    })
}

/// Snapshot JSON with a trailing NUL; `len_out` counts the NUL.
///
/// # Safety
/// `sim` must be a live handle; `buf` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn td_simulation_snapshot_json(
    sim: *mut TdSimulation,
    buf: *mut c_char,
    cap: usize,
    len_out: *mut usize,
) -> TdStatus {
    guard(|| {
        let h = handle(sim)?;
        let json = lift(h.sim.cfg.to_json())?;
        let c = CString::new(json).map_err(|e| (TdStatus::InvalidArgument, e.to_string()))?;
        let bytes = c.as_bytes_with_nul();
        write_slice(std::slice::from_raw_parts(bytes.as_ptr().cast::<c_char>(), bytes.len()), buf, cap, len_out)
    })
}

/// Exact partition function of a spin instance given as TOML (the `model`
/// table of an oracle spec, without the header) at temperature `t`.
///
/// # Safety
/// `model_toml` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn td_partition_function(model_toml: *const c_char, t: f64, out: *mut f64) -> TdStatus {
    guard(|| {
        if out.is_null() {
            return fail(TdStatus::NullPointer, "out is null");
        }
        let model: SpinModel =
            toml::from_str(str_arg(model_toml, "model_toml")?).map_err(|e| (TdStatus::Config, e.to_string()))?;
        *out = lift(enumerate_gibbs(&model, t))?.z;
        Ok(())
    })
}
