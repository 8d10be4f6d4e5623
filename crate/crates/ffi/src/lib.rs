//! C ABI over the intersim environment and trained policies.
//!
//! Handles are opaque pointers created by `*_new`/`*_load` and released by
//! the matching `*_free`. Every fallible call returns an [`IsimStatus`];
//! on failure, [`isim_last_error`] describes the most recent error on the
//! calling thread.

use intersim::env::{
    Environment, EpisodeState, Observations, Terminal, GLOBAL_STATE_DIM, NUM_PEDS, PED_OBS_DIM,
    SDC_OBS_DIM,
};
use intersim::nets::{checkpoint, decision_of, to_vehicle_action, Categorical, Policies, GO, WAIT};
use intersim::physics::{PedDecision, VehicleAction};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

pub const ISIM_NUM_PEDS: usize = 12;
pub const ISIM_PED_OBS_DIM: usize = 20;
pub const ISIM_SDC_OBS_DIM: usize = 34;
pub const ISIM_GLOBAL_STATE_DIM: usize = 58;
pub const ISIM_GO: u8 = 0;
pub const ISIM_WAIT: u8 = 1;

const _: () = assert!(ISIM_NUM_PEDS == NUM_PEDS);
const _: () = assert!(ISIM_PED_OBS_DIM == PED_OBS_DIM);
const _: () = assert!(ISIM_SDC_OBS_DIM == SDC_OBS_DIM);
const _: () = assert!(ISIM_GLOBAL_STATE_DIM == GLOBAL_STATE_DIM);
const _: () = assert!(ISIM_GO as usize == GO && ISIM_WAIT as usize == WAIT);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    EpisodeTerminated = 4,
    NoEpisode = 5,
    Io = 6,
    Checkpoint = 7,
    Internal = 8,
}

/// Episode outcome codes reported by [`isim_env_status`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsimTerminal {
    Running = 0,
    Collision = 1,
    Goal = 2,
    Timeout = 3,
}

/// An environment plus its current episode.
pub struct IsimEnv {
    env: Environment,
    episode: Option<(EpisodeState, Observations)>,
}

/// A set of trained policies loaded from a checkpoint.
pub struct IsimPolicy {
    policies: Policies,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &intersim::Error) -> IsimStatus {
    use intersim::Error as E;
    match e {
        E::EpisodeTerminated => IsimStatus::EpisodeTerminated,
        E::InvalidMultiplier(_) | E::DimensionMismatch { .. } | E::Usage(_) => {
            IsimStatus::InvalidArgument
        }
        E::Io(_) => IsimStatus::Io,
        E::Checkpoint(_) => IsimStatus::Checkpoint,
        _ => IsimStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (IsimStatus, String)>) -> IsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IsimStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IsimStatus::Internal
        }
    }
}

fn lib_err(e: intersim::Error) -> (IsimStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IsimStatus, String) {
    (IsimStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (IsimStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (IsimStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(
    p: *mut f64,
    len: usize,
    need: usize,
) -> Result<&'a mut [f64], (IsimStatus, String)> {
    if p.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err((
            IsimStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {need}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn in_slice<'a>(
    p: *const f64,
    len: usize,
    need: usize,
) -> Result<&'a [f64], (IsimStatus, String)> {
    if p.is_null() {
        return Err(null("input buffer"));
    }
    if len != need {
        return Err((
            IsimStatus::InvalidArgument,
            format!("input holds {len} values, expected {need}"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, need))
}

/// Message for the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn isim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an environment. No episode is active until [`isim_env_reset`].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn isim_env_new(out: *mut *mut IsimEnv) -> IsimStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let env = Environment::new().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IsimEnv { env, episode: None }));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from [`isim_env_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isim_env_free(env: *mut IsimEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Starts a new episode.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn isim_env_reset(
    env: *mut IsimEnv,
    seed: u64,
    jaywalk_multiplier: f64,
) -> IsimStatus {
    guard(|| {
        let h = deref_mut(env, "env")?;
        h.episode = Some(h.env.reset(seed, jaywalk_multiplier).map_err(lib_err)?);
        Ok(())
    })
}

fn episode(h: &IsimEnv) -> Result<&(EpisodeState, Observations), (IsimStatus, String)> {
    h.episode.as_ref().ok_or_else(|| {
        (
            IsimStatus::NoEpisode,
            "no active episode; call isim_env_reset".into(),
        )
    })
}

/// Advances the episode by one step. `decisions` holds 12 entries of
/// `ISIM_GO`/`ISIM_WAIT`. Writes 1 to `done` when the episode ended.
///
/// # Safety
/// `env` must be a live handle, `decisions` must point to 12 bytes and
/// `done` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn isim_env_step(
    env: *mut IsimEnv,
    decisions: *const u8,
    accel: f64,
    steer: f64,
    done: *mut u8,
) -> IsimStatus {
    guard(|| {
        let h = deref_mut(env, "env")?;
        if decisions.is_null() {
            return Err(null("decisions"));
        }
        let raw = std::slice::from_raw_parts(decisions, NUM_PEDS);
        let ds: Vec<PedDecision> = raw
            .iter()
            .map(|&d| match d {
                ISIM_GO => Ok(PedDecision::Go),
                ISIM_WAIT => Ok(PedDecision::Wait),
                other => Err((
                    IsimStatus::InvalidArgument,
                    format!("decision {other} is not GO or WAIT"),
                )),
            })
            .collect::<Result<_, _>>()?;
        if !accel.is_finite() || !steer.is_finite() {
            return Err((IsimStatus::InvalidArgument, "action must be finite".into()));
        }
        let (state, _) = episode(h)?;
        let t = h
            .env
            .step(state, &ds, VehicleAction::new(accel, steer))
            .map_err(lib_err)?;
        if !done.is_null() {
            *done = u8::from(t.done);
        }
        h.episode = Some((t.state, t.observations));
        Ok(())
    })
}

/// Copies the 34-value vehicle observation into `out`.
///
/// # Safety
/// `env` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn isim_env_sdc_observation(
    env: *const IsimEnv,
    out: *mut f64,
    len: usize,
) -> IsimStatus {
    guard(|| {
        let (_, obs) = episode(deref(env, "env")?)?;
        out_slice(out, len, SDC_OBS_DIM)?.copy_from_slice(&obs.sdc);
        Ok(())
    })
}

/// Copies the 12 x 20 pedestrian observations (row per pedestrian).
///
/// # Safety
/// `env` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn isim_env_ped_observations(
    env: *const IsimEnv,
    out: *mut f64,
    len: usize,
) -> IsimStatus {
    guard(|| {
        let (_, obs) = episode(deref(env, "env")?)?;
        let dst = out_slice(out, len, NUM_PEDS * PED_OBS_DIM)?;
        for (row, o) in dst.chunks_exact_mut(PED_OBS_DIM).zip(&obs.peds) {
            row.copy_from_slice(o);
        }
        Ok(())
    })
}

/// Copies the 58-value global state.
///
/// # Safety
/// `env` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn isim_env_global_state(
    env: *const IsimEnv,
    out: *mut f64,
    len: usize,
) -> IsimStatus {
    guard(|| {
        let (_, obs) = episode(deref(env, "env")?)?;
        out_slice(out, len, GLOBAL_STATE_DIM)?.copy_from_slice(&obs.global);
        Ok(())
    })
}

/// Writes the step count and the episode outcome.
///
/// # Safety
/// `env` must be a live handle; `step` and `terminal` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn isim_env_status(
    env: *const IsimEnv,
    step: *mut u32,
    terminal: *mut IsimTerminal,
) -> IsimStatus {
    guard(|| {
        let (state, _) = episode(deref(env, "env")?)?;
        if !step.is_null() {
            *step = state.step;
        }
        if !terminal.is_null() {
            *terminal = match state.terminal {
                None => IsimTerminal::Running,
                Some(Terminal::Collision(_)) => IsimTerminal::Collision,
                Some(Terminal::Goal) => IsimTerminal::Goal,
                Some(Terminal::Timeout) => IsimTerminal::Timeout,
            };
        }
        Ok(())
    })
}

/// Loads policies from a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn isim_policy_load(
    path: *const c_char,
    out: *mut *mut IsimPolicy,
) -> IsimStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (IsimStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let policies = checkpoint::load(Path::new(p)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IsimPolicy { policies }));
        Ok(())
    })
}

/// Freshly initialized (untrained) policies for `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isim_policy_init(seed: u64, out: *mut *mut IsimPolicy) -> IsimStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(IsimPolicy {
            policies: Policies::init(seed),
        }));
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isim_policy_free(policy: *mut IsimPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Deterministic vehicle action (clamped mean) for a 34-value observation.
///
/// # Safety
/// `policy` must be a live handle, `obs` must hold `len` doubles, and the
/// outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn isim_policy_sdc_action(
    policy: *const IsimPolicy,
    obs: *const f64,
    len: usize,
    accel: *mut f64,
    steer: *mut f64,
) -> IsimStatus {
    guard(|| {
        let p = deref(policy, "policy")?;
        let x = in_slice(obs, len, SDC_OBS_DIM)?;
        let out = p.policies.sdc.forward(x).map_err(lib_err)?;
        let a = to_vehicle_action(&[out[0], out[1]]);
        *deref_mut(accel, "accel")? = a.accel;
        *deref_mut(steer, "steer")? = a.steer;
        Ok(())
    })
}

/// Most probable go/wait decision for each of the 12 pedestrians, given
/// their 12 x 20 observations.
///
/// # Safety
/// `policy` must be a live handle, `obs` must hold `len` doubles and
/// `decisions` must have room for 12 bytes.
#[no_mangle]
pub unsafe extern "C" fn isim_policy_ped_decisions(
    policy: *const IsimPolicy,
    obs: *const f64,
    len: usize,
    decisions: *mut u8,
) -> IsimStatus {
    guard(|| {
        let p = deref(policy, "policy")?;
        let x = in_slice(obs, len, NUM_PEDS * PED_OBS_DIM)?;
        if decisions.is_null() {
            return Err(null("decisions"));
        }
        let cache = p.policies.ped.forward_batch(x, NUM_PEDS).map_err(lib_err)?;
        let out = std::slice::from_raw_parts_mut(decisions, NUM_PEDS);
        for (d, logits) in out.iter_mut().zip(cache.output().chunks_exact(2)) {
            *d = match decision_of(Categorical::from_logits(logits).mode()) {
                PedDecision::Go => ISIM_GO,
                PedDecision::Wait => ISIM_WAIT,
            };
        }
        Ok(())
    })
}
