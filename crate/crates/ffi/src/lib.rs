//! C ABI for `mvreflect`.
//!
//! Every function returns an [`MvrStatus`]; on failure the message is kept in
//! thread-local storage and can be read with [`mvr_last_error_message`].
//! Handles are opaque, created by `*_new`/`*_from_*` functions and released
//! with the matching `*_free`. Panics never cross the boundary; they are
//! reported as [`MvrStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mvreflect::harness::{run_experiment, ExperimentConfig, Resolved};
use mvreflect::ldp::{rate_functional, Control};
use mvreflect::transport::w2_distance;
use mvreflect::{EmpiricalMeasure, Error, NoiseDriver, ParticleEnsemble, TimeGrid};

/// Status codes. Library errors keep the numeric codes of the CLI.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MvrStatus {
    Ok = 0,
    InvalidArgument = 2,
    Shape = 3,
    DomainRange = 4,
    GeometrySearch = 5,
    ProjectionFailure = 6,
    FixedPoint = 7,
    Optimization = 8,
    UnknownPreset = 10,
    Config = 11,
    Io = 12,
    MissingTable = 13,
    NullPointer = 20,
    Utf8 = 21,
    BufferTooSmall = 22,
    Panic = 99,
}

impl MvrStatus {
    fn from_code(code: i32) -> MvrStatus {
        match code {
            2 => MvrStatus::InvalidArgument,
            3 => MvrStatus::Shape,
            4 => MvrStatus::DomainRange,
            5 => MvrStatus::GeometrySearch,
            6 => MvrStatus::ProjectionFailure,
            7 => MvrStatus::FixedPoint,
            8 => MvrStatus::Optimization,
            10 => MvrStatus::UnknownPreset,
            11 => MvrStatus::Config,
            12 => MvrStatus::Io,
            13 => MvrStatus::MissingTable,
            _ => MvrStatus::InvalidArgument,
        }
    }
}

struct Failure(MvrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(MvrStatus::from_code(e.code()), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MvrStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (MvrStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (MvrStatus::Panic, m)
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

fn null(what: &str) -> Failure {
    Failure(MvrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MvrStatus::Utf8, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// A model with its grid and initial law, built from an experiment config.
pub struct MvrModel {
    resolved: Resolved,
}

/// Simulated particle paths.
pub struct MvrEnsemble {
    inner: ParticleEnsemble,
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mvr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mvr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a model from TOML config text. Only the domain, field,
/// coefficient, grid and init sections matter here.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out_model` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvr_model_from_config(config_toml: *const c_char, out_model: *mut *mut MvrModel) -> MvrStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        let cfg = ExperimentConfig::from_toml(text(config_toml, "config_toml")?)?;
        let resolved = cfg.resolve()?;
        *slot = Box::into_raw(Box::new(MvrModel { resolved }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`mvr_model_from_config`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvr_model_free(model: *mut MvrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State dimension and number of grid nodes.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvr_model_shape(model: *const MvrModel, out_dim: *mut usize, out_nodes: *mut usize) -> MvrStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out(out_dim, "out_dim")? = m.resolved.model.dim();
        *out(out_nodes, "out_nodes")? = m.resolved.grid.n_nodes();
        Ok(())
    })
}

/// Simulates `n` interacting particles with noise scale `noise_scale`,
/// drawing everything from `seed`.
///
/// # Safety
/// `model` must be a live handle; `out_ensemble` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvr_simulate(
    model: *const MvrModel,
    n: usize,
    seed: u64,
    noise_scale: f64,
    out_ensemble: *mut *mut MvrEnsemble,
) -> MvrStatus {
    guard(|| {
        let slot = out(out_ensemble, "out_ensemble")?;
        *slot = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let r = &m.resolved;
        let driver = NoiseDriver::new(seed, r.model.noise_dim());
        let init = r.init.with_seed(seed);
        let inner = mvreflect::ensemble::simulate_interacting(&r.model, n, &init, &r.grid, &driver, noise_scale)?;
        *slot = Box::into_raw(Box::new(MvrEnsemble { inner }));
        Ok(())
    })
}

/// # Safety
/// `ensemble` must be null or a handle from [`mvr_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvr_ensemble_free(ensemble: *mut MvrEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Particle count.
///
/// # Safety
/// `ensemble` must be a live handle; `out_n` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvr_ensemble_len(ensemble: *const MvrEnsemble, out_n: *mut usize) -> MvrStatus {
    guard(|| {
        let e = ensemble.as_ref().ok_or_else(|| null("ensemble"))?;
        *out(out_n, "out_n")? = e.inner.n();
        Ok(())
    })
}

/// Copies the path of `particle` (row-major, nodes × dim) into `buf`, which
/// must hold at least `nodes · dim` values.
///
/// # Safety
/// `ensemble` must be a live handle; `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mvr_ensemble_path(
    ensemble: *const MvrEnsemble,
    particle: usize,
    buf: *mut f64,
    len: usize,
) -> MvrStatus {
    guard(|| {
        let e = ensemble.as_ref().ok_or_else(|| null("ensemble"))?;
        if particle >= e.inner.n() {
            return Err(Failure(MvrStatus::InvalidArgument, format!("particle {particle} out of range")));
        }
        let src = e.inner.path(particle).positions();
        if len < src.len() {
            return Err(Failure(MvrStatus::BufferTooSmall, format!("need {} values, got {len}", src.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// `W₂` between two uniform empirical measures on `R^dim` given as
/// row-major point arrays.
///
/// # Safety
/// `x` and `y` must be valid for `nx · dim` and `ny · dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mvr_w2_uniform(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    dim: usize,
    out_distance: *mut f64,
) -> MvrStatus {
    guard(|| {
        let xs = slice(x, nx.saturating_mul(dim), "x")?;
        let ys = slice(y, ny.saturating_mul(dim), "y")?;
        let mu = EmpiricalMeasure::uniform(dim, xs.to_vec())?;
        let nu = EmpiricalMeasure::uniform(dim, ys.to_vec())?;
        *out(out_distance, "out_distance")? = w2_distance(&mu, &nu)?;
        Ok(())
    })
}

/// `½ Σ ‖h_k‖² dt` for a control with `n_steps × m` values on a uniform grid
/// over `[0, horizon]`.
///
/// # Safety
/// `values` must be valid for `n_steps · m` doubles.
#[no_mangle]
pub unsafe extern "C" fn mvr_rate_functional(
    values: *const f64,
    n_steps: usize,
    m: usize,
    horizon: f64,
    out_rate: *mut f64,
) -> MvrStatus {
    guard(|| {
        let v = slice(values, n_steps.saturating_mul(m), "values")?;
        let grid = TimeGrid::uniform(horizon, n_steps)?;
        let h = Control::new(grid, m, v.to_vec())?;
        *out(out_rate, "out_rate")? = rate_functional(&h);
        Ok(())
    })
}

/// Runs the experiment named in `config_toml`, writing into `out_dir`.
/// `out_passed` receives 1 if every invariant check passed, else 0.
///
/// # Safety
/// Both strings must be NUL-terminated; `out_passed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mvr_run_experiment(
    config_toml: *const c_char,
    out_dir: *const c_char,
    out_passed: *mut i32,
) -> MvrStatus {
    guard(|| {
        let passed = out(out_passed, "out_passed")?;
        let mut cfg = ExperimentConfig::from_toml(text(config_toml, "config_toml")?)?;
        cfg.output_dir = Some(PathBuf::from(text(out_dir, "out_dir")?));
        let rec = run_experiment(&cfg)?;
        *passed = rec.passed() as i32;
        Ok(())
    })
}
