//! C ABI for the mvpmcmc library: opaque handles, integer error codes, and a
//! thread-local last-error message. The header is generated by cbindgen into
//! `include/mvpmcmc.h` at build time.
//!
//! Conventions:
//! - Functions returning `i32` use 0 for success and the library's exit-code
//!   classification otherwise (2 config, 3 numeric, 4 degeneracy).
//! - Constructors return NULL on failure; call `mvp_last_error_message` for
//!   the reason.
//! - Every handle has exactly one `_free` function; passing NULL is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use mvpmcmc::error::Error;
use mvpmcmc::harness::config::ExperimentConfig;
use mvpmcmc::harness::experiment::{generate_data, run_experiment};
use mvpmcmc::harness::output::read_series_csv;
use mvpmcmc::law::{propagate_laws, Level};
use mvpmcmc::model::{Dataset, ParamVector};
use mvpmcmc::models::{build_model, ModelEntry};
use mvpmcmc::rng::StreamKey;

pub const MVP_OK: i32 = 0;
pub const MVP_ERR_CONFIG: i32 = 2;
pub const MVP_ERR_NUMERIC: i32 = 3;
pub const MVP_ERR_DEGENERACY: i32 = 4;
/// Invalid handle / null pointer / panic across the boundary.
pub const MVP_ERR_USAGE: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn code_of(err: &Error) -> i32 {
    err.exit_code()
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mvp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn catch<T>(f: impl FnOnce() -> Result<T, (i32, String)>) -> Result<T, i32> {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err((code, msg))) => {
            set_last_error(&msg);
            Err(code)
        }
        Err(_) => {
            set_last_error("internal panic");
            Err(MVP_ERR_USAGE)
        }
    }
}

fn lib_err(e: Error) -> (i32, String) {
    (code_of(&e), e.to_string())
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, (i32, String)> {
    if ptr.is_null() {
        return Err((MVP_ERR_USAGE, "null string argument".into()));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| (MVP_ERR_USAGE, "string argument is not valid UTF-8".into()))
}

/// Opaque model handle.
pub struct MvpModel {
    entry: ModelEntry,
}

/// Opaque observation-sequence handle.
pub struct MvpDataset {
    data: Dataset,
}

/// Build a registered model ("neuron3d", "ou-meanfield", "linear-gaussian").
/// `overrides_json` may be NULL or a JSON object with partial parameter
/// overrides.
///
/// # Safety
/// `name` must be a valid NUL-terminated string; `overrides_json` NULL or the
/// same.
#[no_mangle]
pub unsafe extern "C" fn mvp_model_new(
    name: *const c_char,
    overrides_json: *const c_char,
) -> *mut MvpModel {
    let result = catch(|| {
        let name = cstr(name)?;
        let overrides = if overrides_json.is_null() {
            serde_json::Value::Null
        } else {
            serde_json::from_str(cstr(overrides_json)?)
                .map_err(|e| (MVP_ERR_CONFIG, format!("overrides: {e}")))?
        };
        let entry = build_model(name, &overrides).map_err(lib_err)?;
        Ok(Box::into_raw(Box::new(MvpModel { entry })))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// # Safety
/// `model` must come from `mvp_model_new` and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mvp_model_free(model: *mut MvpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of inferred parameters, or -1 on NULL.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mvp_model_param_dim(model: *const MvpModel) -> i32 {
    if model.is_null() {
        set_last_error("null model handle");
        return -1;
    }
    (*model).entry.model.param_dim() as i32
}

/// Copy the name of parameter `index` into `buf` (NUL-terminated). Returns 0,
/// or an error code if the index is out of range or the buffer too small.
///
/// # Safety
/// `model` must be a live handle; `buf` must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mvp_model_param_name(
    model: *const MvpModel,
    index: usize,
    buf: *mut c_char,
    cap: usize,
) -> i32 {
    match catch(|| {
        if model.is_null() || buf.is_null() {
            return Err((MVP_ERR_USAGE, "null argument".into()));
        }
        let names = (*model).entry.model.param_names();
        let name = names
            .get(index)
            .ok_or((MVP_ERR_USAGE, format!("parameter index {index} out of range")))?;
        if name.len() + 1 > cap {
            return Err((MVP_ERR_USAGE, format!("buffer of {cap} bytes too small")));
        }
        std::ptr::copy_nonoverlapping(name.as_ptr() as *const c_char, buf, name.len());
        *buf.add(name.len()) = 0;
        Ok(())
    }) {
        Ok(()) => MVP_OK,
        Err(code) => code,
    }
}

/// Copy the model's reference parameter values into `out` (length `cap`,
/// must be at least the parameter dimension).
///
/// # Safety
/// `model` live handle; `out` points to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mvp_model_reference_theta(
    model: *const MvpModel,
    out: *mut f64,
    cap: usize,
) -> i32 {
    match catch(|| {
        if model.is_null() || out.is_null() {
            return Err((MVP_ERR_USAGE, "null argument".into()));
        }
        let theta = &(*model).entry.theta_true;
        if theta.len() > cap {
            return Err((MVP_ERR_USAGE, format!("buffer of {cap} doubles too small")));
        }
        std::ptr::copy_nonoverlapping(theta.values.as_ptr(), out, theta.len());
        Ok(())
    }) {
        Ok(()) => MVP_OK,
        Err(code) => code,
    }
}

unsafe fn theta_from(
    model: &MvpModel,
    theta: *const f64,
    theta_len: usize,
) -> Result<ParamVector, (i32, String)> {
    if theta.is_null() {
        return Ok(model.entry.theta_true.clone());
    }
    if theta_len != model.entry.model.param_dim() {
        return Err((
            MVP_ERR_CONFIG,
            format!(
                "theta has {theta_len} entries, model has {}",
                model.entry.model.param_dim()
            ),
        ));
    }
    Ok(ParamVector::new(
        std::slice::from_raw_parts(theta, theta_len).to_vec(),
    ))
}

/// Simulate `horizon` observations from the model at parameters `theta`
/// (NULL = reference values), using a law cloud of `cloud` particles at
/// discretization level `sim_level`.
///
/// # Safety
/// `model` live handle; `theta` NULL or `theta_len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn mvp_dataset_generate(
    model: *const MvpModel,
    theta: *const f64,
    theta_len: usize,
    horizon: usize,
    sim_level: u32,
    cloud: usize,
    seed: u64,
) -> *mut MvpDataset {
    let result = catch(|| {
        if model.is_null() {
            return Err((MVP_ERR_USAGE, "null model handle".into()));
        }
        let model = &*model;
        let theta = theta_from(model, theta, theta_len)?;
        let key = StreamKey::root(seed).derive("data", 0);
        let generated = generate_data(
            model.entry.model.as_ref(),
            &theta,
            horizon,
            sim_level,
            cloud,
            &key,
        )
        .map_err(lib_err)?;
        Ok(Box::into_raw(Box::new(MvpDataset {
            data: generated.dataset,
        })))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// Load observations from a CSV whose first column is the time index.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mvp_dataset_from_csv(path: *const c_char) -> *mut MvpDataset {
    let result = catch(|| {
        let path = cstr(path)?;
        let rows = read_series_csv(Path::new(path)).map_err(lib_err)?;
        let data = Dataset::new(rows).map_err(lib_err)?;
        Ok(Box::into_raw(Box::new(MvpDataset { data })))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// # Safety
/// `dataset` must come from a dataset constructor and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mvp_dataset_free(dataset: *mut MvpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of observation times, or -1 on NULL.
///
/// # Safety
/// `dataset` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn mvp_dataset_len(dataset: *const MvpDataset) -> i64 {
    if dataset.is_null() {
        set_last_error("null dataset handle");
        return -1;
    }
    (*dataset).data.observations.len() as i64
}

/// Read observation coordinate `coord` at time index `t` (0-based).
///
/// # Safety
/// `dataset` live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mvp_dataset_get(
    dataset: *const MvpDataset,
    t: usize,
    coord: usize,
    out: *mut f64,
) -> i32 {
    match catch(|| {
        if dataset.is_null() || out.is_null() {
            return Err((MVP_ERR_USAGE, "null argument".into()));
        }
        let obs = &(*dataset).data.observations;
        let v = obs
            .get(t)
            .and_then(|row| row.get(coord))
            .ok_or((MVP_ERR_USAGE, format!("index ({t}, {coord}) out of range")))?;
        *out = *v;
        Ok(())
    }) {
        Ok(()) => MVP_OK,
        Err(code) => code,
    }
}

/// Bootstrap particle-filter log-likelihood estimate at discretization level
/// `level` with a law cloud of `law_particles` and `filter_particles` filter
/// particles. Writes the estimate to `out`.
///
/// # Safety
/// `model` and `dataset` live handles; `theta` NULL or `theta_len` readable
/// doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mvp_bootstrap_loglik(
    model: *const MvpModel,
    dataset: *const MvpDataset,
    theta: *const f64,
    theta_len: usize,
    level: u32,
    law_particles: usize,
    filter_particles: usize,
    seed: u64,
    out: *mut f64,
) -> i32 {
    match catch(|| {
        if model.is_null() || dataset.is_null() || out.is_null() {
            return Err((MVP_ERR_USAGE, "null argument".into()));
        }
        let model = &*model;
        let data = &(*dataset).data;
        let theta = theta_from(model, theta, theta_len)?;
        let key = StreamKey::root(seed);
        let laws = propagate_laws(
            model.entry.model.as_ref(),
            &theta,
            data.horizon(),
            Level::new(level),
            law_particles,
            &key.derive("laws", 0),
        )
        .map_err(lib_err)?;
        let output = mvpmcmc::filter::bootstrap_pf(
            model.entry.model.as_ref(),
            &theta,
            &laws,
            data,
            filter_particles,
            &key.derive("filter", 0),
        )
        .map_err(lib_err)?;
        *out = output.log_likelihood;
        Ok(())
    }) {
        Ok(()) => MVP_OK,
        Err(code) => code,
    }
}

/// Run a full experiment from a JSON configuration string, writing outputs to
/// `out_dir`. On success returns a malloc'd JSON summary string; free it with
/// `mvp_string_free`. Returns NULL on failure.
///
/// # Safety
/// `config_json` and `out_dir` must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn mvp_run_experiment_json(
    config_json: *const c_char,
    out_dir: *const c_char,
) -> *mut c_char {
    let result = catch(|| {
        let config_json = cstr(config_json)?;
        let out_dir = cstr(out_dir)?;
        let cfg: ExperimentConfig = serde_json::from_str(config_json)
            .map_err(|e| (MVP_ERR_CONFIG, format!("config: {e}")))?;
        let run = run_experiment(&cfg, Path::new(out_dir)).map_err(lib_err)?;
        let text = serde_json::to_string(&run.summary)
            .map_err(|e| (MVP_ERR_CONFIG, e.to_string()))?;
        CString::new(text)
            .map(CString::into_raw)
            .map_err(|_| (MVP_ERR_USAGE, "summary contains NUL".into()))
    });
    result.unwrap_or(std::ptr::null_mut())
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mvp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
