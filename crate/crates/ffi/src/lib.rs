//! C bindings for shapegen.
//!
//! Every function returns a [`ShapegenStatus`]. On failure a JSON error
//! message is available from [`shapegen_last_error`] on the same thread.
//! Strings handed out through `char **` parameters are owned by the caller
//! and must be released with [`shapegen_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde_json::{json, Value};

use shapegen::ast::ShapeExpr;
use shapegen::automaton::{check_ambiguity, AmbiguityReport};
use shapegen::genfun::{convergence_radius, generating_function, mean_length_function, taylor_coefficients, tune_z};
use shapegen::initializer::{InitMethod, PsoConfig};
use shapegen::param_space::ParamSpace;
use shapegen::parser::parse_spec;
use shapegen::pipeline::{run_pipeline, Boltzmann, PipelineConfig, PipelineError};
use shapegen::point_sampler::{SamplerConfig, Variant};
use shapegen::seed::{rng_for, WORD_STREAM};
use shapegen::signal::{RenderOptions, DEFAULT_DT};
use shapegen::word_sampler::{BoltzmannOracle, ShapeWord};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapegenStatus {
    Ok = 0,
    Parse = 1,
    Ambiguous = 2,
    InitFailed = 3,
    ChainFailed = 4,
    InvalidArgument = 5,
    Internal = 6,
}

/// Point sampler variant.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapegenVariant {
    Rejection = 0,
    Hr = 1,
    HrShrink = 2,
    Cdhr = 3,
    CdhrShrink = 4,
}

/// Initial-point search.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapegenInit {
    Pso = 0,
    Pattern = 1,
    Auto = 2,
}

/// Options for [`shapegen_sample_json`]. Start from
/// [`shapegen_sample_options_default`] and override fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ShapegenSampleOptions {
    pub seed: u64,
    pub count: usize,
    /// Boltzmann parameter; NaN to tune from `mean_length` instead.
    pub z: f64,
    pub mean_length: f64,
    pub variant: ShapegenVariant,
    pub burn_in: usize,
    pub thin: usize,
    pub init: ShapegenInit,
    pub pso_swarm: usize,
    pub pso_iterations: usize,
    pub pso_restarts: usize,
    /// NaN keeps the spec's own value.
    pub epsilon: f64,
    pub dt: f64,
    pub project_continuity: bool,
    /// Include the rendered `(t, value)` samples in the output.
    pub include_signals: bool,
}

/// A parsed spec.
pub struct ShapegenSpec {
    expr: ShapeExpr,
    space: ParamSpace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ShapegenStatus, Value);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e.exit_code() {
            1 => ShapegenStatus::Parse,
            2 => ShapegenStatus::Ambiguous,
            3 => ShapegenStatus::InitFailed,
            4 => ShapegenStatus::ChainFailed,
            _ if matches!(e, PipelineError::InvalidArgument(_)) => ShapegenStatus::InvalidArgument,
            _ => ShapegenStatus::Internal,
        };
        Failure(status, e.to_json())
    }
}

fn invalid(msg: &str) -> Failure {
    PipelineError::InvalidArgument(msg.to_string()).into()
}

fn set_error(v: Option<Value>) {
    let s = v.map(|v| CString::new(v.to_string()).unwrap_or_default());
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ShapegenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            ShapegenStatus::Ok
        }
        Ok(Err(Failure(status, body))) => {
            set_error(Some(body));
            status
        }
        Err(_) => {
            set_error(Some(json!({"error": "internal", "message": "panic in shapegen"})));
            ShapegenStatus::Internal
        }
    }
}

unsafe fn spec_ref<'a>(spec: *const ShapegenSpec) -> Result<&'a ShapegenSpec, Failure> {
    spec.as_ref().ok_or_else(|| invalid("null spec handle"))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("null output pointer"));
    }
    let c = CString::new(s).map_err(|_| invalid("output contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

fn unambiguous(spec: &ShapegenSpec) -> Result<(), Failure> {
    match check_ambiguity(&spec.expr.regex) {
        AmbiguityReport::Unambiguous => Ok(()),
        AmbiguityReport::Ambiguous { witness } => Err(PipelineError::Ambiguous(witness).into()),
    }
}

/// JSON text of the last error on this thread, or NULL after a successful
/// call. Valid until the next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn shapegen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn shapegen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn shapegen_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses spec text and compiles its parameter space.
///
/// # Safety
/// `text` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_spec_parse(text: *const c_char, out: *mut *mut ShapegenSpec) -> ShapegenStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return Err(invalid("null argument"));
        }
        let text = CStr::from_ptr(text).to_str().map_err(|_| invalid("spec is not UTF-8"))?;
        let expr = parse_spec(text).map_err(PipelineError::Parse)?;
        let space = ParamSpace::from_spec(&expr, None).map_err(PipelineError::from)?;
        *out = Box::into_raw(Box::new(ShapegenSpec { expr, space }));
        Ok(())
    })
}

/// Releases a spec handle. NULL is ignored.
///
/// # Safety
/// `spec` must come from [`shapegen_spec_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shapegen_spec_free(spec: *mut ShapegenSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Ambiguity report as JSON. Returns `Ambiguous` (and still writes the
/// report) when the regex has a witness word.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_check_json(spec: *const ShapegenSpec, out: *mut *mut c_char) -> ShapegenStatus {
    guard(|| {
        let s = spec_ref(spec)?;
        let report = check_ambiguity(&s.expr.regex);
        write_string(out, serde_json::to_string(&report).expect("serializable"))?;
        match report {
            AmbiguityReport::Unambiguous => Ok(()),
            AmbiguityReport::Ambiguous { witness } => Err(PipelineError::Ambiguous(witness).into()),
        }
    })
}

/// Number of free dimensions of the parameter space.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_spec_free_dims(spec: *const ShapegenSpec, out: *mut usize) -> ShapegenStatus {
    guard(|| {
        let s = spec_ref(spec)?;
        if out.is_null() {
            return Err(invalid("null output pointer"));
        }
        *out = s.space.dim();
        Ok(())
    })
}

/// Name of free dimension `index`, for ordering the vectors passed to
/// [`shapegen_contains`].
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_spec_dim_name(
    spec: *const ShapegenSpec,
    index: usize,
    out: *mut *mut c_char,
) -> ShapegenStatus {
    guard(|| {
        let s = spec_ref(spec)?;
        let name = s.space.dims().get(index).ok_or_else(|| invalid("dimension index out of range"))?;
        write_string(out, name.clone())
    })
}

/// Membership of a free-parameter vector in the constraint set.
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_contains(
    spec: *const ShapegenSpec,
    x: *const f64,
    len: usize,
    out: *mut c_int,
) -> ShapegenStatus {
    guard(|| {
        let s = spec_ref(spec)?;
        if out.is_null() || (x.is_null() && len > 0) {
            return Err(invalid("null argument"));
        }
        let v = if len == 0 { &[][..] } else { std::slice::from_raw_parts(x, len) };
        let inside = s.space.contains(v).map_err(|e| invalid(&e.to_string()))?;
        *out = c_int::from(inside);
        Ok(())
    })
}

/// Generating function, convergence radius, mean-length function and the
/// first `terms` Taylor coefficients as JSON.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_genfun_json(
    spec: *const ShapegenSpec,
    terms: usize,
    out: *mut *mut c_char,
) -> ShapegenStatus {
    guard(|| {
        let s = spec_ref(spec)?;
        unambiguous(s)?;
        let g = generating_function(&s.expr.regex).map_err(PipelineError::from)?;
        let n = mean_length_function(&g).map_err(PipelineError::from)?;
        let taylor = taylor_coefficients(&g, terms.saturating_sub(1)).map_err(PipelineError::from)?;
        let rconv = convergence_radius(&g);
        let body = json!({
            "generating_function": g.to_string(),
            "numerator": shapegen::genfun::coefficient_strings(g.numerator()),
            "denominator": shapegen::genfun::coefficient_strings(g.denominator()),
            "rconv": if rconv.is_finite() { json!(rconv) } else { Value::Null },
            "mean_length": n.to_string(),
            "taylor": taylor.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        });
        write_string(out, body.to_string())
    })
}

/// Boltzmann parameter whose expected word length is `mean_length`.
///
/// # Safety
/// `spec` must be a live handle; `z_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_tune(
    spec: *const ShapegenSpec,
    mean_length: f64,
    z_out: *mut f64,
) -> ShapegenStatus {
    guard(|| {
        let s = spec_ref(spec)?;
        if z_out.is_null() {
            return Err(invalid("null output pointer"));
        }
        unambiguous(s)?;
        let g = generating_function(&s.expr.regex).map_err(PipelineError::from)?;
        *z_out = tune_z(&g, mean_length).map_err(PipelineError::from)?.z;
        Ok(())
    })
}

/// `count` Boltzmann words at parameter `z` as a JSON array of atom arrays.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_words_json(
    spec: *const ShapegenSpec,
    seed: u64,
    z: f64,
    count: usize,
    out: *mut *mut c_char,
) -> ShapegenStatus {
    guard(|| {
        let s = spec_ref(spec)?;
        unambiguous(s)?;
        let oracle = BoltzmannOracle::build(&s.expr.regex, z).map_err(PipelineError::from)?;
        let mut rng = rng_for(seed, WORD_STREAM, 0);
        let words = (0..count)
            .map(|_| oracle.sample_word(&mut rng))
            .collect::<Result<Vec<ShapeWord>, _>>()
            .map_err(PipelineError::from)?;
        write_string(out, serde_json::to_string(&words).expect("serializable"))
    })
}

/// Defaults matching the command line.
#[no_mangle]
pub extern "C" fn shapegen_sample_options_default() -> ShapegenSampleOptions {
    let sampler = SamplerConfig::default();
    let pso = PsoConfig::default();
    ShapegenSampleOptions {
        seed: 0,
        count: 10,
        z: f64::NAN,
        mean_length: 10.0,
        variant: ShapegenVariant::HrShrink,
        burn_in: sampler.burn_in,
        thin: sampler.thin,
        init: ShapegenInit::Pso,
        pso_swarm: pso.swarm_size,
        pso_iterations: pso.max_iterations,
        pso_restarts: pso.restarts,
        epsilon: f64::NAN,
        dt: DEFAULT_DT,
        project_continuity: false,
        include_signals: false,
    }
}

fn pipeline_config(o: &ShapegenSampleOptions) -> PipelineConfig {
    let variant = match o.variant {
        ShapegenVariant::Rejection => Variant::Rejection,
        ShapegenVariant::Hr => Variant::Hr,
        ShapegenVariant::HrShrink => Variant::HrShrink,
        ShapegenVariant::Cdhr => Variant::Cdhr,
        ShapegenVariant::CdhrShrink => Variant::CdhrShrink,
    };
    let init = match o.init {
        ShapegenInit::Pso => InitMethod::Pso,
        ShapegenInit::Pattern => InitMethod::Pattern,
        ShapegenInit::Auto => InitMethod::Auto,
    };
    PipelineConfig {
        seed: o.seed,
        count: o.count,
        boltzmann: if o.z.is_nan() { Boltzmann::MeanLength(o.mean_length) } else { Boltzmann::Z(o.z) },
        fixed_word: None,
        sampler: SamplerConfig {
            variant,
            burn_in: o.burn_in,
            thin: o.thin,
            seed: o.seed,
            ..SamplerConfig::default()
        },
        pso: PsoConfig {
            swarm_size: o.pso_swarm,
            max_iterations: o.pso_iterations,
            restarts: o.pso_restarts,
            ..PsoConfig::default()
        },
        init,
        epsilon: (!o.epsilon.is_nan()).then_some(o.epsilon),
        render: RenderOptions {
            dt: o.dt,
            project_continuity: o.project_continuity,
        },
        ..PipelineConfig::default()
    }
}

/// Runs the full word, valuation and signal pipeline. The output JSON has a
/// `report` object and a `samples` array of `{step, word_id, word,
/// valuation}` records, plus `signal` when `include_signals` is set.
///
/// # Safety
/// `spec` must be a live handle; `options` may be NULL for defaults;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shapegen_sample_json(
    spec: *const ShapegenSpec,
    options: *const ShapegenSampleOptions,
    out: *mut *mut c_char,
) -> ShapegenStatus {
    guard(|| {
        let s = spec_ref(spec)?;
        let o = options.as_ref().copied().unwrap_or_else(|| shapegen_sample_options_default());
        let cfg = pipeline_config(&o);
        let res = run_pipeline(&s.expr, &cfg)?;
        let samples: Vec<Value> = res
            .samples
            .iter()
            .map(|p| {
                let mut v = serde_json::to_value(p).expect("serializable");
                if o.include_signals {
                    v["signal"] = json!(p.signal.samples);
                }
                v
            })
            .collect();
        let body = json!({"report": res.report, "samples": samples});
        write_string(out, body.to_string())
    })
}
