//! C ABI over the core laboratory. Handles are opaque; every function
//! returns an `MplStatus` (or a handle that must be freed with the matching
//! `_free`). Strings returned by the library are NUL-terminated and must be
//! released with `mpl_string_free`.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use minor_process_lab::ensembles::EntryLaw;
use minor_process_lab::error::Error;
use minor_process_lab::harness::{self, ExperimentConfig, Regime, RunArtifact};
use minor_process_lab::limit_laws::{self, FNKernelParams, QuadratureConfig};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum MplStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    IoFailure = 4,
    NotFound = 5,
    Panic = 6,
}

/// Experiment regimes, mirroring the CLI.
#[repr(C)]
#[derive(Clone, Copy)]
pub enum MplRegime {
    Subcritical = 0,
    Critical = 1,
    Supercritical = 2,
    Identities = 3,
    Dbm = 4,
}

/// Matrix entry laws.
#[repr(C)]
#[derive(Clone, Copy)]
pub enum MplEntryLaw {
    Gaussian = 0,
    Rademacher = 1,
    Uniform = 2,
}

/// Opaque experiment configuration.
pub struct MplConfig {
    inner: ExperimentConfig,
}

/// Opaque run artifact.
pub struct MplArtifact {
    inner: RunArtifact,
}

fn status_of(e: &Error) -> MplStatus {
    match e {
        Error::InvalidArgument(_) | Error::OutOfRange { .. } | Error::DimensionMismatch { .. } => {
            MplStatus::InvalidArgument
        }
        Error::Io(_) => MplStatus::IoFailure,
        _ => MplStatus::NumericalFailure,
    }
}

/// Allocate a configuration. `k` < 0 means unset (critical regime derives it
/// from `alpha`); pass a NaN `alpha` to leave it unset.
#[no_mangle]
pub extern "C" fn mpl_config_new(
    regime: MplRegime,
    n: usize,
    k: i64,
    alpha: f64,
    beta: u8,
    law: MplEntryLaw,
    replicas: usize,
    seed: u64,
) -> *mut MplConfig {
    let regime = match regime {
        MplRegime::Subcritical => Regime::Subcritical,
        MplRegime::Critical => Regime::Critical,
        MplRegime::Supercritical => Regime::Supercritical,
        MplRegime::Identities => Regime::Identities,
        MplRegime::Dbm => Regime::Dbm,
    };
    let mut cfg = ExperimentConfig::new(regime, n, beta);
    cfg.k = if k >= 0 { Some(k as usize) } else { None };
    cfg.alpha = if alpha.is_nan() { None } else { Some(alpha) };
    cfg.entry_law = match law {
        MplEntryLaw::Gaussian => EntryLaw::Gaussian,
        MplEntryLaw::Rademacher => EntryLaw::Rademacher,
        MplEntryLaw::Uniform => EntryLaw::Uniform,
    };
    cfg.replicas = replicas;
    cfg.master_seed = seed;
    Box::into_raw(Box::new(MplConfig { inner: cfg }))
}

#[no_mangle]
pub extern "C" fn mpl_config_free(config: *mut MplConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Run the configured experiment. On success `*out` owns a new artifact.
#[no_mangle]
pub extern "C" fn mpl_run(config: *const MplConfig, out: *mut *mut MplArtifact) -> MplStatus {
    if config.is_null() || out.is_null() {
        return MplStatus::NullPointer;
    }
    let cfg = unsafe { &(*config).inner };
    match catch_unwind(AssertUnwindSafe(|| harness::run(cfg))) {
        Ok(Ok(artifact)) => {
            unsafe { *out = Box::into_raw(Box::new(MplArtifact { inner: artifact })) };
            MplStatus::Ok
        }
        Ok(Err(e)) => status_of(&e),
        Err(_) => MplStatus::Panic,
    }
}

#[no_mangle]
pub extern "C" fn mpl_artifact_free(artifact: *mut MplArtifact) {
    if !artifact.is_null() {
        drop(unsafe { Box::from_raw(artifact) });
    }
}

/// 0 all checks passed, 1 statistical failure, 2 identity breach.
#[no_mangle]
pub extern "C" fn mpl_artifact_exit_code(artifact: *const MplArtifact) -> i32 {
    if artifact.is_null() {
        return -1;
    }
    unsafe { &(*artifact).inner }.exit_code()
}

#[no_mangle]
pub extern "C" fn mpl_artifact_row_count(artifact: *const MplArtifact) -> usize {
    if artifact.is_null() {
        return 0;
    }
    unsafe { &(*artifact).inner }.rows.len()
}

/// Look up a summary scalar by name.
#[no_mangle]
pub extern "C" fn mpl_artifact_summary(
    artifact: *const MplArtifact,
    name: *const c_char,
    out: *mut f64,
) -> MplStatus {
    if artifact.is_null() || name.is_null() || out.is_null() {
        return MplStatus::NullPointer;
    }
    let name = match unsafe { CStr::from_ptr(name) }.to_str() {
        Ok(s) => s,
        Err(_) => return MplStatus::InvalidArgument,
    };
    match unsafe { &(*artifact).inner }.summary.get(name) {
        Some(&v) => {
            unsafe { *out = v };
            MplStatus::Ok
        }
        None => MplStatus::NotFound,
    }
}

/// Render the artifact as the same plain-text report the CLI prints. Free
/// with `mpl_string_free`.
#[no_mangle]
pub extern "C" fn mpl_artifact_render(artifact: *const MplArtifact) -> *mut c_char {
    if artifact.is_null() {
        return std::ptr::null_mut();
    }
    let text = unsafe { &(*artifact).inner }.render_text();
    CString::new(text).map(CString::into_raw).unwrap_or(std::ptr::null_mut())
}

/// Write the artifact as JSON to `path`.
#[no_mangle]
pub extern "C" fn mpl_artifact_write_json(
    artifact: *const MplArtifact,
    path: *const c_char,
) -> MplStatus {
    if artifact.is_null() || path.is_null() {
        return MplStatus::NullPointer;
    }
    let path = match unsafe { CStr::from_ptr(path) }.to_str() {
        Ok(s) => s,
        Err(_) => return MplStatus::InvalidArgument,
    };
    let file = match std::fs::File::create(path) {
        Ok(f) => f,
        Err(_) => return MplStatus::IoFailure,
    };
    match unsafe { &(*artifact).inner }.write_json(std::io::BufWriter::new(file)) {
        Ok(()) => MplStatus::Ok,
        Err(e) => status_of(&e),
    }
}

#[no_mangle]
pub extern "C" fn mpl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Tracy-Widom beta CDF at s.
#[no_mangle]
pub extern "C" fn mpl_tracy_widom_cdf(beta: u8, s: f64, out: *mut f64) -> MplStatus {
    if out.is_null() {
        return MplStatus::NullPointer;
    }
    match limit_laws::tracy_widom_cdf(beta, s) {
        Ok(v) => {
            unsafe { *out = v };
            MplStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Critical-regime joint edge intensity at rescaled coordinates (x, y).
#[no_mangle]
pub extern "C" fn mpl_fn_intensity(alpha: f64, x: f64, y: f64, out: *mut f64) -> MplStatus {
    if out.is_null() {
        return MplStatus::NullPointer;
    }
    match limit_laws::fn_joint_intensity(
        &FNKernelParams { alpha, x, y },
        &QuadratureConfig::default(),
    ) {
        Ok(v) => {
            unsafe { *out = v };
            MplStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_through_the_c_surface() {
        let cfg = mpl_config_new(
            MplRegime::Subcritical,
            60,
            4,
            f64::NAN,
            2,
            MplEntryLaw::Gaussian,
            50,
            11,
        );
        let mut art: *mut MplArtifact = std::ptr::null_mut();
        assert!(mpl_run(cfg, &mut art) == MplStatus::Ok);
        assert_eq!(mpl_artifact_row_count(art), 50);
        let mut v = 0.0;
        let name = CString::new("clt_mean").unwrap();
        assert!(mpl_artifact_summary(art, name.as_ptr(), &mut v) == MplStatus::Ok);
        assert!(v.is_finite());
        let missing = CString::new("nope").unwrap();
        assert!(mpl_artifact_summary(art, missing.as_ptr(), &mut v) == MplStatus::NotFound);
        let text = mpl_artifact_render(art);
        assert!(!text.is_null());
        mpl_string_free(text);
        mpl_artifact_free(art);
        mpl_config_free(cfg);
    }

    #[test]
    fn scalar_helpers() {
        let mut v = 0.0;
        assert!(mpl_tracy_widom_cdf(2, -1.0, &mut v) == MplStatus::Ok);
        assert!((v - 0.8072).abs() < 1e-3);
        assert!(mpl_tracy_widom_cdf(3, -1.0, &mut v) == MplStatus::InvalidArgument);
        assert!(mpl_fn_intensity(1.0, 0.0, 0.0, &mut v) == MplStatus::Ok);
        assert!(v > 0.0);
        assert!(mpl_run(std::ptr::null(), std::ptr::null_mut()) == MplStatus::NullPointer);
    }
}
