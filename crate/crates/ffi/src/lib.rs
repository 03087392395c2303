//! C ABI over `thermosense`.
//!
//! Every fallible function returns a [`TsStatus`]; results come back through
//! out-pointers. On failure, [`ts_last_error`] gives a message for the
//! calling thread. Objects are opaque handles released with the matching
//! `*_free` function; passing NULL to a `*_free` function is a no-op.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use thermosense::calib::{fit_material, FitConfig, FitStatus};
use thermosense::heatsim::{generate_trace_with_offset, ContactConditions, MaterialSample, SensorParams, TemperatureTrace};
use thermosense::matdb::{builtin_appendix_table, load_database, MaterialDatabase};
use thermosense::perfmodel::{
    binary_map, f1_matrix, matrix_match, min_distinguishable_difference, predict_pair, BinaryMap,
    DistinguishableDifference, EffusivityGrid, F1Matrix, ScoreMatrix,
};
use thermosense::specfun::{erfc, noncentral_f_cdf, reg_inc_beta, SeriesTolerance};
use thermosense::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Convergence = 3,
    Quadrature = 4,
    EmptyTrace = 5,
    Normalization = 6,
    Dimension = 7,
    Range = 8,
    Parse = 9,
    Validation = 10,
    EmptyDatabase = 11,
    Stratification = 12,
    NoConvergence = 13,
    Io = 14,
    Format = 15,
    InvalidUtf8 = 16,
    OutOfBounds = 17,
    Panic = 99,
}

impl From<&Error> for TsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => Self::Domain,
            Error::Convergence { .. } => Self::Convergence,
            Error::Quadrature { .. } => Self::Quadrature,
            Error::EmptyTrace { .. } => Self::EmptyTrace,
            Error::Normalization(_) => Self::Normalization,
            Error::Dimension(_) => Self::Dimension,
            Error::Range(_) => Self::Range,
            Error::Parse { .. } => Self::Parse,
            Error::Validation { .. } => Self::Validation,
            Error::EmptyDatabase => Self::EmptyDatabase,
            Error::Stratification(_) => Self::Stratification,
            Error::NoConvergence { .. } => Self::NoConvergence,
            Error::Io { .. } => Self::Io,
            Error::Format(_) => Self::Format,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TsStatus, msg: impl Into<String>) -> TsStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), TsStatus>) -> TsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(TsStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, TsStatus>;
}

impl<T> OrStatus<T> for thermosense::Result<T> {
    fn or_status(self) -> Result<T, TsStatus> {
        self.map_err(|e| fail(TsStatus::from(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, TsStatus> {
    p.as_ref().ok_or_else(|| fail(TsStatus::NullPointer, format!("{name} is NULL")))
}

unsafe fn write<T>(p: *mut T, v: T, name: &str) -> Result<(), TsStatus> {
    if p.is_null() {
        return Err(fail(TsStatus::NullPointer, format!("{name} is NULL")));
    }
    p.write(v);
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char, name: &str) -> Result<&'a Path, TsStatus> {
    if p.is_null() {
        return Err(fail(TsStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(TsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TsSensorParams {
    pub e_sens: f64,
    pub alpha_sens: f64,
    pub thermistor_depth: f64,
    pub sample_rate: f64,
    pub noise_sigma: f64,
}

impl From<TsSensorParams> for SensorParams {
    fn from(s: TsSensorParams) -> Self {
        Self {
            e_sens: s.e_sens,
            alpha_sens: s.alpha_sens,
            thermistor_depth: s.thermistor_depth,
            sample_rate: s.sample_rate,
            noise_sigma: s.noise_sigma,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TsContact {
    pub t_sens0: f64,
    pub t_obj0: f64,
    pub t_contact: f64,
}

impl From<TsContact> for ContactConditions {
    fn from(c: TsContact) -> Self {
        Self {
            t_sens0: c.t_sens0,
            t_obj0: c.t_obj0,
            t_contact: c.t_contact,
        }
    }
}

#[no_mangle]
pub extern "C" fn ts_sensor_default() -> TsSensorParams {
    let s = SensorParams::default();
    TsSensorParams {
        e_sens: s.e_sens,
        alpha_sens: s.alpha_sens,
        thermistor_depth: s.thermistor_depth,
        sample_rate: s.sample_rate,
        noise_sigma: s.noise_sigma,
    }
}

#[no_mangle]
pub extern "C" fn ts_contact_default() -> TsContact {
    let c = ContactConditions::default();
    TsContact {
        t_sens0: c.t_sens0,
        t_obj0: c.t_obj0,
        t_contact: c.t_contact,
    }
}

#[no_mangle]
pub unsafe extern "C" fn ts_erfc(z: f64, out: *mut f64) -> TsStatus {
    guard(|| write(out, erfc(z).or_status()?, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn ts_reg_inc_beta(x: f64, a: f64, b: f64, out: *mut f64) -> TsStatus {
    guard(|| write(out, reg_inc_beta(x, a, b).or_status()?, "out"))
}

/// Uses the default series tolerance.
#[no_mangle]
pub unsafe extern "C" fn ts_noncentral_f_cdf(f: f64, d1: f64, d2: f64, lambda: f64, out: *mut f64) -> TsStatus {
    guard(|| {
        let v = noncentral_f_cdf(f, d1, d2, lambda, SeriesTolerance::default()).or_status()?;
        write(out, v, "out")
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TsPairPrediction {
    pub f1: f64,
    pub lambda: f64,
    pub t_surf1: f64,
    pub t_surf2: f64,
    pub n: usize,
}

#[no_mangle]
pub unsafe extern "C" fn ts_predict_pair(
    sensor: *const TsSensorParams,
    e1: f64,
    e2: f64,
    contact: *const TsContact,
    sigma: f64,
    out: *mut TsPairPrediction,
) -> TsStatus {
    guard(|| {
        let s = SensorParams::from(*deref(sensor, "sensor")?);
        let c = ContactConditions::from(*deref(contact, "contact")?);
        let p = predict_pair(&s, e1, e2, &c, sigma).or_status()?;
        write(
            out,
            TsPairPrediction {
                f1: p.f1,
                lambda: p.lambda,
                t_surf1: p.t_surf1,
                t_surf2: p.t_surf2,
                n: p.n,
            },
            "out",
        )
    })
}

/// On success `*found` is 1 and `*delta` holds the difference, or `*found`
/// is 0 when no effusivity in the physical range reaches `phi`.
#[no_mangle]
pub unsafe extern "C" fn ts_min_distinguishable_difference(
    sensor: *const TsSensorParams,
    e: f64,
    contact: *const TsContact,
    sigma: f64,
    phi: f64,
    found: *mut i32,
    delta: *mut f64,
) -> TsStatus {
    guard(|| {
        let s = SensorParams::from(*deref(sensor, "sensor")?);
        let c = ContactConditions::from(*deref(contact, "contact")?);
        match min_distinguishable_difference(&s, e, &c, sigma, phi).or_status()? {
            DistinguishableDifference::Found { delta: d, .. } => {
                write(found, 1, "found")?;
                write(delta, d, "delta")
            }
            DistinguishableDifference::IndistinguishableEverywhere => {
                write(found, 0, "found")?;
                write(delta, f64::NAN, "delta")
            }
        }
    })
}

/// Pairwise F1 matrix over an effusivity grid.
pub struct TsF1Matrix {
    inner: F1Matrix,
}

#[no_mangle]
pub unsafe extern "C" fn ts_f1_matrix_new(
    sensor: *const TsSensorParams,
    e_min: f64,
    e_max: f64,
    intervals: usize,
    contact: *const TsContact,
    sigma: f64,
    out: *mut *mut TsF1Matrix,
) -> TsStatus {
    guard(|| {
        let s = SensorParams::from(*deref(sensor, "sensor")?);
        let c = ContactConditions::from(*deref(contact, "contact")?);
        let grid = EffusivityGrid::new(e_min, e_max, intervals).or_status()?;
        let m = f1_matrix(&s, &grid, &c, sigma).or_status()?;
        write(out, Box::into_raw(Box::new(TsF1Matrix { inner: m })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_f1_matrix_read_json(path: *const c_char, out: *mut *mut TsF1Matrix) -> TsStatus {
    guard(|| {
        let m = F1Matrix::read_json(path_arg(path, "path")?).or_status()?;
        write(out, Box::into_raw(Box::new(TsF1Matrix { inner: m })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_f1_matrix_write_json(m: *const TsF1Matrix, path: *const c_char) -> TsStatus {
    guard(|| deref(m, "matrix")?.inner.write_json(path_arg(path, "path")?).or_status())
}

/// Number of rows (and columns); 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ts_f1_matrix_size(m: *const TsF1Matrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.size())
}

#[no_mangle]
pub unsafe extern "C" fn ts_f1_matrix_get(m: *const TsF1Matrix, i: usize, j: usize, out: *mut f64) -> TsStatus {
    guard(|| {
        let m = &deref(m, "matrix")?.inner;
        let n = m.size();
        if i >= n || j >= n {
            return Err(fail(TsStatus::OutOfBounds, format!("({i}, {j}) outside {n}x{n}")));
        }
        write(out, m.get(i, j), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_f1_matrix_free(m: *mut TsF1Matrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Thresholded score matrix.
pub struct TsBinaryMap {
    inner: BinaryMap,
}

#[no_mangle]
pub unsafe extern "C" fn ts_binary_map_new(m: *const TsF1Matrix, phi: f64, out: *mut *mut TsBinaryMap) -> TsStatus {
    guard(|| {
        let map = binary_map(&deref(m, "matrix")?.inner, phi);
        write(out, Box::into_raw(Box::new(TsBinaryMap { inner: map })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_binary_map_get(m: *const TsBinaryMap, i: usize, j: usize, out: *mut u8) -> TsStatus {
    guard(|| {
        let m = &deref(m, "map")?.inner;
        let n = m.size();
        if i >= n || j >= n {
            return Err(fail(TsStatus::OutOfBounds, format!("({i}, {j}) outside {n}x{n}")));
        }
        write(out, m.bit(i, j), "out")
    })
}

/// Upper-triangle agreement in percent.
#[no_mangle]
pub unsafe extern "C" fn ts_binary_map_match(a: *const TsBinaryMap, b: *const TsBinaryMap, out: *mut f64) -> TsStatus {
    guard(|| {
        let v = matrix_match(&deref(a, "a")?.inner, &deref(b, "b")?.inner).or_status()?;
        write(out, v, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_binary_map_free(m: *mut TsBinaryMap) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Material database; names are cached as C strings owned by the handle.
pub struct TsMaterialDb {
    inner: MaterialDatabase,
    names: Vec<CString>,
}

fn db_handle(inner: MaterialDatabase) -> *mut TsMaterialDb {
    let names = inner
        .records()
        .iter()
        .map(|r| CString::new(r.name.replace('\0', " ")).unwrap_or_default())
        .collect();
    Box::into_raw(Box::new(TsMaterialDb { inner, names }))
}

#[no_mangle]
pub unsafe extern "C" fn ts_material_db_builtin(out: *mut *mut TsMaterialDb) -> TsStatus {
    guard(|| write(out, db_handle(builtin_appendix_table()), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn ts_material_db_load(path: *const c_char, out: *mut *mut TsMaterialDb) -> TsStatus {
    guard(|| {
        let db = load_database(path_arg(path, "path")?).or_status()?;
        write(out, db_handle(db), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_material_db_len(db: *const TsMaterialDb) -> usize {
    db.as_ref().map_or(0, |d| d.inner.len())
}

/// Name of record `i`, owned by the database handle; NULL when out of range.
#[no_mangle]
pub unsafe extern "C" fn ts_material_db_name(db: *const TsMaterialDb, i: usize) -> *const c_char {
    db.as_ref()
        .and_then(|d| d.names.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TsMaterialRange {
    pub e_min: f64,
    pub e_max: f64,
    /// NaN when the record has no identified value.
    pub e_identified: f64,
}

#[no_mangle]
pub unsafe extern "C" fn ts_material_db_range(db: *const TsMaterialDb, i: usize, out: *mut TsMaterialRange) -> TsStatus {
    guard(|| {
        let d = &deref(db, "db")?.inner;
        let r = d
            .records()
            .get(i)
            .ok_or_else(|| fail(TsStatus::OutOfBounds, format!("record {i} of {}", d.len())))?;
        write(
            out,
            TsMaterialRange {
                e_min: r.e_min,
                e_max: r.e_max,
                e_identified: r.e_identified.unwrap_or(f64::NAN),
            },
            "out",
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_material_db_free(db: *mut TsMaterialDb) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Temperature trace.
pub struct TsTrace {
    inner: TemperatureTrace,
}

#[no_mangle]
pub unsafe extern "C" fn ts_trace_generate(
    sensor: *const TsSensorParams,
    effusivity: f64,
    contact: *const TsContact,
    time_offset: f64,
    seed: u64,
    out: *mut *mut TsTrace,
) -> TsStatus {
    guard(|| {
        let s = SensorParams::from(*deref(sensor, "sensor")?);
        let c = ContactConditions::from(*deref(contact, "contact")?);
        let m = MaterialSample::new(effusivity).or_status()?;
        let t = generate_trace_with_offset(&s, &m, &c, time_offset, seed).or_status()?;
        write(out, Box::into_raw(Box::new(TsTrace { inner: t })), "out")
    })
}

/// Reads `<stem>.csv` with its JSON sidecar.
#[no_mangle]
pub unsafe extern "C" fn ts_trace_read(csv_path: *const c_char, out: *mut *mut TsTrace) -> TsStatus {
    guard(|| {
        let t = TemperatureTrace::read(path_arg(csv_path, "csv_path")?).or_status()?;
        write(out, Box::into_raw(Box::new(TsTrace { inner: t })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ts_trace_len(t: *const TsTrace) -> usize {
    t.as_ref().map_or(0, |t| t.inner.len())
}

/// Borrowed pointer to the temperatures (°C), valid while the handle lives.
#[no_mangle]
pub unsafe extern "C" fn ts_trace_temps(t: *const TsTrace) -> *const f64 {
    t.as_ref().map_or(ptr::null(), |t| t.inner.temps().as_ptr())
}

/// Borrowed pointer to the sample times (s), valid while the handle lives.
#[no_mangle]
pub unsafe extern "C" fn ts_trace_times(t: *const TsTrace) -> *const f64 {
    t.as_ref().map_or(ptr::null(), |t| t.inner.times().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn ts_trace_free(t: *mut TsTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsFitStatus {
    Converged = 0,
    BoundActive = 1,
    MaxIterations = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TsFitResult {
    pub e_obj: f64,
    pub t_offset: f64,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: TsFitStatus,
}

/// Fits effusivity and a shared time offset to `count` traces with the
/// sensor fixed; the offset is searched in [-1, 1] s.
#[no_mangle]
pub unsafe extern "C" fn ts_fit_material(
    traces: *const *const TsTrace,
    count: usize,
    sensor: *const TsSensorParams,
    e_lo: f64,
    e_hi: f64,
    out: *mut TsFitResult,
) -> TsStatus {
    guard(|| {
        if traces.is_null() {
            return Err(fail(TsStatus::NullPointer, "traces is NULL"));
        }
        let owned: Vec<TemperatureTrace> = std::slice::from_raw_parts(traces, count)
            .iter()
            .map(|&p| deref(p, "trace").map(|t| t.inner.clone()))
            .collect::<Result<_, _>>()?;
        let s = SensorParams::from(*deref(sensor, "sensor")?);
        let cfg = FitConfig {
            e_bounds: (e_lo, e_hi),
            ..FitConfig::default()
        };
        let r = fit_material(&owned, &s, &cfg).or_status()?;
        write(
            out,
            TsFitResult {
                e_obj: r.e_obj,
                t_offset: r.t_offset,
                sse: r.sse,
                iterations: r.iterations,
                converged: r.converged,
                status: match r.status {
                    FitStatus::Converged => TsFitStatus::Converged,
                    FitStatus::BoundActive => TsFitStatus::BoundActive,
                    FitStatus::MaxIterations => TsFitStatus::MaxIterations,
                },
            },
            "out",
        )
    })
}
