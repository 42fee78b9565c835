//! C ABI over the `imimo` crate.
//!
//! Configs and solver reports are opaque heap handles created and released
//! through this API. Every call returns an [`ImimoStatus`]; on failure the
//! message is kept per thread and read with [`imimo_last_error_message`].
//! Panics are caught at the boundary and reported as `IMIMO_STATUS_PANIC`.
//! Enum arguments are passed as `uint32_t` holding an `Imimo*` enum value.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use imimo::montecarlo::{simulate, SimSpec};
use imimo::optimize::{solve_epa, solve_exact, solve_gpp, SolverReport};
use imimo::outage::{outage, outage_profile, ArqCoefficient, OutageMethod, PowerSchedule, Scheme, SystemConfig};
use imimo::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImimoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnsupportedDimension = 3,
    UnsupportedScheme = 4,
    Numerical = 5,
    Internal = 6,
    Panic = 7,
    BufferTooSmall = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImimoScheme {
    Arq = 0,
    Cc = 1,
    Ir = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImimoOutageMethod {
    Exact = 0,
    Asymptotic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImimoAllocation {
    Exact = 0,
    Gpp = 1,
    Epa = 2,
}

/// Opaque link configuration.
pub struct ImimoConfig(SystemConfig);

/// Opaque solver result.
pub struct ImimoReport(SolverReport);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(e: &Error) -> ImimoStatus {
    match e {
        Error::InvalidArgument(_) => ImimoStatus::InvalidArgument,
        Error::NumericalDomain { .. } => ImimoStatus::Numerical,
        Error::UnsupportedDimension { .. } => ImimoStatus::UnsupportedDimension,
        Error::UnsupportedScheme(_) => ImimoStatus::UnsupportedScheme,
        Error::Internal(_) => ImimoStatus::Internal,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard<F>(f: F) -> ImimoStatus
where
    F: FnOnce() -> Result<(), (ImimoStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ImimoStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            ImimoStatus::Panic
        }
    }
}

fn lib<T>(r: imimo::Result<T>) -> Result<T, (ImimoStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (ImimoStatus, String) {
    (ImimoStatus::NullPointer, format!("{what} is null"))
}

unsafe fn config_ref<'a>(config: *const ImimoConfig) -> Result<&'a SystemConfig, (ImimoStatus, String)> {
    config.as_ref().map(|c| &c.0).ok_or_else(|| null("config"))
}

unsafe fn schedule_from(powers: *const f64, len: usize) -> Result<PowerSchedule, (ImimoStatus, String)> {
    if powers.is_null() {
        return Err(null("powers"));
    }
    lib(PowerSchedule::new(std::slice::from_raw_parts(powers, len).to_vec()))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (ImimoStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_slice(out: *mut f64, capacity: usize, values: &[f64]) -> Result<(), (ImimoStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if capacity < values.len() {
        return Err((
            ImimoStatus::BufferTooSmall,
            format!("output buffer holds {capacity} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `capacity`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn imimo_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn imimo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a config with `M = L`, the series ARQ coefficient and one symbol per round.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn imimo_config_new(
    scheme: u32,
    num_rx: u32,
    max_rounds: usize,
    rate: f64,
    energy_budget: f64,
    out: *mut *mut ImimoConfig,
) -> ImimoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let scheme = match scheme {
            x if x == ImimoScheme::Arq as u32 => Scheme::Arq,
            x if x == ImimoScheme::Cc as u32 => Scheme::Cc,
            x if x == ImimoScheme::Ir as u32 => Scheme::Ir,
            other => return Err(bad_enum("scheme", other)),
        };
        let config = lib(SystemConfig::new(scheme, num_rx, max_rounds, rate, energy_budget))?;
        out.write(Box::into_raw(Box::new(ImimoConfig(config))));
        Ok(())
    })
}

/// Switches the ARQ asymptotic coefficient: 0 = series `Γ(N+1)^l`, 1 = `N^l`.
///
/// # Safety
/// `config` must be null or a live handle from [`imimo_config_new`].
#[no_mangle]
pub unsafe extern "C" fn imimo_config_set_arq_coefficient(
    config: *mut ImimoConfig,
    antenna_power: bool,
) -> ImimoStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        c.0.arq_coefficient = if antenna_power { ArqCoefficient::AntennaPower } else { ArqCoefficient::Series };
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from [`imimo_config_new`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn imimo_config_free(config: *mut ImimoConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

fn bad_enum(what: &str, value: u32) -> (ImimoStatus, String) {
    (ImimoStatus::InvalidArgument, format!("unknown {what} value {value}"))
}

fn outage_method(m: u32) -> Result<OutageMethod, (ImimoStatus, String)> {
    match m {
        x if x == ImimoOutageMethod::Exact as u32 => Ok(OutageMethod::Exact),
        x if x == ImimoOutageMethod::Asymptotic as u32 => Ok(OutageMethod::Asymptotic),
        other => Err(bad_enum("outage method", other)),
    }
}

/// Outage after `rounds` rounds of the schedule `powers[0..len]` (`len = L`).
///
/// # Safety
/// `config` must be a live handle, `powers` valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn imimo_outage(
    config: *const ImimoConfig,
    powers: *const f64,
    len: usize,
    rounds: usize,
    method: u32,
    out: *mut f64,
) -> ImimoStatus {
    guard(|| {
        let c = config_ref(config)?;
        let s = schedule_from(powers, len)?;
        let p = lib(outage(c, &s, rounds, outage_method(method)?))?;
        write_out(out, p, "out")
    })
}

/// Per-round outage `p_out,1..p_out,L` into `out_outage` and the average energy into `out_energy`.
///
/// # Safety
/// `powers` valid for `len` reads, `out_outage` for `capacity` writes, `out_energy` for one.
#[no_mangle]
pub unsafe extern "C" fn imimo_outage_profile(
    config: *const ImimoConfig,
    powers: *const f64,
    len: usize,
    method: u32,
    out_outage: *mut f64,
    capacity: usize,
    out_energy: *mut f64,
) -> ImimoStatus {
    guard(|| {
        let c = config_ref(config)?;
        let s = schedule_from(powers, len)?;
        let profile = lib(outage_profile(c, &s, outage_method(method)?))?;
        write_slice(out_outage, capacity, &profile.per_round_outage)?;
        write_out(out_energy, profile.avg_energy, "out_energy")
    })
}

/// Solves for a power schedule. The report must be released with [`imimo_report_free`].
///
/// # Safety
/// `config` must be a live handle and `out` valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn imimo_optimize(
    config: *const ImimoConfig,
    method: u32,
    out: *mut *mut ImimoReport,
) -> ImimoStatus {
    guard(|| {
        let c = config_ref(config)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = lib(match method {
            x if x == ImimoAllocation::Exact as u32 => solve_exact(c),
            x if x == ImimoAllocation::Gpp as u32 => solve_gpp(c),
            x if x == ImimoAllocation::Epa as u32 => solve_epa(c, OutageMethod::Exact),
            other => return Err(bad_enum("allocation method", other)),
        })?;
        out.write(Box::into_raw(Box::new(ImimoReport(report))));
        Ok(())
    })
}

unsafe fn report_ref<'a>(report: *const ImimoReport) -> Result<&'a SolverReport, (ImimoStatus, String)> {
    report.as_ref().map(|r| &r.0).ok_or_else(|| null("report"))
}

/// Number of rounds in the report's schedule.
///
/// # Safety
/// `report` must be a live handle, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn imimo_report_len(report: *const ImimoReport, out: *mut usize) -> ImimoStatus {
    guard(|| write_out(out, report_ref(report)?.schedule.len(), "out"))
}

/// Copies the schedule into `out[0..capacity]`.
///
/// # Safety
/// `report` must be a live handle, `out` valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn imimo_report_powers(
    report: *const ImimoReport,
    out: *mut f64,
    capacity: usize,
) -> ImimoStatus {
    guard(|| write_slice(out, capacity, report_ref(report)?.schedule.powers()))
}

/// Scalar fields of a report; any output pointer may be null to skip it.
///
/// # Safety
/// `report` must be a live handle; non-null outputs valid for one write.
#[no_mangle]
pub unsafe extern "C" fn imimo_report_summary(
    report: *const ImimoReport,
    objective: *mut f64,
    avg_energy: *mut f64,
    kkt_residual: *mut f64,
    converged: *mut bool,
) -> ImimoStatus {
    guard(|| {
        let r = report_ref(report)?;
        for (ptr, value) in [(objective, r.objective), (avg_energy, r.avg_energy), (kkt_residual, r.kkt_residual)] {
            if !ptr.is_null() {
                ptr.write(value);
            }
        }
        if !converged.is_null() {
            converged.write(r.converged);
        }
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a handle from [`imimo_optimize`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn imimo_report_free(report: *mut ImimoReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Monte Carlo estimate of the outage profile; writes `L` estimates and `L`
/// standard errors and the average energy.
///
/// # Safety
/// `powers` valid for `len` reads; `out_outage` and `out_std_error` for
/// `capacity` writes; `out_energy` for one.
#[no_mangle]
pub unsafe extern "C" fn imimo_simulate(
    config: *const ImimoConfig,
    powers: *const f64,
    len: usize,
    trials: u64,
    seed: u64,
    workers: usize,
    out_outage: *mut f64,
    out_std_error: *mut f64,
    capacity: usize,
    out_energy: *mut f64,
) -> ImimoStatus {
    guard(|| {
        let c = config_ref(config)?;
        let s = schedule_from(powers, len)?;
        let r = lib(simulate(&SimSpec { config: c.clone(), schedule: s, trials, seed, workers }))?;
        write_slice(out_outage, capacity, &r.per_round_outage_estimate)?;
        write_slice(out_std_error, capacity, &r.per_round_std_error)?;
        write_out(out_energy, r.avg_energy_estimate, "out_energy")
    })
}
