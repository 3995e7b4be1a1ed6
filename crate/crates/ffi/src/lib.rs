//! C ABI for `riesz-rpo`.
//!
//! Every fallible entry point returns an [`RrStatus`] and writes its result
//! through an out-pointer. On failure, [`rr_last_error_message`] describes the
//! most recent error on the calling thread. Simulation configs and reports are
//! opaque handles released with their `_free` functions. Panics never cross
//! the boundary; they surface as `RR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use riesz_rpo::depgraph::{expected_inverse_neighbourhood, Convention, PairSet};
use riesz_rpo::dgp::DgpKind;
use riesz_rpo::estimator::{aggregate_estimate, variance_local, Residuals, WeightScheme};
use riesz_rpo::montecarlo::{
    run_oracle_suite, run_simulation_with_threads, Centring, Mode, OracleConfig, SimConfig,
    SimReport,
};
use riesz_rpo::normal::two_sided_critical;
use riesz_rpo::representer::HtRepresenter;
use riesz_rpo::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Singular = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrDgp {
    Baseline = 0,
    Network = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrMode {
    Size = 0,
    Power = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrConvention {
    Closed = 0,
    Open = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrCentring {
    Rpo = 0,
    Realised = 1,
}

/// Opaque simulation configuration.
pub struct RrSimConfig {
    inner: SimConfig,
}

/// Opaque simulation report.
pub struct RrSimReport {
    inner: SimReport,
}

/// Scalar fields of a report.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RrReportSummary {
    pub coverage: f64,
    pub mean_tau_hat: f64,
    pub var_tau_hat: f64,
    pub mean_sigma2_hat: f64,
    pub mean_tau_target: f64,
    pub var_tau_error: f64,
    pub degenerate_count: usize,
    pub reps: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(RrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::SingularGram { .. } => RrStatus::Singular,
            _ => RrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RrStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RrStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RrStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(v);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn rr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New config with defaults: baseline, n = 100, d = 0, 2000 reps, levels
/// {0.01, 0.05, 0.10}, size mode, p_edge 0.1, spillover 0.5, p_treat 0.5,
/// closed neighbourhoods, RPO centring, seed 0.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_new(out: *mut *mut RrSimConfig) -> RrStatus {
    guard(|| {
        let cfg = Box::new(RrSimConfig {
            inner: SimConfig::default(),
        });
        write_out(out, Box::into_raw(cfg))
    })
}

/// # Safety
/// `cfg` must come from [`rr_sim_config_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_free(cfg: *mut RrSimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn with_config(
    cfg: *mut RrSimConfig,
    f: impl FnOnce(&mut SimConfig) -> Result<(), Failure>,
) -> RrStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("config"))?;
        f(&mut cfg.inner)
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_set_dgp(cfg: *mut RrSimConfig, dgp: RrDgp) -> RrStatus {
    with_config(cfg, |c| {
        c.dgp = match dgp {
            RrDgp::Baseline => DgpKind::Baseline,
            RrDgp::Network => DgpKind::Network,
        };
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_set_mode(cfg: *mut RrSimConfig, mode: RrMode) -> RrStatus {
    with_config(cfg, |c| {
        c.mode = match mode {
            RrMode::Size => Mode::Size,
            RrMode::Power => Mode::Power,
        };
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_set_convention(
    cfg: *mut RrSimConfig,
    convention: RrConvention,
) -> RrStatus {
    with_config(cfg, |c| {
        c.convention = match convention {
            RrConvention::Closed => Convention::Closed,
            RrConvention::Open => Convention::Open,
        };
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_set_centring(
    cfg: *mut RrSimConfig,
    centring: RrCentring,
) -> RrStatus {
    with_config(cfg, |c| {
        c.centring = match centring {
            RrCentring::Rpo => Centring::Rpo,
            RrCentring::Realised => Centring::Realised,
        };
        Ok(())
    })
}

/// Sets `n`, `d` and the replication count together, validating the result.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_set_size(
    cfg: *mut RrSimConfig,
    n: usize,
    d: f64,
    reps: usize,
) -> RrStatus {
    with_config(cfg, |c| {
        let next = SimConfig {
            n,
            d,
            reps,
            ..c.clone()
        };
        next.validate()?;
        *c = next;
        Ok(())
    })
}

/// Sets the edge probability, spillover strength and treatment probability.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_set_parameters(
    cfg: *mut RrSimConfig,
    p_edge: f64,
    gamma_spill: f64,
    p_treat: f64,
) -> RrStatus {
    with_config(cfg, |c| {
        let next = SimConfig {
            p_edge,
            gamma_spill,
            p_treat,
            ..c.clone()
        };
        next.validate()?;
        *c = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle and `levels` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_set_levels(
    cfg: *mut RrSimConfig,
    levels: *const f64,
    len: usize,
) -> RrStatus {
    with_config(cfg, |c| {
        let next = SimConfig {
            levels: slice(levels, len, "levels")?.to_vec(),
            ..c.clone()
        };
        next.validate()?;
        *c = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_config_set_seed(cfg: *mut RrSimConfig, seed: u64) -> RrStatus {
    with_config(cfg, |c| {
        c.master_seed = seed;
        Ok(())
    })
}

/// Runs every replication on `threads` workers (0 = one per core). The report
/// does not depend on `threads`.
///
/// # Safety
/// `cfg` must be a live config handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_run_simulation(
    cfg: *const RrSimConfig,
    threads: usize,
    out: *mut *mut RrSimReport,
) -> RrStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = run_simulation_with_threads(&cfg.inner, threads)?;
        write_out(out, Box::into_raw(Box::new(RrSimReport { inner: report })))
    })
}

/// # Safety
/// `report` must come from [`rr_run_simulation`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_report_free(report: *mut RrSimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live report handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_report_summary(
    report: *const RrSimReport,
    out: *mut RrReportSummary,
) -> RrStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.inner;
        write_out(
            out,
            RrReportSummary {
                coverage: r.coverage,
                mean_tau_hat: r.mean_tau_hat,
                var_tau_hat: r.var_tau_hat,
                mean_sigma2_hat: r.mean_sigma2_hat,
                mean_tau_target: r.mean_tau_target,
                var_tau_error: r.var_tau_error,
                degenerate_count: r.degenerate_count,
                reps: r.config.reps,
            },
        )
    })
}

/// Rejection rate at a configured level.
///
/// # Safety
/// `report` must be a live report handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_sim_report_rejection(
    report: *const RrSimReport,
    level: f64,
    out: *mut f64,
) -> RrStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.inner;
        let rate = r.rejection_at(level).ok_or_else(|| {
            Failure(
                RrStatus::InvalidArgument,
                format!("level {level} was not configured"),
            )
        })?;
        write_out(out, rate)
    })
}

/// Horvitz-Thompson weight `z/p - (1-z)/(1-p)` for `z` in {0, 1}.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_ht_representer_value(p_treat: f64, z: u8, out: *mut f64) -> RrStatus {
    guard(|| {
        if z > 1 {
            return Err(Failure(
                RrStatus::InvalidArgument,
                format!("assignment {z} is not binary"),
            ));
        }
        write_out(out, HtRepresenter::new(p_treat)?.value(z))
    })
}

/// `E[1/|N_i|]` in a closed Erdős–Rényi block of size `m` with edge probability `p`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_expected_inverse_neighbourhood(
    m: usize,
    p: f64,
    out: *mut f64,
) -> RrStatus {
    guard(|| write_out(out, expected_inverse_neighbourhood(m, p)?))
}

/// Two-sided standard normal critical value `q_{1 - level/2}`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_two_sided_critical(level: f64, out: *mut f64) -> RrStatus {
    guard(|| {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidProbability(level).into());
        }
        write_out(out, two_sided_critical(level))
    })
}

/// `sum_i nu_i y_i psi_i`.
///
/// # Safety
/// `y`, `psi` and `nu` must each be valid for `n` reads; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_aggregate_estimate(
    y: *const f64,
    psi: *const f64,
    nu: *const f64,
    n: usize,
    out: *mut f64,
) -> RrStatus {
    guard(|| {
        let w = WeightScheme::new(slice(nu, n, "nu")?.to_vec())?;
        write_out(
            out,
            aggregate_estimate(slice(y, n, "y")?, slice(psi, n, "psi")?, &w)?,
        )
    })
}

/// Local-dependence variance over the pairs of units sharing a block id.
///
/// # Safety
/// `zeta`, `nu` and `block_ids` must each be valid for `n` reads; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_variance_blocks(
    zeta: *const f64,
    nu: *const f64,
    block_ids: *const usize,
    n: usize,
    out: *mut f64,
) -> RrStatus {
    guard(|| {
        let ids = slice(block_ids, n, "block_ids")?;
        let w = WeightScheme::new(slice(nu, n, "nu")?.to_vec())?;
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if ids[i] == ids[j] {
                    pairs.push((i, j));
                }
            }
        }
        let r = Residuals(slice(zeta, n, "zeta")?.to_vec());
        write_out(out, variance_local(&r, &w, &PairSet::new(pairs))?)
    })
}

/// Runs the oracle suite; `*passed` is 1 when every check passes, else 0.
///
/// # Safety
/// `passed` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rr_run_oracle_suite(
    max_n: usize,
    worlds: usize,
    seed: u64,
    graphs: usize,
    passed: *mut i32,
) -> RrStatus {
    guard(|| {
        let cfg = OracleConfig {
            degree_graphs: graphs,
            ..OracleConfig::new(max_n, worlds, seed)
        };
        let report = run_oracle_suite(&cfg)?;
        if !report.passed() {
            let failed: Vec<String> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.to_string())
                .collect();
            set_error(failed.join("; "));
        }
        write_out(passed, i32::from(report.passed()))
    })
}
