//! C interface to masa-core.
//!
//! Every function returns a [`MasaStatus`]; on failure the message is kept in a
//! thread-local slot readable through [`masa_last_error`]. Objects cross the
//! boundary as opaque handles that must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use masa_core::env::Observation;
use masa_core::harness::TrainedModel;
use masa_core::market_data::{load_ohlcv, CovarianceEstimate, LoadConfig, OhlcvSeries};
use masa_core::metrics::{annual_return, long_term_volatility, max_drawdown, strategy_risk, wilcoxon_rank_sum};
use masa_core::metrics::{RiskForm, WeightVector};
use masa_core::observer::{dc_detect, DcKind};
use masa_core::rl::{AgentCheckpoint, Td3Agent};
use masa_core::solver::{propose_control, simplex_repair, RiskControlProblem, SolverConfig};
use masa_core::Error;

/// Result codes shared by every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    DataError = 5,
    ConfigError = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Risk formula selector for [`masa_strategy_risk`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasaRiskForm {
    NormOfProduct = 0,
    Quadratic = 1,
}

impl From<MasaRiskForm> for RiskForm {
    fn from(f: MasaRiskForm) -> Self {
        match f {
            MasaRiskForm::NormOfProduct => RiskForm::NormOfProduct,
            MasaRiskForm::Quadratic => RiskForm::Quadratic,
        }
    }
}

/// Loaded price series.
pub struct MasaSeries {
    inner: OhlcvSeries,
}

/// Trained allocator.
pub struct MasaAgent {
    inner: Td3Agent,
}

/// Outputs of [`masa_propose_control`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MasaControl {
    pub achieved_risk: f64,
    pub feasible: bool,
    pub evaluations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MasaStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::ShapeMismatch { .. } => MasaStatus::DimensionMismatch,
        Error::NonFiniteInput => MasaStatus::NonFinite,
        e if e.is_data_error() => MasaStatus::DataError,
        e if e.is_config_error() => MasaStatus::ConfigError,
        Error::IoFailure(_) => MasaStatus::DataError,
        _ => MasaStatus::InvalidArgument,
    }
}

struct Fail(MasaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(MasaStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MasaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MasaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MasaStatus::Internal
        }
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable values.
unsafe fn output<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be null or valid for a write of `T`.
unsafe fn write<T>(p: *mut T, value: T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

/// # Safety
/// `p` must be null or a nul-terminated string.
unsafe fn path_arg<'a>(p: *const c_char, name: &str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MasaStatus::InvalidArgument, format!("{name} is not UTF-8")))?;
    Ok(Path::new(s))
}

fn covariance(cov: &[f64], n: usize) -> Result<CovarianceEstimate, Fail> {
    Ok(CovarianceEstimate::from_matrix(n, cov.to_vec())?)
}

/// Message of the last failure on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn masa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn masa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Euclidean projection of `raw[0..n]` onto the probability simplex, written to `out`.
///
/// # Safety
/// `raw` and `out` must each point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn masa_simplex_project(raw: *const f64, n: usize, out: *mut f64) -> MasaStatus {
    guard(|| {
        let raw = input(raw, n, "raw")?;
        let out = output(out, n, "out")?;
        out.copy_from_slice(simplex_repair(raw)?.as_slice());
        Ok(())
    })
}

/// Short-term risk of `weights` against the row-major `n x n` covariance.
///
/// # Safety
/// `weights` must point to `n` doubles, `cov` to `n * n`, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn masa_strategy_risk(
    weights: *const f64,
    cov: *const f64,
    n: usize,
    form: MasaRiskForm,
    out: *mut f64,
) -> MasaStatus {
    guard(|| {
        let w = input(weights, n, "weights")?;
        let c = covariance(input(cov, n * n, "cov")?, n)?;
        write(out, strategy_risk(w, &c, form.into())?, "out")
    })
}

/// Risk-control adjustment of `a_rl` under boundary `sigma_s` with the default solver
/// settings, overridden by `budget` and `mu` when they are non-negative.
///
/// # Safety
/// `a_rl`, `a_final` and `a_ctrl` must point to `n` doubles, `cov` to `n * n`,
/// `market` to `market_len` (may be null when zero), `info` to one `MasaControl`.
#[no_mangle]
pub unsafe extern "C" fn masa_propose_control(
    a_rl: *const f64,
    cov: *const f64,
    n: usize,
    sigma_s: f64,
    market: *const f64,
    market_len: usize,
    budget: i64,
    mu: f64,
    seed: u64,
    a_final: *mut f64,
    a_ctrl: *mut f64,
    info: *mut MasaControl,
) -> MasaStatus {
    guard(|| {
        let a = WeightVector::new(input(a_rl, n, "a_rl")?.to_vec())?;
        let c = covariance(input(cov, n * n, "cov")?, n)?;
        let market = input(market, market_len, "market")?;
        let mut config = SolverConfig::default();
        if budget >= 0 {
            config.budget = budget as usize;
        }
        if mu >= 0.0 {
            config.mu = mu;
        }
        let problem = RiskControlProblem {
            a_rl: &a,
            cov: &c,
            risk_boundary: sigma_s,
            market_vector: market,
            risk_form: RiskForm::NormOfProduct,
        };
        let r = propose_control(&problem, &config, seed)?;
        output(a_final, n, "a_final")?.copy_from_slice(r.a_final.as_slice());
        output(a_ctrl, n, "a_ctrl")?.copy_from_slice(&r.a_ctrl);
        write(
            info,
            MasaControl {
                achieved_risk: r.achieved_risk,
                feasible: r.feasible,
                evaluations: r.evaluations,
            },
            "info",
        )
    })
}

/// Two-sided Wilcoxon rank-sum test.
///
/// # Safety
/// `a` must point to `na` doubles, `b` to `nb`; `p_value` and `statistic` to one each.
#[no_mangle]
pub unsafe extern "C" fn masa_wilcoxon(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    p_value: *mut f64,
    statistic: *mut f64,
) -> MasaStatus {
    guard(|| {
        let t = wilcoxon_rank_sum(input(a, na, "a")?, input(b, nb, "b")?, 0.05)?;
        write(p_value, t.p_value, "p_value")?;
        write(statistic, t.statistic, "statistic")
    })
}

/// Maximum drawdown, annualized return and annualized volatility of an equity curve.
///
/// # Safety
/// `curve` must point to `len` doubles; each output to one double.
#[no_mangle]
pub unsafe extern "C" fn masa_curve_metrics(
    curve: *const f64,
    len: usize,
    days_per_year: u32,
    mdd: *mut f64,
    ar: *mut f64,
    vol: *mut f64,
) -> MasaStatus {
    guard(|| {
        let c = input(curve, len, "curve")?;
        let returns: Vec<f64> = c.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        let a = annual_return(c, days_per_year)?;
        let v = long_term_volatility(&returns, days_per_year)?;
        write(mdd, max_drawdown(c), "mdd")?;
        write(ar, a, "ar")?;
        write(vol, v, "vol")
    })
}

/// Directional-change events of `prices` at threshold `theta`.
///
/// Writes up to `capacity` events: kind (+1 upturn, -1 downturn) and confirmation
/// index. `count` receives the total number found; `BufferTooSmall` if it exceeds `capacity`.
///
/// # Safety
/// `prices` must point to `len` doubles, `kinds` and `confirmations` to `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn masa_dc_detect(
    prices: *const f64,
    len: usize,
    theta: f64,
    kinds: *mut i8,
    confirmations: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> MasaStatus {
    guard(|| {
        let p = input(prices, len, "prices")?;
        if !(theta > 0.0 && theta < 1.0) || p.iter().any(|v| !(*v > 0.0)) {
            return Err(Fail(MasaStatus::InvalidArgument, "need 0 < theta < 1 and positive prices".into()));
        }
        let events = dc_detect(p, theta);
        write(count, events.len(), "count")?;
        let kinds = output(kinds, capacity, "kinds")?;
        let conf = output(confirmations, capacity, "confirmations")?;
        for (i, e) in events.iter().take(capacity).enumerate() {
            kinds[i] = match e.kind {
                DcKind::Upturn => 1,
                DcKind::Downturn => -1,
            };
            conf[i] = e.confirmation;
        }
        if events.len() > capacity {
            return Err(Fail(MasaStatus::BufferTooSmall, format!("{} events found", events.len())));
        }
        Ok(())
    })
}

/// Loads a long-format OHLCV CSV (`date,asset,open,high,low,close`).
///
/// # Safety
/// `path` must be a nul-terminated string and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn masa_series_load(path: *const c_char, out: *mut *mut MasaSeries) -> MasaStatus {
    guard(|| {
        let p = path_arg(path, "path")?;
        let series = load_ohlcv(p, &LoadConfig::default())?;
        write(out, Box::into_raw(Box::new(MasaSeries { inner: series })), "out")
    })
}

/// # Safety
/// `series` must be a live handle from [`masa_series_load`].
#[no_mangle]
pub unsafe extern "C" fn masa_series_shape(
    series: *const MasaSeries,
    n_assets: *mut usize,
    n_days: *mut usize,
) -> MasaStatus {
    guard(|| {
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        write(n_assets, s.inner.n_assets(), "n_assets")?;
        write(n_days, s.inner.n_days(), "n_days")
    })
}

/// Copies the closes of `day` into `out`.
///
/// # Safety
/// `series` must be a live handle; `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn masa_series_closes(
    series: *const MasaSeries,
    day: usize,
    out: *mut f64,
    n: usize,
) -> MasaStatus {
    guard(|| {
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        if day >= s.inner.n_days() {
            return Err(Fail(MasaStatus::InvalidArgument, format!("day {day} out of range")));
        }
        if n != s.inner.n_assets() {
            return Err(Fail(
                MasaStatus::DimensionMismatch,
                format!("{n} slots for {} assets", s.inner.n_assets()),
            ));
        }
        output(out, n, "out")?.copy_from_slice(s.inner.close_row(day));
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn masa_series_free(series: *mut MasaSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Loads an allocator from a trained-model or bare agent checkpoint JSON file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn masa_agent_load(path: *const c_char, out: *mut *mut MasaAgent) -> MasaStatus {
    guard(|| {
        let p = path_arg(path, "path")?;
        let text = std::fs::read_to_string(p).map_err(Error::from)?;
        let checkpoint = match serde_json::from_str::<TrainedModel>(&text) {
            Ok(model) => model.agent,
            Err(_) => serde_json::from_str::<AgentCheckpoint>(&text).map_err(Error::from)?,
        };
        let agent = Td3Agent::from_checkpoint(checkpoint)?;
        write(out, Box::into_raw(Box::new(MasaAgent { inner: agent })), "out")
    })
}

/// # Safety
/// `agent` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn masa_agent_shape(
    agent: *const MasaAgent,
    obs_dim: *mut usize,
    n_assets: *mut usize,
) -> MasaStatus {
    guard(|| {
        let a = agent.as_ref().ok_or_else(|| null("agent"))?;
        write(obs_dim, a.inner.obs_dim(), "obs_dim")?;
        write(n_assets, a.inner.n_assets(), "n_assets")
    })
}

/// Deterministic portfolio weights for a flat observation feature vector.
///
/// # Safety
/// `agent` must be a live handle, `features` must point to `obs_dim` doubles and
/// `weights` to `n_assets`.
#[no_mangle]
pub unsafe extern "C" fn masa_agent_act(
    agent: *const MasaAgent,
    features: *const f64,
    obs_dim: usize,
    weights: *mut f64,
    n_assets: usize,
) -> MasaStatus {
    guard(|| {
        let a = agent.as_ref().ok_or_else(|| null("agent"))?;
        if n_assets != a.inner.n_assets() {
            return Err(Error::DimensionMismatch {
                expected: a.inner.n_assets(),
                actual: n_assets,
            }
            .into());
        }
        let w = a.inner.act_features(input(features, obs_dim, "features")?)?;
        output(weights, n_assets, "weights")?.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// Length of the feature vector for a window of `window` days over `n_assets`.
#[no_mangle]
pub extern "C" fn masa_feature_len(window: usize, n_assets: usize) -> usize {
    Observation::feature_len(window, n_assets)
}

/// # Safety
/// `agent` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn masa_agent_free(agent: *mut MasaAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}
