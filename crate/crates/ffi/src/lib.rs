//! C ABI over `markov-binomial`.
//!
//! Conventions:
//! - every fallible function returns an [`MbStatus`]; results go through out
//!   pointers, which are written only on success;
//! - objects are opaque handles created by `mb_*_new`/producers and released
//!   with the matching `mb_*_free`;
//! - after a failure, [`mb_last_error_message`] returns a description of the
//!   last error on the calling thread.
//!
//! The header `include/markov_binomial.h` is generated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use markov_binomial::bounds::{bound_binomial, bound_nb};
use markov_binomial::chain::{exact_pmf, moments_closed_form, ChainParams, Start};
use markov_binomial::fit::{
    classify_regime, exact_tv_to_fit, fit_binomial, fit_negative_binomial, Regime,
};
use markov_binomial::pmf::{tv_distance, Pmf};
use markov_binomial::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Length is zero or above the exact-computation cap, or an index is out of range.
    OutOfRange = 3,
    /// The operation needs the other dispersion regime.
    WrongRegime = 4,
    /// The binomial match has no usable integer index.
    DegenerateFit = 5,
    /// A caller buffer is too small; the required length is reported.
    BufferTooSmall = 6,
    /// A numerical invariant failed; indicates a bug.
    Numerical = 7,
    /// A panic was caught at the boundary.
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbRegime {
    Overdispersed = 0,
    Equidispersed = 1,
    Underdispersed = 2,
}

impl From<Regime> for MbRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Overdispersed => MbRegime::Overdispersed,
            Regime::Equidispersed => MbRegime::Equidispersed,
            Regime::Underdispersed => MbRegime::Underdispersed,
        }
    }
}

/// Law of the anchoring state `Y_0`, which is not part of the sum.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbStart {
    Stationary = 0,
    State0 = 1,
    State1 = 2,
    /// Uses the `p1` argument as `P(Y_0 = 1)`.
    Custom = 3,
}

/// Opaque two-state chain.
pub struct MbChain {
    params: ChainParams,
}

/// Opaque probability mass function on `0..len`.
pub struct MbPmf {
    pmf: Pmf,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MbMoments {
    pub mean: f64,
    pub variance: f64,
    pub a0: f64,
    pub a1: f64,
}

/// Negative-binomial match; `poisson_limit != 0` means the Poisson law with
/// mean `lambda` (then `r` is infinite and `q` is 1).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MbNbFit {
    pub r: f64,
    pub q: f64,
    pub lambda: f64,
    pub poisson_limit: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MbBinFit {
    pub m_tilde: f64,
    pub m: u64,
    pub theta: f64,
    pub epsilon: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbBound {
    pub regime: MbRegime,
    pub bound: f64,
    /// `min(1, bound)`.
    pub clipped: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbDistance {
    pub regime: MbRegime,
    pub tv: f64,
    /// Reference mass beyond the truncation point.
    pub tail: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> MbStatus {
    match err {
        Error::InvalidParameter { .. } => MbStatus::InvalidArgument,
        Error::ZeroLength | Error::TooLong { .. } | Error::IndexOutOfRange { .. } => {
            MbStatus::OutOfRange
        }
        Error::WrongRegime { .. } => MbStatus::WrongRegime,
        Error::DegenerateFit { .. } => MbStatus::DegenerateFit,
        Error::NotNormalized(_) | Error::Consistency(_) => MbStatus::Numerical,
        _ => MbStatus::Internal,
    }
}

/// Runs `body`, turning errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (MbStatus, String)>) -> MbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MbStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("panic inside markov-binomial".into());
            MbStatus::Internal
        }
    }
}

fn lift<T>(r: markov_binomial::Result<T>) -> Result<T, (MbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MbStatus, String) {
    (MbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn chain_ref<'a>(chain: *const MbChain) -> Result<&'a ChainParams, (MbStatus, String)> {
    chain
        .as_ref()
        .map(|c| &c.params)
        .ok_or_else(|| null("chain"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (MbStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Creates a chain with `P(0 -> 1) = alpha`, `P(1 -> 1) = beta`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn mb_chain_new(alpha: f64, beta: f64, out: *mut *mut MbChain) -> MbStatus {
    guard(|| {
        let params = lift(ChainParams::new(alpha, beta))?;
        write_out(out, Box::into_raw(Box::new(MbChain { params })))
    })
}

/// Releases a chain; null is ignored.
///
/// # Safety
/// `chain` must come from [`mb_chain_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mb_chain_free(chain: *mut MbChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Stationary probability of state 1.
///
/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_chain_stationary(chain: *const MbChain, out: *mut f64) -> MbStatus {
    guard(|| {
        let params = chain_ref(chain)?;
        write_out(out, params.stationary().p)
    })
}

/// Closed-form mean and variance of the stationary sum of `n` states.
///
/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_chain_moments(
    chain: *const MbChain,
    n: usize,
    out: *mut MbMoments,
) -> MbStatus {
    guard(|| {
        let params = chain_ref(chain)?;
        let m = lift(moments_closed_form(params, n))?;
        write_out(
            out,
            MbMoments {
                mean: m.mean,
                variance: m.variance,
                a0: m.a0,
                a1: m.a1,
            },
        )
    })
}

/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_chain_regime(
    chain: *const MbChain,
    n: usize,
    out: *mut MbRegime,
) -> MbStatus {
    guard(|| {
        let params = chain_ref(chain)?;
        write_out(out, lift(classify_regime(params, n))?.into())
    })
}

/// Exact law of the sum of `n` states after an anchor drawn from `start`,
/// one of the [`MbStart`] values (`p1` is read only for `MB_START_CUSTOM`).
///
/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_chain_exact_pmf(
    chain: *const MbChain,
    n: usize,
    start: i32,
    p1: f64,
    out: *mut *mut MbPmf,
) -> MbStatus {
    guard(|| {
        let params = chain_ref(chain)?;
        let start = match start {
            s if s == MbStart::Stationary as i32 => Start::Stationary,
            s if s == MbStart::State0 as i32 => Start::State0,
            s if s == MbStart::State1 as i32 => Start::State1,
            s if s == MbStart::Custom as i32 => Start::Custom { p1 },
            s => return Err((MbStatus::InvalidArgument, format!("unknown start code {s}"))),
        };
        let pmf = lift(exact_pmf(params, n, start))?;
        write_out(out, Box::into_raw(Box::new(MbPmf { pmf })))
    })
}

/// Negative-binomial match; fails with `WrongRegime` when underdispersed.
///
/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_fit_negative_binomial(
    chain: *const MbChain,
    n: usize,
    out: *mut MbNbFit,
) -> MbStatus {
    guard(|| {
        let params = chain_ref(chain)?;
        let f = lift(fit_negative_binomial(params, n))?;
        write_out(
            out,
            MbNbFit {
                r: f.r,
                q: f.q,
                lambda: f.lambda,
                poisson_limit: i32::from(f.poisson_limit),
            },
        )
    })
}

/// Binomial match; fails with `WrongRegime` unless underdispersed and with
/// `DegenerateFit` when no usable index exists.
///
/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_fit_binomial(
    chain: *const MbChain,
    n: usize,
    out: *mut MbBinFit,
) -> MbStatus {
    guard(|| {
        let params = chain_ref(chain)?;
        let f = lift(fit_binomial(params, n))?;
        write_out(
            out,
            MbBinFit {
                m_tilde: f.m_tilde,
                m: f.m,
                theta: f.theta,
                epsilon: f.epsilon,
            },
        )
    })
}

/// Total-variation bound for the approximation matching the regime.
///
/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_bound(chain: *const MbChain, n: usize, out: *mut MbBound) -> MbStatus {
    guard(|| {
        let params = chain_ref(chain)?;
        let regime = lift(classify_regime(params, n))?;
        let report = if regime == Regime::Underdispersed {
            let fit = lift(fit_binomial(params, n))?;
            lift(bound_binomial(params, n, &fit))?
        } else {
            lift(bound_nb(params, n))?
        };
        write_out(
            out,
            MbBound {
                regime: regime.into(),
                bound: report.bound_value,
                clipped: report.clipped_value,
            },
        )
    })
}

/// Exact distance from the stationary sum to its fitted law (`O(n^2)`).
///
/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_exact_tv_to_fit(
    chain: *const MbChain,
    n: usize,
    out: *mut MbDistance,
) -> MbStatus {
    guard(|| {
        let params = chain_ref(chain)?;
        let d = lift(exact_tv_to_fit(params, n))?;
        write_out(
            out,
            MbDistance {
                regime: d.regime.into(),
                tv: d.tv,
                tail: d.tail,
            },
        )
    })
}

/// Releases a mass function; null is ignored.
///
/// # Safety
/// `pmf` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mb_pmf_free(pmf: *mut MbPmf) {
    if !pmf.is_null() {
        drop(Box::from_raw(pmf));
    }
}

/// Number of stored support points; 0 for a null handle.
///
/// # Safety
/// `pmf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mb_pmf_len(pmf: *const MbPmf) -> usize {
    pmf.as_ref().map_or(0, |p| p.pmf.len())
}

/// Copies the masses into `buffer`. `written` receives the number of
/// entries copied, or the required length on `BufferTooSmall`.
///
/// # Safety
/// `pmf` must be a live handle, `buffer` valid for `capacity` doubles and
/// `written` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_pmf_copy(
    pmf: *const MbPmf,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> MbStatus {
    guard(|| {
        let pmf = &pmf.as_ref().ok_or_else(|| null("pmf"))?.pmf;
        let len = pmf.len();
        if capacity < len {
            write_out(written, len)?;
            return Err((
                MbStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, {len} needed"),
            ));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(pmf.mass().as_ptr(), buffer, len);
        write_out(written, len)
    })
}

/// Total-variation distance between two mass functions.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mb_pmf_tv_distance(
    a: *const MbPmf,
    b: *const MbPmf,
    out: *mut f64,
) -> MbStatus {
    guard(|| {
        let a = &a.as_ref().ok_or_else(|| null("first pmf"))?.pmf;
        let b = &b.as_ref().ok_or_else(|| null("second pmf"))?.pmf;
        write_out(out, tv_distance(a, b))
    })
}

/// Copies the last error message of this thread into `buffer` (always
/// NUL-terminated when `capacity > 0`) and returns the full message length
/// without the terminator; 0 when there is no error.
///
/// # Safety
/// `buffer` must be valid for `capacity` bytes, or null with `capacity == 0`.
#[no_mangle]
pub unsafe extern "C" fn mb_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            if capacity > 0 && !buffer.is_null() {
                *buffer = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if capacity > 0 && !buffer.is_null() {
            let n = bytes.len().min(capacity - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static, NUL-terminated name of an [`MbStatus`] value.
#[no_mangle]
pub extern "C" fn mb_status_name(status: i32) -> *const c_char {
    let s: &'static [u8] = match status {
        0 => b"ok\0",
        1 => b"null pointer\0",
        2 => b"invalid argument\0",
        3 => b"out of range\0",
        4 => b"wrong regime\0",
        5 => b"degenerate fit\0",
        6 => b"buffer too small\0",
        7 => b"numerical failure\0",
        8 => b"internal error\0",
        _ => b"unknown status\0",
    };
    s.as_ptr().cast()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
