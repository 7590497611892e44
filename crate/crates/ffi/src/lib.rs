//! C ABI for `walras-core`.
//!
//! Economies and reports cross the boundary as opaque handles, released by
//! the matching `*_free`. Every fallible function returns a
//! [`WalrasStatus`]; on failure, [`walras_last_error`] gives a message for
//! the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use walras_core::equilibrium::{find_equilibria, EquilibriumReport, Regularity, SolverConfig};
use walras_core::geometry::PricePoint;
use walras_core::io::parse_economy;
use walras_core::revealed_preference::{sarp_check, Observation, ObservationDataset, SarpOutcome};
use walras_core::smd::{decompose_vector, CanonicalFamily, DEFAULT_FLOOR};
use walras_core::{Economy, Error, ExcessDemand};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalrasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    NumericalError = 5,
    InternalError = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// An exchange economy.
pub struct WalrasEconomy(Economy);

/// The result of an equilibrium search.
pub struct WalrasReport(EquilibriumReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(WalrasStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse(_) => WalrasStatus::ParseError,
            e if e.is_internal() => WalrasStatus::InternalError,
            Error::NonPositiveScale { .. }
            | Error::GridTooCoarse { .. }
            | Error::IllConditioned { .. }
            | Error::NonFinite => WalrasStatus::NumericalError,
            _ => WalrasStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(WalrasStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WalrasStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WalrasStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside walras".into());
            WalrasStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn walras_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses an economy from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn walras_economy_from_toml(
    text: *const c_char,
    out: *mut *mut WalrasEconomy,
) -> WalrasStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Failure(WalrasStatus::InvalidUtf8, e.to_string()))?;
        let e = parse_economy(s)?;
        write(out, Box::into_raw(Box::new(WalrasEconomy(e))), "out")
    })
}

/// # Safety
/// `e` must come from [`walras_economy_from_toml`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn walras_economy_free(e: *mut WalrasEconomy) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `e` must be a live economy handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn walras_economy_goods(
    e: *const WalrasEconomy,
    out: *mut usize,
) -> WalrasStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("economy"))?;
        write(out, e.0.goods(), "out")
    })
}

/// Aggregate excess demand at strictly positive prices (normalised to the
/// simplex internally).
///
/// # Safety
/// `prices` and `out` must point to `goods` doubles.
#[no_mangle]
pub unsafe extern "C" fn walras_economy_excess_demand(
    e: *const WalrasEconomy,
    prices: *const f64,
    goods: usize,
    out: *mut f64,
) -> WalrasStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("economy"))?;
        let p = PricePoint::from_positive(slice(prices, goods, "prices")?)?;
        let z = e.0.evaluate(&p)?;
        slice_mut(out, goods, "out")?.copy_from_slice(z.components());
        Ok(())
    })
}

/// Finds the equilibria of an economy. `grid_density` 0 selects the default
/// number of Newton starts per chart dimension.
///
/// # Safety
/// `e` must be a live economy handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn walras_find_equilibria(
    e: *const WalrasEconomy,
    grid_density: usize,
    out: *mut *mut WalrasReport,
) -> WalrasStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("economy"))?;
        let mut cfg = SolverConfig::default();
        if grid_density > 0 {
            cfg.grid_density = grid_density;
        }
        let r = find_equilibria(&e.0, &cfg)?;
        write(out, Box::into_raw(Box::new(WalrasReport(r))), "out")
    })
}

/// # Safety
/// `r` must come from [`walras_find_equilibria`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn walras_report_free(r: *mut WalrasReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn walras_report_len(r: *const WalrasReport, out: *mut usize) -> WalrasStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        write(out, r.0.equilibria.len(), "out")
    })
}

/// Simplex prices, local index and regularity of equilibrium `i`.
///
/// # Safety
/// `price_out` must point to `goods` writable doubles; `index_out` and
/// `regular_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn walras_report_equilibrium(
    r: *const WalrasReport,
    i: usize,
    price_out: *mut f64,
    goods: usize,
    index_out: *mut i32,
    regular_out: *mut bool,
) -> WalrasStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        let eq = r.0.equilibria.get(i).ok_or_else(|| {
            Failure(
                WalrasStatus::InvalidArgument,
                format!("equilibrium {i} out of range ({} found)", r.0.equilibria.len()),
            )
        })?;
        if goods != r.0.goods {
            return Err(Failure(
                WalrasStatus::BufferTooSmall,
                format!("price buffer holds {goods} goods, need {}", r.0.goods),
            ));
        }
        slice_mut(price_out, goods, "price_out")?.copy_from_slice(&eq.price.simplex_coords());
        write(index_out, eq.index as i32, "index_out")?;
        write(regular_out, eq.regularity == Regularity::Regular, "regular_out")
    })
}

/// Index sum and whether the equilibrium set was found to be finite.
///
/// # Safety
/// `r` must be a live report handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn walras_report_summary(
    r: *const WalrasReport,
    index_sum_out: *mut i32,
    finite_out: *mut bool,
) -> WalrasStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        write(index_sum_out, r.0.index_sum, "index_sum_out")?;
        write(finite_out, r.0.finite_flag, "finite_out")
    })
}

/// Weights μ ≥ 1 with Σ μᵢ zᵢ(p) = target for the symmetric canonical
/// family at strictly positive prices `p`. The target must satisfy
/// p·target = 0.
///
/// # Safety
/// `prices`, `target` and `mu_out` must point to `goods` doubles.
#[no_mangle]
pub unsafe extern "C" fn walras_decompose(
    prices: *const f64,
    target: *const f64,
    goods: usize,
    mu_out: *mut f64,
) -> WalrasStatus {
    guard(|| {
        let p = PricePoint::from_positive(slice(prices, goods, "prices")?)?;
        let t = slice(target, goods, "target")?;
        let w = decompose_vector(&CanonicalFamily::symmetric(goods)?, &p, t, DEFAULT_FLOOR)?;
        slice_mut(mu_out, goods, "mu_out")?.copy_from_slice(&w.mu);
        Ok(())
    })
}

/// SARP check on `n` observations of `goods` goods, stored row-major.
/// On a violation, writes the cycle as 0-based observation indices.
///
/// # Safety
/// `prices` and `bundles` must point to `n * goods` doubles, `cycle_out` to
/// `cycle_cap` writable entries; the scalar outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn walras_sarp_check(
    prices: *const f64,
    bundles: *const f64,
    n: usize,
    goods: usize,
    violated_out: *mut bool,
    cycle_out: *mut usize,
    cycle_cap: usize,
    cycle_len_out: *mut usize,
) -> WalrasStatus {
    guard(|| {
        let len = n.checked_mul(goods).ok_or_else(|| {
            Failure(WalrasStatus::InvalidArgument, "n * goods overflows".into())
        })?;
        let p = slice(prices, len, "prices")?;
        let x = slice(bundles, len, "bundles")?;
        let observations = (0..n)
            .map(|k| {
                let row = k * goods..(k + 1) * goods;
                Observation::new(PricePoint::from_positive(&p[row.clone()])?, x[row].to_vec())
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let d = ObservationDataset::new(observations)?;
        match sarp_check(&d) {
            SarpOutcome::Pass => {
                write(violated_out, false, "violated_out")?;
                write(cycle_len_out, 0, "cycle_len_out")
            }
            SarpOutcome::Violation { cycle } => {
                write(violated_out, true, "violated_out")?;
                write(cycle_len_out, cycle.len(), "cycle_len_out")?;
                if cycle.len() > cycle_cap {
                    return Err(Failure(
                        WalrasStatus::BufferTooSmall,
                        format!("cycle has {} entries, buffer holds {cycle_cap}", cycle.len()),
                    ));
                }
                if cycle_out.is_null() {
                    return Err(null("cycle_out"));
                }
                std::slice::from_raw_parts_mut(cycle_out, cycle.len()).copy_from_slice(&cycle);
                Ok(())
            }
        }
    })
}
