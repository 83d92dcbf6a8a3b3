//! C ABI over `nadisc`.
//!
//! Every function returns a [`NadiscStatus`] and writes results through out
//! pointers. On failure, [`nadisc_last_error`] holds a message for the calling
//! thread. Handles are opaque and must be released with their `_free`
//! function; strings returned through out pointers are released with
//! [`nadisc_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nadisc::measures;
use nadisc::rounding::{self, Coloring};
use nadisc::splitter::{self, NecklaceLayout, SearchConfig, SplitReport};
use nadisc::subsidy;
use nadisc::valuations::{self, Family, FamilyParams, InstanceDocument};
use nadisc::{Error, Subset, Valuation};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NadiscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Capacity = 3,
    Invariant = 4,
    Parse = 5,
    Io = 6,
    Panic = 7,
}

/// A list of valuation oracles over a common item set.
pub struct NadiscInstance {
    family: String,
    seed: Option<u64>,
    params: FamilyParams,
    vals: Vec<Valuation>,
}

/// Result of a fractional split.
pub struct NadiscSplit {
    report: SplitReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> NadiscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NadiscStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            NadiscStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            let status = match &e {
                Error::Input(_) => NadiscStatus::InvalidInput,
                Error::Capacity(_) => NadiscStatus::Capacity,
                Error::Invariant(_) => NadiscStatus::Invariant,
                Error::Parse(_) => NadiscStatus::Parse,
                Error::Io(_) => NadiscStatus::Io,
            };
            set_error(e.to_string());
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NadiscStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Error::Input(format!("{what} is not valid UTF-8")).into())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Error::Invariant("string contains an interior NUL".into()).into())
}

fn check_len(got: usize, want: usize, what: &str) -> Result<(), Failure> {
    if got != want {
        return Err(Error::Input(format!("{what} has length {got}, expected {want}")).into());
    }
    Ok(())
}

fn coloring_of(colors: &[usize], k: usize) -> Result<Coloring, Failure> {
    Ok(Coloring::new(colors.to_vec(), k)?)
}

/// Message for the last failed call on this thread, or NULL after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn nadisc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn nadisc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nadisc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Seeded random instance of `n` agents over `m` items. `family` is one of
/// `additive-uniform`, `additive-signed`, `coverage`, `table-random-lipschitz`.
///
/// # Safety
/// `family` must be a NUL-terminated string; `out_instance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nadisc_instance_random(
    family: *const c_char,
    n: usize,
    m: usize,
    seed: u64,
    out_instance: *mut *mut NadiscInstance,
) -> NadiscStatus {
    guard(|| {
        let slot = out(out_instance, "out_instance")?;
        let name = text(family, "family")?;
        let fam: Family = name.parse()?;
        let params = FamilyParams::default();
        let vals = valuations::random_instance(fam, n, m, seed, &params)?;
        let inst = NadiscInstance { family: name.to_owned(), seed: Some(seed), params, vals };
        *slot = Box::into_raw(Box::new(inst));
        Ok(())
    })
}

/// Parses an instance document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_instance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nadisc_instance_from_json(
    json: *const c_char,
    out_instance: *mut *mut NadiscInstance,
) -> NadiscStatus {
    guard(|| {
        let slot = out(out_instance, "out_instance")?;
        let doc = InstanceDocument::from_json(text(json, "json")?)?;
        let (family, seed, params) = (doc.family.clone(), doc.seed, doc.params);
        let vals = doc.into_valuations()?;
        *slot = Box::into_raw(Box::new(NadiscInstance { family, seed, params, vals }));
        Ok(())
    })
}

/// Serializes an instance document. Free the result with `nadisc_string_free`.
///
/// # Safety
/// `instance` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nadisc_instance_to_json(
    instance: *const NadiscInstance,
    out_json: *mut *mut c_char,
) -> NadiscStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let inst = borrow(instance, "instance")?;
        let doc = InstanceDocument::new(&inst.family, inst.seed, inst.params, &inst.vals)?;
        *slot = c_string(doc.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `instance` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nadisc_instance_free(instance: *mut NadiscInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// # Safety
/// `instance` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn nadisc_instance_shape(
    instance: *const NadiscInstance,
    out_agents: *mut usize,
    out_items: *mut usize,
) -> NadiscStatus {
    guard(|| {
        let inst = borrow(instance, "instance")?;
        *out(out_agents, "out_agents")? = inst.vals.len();
        *out(out_items, "out_items")? = valuations::common_item_count(&inst.vals)?;
        Ok(())
    })
}

/// `v_agent(S)` where bit `j` of `items` marks item `j`.
///
/// # Safety
/// `instance` must be a live handle; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nadisc_eval(
    instance: *const NadiscInstance,
    agent: usize,
    items: u64,
    out_value: *mut f64,
) -> NadiscStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        let inst = borrow(instance, "instance")?;
        let v = inst.vals.get(agent).ok_or_else(|| Error::Input(format!("agent {agent} out of range")))?;
        *slot = v.eval(Subset::from_bits(items))?;
        Ok(())
    })
}

/// Necklace split into `k` colors over the identity layout. `restarts == 0`
/// keeps the default restart count.
///
/// # Safety
/// `instance` must be a live handle; `out_split` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nadisc_split(
    instance: *const NadiscInstance,
    k: usize,
    seed: u64,
    restarts: usize,
    out_split: *mut *mut NadiscSplit,
) -> NadiscStatus {
    guard(|| {
        let slot = out(out_split, "out_split")?;
        let inst = borrow(instance, "instance")?;
        let m = valuations::common_item_count(&inst.vals)?;
        let mut cfg = SearchConfig { seed, ..SearchConfig::default() };
        if restarts > 0 {
            cfg.restarts = restarts;
        }
        let report = splitter::split_necklace(&inst.vals, k, &NecklaceLayout::identity(m), &cfg)?;
        *slot = Box::into_raw(Box::new(NadiscSplit { report }));
        Ok(())
    })
}

/// # Safety
/// `split` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn nadisc_split_summary(
    split: *const NadiscSplit,
    out_imbalance: *mut f64,
    out_converged: *mut bool,
    out_max_fractional: *mut usize,
) -> NadiscStatus {
    guard(|| {
        let r = &borrow(split, "split")?.report;
        *out(out_imbalance, "out_imbalance")? = r.imbalance;
        *out(out_converged, "out_converged")? = r.converged;
        *out(out_max_fractional, "out_max_fractional")? = r.max_fractional_per_color;
        Ok(())
    })
}

/// Full split report as JSON. Free the result with `nadisc_string_free`.
///
/// # Safety
/// `split` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nadisc_split_to_json(split: *const NadiscSplit, out_json: *mut *mut c_char) -> NadiscStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = c_string(borrow(split, "split")?.report.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `split` must be NULL or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nadisc_split_free(split: *mut NadiscSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// Best of `trials` independent roundings of the split. Writes one color per
/// item into `out_colors` (length `len`, equal to the item count).
///
/// # Safety
/// Handles must be live; `out_colors` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn nadisc_round(
    instance: *const NadiscInstance,
    split: *const NadiscSplit,
    trials: usize,
    seed: u64,
    out_colors: *mut usize,
    len: usize,
    out_disc: *mut f64,
) -> NadiscStatus {
    guard(|| {
        let inst = borrow(instance, "instance")?;
        let r = &borrow(split, "split")?.report;
        let colors = slice_mut(out_colors, len, "out_colors")?;
        let disc = out(out_disc, "out_disc")?;
        check_len(len, r.coloring.num_items(), "out_colors")?;
        let rep = rounding::round_best_of(&inst.vals, &r.coloring, trials, seed)?;
        colors.copy_from_slice(rep.coloring.colors());
        *disc = rep.realized_disc;
        Ok(())
    })
}

/// Discrepancy of an integral `k`-coloring.
///
/// # Safety
/// `instance` must be a live handle; `colors` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn nadisc_disc_of_coloring(
    instance: *const NadiscInstance,
    colors: *const usize,
    len: usize,
    k: usize,
    out_disc: *mut f64,
) -> NadiscStatus {
    guard(|| {
        let slot = out(out_disc, "out_disc")?;
        let inst = borrow(instance, "instance")?;
        let c = coloring_of(slice(colors, len, "colors")?, k)?;
        *slot = measures::disc_of_coloring(&inst.vals, &c)?.value;
        Ok(())
    })
}

/// Envy-free allocation with subsidies from an `n`-coloring. Writes the
/// reassigned bundle index of each item into `out_owner` (length `len`) and
/// one payment per agent into `out_payments` (length `n`).
///
/// # Safety
/// `instance` must be a live handle; buffers must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn nadisc_subsidy(
    instance: *const NadiscInstance,
    colors: *const usize,
    len: usize,
    out_owner: *mut usize,
    out_payments: *mut f64,
    n: usize,
    out_total: *mut f64,
) -> NadiscStatus {
    guard(|| {
        let inst = borrow(instance, "instance")?;
        check_len(n, inst.vals.len(), "out_payments")?;
        let c = coloring_of(slice(colors, len, "colors")?, n)?;
        let owner = slice_mut(out_owner, len, "out_owner")?;
        let payments = slice_mut(out_payments, n, "out_payments")?;
        let total = out(out_total, "out_total")?;
        let rep = subsidy::envy_free_with_subsidy(&inst.vals, &c)?;
        for (i, b) in rep.allocation.bundles().iter().enumerate() {
            for j in b.iter() {
                owner[j] = i;
            }
        }
        payments.copy_from_slice(&rep.payments.p);
        *total = rep.total_subsidy;
        Ok(())
    })
}
