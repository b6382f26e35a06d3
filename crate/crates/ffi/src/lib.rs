//! C ABI over the compmr library.
//!
//! Every fallible call returns a [`CompmrStatus`] and writes its result
//! through an out pointer. On failure the message is kept per thread and
//! read with [`compmr_last_error`]. Objects are opaque handles released
//! with their `_free` function; strings returned to the caller are released
//! with [`compmr_string_free`].

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use compmr::algebra::{combine, Op, RelationExpr, TriValue};
use compmr::builtins::registry;
use compmr::derive::{derive, Derivation};
use compmr::harness::{failures_metric, run_composite};
use compmr::spec_file::{LoadedSpec, SpecFile};
use compmr::Error;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompmrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Config = 4,
    Usage = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Outcome of a relation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompmrValue {
    True = 0,
    False = 1,
    OutOfDomain = 2,
    NotComputed = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompmrOp {
    And = 0,
    Or = 1,
    Xor = 2,
    HatAnd = 3,
    HatOr = 4,
    HatXor = 5,
}

/// A parsed relation expression.
pub struct CompmrExpr(RelationExpr);

/// A loaded system declaration.
pub struct CompmrSpec(LoadedSpec);

/// The candidates derived for a system.
pub struct CompmrDerivation(Derivation);

impl From<TriValue> for CompmrValue {
    fn from(v: TriValue) -> Self {
        match v {
            TriValue::True => CompmrValue::True,
            TriValue::False => CompmrValue::False,
            TriValue::OUT_OF_DOMAIN => CompmrValue::OutOfDomain,
            TriValue::NOT_COMPUTED => CompmrValue::NotComputed,
        }
    }
}

fn op_from(raw: i32) -> Result<Op, Failure> {
    Ok(match raw {
        x if x == CompmrOp::And as i32 => Op::And,
        x if x == CompmrOp::Or as i32 => Op::Or,
        x if x == CompmrOp::Xor as i32 => Op::Xor,
        x if x == CompmrOp::HatAnd as i32 => Op::HatAnd,
        x if x == CompmrOp::HatOr as i32 => Op::HatOr,
        x if x == CompmrOp::HatXor as i32 => Op::HatXor,
        _ => return Err(Failure(CompmrStatus::OutOfRange, format!("{raw} is not a CompmrOp"))),
    })
}

fn value_from(raw: i32) -> Result<TriValue, Failure> {
    Ok(match raw {
        x if x == CompmrValue::True as i32 => TriValue::True,
        x if x == CompmrValue::False as i32 => TriValue::False,
        x if x == CompmrValue::OutOfDomain as i32 => TriValue::OUT_OF_DOMAIN,
        x if x == CompmrValue::NotComputed as i32 => TriValue::NOT_COMPUTED,
        _ => return Err(Failure(CompmrStatus::OutOfRange, format!("{raw} is not a CompmrValue"))),
    })
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CompmrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => CompmrStatus::Config,
            Error::Usage(_) => CompmrStatus::Usage,
            Error::Parse { .. } => CompmrStatus::Parse,
            Error::Io { .. } => CompmrStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CompmrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CompmrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CompmrStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CompmrStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CompmrStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior nul removed").into_raw()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn compmr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn compmr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn compmr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Combine two outcomes with one operator. `op` is a `CompmrOp`, `a` and
/// `b` are `CompmrValue`s; anything else is out of range.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_combine(op: i32, a: i32, b: i32, out: *mut CompmrValue) -> CompmrStatus {
    guard(|| put(out, combine(op_from(op)?, value_from(a)?, value_from(b)?).into(), "out"))
}

/// Parse an expression such as `and(atom(N), hat_or(atom(K), atom(D)))`.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_expr_parse(text: *const c_char, out: *mut *mut CompmrExpr) -> CompmrStatus {
    guard(|| {
        let e: RelationExpr = c_str(text, "text")?.parse()?;
        put(out, Box::into_raw(Box::new(CompmrExpr(e))), "out")
    })
}

/// Canonical text of an expression; free with `compmr_string_free`.
///
/// # Safety
/// `expr` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_expr_to_string(expr: *const CompmrExpr, out: *mut *mut c_char) -> CompmrStatus {
    guard(|| put(out, owned_string(handle(expr, "expr")?.0.to_string()), "out"))
}

/// Infix rendering of an expression; free with `compmr_string_free`.
///
/// # Safety
/// `expr` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_expr_pretty(expr: *const CompmrExpr, out: *mut *mut c_char) -> CompmrStatus {
    guard(|| put(out, owned_string(handle(expr, "expr")?.0.pretty()), "out"))
}

/// Evaluate an expression given the value of each atom. `ids` and `values`
/// hold `n` entries, each value a `CompmrValue`; an atom missing from `ids`
/// is a usage error.
///
/// # Safety
/// `ids` and `values` must point to `n` readable entries (or be null when
/// `n` is 0); `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_expr_eval(
    expr: *const CompmrExpr,
    ids: *const *const c_char,
    values: *const i32,
    n: usize,
    out: *mut CompmrValue,
) -> CompmrStatus {
    guard(|| {
        let e = &handle(expr, "expr")?.0;
        let mut table = BTreeMap::new();
        if n > 0 {
            if ids.is_null() || values.is_null() {
                return Err(null("ids or values"));
            }
            for k in 0..n {
                table.insert(c_str(*ids.add(k), "ids[k]")?, value_from(*values.add(k))?);
            }
        }
        let v = e.eval_with(&mut |id: &str| {
            table
                .get(id)
                .copied()
                .ok_or_else(|| Error::usage(format!("no value given for atom `{id}`")))
        })?;
        put(out, v.into(), "out")
    })
}

/// # Safety
/// `expr` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn compmr_expr_free(expr: *mut CompmrExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Load a system declaration from a TOML file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_spec_load(path: *const c_char, out: *mut *mut CompmrSpec) -> CompmrStatus {
    guard(|| {
        let loaded = LoadedSpec::from_file(Path::new(c_str(path, "path")?), &registry())?;
        put(out, Box::into_raw(Box::new(CompmrSpec(loaded))), "out")
    })
}

/// Load a system declaration from TOML text; relative paths resolve
/// against `base_dir`.
///
/// # Safety
/// `toml` and `base_dir` must be nul-terminated strings; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_spec_parse(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut CompmrSpec,
) -> CompmrStatus {
    guard(|| {
        let spec = SpecFile::parse(c_str(toml, "toml")?)?;
        let loaded = spec.load(&registry(), Path::new(c_str(base_dir, "base_dir")?))?;
        put(out, Box::into_raw(Box::new(CompmrSpec(loaded))), "out")
    })
}

/// # Safety
/// `spec` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn compmr_spec_free(spec: *mut CompmrSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Derive the candidate composites of a system.
///
/// # Safety
/// `spec` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_derive(spec: *const CompmrSpec, out: *mut *mut CompmrDerivation) -> CompmrStatus {
    guard(|| {
        let sys = &handle(spec, "spec")?.0.system;
        let d = derive(&sys.graph, &sys.catalog, &sys.policy)?;
        put(out, Box::into_raw(Box::new(CompmrDerivation(d))), "out")
    })
}

/// Number of candidates; 0 for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn compmr_derivation_len(d: *const CompmrDerivation) -> usize {
    d.as_ref().map_or(0, |d| d.0.candidates.len())
}

/// Copy of candidate `index`; free with `compmr_expr_free`.
///
/// # Safety
/// `d` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_derivation_candidate(
    d: *const CompmrDerivation,
    index: usize,
    out: *mut *mut CompmrExpr,
) -> CompmrStatus {
    guard(|| {
        let d = &handle(d, "derivation")?.0;
        let c = d.candidates.get(index).ok_or_else(|| {
            Failure(
                CompmrStatus::OutOfRange,
                format!("candidate {index} requested, {} derived", d.candidates.len()),
            )
        })?;
        put(out, Box::into_raw(Box::new(CompmrExpr(c.expr.clone()))), "out")
    })
}

/// Input classes of candidate `index`, comma separated; free with
/// `compmr_string_free`.
///
/// # Safety
/// `d` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_derivation_domain(
    d: *const CompmrDerivation,
    index: usize,
    out: *mut *mut c_char,
) -> CompmrStatus {
    guard(|| {
        let d = &handle(d, "derivation")?.0;
        let c = d
            .candidates
            .get(index)
            .ok_or_else(|| Failure(CompmrStatus::OutOfRange, format!("no candidate {index}")))?;
        put(out, owned_string(c.domain.tags().join(",")), "out")
    })
}

/// # Safety
/// `d` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn compmr_derivation_free(d: *mut CompmrDerivation) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Run `expr` over the system's test groups under `workdir` and count the
/// groups on which it is FALSE. Atoms the expression names must be declared
/// by the system.
///
/// # Safety
/// `spec` and `expr` must be live handles; `workdir` a nul-terminated
/// string; `groups` and `failed` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_run(
    spec: *mut CompmrSpec,
    expr: *const CompmrExpr,
    workdir: *const c_char,
    parallel: usize,
    groups: *mut usize,
    failed: *mut usize,
) -> CompmrStatus {
    guard(|| {
        let loaded = &mut spec.as_mut().ok_or_else(|| null("spec"))?.0;
        let e = &handle(expr, "expr")?.0;
        let dir = Path::new(c_str(workdir, "workdir")?);
        loaded.materialize_groups(dir)?;
        let sys = &loaded.system;
        let run = run_composite(sys, &sys.catalog, e, dir, parallel, false)?;
        let false_count = run
            .verdicts
            .iter()
            .filter(|v| v.composite_value == TriValue::False)
            .count();
        put(groups, run.verdicts.len(), "groups")?;
        put(failed, false_count, "failed")
    })
}

/// Fraction of adjacent outputs that are not nested. Output k holds
/// `lens[k]` items, stored one output after another in `items`.
///
/// # Safety
/// `lens` must point to `n` entries and `items` to their sum; `out` must
/// be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn compmr_failures_metric(
    items: *const u64,
    lens: *const usize,
    n: usize,
    out: *mut f64,
) -> CompmrStatus {
    guard(|| {
        if lens.is_null() {
            return Err(null("lens"));
        }
        let lens = std::slice::from_raw_parts(lens, n);
        let total: usize = lens.iter().sum();
        if total > 0 && items.is_null() {
            return Err(null("items"));
        }
        let flat: &[u64] = if total == 0 { &[] } else { std::slice::from_raw_parts(items, total) };
        let mut series = Vec::with_capacity(n);
        let mut at = 0;
        for &len in lens {
            series.push(flat[at..at + len].iter().copied().collect::<BTreeSet<u64>>());
            at += len;
        }
        put(out, failures_metric(&series)?, "out")
    })
}
