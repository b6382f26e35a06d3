use std::ffi::{CStr, CString};
use std::ptr;

use compmr::algebra::{combine, Op, TriValue};
use compmr::detector::THREE_COMPONENT_SPEC;
use compmr_ffi::*;

fn owned(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { compmr_string_free(p) };
    s
}

fn last_error() -> String {
    let p = compmr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> *mut CompmrExpr {
    let c = CString::new(text).unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { compmr_expr_parse(c.as_ptr(), &mut e) }, CompmrStatus::Ok);
    e
}

#[test]
fn combine_matches_the_library() {
    let ops = [Op::And, Op::Or, Op::Xor, Op::HatAnd, Op::HatOr, Op::HatXor];
    for (k, op) in ops.iter().enumerate() {
        for (i, a) in TriValue::ALL.iter().enumerate() {
            for (j, b) in TriValue::ALL.iter().enumerate() {
                let mut out = CompmrValue::True;
                let status = unsafe { compmr_combine(k as i32, i as i32, j as i32, &mut out) };
                assert_eq!(status, CompmrStatus::Ok);
                assert_eq!(out, CompmrValue::from(combine(*op, *a, *b)));
            }
        }
    }
}

#[test]
fn invalid_enum_values_are_rejected() {
    let mut out = CompmrValue::True;
    assert_eq!(unsafe { compmr_combine(9, 0, 0, &mut out) }, CompmrStatus::OutOfRange);
    assert!(last_error().contains("CompmrOp"));
    assert_eq!(unsafe { compmr_combine(0, 0, -1, &mut out) }, CompmrStatus::OutOfRange);
    assert_eq!(unsafe { compmr_combine(0, 0, 0, ptr::null_mut()) }, CompmrStatus::NullArgument);
}

#[test]
fn expressions_round_trip_and_evaluate() {
    let e = parse("and(atom(N), hat_or(atom(K), atom(D)))");
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { compmr_expr_to_string(e, &mut s) }, CompmrStatus::Ok);
    assert_eq!(owned(s), "and(atom(N), hat_or(atom(K), atom(D)))");

    let ids: Vec<CString> = ["N", "K", "D"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let id_ptrs: Vec<*const std::ffi::c_char> = ids.iter().map(|c| c.as_ptr()).collect();
    let values = [
        CompmrValue::True as i32,
        CompmrValue::OutOfDomain as i32,
        CompmrValue::False as i32,
    ];
    let mut out = CompmrValue::True;
    let status = unsafe { compmr_expr_eval(e, id_ptrs.as_ptr(), values.as_ptr(), 3, &mut out) };
    assert_eq!(status, CompmrStatus::Ok);
    assert_eq!(out, CompmrValue::False);

    // an atom without a value
    let status = unsafe { compmr_expr_eval(e, id_ptrs.as_ptr(), values.as_ptr(), 2, &mut out) };
    assert_eq!(status, CompmrStatus::Usage);
    assert!(last_error().contains("`D`"));
    unsafe { compmr_expr_free(e) };
}

#[test]
fn parse_errors_carry_a_message() {
    let c = CString::new("and(atom(N)").unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { compmr_expr_parse(c.as_ptr(), &mut e) }, CompmrStatus::Parse);
    assert!(e.is_null());
    assert!(last_error().starts_with("parse error"));
    assert_eq!(unsafe { compmr_expr_parse(ptr::null(), &mut e) }, CompmrStatus::NullArgument);
}

#[test]
fn derive_through_handles() {
    let toml = CString::new(THREE_COMPONENT_SPEC).unwrap();
    let base = CString::new(".").unwrap();
    let mut spec = ptr::null_mut();
    assert_eq!(unsafe { compmr_spec_parse(toml.as_ptr(), base.as_ptr(), &mut spec) }, CompmrStatus::Ok);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { compmr_derive(spec, &mut d) }, CompmrStatus::Ok);
    assert!(unsafe { compmr_derivation_len(d) } >= 1);

    let mut e = ptr::null_mut();
    assert_eq!(unsafe { compmr_derivation_candidate(d, 0, &mut e) }, CompmrStatus::Ok);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { compmr_expr_pretty(e, &mut s) }, CompmrStatus::Ok);
    assert!(owned(s).contains('N'));
    let mut dom = ptr::null_mut();
    assert_eq!(unsafe { compmr_derivation_domain(d, 0, &mut dom) }, CompmrStatus::Ok);
    assert!(!owned(dom).is_empty());

    let mut missing = ptr::null_mut();
    let status = unsafe { compmr_derivation_candidate(d, 10_000, &mut missing) };
    assert_eq!(status, CompmrStatus::OutOfRange);
    assert!(missing.is_null());
    assert_eq!(unsafe { compmr_derivation_len(ptr::null()) }, 0);

    unsafe {
        compmr_expr_free(e);
        compmr_derivation_free(d);
        compmr_spec_free(spec);
    }
}

#[test]
fn bad_spec_is_a_config_error() {
    let toml = CString::new("classes = [").unwrap();
    let base = CString::new(".").unwrap();
    let mut spec = ptr::null_mut();
    assert_eq!(unsafe { compmr_spec_parse(toml.as_ptr(), base.as_ptr(), &mut spec) }, CompmrStatus::Config);
    let missing = CString::new("/nonexistent/spec.toml").unwrap();
    assert_eq!(unsafe { compmr_spec_load(missing.as_ptr(), &mut spec) }, CompmrStatus::Io);
}

#[test]
fn failures_metric_fixtures() {
    let metric = |series: &[Vec<u64>]| -> (CompmrStatus, f64) {
        let items: Vec<u64> = series.concat();
        let lens: Vec<usize> = series.iter().map(Vec::len).collect();
        let mut out = -1.0;
        let status = unsafe { compmr_failures_metric(items.as_ptr(), lens.as_ptr(), lens.len(), &mut out) };
        (status, out)
    };
    let nested: Vec<Vec<u64>> = (0..9).map(|k| (0..k).collect()).collect();
    assert_eq!(metric(&nested), (CompmrStatus::Ok, 0.0));
    let mut one = nested.clone();
    one[3].push(99);
    assert_eq!(metric(&one), (CompmrStatus::Ok, 0.125));
    let disjoint: Vec<Vec<u64>> = (0..9).map(|k| vec![k]).collect();
    assert_eq!(metric(&disjoint), (CompmrStatus::Ok, 1.0));
    assert_eq!(metric(&nested[..1]).0, CompmrStatus::Usage);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(compmr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_counts_false_groups() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("one.txt"), "x\n").unwrap();
    std::fs::write(dir.path().join("empty.txt"), "").unwrap();
    let toml = r#"classes = ["a"]
system_inputs = ["v.x"]
[[vertex]]
id = "v"
inputs = ["x"]
outputs = ["y"]
builtin = "copy"
params = { y = "x" }
[[atom]]
id = "R"
vertex = "v"
verdict = "non-empty"
[[group]]
id = "full"
class = "a"
tests = [{ "v.x" = "one.txt" }, { "v.x" = "one.txt" }]
[[group]]
id = "hollow"
class = "a"
tests = [{ "v.x" = "one.txt" }, { "v.x" = "empty.txt" }]
"#;
    let toml = CString::new(toml).unwrap();
    let base = CString::new(dir.path().to_str().unwrap()).unwrap();
    let work = CString::new(dir.path().join("work").to_str().unwrap()).unwrap();
    let mut spec = ptr::null_mut();
    assert_eq!(unsafe { compmr_spec_parse(toml.as_ptr(), base.as_ptr(), &mut spec) }, CompmrStatus::Ok);
    let e = parse("atom(R)");
    let (mut groups, mut failed) = (0, 0);
    let status = unsafe { compmr_run(spec, e, work.as_ptr(), 1, &mut groups, &mut failed) };
    assert_eq!(status, CompmrStatus::Ok, "{}", last_error());
    assert_eq!((groups, failed), (2, 1));
    unsafe {
        compmr_expr_free(e);
        compmr_spec_free(spec);
    }
}
