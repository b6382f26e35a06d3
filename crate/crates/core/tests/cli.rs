use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn compmr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compmr"))
        .args(args)
        .current_dir(cwd)
        .env_remove("COMPMR_WORKDIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// One copying vertex with a relation defined on class `a`, and one group
/// of the given class over two small input files.
fn copy_spec(dir: &Path, class: &str) -> String {
    fs::write(dir.join("one.txt"), "x\n").unwrap();
    fs::write(dir.join("two.txt"), "x\ny\n").unwrap();
    let text = format!(
        r#"classes = ["a", "b"]
system_inputs = ["v.x"]

[[vertex]]
id = "v"
inputs = ["x"]
outputs = ["y"]
builtin = "copy"
params = {{ y = "x" }}

[[atom]]
id = "R"
vertex = "v"
domain = ["a"]
verdict = "non-empty"

[[group]]
id = "g"
class = "{class}"
tests = [{{ "v.x" = "one.txt" }}, {{ "v.x" = "two.txt" }}]
"#
    );
    let path = dir.join("spec.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn detector_demo_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = compmr(&["demo", "detector", "--workdir", "work"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("and(atom(N), hat_or(atom(K), atom(D)))"));
}

#[test]
fn run_on_explicit_inputs_passes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy_spec(dir.path(), "a");
    let o = compmr(&["run", "--spec", &spec, "--workdir", "work"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("work/report/table2.csv").exists());
}

#[test]
fn injected_fault_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = compmr(
        &["demo", "genomics", "--fault", "swallow", "--fault-vertex", "bwa", "--workdir", "work"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(compmr(&["derive", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(compmr(&["--help"], dir.path()).status.code(), Some(0));
    let o = compmr(&["demo", "genomics", "--fault", "swallow", "--fault-vertex", "nowhere"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cyclic_spec_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"classes = ["a"]
edges = ["v.y -> w.x", "w.y -> v.x"]
[[vertex]]
id = "v"
inputs = ["x"]
outputs = ["y"]
builtin = "copy"
params = { y = "x" }
[[vertex]]
id = "w"
inputs = ["x"]
outputs = ["y"]
builtin = "copy"
params = { y = "x" }
[[atom]]
id = "R"
vertex = "v"
verdict = "non-empty"
"#;
    fs::write(dir.path().join("cycle.toml"), text).unwrap();
    let o = compmr(&["derive", "--spec", "cycle.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cycle detected"), "{}", stderr(&o));
}

#[test]
fn inapplicable_groups_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy_spec(dir.path(), "b");
    let o = compmr(&["run", "--spec", &spec, "--workdir", "work"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no applicable test groups"), "{}", stderr(&o));
}

#[test]
fn exhausted_derivation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"classes = ["a", "b"]
system_inputs = ["v.x"]
edges = ["v.y -> w.x"]
[[vertex]]
id = "v"
inputs = ["x"]
outputs = ["y"]
builtin = "copy"
params = { y = "x" }
[[vertex]]
id = "w"
inputs = ["x"]
outputs = ["y"]
builtin = "copy"
params = { y = "x" }
[[atom]]
id = "A"
vertex = "v"
domain = ["a"]
verdict = "non-empty"
[[atom]]
id = "B"
vertex = "w"
domain = ["b"]
verdict = "non-empty"
"#;
    fs::write(dir.path().join("spec.toml"), text).unwrap();
    let o = compmr(&["derive", "--spec", "spec.toml", "--out", "d.json"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    assert_eq!(json["candidates"].as_array().unwrap().len(), 0);
    assert_eq!(json["exhausted"].as_array().unwrap().len(), 1);
}

#[test]
fn workdir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = copy_spec(dir.path(), "a");
    let o = Command::new(env!("CARGO_BIN_EXE_compmr"))
        .args(["run", "--spec", &spec])
        .current_dir(dir.path())
        .env("COMPMR_WORKDIR", dir.path().join("from-env"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("from-env/report/summary.json").exists());
    assert!(!dir.path().join("compmr-work").exists());
}
