use std::path::Path;

use compmr::algebra::RelationExpr;
use compmr::builtins::registry;
use compmr::derive::{derive, BranchMode, CombinationPolicy, Derivation};
use compmr::detector::{FOUR_COMPONENT_SPEC, STARRED_SPEC, THREE_COMPONENT_SPEC};
use compmr::spec_file::SpecFile;

fn derive_spec(text: &str, mode: Option<BranchMode>) -> Derivation {
    let spec = SpecFile::parse(text).unwrap();
    let loaded = spec.load(&registry(), Path::new(".")).unwrap();
    let mut policy = loaded.system.policy.clone();
    if let Some(m) = mode {
        policy.branch_mode = m;
    }
    derive(&loaded.system.graph, &loaded.system.catalog, &policy).unwrap()
}

fn contains(d: &Derivation, text: &str) -> bool {
    let e: RelationExpr = text.parse().unwrap();
    d.position_of(&e).is_some()
}

fn assert_contains(d: &Derivation, text: &str) {
    assert!(
        contains(d, text),
        "{text} not derived; got {} candidates:\n{}",
        d.candidates.len(),
        d.candidates.iter().take(40).map(|c| c.expr.to_string()).collect::<Vec<_>>().join("\n")
    );
}

#[test]
fn three_component_emits_hat_union_of_detectors() {
    let d = derive_spec(THREE_COMPONENT_SPEC, None);
    assert_contains(&d, "and(atom(N), hat_or(atom(K), atom(D)))");
    assert_eq!(d.candidates[0].expr.to_string(), "and(atom(N), hat_or(atom(K), atom(D)))");
    // plain combinations of disjoint domains are dropped
    assert!(!contains(&d, "and(atom(N), or(atom(K), atom(D)))"));
    assert!(!contains(&d, "and(atom(N), and(atom(K), atom(D)))"));
    for c in &d.candidates {
        assert!(!c.domain.is_empty());
    }
}

#[test]
fn starred_relations_allow_plain_combinations() {
    let d = derive_spec(STARRED_SPEC, None);
    assert_contains(&d, "and(atom(N), or(atom(K*), atom(D*)))");
    assert_contains(&d, "and(atom(N), and(atom(K*), atom(D*)))");
}

#[test]
fn four_component_joint() {
    let d = derive_spec(FOUR_COMPONENT_SPEC, Some(BranchMode::Joint));
    assert_contains(&d, "and(and(atom(N), or(atom(P), atom(Q))), hat_or(atom(K), atom(D)))");
    assert_contains(&d, "and(and(atom(N), or(atom(P), atom(Q))), hat_and(atom(K), atom(D)))");
}

#[test]
fn four_component_per_branch_family() {
    let d = derive_spec(FOUR_COMPONENT_SPEC, Some(BranchMode::PerBranch));
    for (branch_op, inner) in [("or", "hat_or"), ("or", "hat_and"), ("xor", "hat_or"), ("xor", "hat_and")] {
        assert_contains(
            &d,
            &format!(
                "and(atom(N), {branch_op}(and(atom(P), {inner}(atom(K), atom(D))), \
                 and(atom(Q), {inner}(atom(K), indef(atom(D))))))"
            ),
        );
    }
}

#[test]
fn derivation_is_deterministic() {
    let a = derive_spec(FOUR_COMPONENT_SPEC, None);
    let b = derive_spec(FOUR_COMPONENT_SPEC, None);
    let ta: Vec<String> = a.candidates.iter().map(|c| c.expr.to_string()).collect();
    let tb: Vec<String> = b.candidates.iter().map(|c| c.expr.to_string()).collect();
    assert_eq!(ta, tb);
}

#[test]
fn single_vertex_single_relation() {
    let text = r#"
classes = ["c"]
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
"#;
    let d = derive_spec(text, None);
    let texts: Vec<String> = d.candidates.iter().map(|c| c.expr.to_string()).collect();
    assert_eq!(texts, ["atom(R)"]);
}

#[test]
fn empty_domain_selection_is_reported() {
    let text = r#"
classes = ["a", "b"]
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
    let d = derive_spec(text, None);
    assert!(d.candidates.is_empty());
    assert_eq!(d.exhausted.len(), 1);
}

#[test]
fn policy_defaults_round_trip_through_toml() {
    let p: CombinationPolicy = toml::from_str("branch_mode = \"per-branch\"\nfanout_ops = [\"and\"]").unwrap();
    assert_eq!(p.branch_mode, BranchMode::PerBranch);
    assert_eq!(p.fanout_ops.len(), 1);
    assert_eq!(p.extension_rounds, 1);
}
