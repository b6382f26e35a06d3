use std::collections::BTreeMap;
use std::sync::Arc;

use compmr::algebra::{combine, DomainSet, Op, RelationExpr, TriValue};
use compmr::derive::{propagate_def, SelectionSet};
use compmr::graph::{subsystem_expr, ExecutorRef, PipelineGraph, VertexSpec};
use compmr::relation::{AtomBinding, Catalog, FnVerdict, RelationAtom, VerdictInput};
use proptest::prelude::*;

const ATOMS: [&str; 4] = ["A", "B", "C", "D"];
const CLASSES: [&str; 3] = ["x", "y", "z"];

fn value() -> impl Strategy<Value = TriValue> {
    prop::sample::select(TriValue::ALL.to_vec())
}

fn op() -> impl Strategy<Value = Op> {
    prop::sample::select(Op::ALL.to_vec())
}

fn expr() -> impl Strategy<Value = RelationExpr> {
    let leaf = prop_oneof![
        8 => prop::sample::select(ATOMS.to_vec()).prop_map(RelationExpr::atom),
        1 => Just(RelationExpr::ConstTrue),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            4 => (op(), inner.clone(), inner.clone()).prop_map(|(o, l, r)| RelationExpr::binary(o, l, r)),
            1 => inner.clone().prop_map(RelationExpr::def),
            1 => inner.prop_map(RelationExpr::indef),
        ]
    })
}

fn assignment() -> impl Strategy<Value = BTreeMap<String, TriValue>> {
    prop::collection::vec(value(), ATOMS.len())
        .prop_map(|vs| ATOMS.iter().map(|a| a.to_string()).zip(vs).collect())
}

fn eval(e: &RelationExpr, values: &BTreeMap<String, TriValue>) -> TriValue {
    e.eval_with(&mut |id: &str| Ok(values[id])).unwrap()
}

fn domains() -> impl Strategy<Value = BTreeMap<String, DomainSet>> {
    prop::collection::vec(prop::sample::subsequence(CLASSES.to_vec(), 0..=3), ATOMS.len()).prop_map(|ds| {
        ATOMS
            .iter()
            .map(|a| a.to_string())
            .zip(ds.into_iter().map(DomainSet::from_tags))
            .collect()
    })
}

fn universe() -> DomainSet {
    DomainSet::from_tags(CLASSES)
}

/// A DAG over `n` vertices: vertex j reads from every earlier i whose flag
/// is set; vertices without producers read a system input.
fn dag() -> impl Strategy<Value = PipelineGraph> {
    (1usize..=6)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(any::<bool>(), n * n)))
        .prop_map(|(n, flags)| {
            let mut g = PipelineGraph::default();
            for j in 0..n {
                let preds: Vec<usize> = (0..j).filter(|i| flags[i * n + j]).collect();
                let inputs: Vec<String> = if preds.is_empty() {
                    g.system_inputs.push(format!("v{j}.x").parse().unwrap());
                    vec!["x".into()]
                } else {
                    preds.iter().map(|i| format!("from{i}")).collect()
                };
                for i in &preds {
                    g.edges.push(format!("v{i}.y -> v{j}.from{i}").parse().unwrap());
                }
                g.add_vertex(VertexSpec {
                    id: format!("v{j}"),
                    inputs,
                    outputs: vec!["y".into()],
                    executor: ExecutorRef::builtin("copy"),
                    branch_group: None,
                })
                .unwrap();
            }
            g
        })
}

proptest! {
    #[test]
    fn operators_commute(o in op(), a in value(), b in value()) {
        prop_assert_eq!(combine(o, a, b), combine(o, b, a));
    }

    #[test]
    fn defined_operands_combine_classically(o in op(), a in any::<bool>(), b in any::<bool>()) {
        let want = match o {
            Op::And | Op::HatAnd => a && b,
            Op::Or | Op::HatOr => a || b,
            Op::Xor | Op::HatXor => a ^ b,
        };
        prop_assert_eq!(combine(o, TriValue::from_bool(a), TriValue::from_bool(b)), TriValue::from_bool(want));
    }

    #[test]
    fn out_of_domain_operand(o in op(), a in value()) {
        let got = combine(o, a, TriValue::OUT_OF_DOMAIN);
        if o.is_hat() {
            prop_assert_eq!(got, a);
        } else if a == TriValue::NOT_COMPUTED {
            prop_assert_eq!(got, TriValue::NOT_COMPUTED);
        } else {
            prop_assert_eq!(got, TriValue::OUT_OF_DOMAIN);
        }
    }

    #[test]
    fn def_and_indef_are_total(e in expr(), values in assignment()) {
        let inner = eval(&e, &values);
        let d = eval(&RelationExpr::def(e.clone()), &values);
        prop_assert!(d.is_defined());
        prop_assert_eq!(d == TriValue::True, inner != TriValue::False);
        let i = eval(&RelationExpr::indef(e), &values);
        if inner == TriValue::OUT_OF_DOMAIN {
            prop_assert_eq!(i, TriValue::OUT_OF_DOMAIN);
        } else {
            prop_assert_eq!(i, TriValue::from_bool(inner == TriValue::NOT_COMPUTED));
        }
    }

    #[test]
    fn simplify_preserves_value(e in expr(), values in assignment()) {
        let s = e.simplify();
        prop_assert!(s.node_count() <= e.node_count());
        prop_assert_eq!(eval(&s, &values), eval(&e, &values));
    }

    #[test]
    fn hat_domains_contain_plain_domains(o in op(), l in expr(), r in expr(), doms in domains()) {
        let u = universe();
        let lookup = |id: &str| doms.get(id);
        let plain = match o {
            Op::HatAnd => Op::And,
            Op::HatOr => Op::Or,
            Op::HatXor => Op::Xor,
            other => other,
        };
        let hat = match plain {
            Op::And => Op::HatAnd,
            Op::Or => Op::HatOr,
            _ => Op::HatXor,
        };
        let dp = RelationExpr::binary(plain, l.clone(), r.clone()).domain_of(&u, &lookup).unwrap();
        let dh = RelationExpr::binary(hat, l.clone(), r).domain_of(&u, &lookup).unwrap();
        prop_assert!(dp.is_subset(&dh));
        prop_assert!(dh.is_subset(&u));
        prop_assert!(dp.is_subset(&l.domain_of(&u, &lookup).unwrap()));
        prop_assert_eq!(RelationExpr::def(l).domain_of(&u, &lookup).unwrap(), u);
    }

    #[test]
    fn classes_outside_the_domain_evaluate_out_of_domain(
        e in expr(),
        doms in domains(),
        pick in any::<prop::sample::Index>(),
        verdicts in prop::collection::vec(any::<bool>(), ATOMS.len()),
    ) {
        let dom = e.domain_of(&universe(), &|id: &str| doms.get(id)).unwrap();
        let outside: Vec<&str> = CLASSES.iter().copied().filter(|c| !dom.contains(c)).collect();
        if outside.is_empty() {
            return Ok(());
        }
        let class = *pick.get(&outside);
        // every vertex ran: atoms are decided inside their domain
        let values: BTreeMap<String, TriValue> = ATOMS
            .iter()
            .zip(verdicts)
            .map(|(a, v)| {
                let t = if doms[*a].contains(class) { TriValue::from_bool(v) } else { TriValue::OUT_OF_DOMAIN };
                (a.to_string(), t)
            })
            .collect();
        prop_assert_eq!(eval(&e, &values), TriValue::OUT_OF_DOMAIN);
    }

    #[test]
    fn print_then_parse_round_trips(e in expr()) {
        let text = e.to_string();
        let back: RelationExpr = text.parse().unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn topological_order_respects_edges(g in dag()) {
        let order = g.topological_order().unwrap();
        prop_assert_eq!(order.len(), g.vertices.len());
        let pos = |v: &str| order.iter().position(|x| x == v).unwrap();
        for e in &g.edges {
            prop_assert!(pos(&e.from.vertex) < pos(&e.to.vertex));
        }
    }

    #[test]
    fn ancestors_are_closed_under_predecessors(g in dag()) {
        for v in g.vertices.keys() {
            let anc = g.ancestors(v).unwrap();
            prop_assert!(anc.contains(v));
            for a in &anc.vertex_ids {
                for p in g.predecessors(a) {
                    prop_assert!(anc.contains(p));
                }
                prop_assert!(g.descendants(a).unwrap().contains(v));
            }
        }
    }

    #[test]
    fn full_subsystem_keeps_the_composite(g in dag(), e in expr()) {
        let ids: Vec<&String> = g.vertices.keys().collect();
        let mut catalog = Catalog::new(universe());
        for (k, a) in ATOMS.iter().enumerate() {
            let verdict = Arc::new(FnVerdict(|_: &VerdictInput<'_>| Ok(TriValue::True)));
            let binding = AtomBinding::Vertex(ids[k % ids.len()].clone());
            catalog.insert(RelationAtom::new(*a, binding, universe(), verdict)).unwrap();
        }
        prop_assert_eq!(subsystem_expr(&e, &g.full_subsystem(), &catalog), e.simplify());
    }

    #[test]
    fn propagating_def_twice_changes_nothing(g in dag(), picks in prop::collection::vec(expr(), 6)) {
        let chosen = g.vertices.keys().cloned().zip(picks).collect();
        let once = propagate_def(&SelectionSet { chosen }, &g).unwrap();
        let twice = propagate_def(&once, &g).unwrap();
        prop_assert_eq!(once, twice);
    }
}
