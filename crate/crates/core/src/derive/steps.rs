//! Set preparation: extension, partial-definition splitting, selection
//! enumeration and definedness propagation.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{DomainSet, RelationExpr};
use crate::error::{Error, Result};
use crate::graph::PipelineGraph;
use crate::relation::{Catalog, RelationAtom};

use super::{CombinationPolicy, RelationSet, SelectionSet};

pub(crate) fn domain_in(catalog: &Catalog, e: &RelationExpr) -> Result<DomainSet> {
    e.domain_of(catalog.universe(), &|id| catalog.domain(id))
}

/// Grow a relation set with pairwise combinations of its members.
///
/// Each round combines every unordered pair of the members present at the
/// start of the round with every operator of `policy.extend_ops`. A
/// combination is kept when its domain is non-empty and it is not a
/// syntactic duplicate (after simplification and canonical ordering) of a
/// member already in the set. Growth stops at `policy.max_set_size`.
pub fn extend_set(set: &RelationSet, policy: &CombinationPolicy, catalog: &Catalog) -> Result<RelationSet> {
    let mut members: Vec<RelationExpr> = Vec::new();
    let mut seen: BTreeSet<RelationExpr> = BTreeSet::new();
    for r in &set.relations {
        if seen.insert(r.normal_form()) {
            members.push(r.clone());
        }
    }
    'rounds: for _ in 0..policy.extension_rounds {
        let snapshot = members.clone();
        let mut grew = false;
        for i in 0..snapshot.len() {
            for j in i + 1..snapshot.len() {
                for &op in &policy.extend_ops {
                    if members.len() >= policy.max_set_size {
                        break 'rounds;
                    }
                    let c = RelationExpr::binary(op, snapshot[i].clone(), snapshot[j].clone()).simplify();
                    if domain_in(catalog, &c)?.is_empty() {
                        continue;
                    }
                    if seen.insert(c.normal_form()) {
                        members.push(c);
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            break;
        }
    }
    Ok(RelationSet {
        vertex: set.vertex.clone(),
        relations: members,
    })
}

/// Result of splitting a relation whose undefined classes are known.
#[derive(Debug, Clone)]
pub struct Split {
    pub relations: Vec<RelationExpr>,
    /// The restricted copy of the atom, to be added to the catalog.
    pub restricted: Option<RelationAtom>,
}

/// Id given to the restriction of `id` to its defined classes.
pub fn restricted_id(id: &str) -> String {
    format!("{id}'")
}

/// Split `atom` into a restriction to the classes where it is defined and an
/// `indef` check for the classes where it is known not to be.
pub fn split_partial(atom: &RelationAtom, known_undef_classes: &DomainSet) -> Result<Split> {
    if !known_undef_classes.is_subset(&atom.domain) {
        return Err(Error::usage(format!(
            "classes {} are not all in the domain {} of `{}`",
            known_undef_classes, atom.domain, atom.id
        )));
    }
    if known_undef_classes.is_empty() {
        return Ok(Split {
            relations: vec![RelationExpr::def(RelationExpr::atom(&atom.id))],
            restricted: None,
        });
    }
    let mut relations = Vec::new();
    let rest = atom.domain.difference(known_undef_classes);
    let restricted = if rest.is_empty() {
        None
    } else {
        let mut r = atom.clone();
        r.id = restricted_id(&atom.id);
        r.domain = rest;
        r.may_be_undefined = false;
        relations.push(RelationExpr::atom(&r.id));
        Some(r)
    };
    relations.push(RelationExpr::indef(RelationExpr::atom(&atom.id)));
    Ok(Split {
        relations,
        restricted,
    })
}

/// Classes on which `vertex` is known not to run: the not-taken classes of
/// every branch member it is, or lies downstream of.
pub fn known_undefined_classes(graph: &PipelineGraph, vertex: &str) -> Result<DomainSet> {
    let mut out = DomainSet::empty();
    for g in graph.branch_groups.values() {
        for (member, classes) in &g.not_taken {
            if graph.descendants(member)?.contains(vertex) {
                out = out.union(classes);
            }
        }
    }
    Ok(out)
}

/// Apply definedness rewriting to the members of one set.
///
/// Atoms with known undefined classes are split; any other member mentioning
/// an atom that may be undefined is wrapped in `def`. Restricted atoms created
/// along the way are registered in `catalog`.
pub fn mark_undefined(set: &RelationSet, graph: &PipelineGraph, catalog: &mut Catalog) -> Result<RelationSet> {
    let known = known_undefined_classes(graph, &set.vertex)?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |e: RelationExpr, out: &mut Vec<RelationExpr>| {
        if seen.insert(e.normal_form()) {
            out.push(e);
        }
    };
    for r in &set.relations {
        if let RelationExpr::Atom(id) = r {
            let atom = catalog.require(id)?.clone();
            let undef = known.intersection(&atom.domain);
            if !undef.is_empty() {
                let split = split_partial(&atom, &undef)?;
                if let Some(restricted) = split.restricted {
                    if catalog.get(&restricted.id).is_none() {
                        catalog.insert(restricted)?;
                    }
                }
                for e in split.relations {
                    push(e, &mut out);
                }
                continue;
            }
        }
        let partial = r.atoms().iter().any(|id| {
            catalog
                .get(id)
                .is_some_and(|a| a.may_be_undefined || !known.intersection(&a.domain).is_empty())
        });
        if partial && !r.is_wrapped() {
            push(RelationExpr::def(r.clone()), &mut out);
        } else {
            push(r.clone(), &mut out);
        }
    }
    Ok(RelationSet {
        vertex: set.vertex.clone(),
        relations: out,
    })
}

/// Cartesian product of the sets, ordered by vertex id, with the last vertex
/// varying fastest. Returns at most `cap` selections and the full count.
pub fn enumerate_selections(sets: &[RelationSet], cap: usize) -> (Vec<SelectionSet>, u128) {
    let mut sorted: Vec<&RelationSet> = sets.iter().collect();
    sorted.sort_by(|a, b| a.vertex.cmp(&b.vertex));
    let total = sorted
        .iter()
        .map(|s| s.relations.len() as u128)
        .try_fold(1u128, |acc, n| acc.checked_mul(n))
        .unwrap_or(u128::MAX);
    if total == 0 || cap == 0 {
        return (Vec::new(), total);
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; sorted.len()];
    loop {
        let chosen: BTreeMap<String, RelationExpr> = sorted
            .iter()
            .zip(&idx)
            .map(|(s, &i)| (s.vertex.clone(), s.relations[i].clone()))
            .collect();
        out.push(SelectionSet { chosen });
        if out.len() >= cap {
            break;
        }
        let mut k = sorted.len();
        loop {
            if k == 0 {
                return (out, total);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sorted[k].relations.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    (out, total)
}

fn mentions_wrap(e: &RelationExpr) -> bool {
    match e {
        RelationExpr::Def(_) | RelationExpr::Indef(_) => true,
        RelationExpr::Binary(_, l, r) => mentions_wrap(l) || mentions_wrap(r),
        _ => false,
    }
}

/// Wrap in `def` the chosen relation of every vertex downstream of a vertex
/// whose chosen relation involves `def` or `indef`.
pub fn propagate_def(selection: &SelectionSet, graph: &PipelineGraph) -> Result<SelectionSet> {
    let mut affected = BTreeSet::new();
    for (v, r) in &selection.chosen {
        if mentions_wrap(r) && graph.vertices.contains_key(v) {
            let mut d = graph.descendants(v)?.vertex_ids;
            d.remove(v);
            affected.extend(d);
        }
    }
    let chosen = selection
        .chosen
        .iter()
        .map(|(v, r)| {
            let r = if affected.contains(v) && !r.is_wrapped() {
                RelationExpr::def(r.clone())
            } else {
                r.clone()
            };
            (v.clone(), r)
        })
        .collect();
    Ok(SelectionSet { chosen })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::algebra::{Op, TriValue};
    use crate::relation::{AtomBinding, FnVerdict, Verdict, VerdictInput};

    fn verdict() -> Arc<dyn Verdict> {
        Arc::new(FnVerdict(|_: &VerdictInput<'_>| Ok(TriValue::True)))
    }

    fn atom(id: &str, v: &str, dom: &[&str]) -> RelationAtom {
        RelationAtom::new(id, AtomBinding::Vertex(v.into()), DomainSet::from_tags(dom.iter().copied()), verdict())
    }

    fn catalog(atoms: Vec<RelationAtom>) -> Catalog {
        let mut c = Catalog::new(DomainSet::from_tags(["add-cat", "add-dog", "pre-detector-false"]));
        for a in atoms {
            c.insert(a).unwrap();
        }
        c
    }

    fn set(v: &str, ids: &[&str]) -> RelationSet {
        RelationSet {
            vertex: v.into(),
            relations: ids.iter().map(|i| RelationExpr::atom(*i)).collect(),
        }
    }

    #[test]
    fn disjoint_domains_keep_only_hat_combinations() {
        let c = catalog(vec![atom("K", "x", &["add-cat"]), atom("D", "x", &["add-dog"])]);
        let out = extend_set(&set("x", &["K", "D"]), &CombinationPolicy::default(), &c).unwrap();
        let texts: Vec<String> = out.relations.iter().map(|e| e.to_string()).collect();
        assert!(texts.contains(&"hat_or(atom(K), atom(D))".to_string()));
        assert!(texts.contains(&"hat_and(atom(K), atom(D))".to_string()));
        assert!(!texts.contains(&"and(atom(K), atom(D))".to_string()));
        assert!(!texts.contains(&"or(atom(K), atom(D))".to_string()));
        assert_eq!(out.relations.len(), 4);
    }

    #[test]
    fn equal_domains_keep_plain_combinations() {
        let c = catalog(vec![
            atom("K*", "x", &["add-cat", "add-dog"]),
            atom("D*", "x", &["add-cat", "add-dog"]),
        ]);
        let out = extend_set(&set("x", &["K*", "D*"]), &CombinationPolicy::default(), &c).unwrap();
        let want = [
            RelationExpr::binary(Op::Or, RelationExpr::atom("K*"), RelationExpr::atom("D*")),
            RelationExpr::and(RelationExpr::atom("K*"), RelationExpr::atom("D*")),
        ];
        for w in want {
            assert!(out.relations.contains(&w), "missing {w}");
        }
    }

    #[test]
    fn extension_respects_size_cap() {
        let c = catalog(vec![
            atom("A", "x", &["add-cat"]),
            atom("B", "x", &["add-cat"]),
            atom("C", "x", &["add-cat"]),
        ]);
        let policy = CombinationPolicy {
            max_set_size: 5,
            extension_rounds: 3,
            ..Default::default()
        };
        let out = extend_set(&set("x", &["A", "B", "C"]), &policy, &c).unwrap();
        assert_eq!(out.relations.len(), 5);
    }

    #[test]
    fn split_examples() {
        let d = atom("D", "dog", &["add-dog", "pre-detector-false"]);
        let s = split_partial(&d, &DomainSet::from_tags(["pre-detector-false"])).unwrap();
        assert_eq!(
            s.relations,
            vec![RelationExpr::atom("D'"), RelationExpr::indef(RelationExpr::atom("D"))]
        );
        assert_eq!(s.restricted.unwrap().domain, DomainSet::from_tags(["add-dog"]));

        let s = split_partial(&d, &DomainSet::empty()).unwrap();
        assert_eq!(s.relations, vec![RelationExpr::def(RelationExpr::atom("D"))]);

        let s = split_partial(&d, &d.domain).unwrap();
        assert_eq!(s.relations, vec![RelationExpr::indef(RelationExpr::atom("D"))]);
        assert!(s.restricted.is_none());

        assert!(split_partial(&d, &DomainSet::from_tags(["add-cat"])).is_err());
    }

    #[test]
    fn selections_are_lexicographic_and_capped() {
        let sets = [set("b", &["B1", "B2"]), set("a", &["A1", "A2"])];
        let (all, total) = enumerate_selections(&sets, 10);
        assert_eq!(total, 4);
        assert_eq!(all.len(), 4);
        let firsts: Vec<(String, String)> = all
            .iter()
            .map(|s| (s.chosen["a"].to_string(), s.chosen["b"].to_string()))
            .collect();
        assert_eq!(firsts[0], ("atom(A1)".into(), "atom(B1)".into()));
        assert_eq!(firsts[1], ("atom(A1)".into(), "atom(B2)".into()));
        assert_eq!(firsts[2], ("atom(A2)".into(), "atom(B1)".into()));
        let (capped, total) = enumerate_selections(&sets, 3);
        assert_eq!(total, 4);
        assert_eq!(capped, all[..3].to_vec());
    }
}
