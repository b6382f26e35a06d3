//! Evaluating composites on recorded traces and localizing failures.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::algebra::{RelationExpr, TriValue};
use crate::error::{Error, Result};
use crate::graph::{PipelineGraph, PortRef, Subsystem};
use crate::relation::{AtomBinding, Catalog, RelationAtom, VerdictInput};

use super::series::{ExecutionTrace, TestGroup, VertexStatus};

/// Value of one atom on one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomOutcome {
    pub value: TriValue,
    /// FALSE only because the atom's branch was never taken; such atoms do
    /// not point at a fault.
    pub branch_not_taken: bool,
    /// Per adjacent pair, whether it violates the relation (when the
    /// relation has a per-pair reading and was computed).
    pub pair_failures: Option<Vec<bool>>,
    pub note: String,
}

impl AtomOutcome {
    fn undecided(value: TriValue, note: impl Into<String>) -> Self {
        AtomOutcome {
            value,
            branch_not_taken: false,
            pair_failures: None,
            note: note.into(),
        }
    }
}

fn all_skipped(trace: &ExecutionTrace, v: &str) -> bool {
    (0..trace.series_len).all(|k| trace.status(k, v) == Some(VertexStatus::Skipped))
}

/// Evaluate one atom on a recorded series.
///
/// Out-of-domain classes are reported first. A relation of a branch member
/// whose branch was skipped on every test while a sibling ran is FALSE: the
/// branch's relation only holds when the branch is taken. Any other read
/// vertex that did not execute on some test leaves the atom not computed.
pub fn eval_atom(
    atom: &RelationAtom,
    graph: &PipelineGraph,
    group: &TestGroup,
    trace: &ExecutionTrace,
) -> Result<AtomOutcome> {
    if !atom.domain.contains(&group.class) {
        return Ok(AtomOutcome::undecided(TriValue::OUT_OF_DOMAIN, "class outside domain"));
    }
    if trace.series_len < atom.arity {
        return Ok(AtomOutcome::undecided(
            TriValue::NOT_COMPUTED,
            format!("series of {} is shorter than arity {}", trace.series_len, atom.arity),
        ));
    }
    let reads = atom.binding.read_vertices();
    if let AtomBinding::Vertex(v) = &atom.binding {
        if let Some(g) = graph.group_of(v) {
            let sibling_ran = (0..trace.series_len).all(|k| {
                g.members
                    .iter()
                    .any(|m| m != v && trace.status(k, m) == Some(VertexStatus::Executed))
            });
            if all_skipped(trace, v) && sibling_ran {
                return Ok(AtomOutcome {
                    value: TriValue::False,
                    branch_not_taken: true,
                    pair_failures: None,
                    note: "branch not taken".into(),
                });
            }
        }
    }
    for v in &reads {
        for k in 0..trace.series_len {
            match trace.status(k, v) {
                Some(VertexStatus::Executed) => {}
                Some(s) => {
                    return Ok(AtomOutcome::undecided(
                        TriValue::NOT_COMPUTED,
                        format!("`{v}` {s:?} on test {k}").to_lowercase(),
                    ))
                }
                None => return Err(Error::usage(format!("trace has no record of `{v}` on test {k}"))),
            }
        }
    }

    let mut outputs = Vec::with_capacity(trace.series_len);
    for k in 0..trace.series_len {
        let mut files = BTreeMap::new();
        for v in &reads {
            for port in &graph.vertex(v)?.outputs {
                let p = PortRef::new(*v, port);
                let f = trace
                    .output(k, &p)
                    .ok_or_else(|| Error::usage(format!("trace lacks output `{p}` on test {k}")))?;
                files.insert(p, f);
            }
        }
        outputs.push(files);
    }
    let input = VerdictInput {
        atom,
        outputs,
        class: &group.class,
        metadata: &group.metadata,
    };
    match atom.verdict.check(&input) {
        Ok(value) => {
            let pair_failures = if value.is_defined() {
                atom.verdict.pair_failures(&input).unwrap_or(None)
            } else {
                None
            };
            Ok(AtomOutcome {
                value,
                branch_not_taken: false,
                pair_failures,
                note: String::new(),
            })
        }
        Err(e) => Ok(AtomOutcome::undecided(TriValue::NOT_COMPUTED, e.to_string())),
    }
}

/// Outcome of a composite on one group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupVerdict {
    pub group_id: String,
    pub class: String,
    pub composite_value: TriValue,
    pub atom_values: BTreeMap<String, TriValue>,
    /// Where the fault must be; empty unless the composite is FALSE.
    pub suspects: Subsystem,
    /// Atoms that are FALSE only because their branch was never taken.
    #[serde(skip_serializing_if = "BTreeSet::is_empty")]
    pub branch_not_taken: BTreeSet<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub pair_failures: BTreeMap<String, Vec<bool>>,
}

fn ancestors_of_reads(graph: &PipelineGraph, atom: &RelationAtom, into: &mut Subsystem) -> Result<()> {
    for v in atom.binding.read_vertices() {
        into.extend(&graph.ancestors(v)?);
    }
    Ok(())
}

/// Evaluate `expr` on one recorded group and localize a failure.
pub fn evaluate(
    expr: &RelationExpr,
    catalog: &Catalog,
    graph: &PipelineGraph,
    group: &TestGroup,
    trace: &ExecutionTrace,
) -> Result<GroupVerdict> {
    let domain = expr.domain_of(catalog.universe(), &|id| catalog.domain(id))?;
    if !domain.contains(&group.class) {
        return Err(Error::usage(format!(
            "class `{}` of group `{}` is outside the composite's domain {domain}",
            group.class, group.id
        )));
    }
    let mut outcomes: BTreeMap<String, AtomOutcome> = BTreeMap::new();
    for id in expr.atoms() {
        let atom = catalog.require(id)?;
        outcomes.insert(id.to_string(), eval_atom(atom, graph, group, trace)?);
    }
    let value = expr.eval_with(&mut |id: &str| {
        outcomes
            .get(id)
            .map(|o| o.value)
            .ok_or_else(|| Error::usage(format!("unknown relation `{id}`")))
    })?;

    let mut suspects = Subsystem::default();
    if value == TriValue::False {
        let mut any = false;
        for (id, o) in &outcomes {
            if o.value == TriValue::False && !o.branch_not_taken {
                ancestors_of_reads(graph, catalog.require(id)?, &mut suspects)?;
                any = true;
            }
        }
        if !any {
            // falsity came from xor / indef structure: every atom is implicated
            for id in outcomes.keys() {
                ancestors_of_reads(graph, catalog.require(id)?, &mut suspects)?;
            }
        }
    }

    Ok(GroupVerdict {
        group_id: group.id.clone(),
        class: group.class.clone(),
        composite_value: value,
        atom_values: outcomes.iter().map(|(k, o)| (k.clone(), o.value)).collect(),
        suspects,
        branch_not_taken: outcomes
            .iter()
            .filter(|(_, o)| o.branch_not_taken)
            .map(|(k, _)| k.clone())
            .collect(),
        pair_failures: outcomes
            .into_iter()
            .filter_map(|(k, o)| o.pair_failures.map(|p| (k, p)))
            .collect(),
    })
}

/// Fraction of adjacent pairs `(j, j+1)` whose outputs are not nested.
pub fn failures_metric<T: Ord>(series: &[BTreeSet<T>]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::usage(format!(
            "the failures metric needs at least two outputs, got {}",
            series.len()
        )));
    }
    let pairs: Vec<bool> = series.windows(2).map(|w| !w[0].is_subset(&w[1])).collect();
    pair_fraction(&pairs)
}

/// Fraction of `true` entries among per-pair violation flags.
pub fn pair_fraction(pairs: &[bool]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::usage("no adjacent pairs to measure"));
    }
    Ok(pairs.iter().filter(|b| **b).count() as f64 / pairs.len() as f64)
}
