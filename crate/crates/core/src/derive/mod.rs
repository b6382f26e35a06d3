//! From per-vertex relation sets to composite relations with non-empty
//! domains.
//!
//! The pipeline, in order:
//! 1. [`extend_set`] grows each vertex's set with pairwise combinations;
//! 2. [`mark_undefined`] wraps relations that may be undefined in `def` and
//!    splits those with known undefined classes via [`split_partial`];
//! 3. [`enumerate_selections`] picks one relation per vertex;
//! 4. [`propagate_def`] wraps relations downstream of partial ones;
//! 5. and 6. [`compose`] walks the graph, joining consumers of a shared
//!    producer and exclusive branches;
//! 7. candidates with empty domains are dropped, and selections that yield
//!    none are reported.

mod compose;
mod policy;
mod steps;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::algebra::{DomainSet, RelationExpr};
use crate::error::{Error, Result};
use crate::graph::PipelineGraph;
use crate::relation::Catalog;

pub use compose::{compose, handle_branches};
pub use policy::{BranchMode, CombinationPolicy};
pub use steps::{
    enumerate_selections, extend_set, known_undefined_classes, mark_undefined, propagate_def,
    restricted_id, split_partial, Split,
};

/// Candidate relations for one vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSet {
    pub vertex: String,
    pub relations: Vec<RelationExpr>,
}

/// One chosen relation per participating vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionSet {
    pub chosen: BTreeMap<String, RelationExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProvenanceStep {
    pub step: u8,
    pub choice: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeCandidate {
    pub expr: RelationExpr,
    pub domain: DomainSet,
    pub provenance: Vec<ProvenanceStep>,
}

/// A selection whose composites all had empty domains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExhaustedSelection {
    pub chosen: BTreeMap<String, RelationExpr>,
    pub candidates_tried: usize,
}

#[derive(Debug, Clone)]
pub struct Derivation {
    pub candidates: Vec<CompositeCandidate>,
    /// The input catalog plus any restricted atoms created by splitting.
    pub catalog: Catalog,
    /// Relation sets after extension and definedness rewriting.
    pub sets: Vec<RelationSet>,
    pub total_selections: u128,
    pub selections_examined: usize,
    pub exhausted: Vec<ExhaustedSelection>,
    /// Some enumeration hit a policy cap.
    pub truncated: bool,
}

impl Derivation {
    /// Index of the candidate equal to `expr` up to canonical ordering.
    pub fn position_of(&self, expr: &RelationExpr) -> Option<usize> {
        let key = expr.normal_form();
        self.candidates.iter().position(|c| c.expr.normal_form() == key)
    }
}

/// One set per vertex carrying at least one vertex-bound relation, in
/// topological order. Relations with empty domains are left out.
pub fn relation_sets(graph: &PipelineGraph, catalog: &Catalog) -> Result<Vec<RelationSet>> {
    let mut out = Vec::new();
    for v in graph.topological_order()? {
        let relations: Vec<RelationExpr> = catalog
            .for_vertex(&v)
            .filter(|a| !a.domain.is_empty())
            .map(|a| RelationExpr::atom(&a.id))
            .collect();
        if !relations.is_empty() {
            out.push(RelationSet { vertex: v, relations });
        }
    }
    Ok(out)
}

/// Run every derivation step over the relations declared in `catalog`.
pub fn derive(graph: &PipelineGraph, catalog: &Catalog, policy: &CombinationPolicy) -> Result<Derivation> {
    graph.ensure_valid()?;
    catalog.check_bindings(graph)?;
    let sets = relation_sets(graph, catalog)?;
    derive_from_sets(graph, catalog, &sets, policy)
}

/// Like [`derive`], starting from explicit relation sets.
pub fn derive_from_sets(
    graph: &PipelineGraph,
    catalog: &Catalog,
    sets: &[RelationSet],
    policy: &CombinationPolicy,
) -> Result<Derivation> {
    graph.ensure_valid()?;
    if sets.is_empty() {
        return Err(Error::config("no vertex carries a relation; nothing to derive"));
    }
    if policy.max_candidates == 0 || policy.max_selections == 0 {
        return Err(Error::usage("policy caps must be at least 1"));
    }
    for s in sets {
        graph.vertex(&s.vertex)?;
        if s.relations.is_empty() {
            return Err(Error::usage(format!("relation set of `{}` is empty", s.vertex)));
        }
    }

    let mut catalog = catalog.clone();
    let mut prepared = Vec::with_capacity(sets.len());
    for s in sets {
        let extended = extend_set(s, policy, &catalog)?;
        prepared.push(mark_undefined(&extended, graph, &mut catalog)?);
    }

    let (selections, total) = enumerate_selections(&prepared, policy.max_selections);
    let mut truncated = total > selections.len() as u128;
    let mut candidates = Vec::new();
    let mut seen = BTreeSet::new();
    let mut exhausted = Vec::new();

    for sel in &selections {
        let sel = propagate_def(sel, graph)?;
        let (composed, cut) = compose(&sel, graph, &catalog, policy)?;
        truncated |= cut;
        let tried = composed.len();
        let mut kept = 0;
        for mut c in composed {
            if c.domain.is_empty() {
                continue;
            }
            kept += 1;
            if candidates.len() >= policy.max_candidates {
                truncated = true;
                continue;
            }
            if seen.insert(c.expr.normal_form()) {
                let choice = sel
                    .chosen
                    .iter()
                    .map(|(v, r)| format!("{v}: {r}"))
                    .collect::<Vec<_>>()
                    .join("; ");
                c.provenance.insert(0, ProvenanceStep { step: 3, choice });
                candidates.push(c);
            }
        }
        if kept == 0 {
            exhausted.push(ExhaustedSelection {
                chosen: sel.chosen.clone(),
                candidates_tried: tried,
            });
        }
    }

    Ok(Derivation {
        candidates,
        catalog,
        sets: prepared,
        total_selections: total,
        selections_examined: selections.len(),
        exhausted,
        truncated,
    })
}
