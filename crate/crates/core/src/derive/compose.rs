//! Walk the graph in topological order and assemble composites.

use std::collections::{BTreeMap, BTreeSet};

use crate::algebra::{Op, RelationExpr};
use crate::error::{Error, Result};
use crate::graph::PipelineGraph;
use crate::relation::Catalog;

use super::steps::domain_in;
use super::{BranchMode, CombinationPolicy, CompositeCandidate, ProvenanceStep, SelectionSet};

/// A binary tree over slot indices; leaves are filled in per instantiation.
#[derive(Debug, Clone)]
enum Tree {
    Leaf(usize),
    Node(Op, Box<Tree>, Box<Tree>),
}

impl Tree {
    fn instantiate(&self, fill: &dyn Fn(usize) -> RelationExpr) -> RelationExpr {
        match self {
            Tree::Leaf(i) => fill(*i),
            Tree::Node(op, l, r) => RelationExpr::binary(*op, l.instantiate(fill), r.instantiate(fill)),
        }
    }
}

/// Every unordered binary tree over `slots`, with each internal node labelled
/// by one of `ops`. At most `cap` trees are produced.
fn all_trees(slots: &[usize], ops: &[Op], cap: usize) -> Vec<Tree> {
    if slots.len() == 1 {
        return vec![Tree::Leaf(slots[0])];
    }
    let (first, rest) = slots.split_first().expect("non-empty");
    let mut out = Vec::new();
    // The left side always holds the first slot, so each split is seen once.
    for mask in 0u64..(1u64 << rest.len()) - 1 {
        let mut left = vec![*first];
        let mut right = Vec::new();
        for (k, s) in rest.iter().enumerate() {
            if mask & (1 << k) != 0 {
                left.push(*s);
            } else {
                right.push(*s);
            }
        }
        let lt = all_trees(&left, ops, cap);
        let rt = all_trees(&right, ops, cap);
        for l in &lt {
            for r in &rt {
                for &op in ops {
                    if out.len() >= cap {
                        return out;
                    }
                    out.push(Tree::Node(op, Box::new(l.clone()), Box::new(r.clone())));
                }
            }
        }
    }
    out
}

/// Join the relations of a branch group's members with each operator.
///
/// A group with a single branch is returned unchanged.
pub fn handle_branches(
    graph: &PipelineGraph,
    group: &str,
    branch_exprs: &[RelationExpr],
    ops: &[Op],
) -> Result<Vec<RelationExpr>> {
    let g = graph
        .branch_groups
        .get(group)
        .ok_or_else(|| Error::usage(format!("unknown branch group `{group}`")))?;
    if branch_exprs.is_empty() || branch_exprs.len() > g.members.len() {
        return Err(Error::usage(format!(
            "branch group `{group}` has {} branches but {} relations were given",
            g.members.len(),
            branch_exprs.len()
        )));
    }
    if branch_exprs.len() == 1 {
        return Ok(branch_exprs.to_vec());
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for &op in ops {
        let e = RelationExpr::fold(op, branch_exprs).expect("non-empty").simplify();
        if seen.insert(e.normal_form()) {
            out.push(e);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Slot {
    Vertex(String),
    Group(String),
}

struct Composer<'a> {
    graph: &'a PipelineGraph,
    selection: &'a SelectionSet,
    policy: &'a CombinationPolicy,
    position: BTreeMap<&'a str, usize>,
}

impl<'a> Composer<'a> {
    fn participates(&self, v: &str) -> bool {
        self.selection.chosen.contains_key(v)
    }

    /// Nearest participating ancestors, looking through vertices that carry
    /// no relation.
    fn relation_preds(&self, v: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = self.graph.predecessors(v).into_iter().collect();
        while let Some(p) = stack.pop() {
            if !seen.insert(p) {
                continue;
            }
            if self.participates(p) {
                out.insert(p.to_string());
            } else {
                stack.extend(self.graph.predecessors(p));
            }
        }
        out
    }

    fn relation(&self, v: &str) -> RelationExpr {
        self.selection.chosen[v].clone()
    }

    fn group_name(&self, v: &str) -> Option<String> {
        self.graph.group_of(v).map(|g| g.name.clone())
    }

    /// Consumers sharing a producer with `v`, closed over branch siblings and
    /// over consumers of branch members already in the cluster.
    fn cluster(
        &self,
        v: &str,
        preds: &BTreeMap<String, BTreeSet<String>>,
        done: &BTreeSet<String>,
    ) -> BTreeSet<String> {
        let own = &preds[v];
        let mut cluster: BTreeSet<String> = if own.is_empty() {
            BTreeSet::from([v.to_string()])
        } else {
            preds
                .iter()
                .filter(|(w, p)| !done.contains(*w) && !p.is_disjoint(own))
                .map(|(w, _)| w.clone())
                .collect()
        };
        loop {
            let mut next = cluster.clone();
            for w in &cluster {
                if let Some(g) = self.graph.group_of(w) {
                    next.extend(g.members.iter().filter(|m| self.participates(m)).cloned());
                }
            }
            let members: BTreeSet<String> = next
                .iter()
                .filter(|w| self.graph.group_of(w).is_some())
                .cloned()
                .collect();
            for (w, p) in preds {
                if !done.contains(w) && p.iter().any(|x| members.contains(x)) {
                    next.insert(w.clone());
                }
            }
            if next == cluster {
                return cluster;
            }
            cluster = next;
        }
    }

    fn slots(&self, cluster: &BTreeSet<String>) -> Vec<Slot> {
        let mut keyed: Vec<(usize, Slot)> = Vec::new();
        let mut groups_seen = BTreeSet::new();
        for w in cluster {
            let slot = match self.group_name(w) {
                Some(g) => {
                    if !groups_seen.insert(g.clone()) {
                        continue;
                    }
                    Slot::Group(g)
                }
                None => Slot::Vertex(w.clone()),
            };
            let pos = match &slot {
                Slot::Vertex(w) => self.position[w.as_str()],
                Slot::Group(g) => self.graph.branch_groups[g]
                    .members
                    .iter()
                    .filter(|m| cluster.contains(*m))
                    .map(|m| self.position[m.as_str()])
                    .min()
                    .expect("group has a member in the cluster"),
            };
            keyed.push((pos, slot));
        }
        keyed.sort_by_key(|(p, _)| *p);
        keyed.into_iter().map(|(_, s)| s).collect()
    }

    fn members_in(&self, group: &str, cluster: &BTreeSet<String>) -> Vec<String> {
        self.graph.branch_groups[group]
            .members
            .iter()
            .filter(|m| cluster.contains(*m))
            .cloned()
            .collect()
    }

    /// Alternatives for a cluster, each with a short description.
    fn cluster_alternatives(
        &self,
        cluster: &BTreeSet<String>,
    ) -> Result<(Vec<(RelationExpr, String)>, bool)> {
        let slots = self.slots(cluster);
        let idx: Vec<usize> = (0..slots.len()).collect();
        let cap = self.policy.max_candidates;
        let trees = all_trees(&idx, &self.policy.fanout_ops, cap);
        let mut truncated = trees.len() >= cap;
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let groups: Vec<String> = slots
            .iter()
            .filter_map(|s| match s {
                Slot::Group(g) => Some(g.clone()),
                Slot::Vertex(_) => None,
            })
            .collect();
        let mut push = |e: RelationExpr, note: String, out: &mut Vec<(RelationExpr, String)>| {
            let e = e.simplify();
            if seen.insert(e.normal_form()) {
                out.push((e, note));
            }
        };

        match self.policy.branch_mode {
            BranchMode::Joint => {
                let mut slot_alts: Vec<Vec<RelationExpr>> = Vec::new();
                for s in &slots {
                    slot_alts.push(match s {
                        Slot::Vertex(w) => vec![self.relation(w)],
                        Slot::Group(g) => {
                            let rels: Vec<RelationExpr> = self
                                .members_in(g, cluster)
                                .iter()
                                .map(|m| self.relation(m))
                                .collect();
                            handle_branches(self.graph, g, &rels, &self.policy.branch_ops)?
                        }
                    });
                }
                for t in &trees {
                    for pick in product(&slot_alts.iter().map(Vec::len).collect::<Vec<_>>()) {
                        if out.len() >= cap {
                            truncated = true;
                            return Ok((out, truncated));
                        }
                        let e = t.instantiate(&|i| slot_alts[i][pick[i]].clone());
                        let note = if groups.is_empty() {
                            "fan-out".to_string()
                        } else {
                            format!("joint branches {}", groups.join(", "))
                        };
                        push(e, note, &mut out);
                    }
                }
            }
            BranchMode::PerBranch => {
                let member_lists: Vec<Vec<String>> =
                    groups.iter().map(|g| self.members_in(g, cluster)).collect();
                let assignments: Vec<Vec<usize>> =
                    product(&member_lists.iter().map(Vec::len).collect::<Vec<_>>());
                for t in &trees {
                    let instances: Vec<RelationExpr> = assignments
                        .iter()
                        .map(|assign| {
                            let fill = |i: usize| match &slots[i] {
                                Slot::Group(g) => {
                                    let gi = groups.iter().position(|x| x == g).expect("group");
                                    self.relation(&member_lists[gi][assign[gi]])
                                }
                                Slot::Vertex(w) => {
                                    if self.off_branch(w, &member_lists, assign) {
                                        RelationExpr::indef(strip_def(self.relation(w)))
                                    } else {
                                        self.relation(w)
                                    }
                                }
                            };
                            t.instantiate(&fill).simplify()
                        })
                        .collect();
                    let combined: Vec<RelationExpr> = if instances.len() == 1 {
                        instances
                    } else {
                        self.policy
                            .branch_ops
                            .iter()
                            .map(|&op| RelationExpr::fold(op, &instances).expect("non-empty"))
                            .collect()
                    };
                    for e in combined {
                        if out.len() >= cap {
                            return Ok((out, true));
                        }
                        let note = if groups.is_empty() {
                            "fan-out".to_string()
                        } else {
                            format!("per-branch {}", groups.join(", "))
                        };
                        push(e, note, &mut out);
                    }
                }
            }
        }
        Ok((out, truncated))
    }

    /// True when `w` only runs on a branch other than the assigned one.
    fn off_branch(&self, w: &str, member_lists: &[Vec<String>], assign: &[usize]) -> bool {
        member_lists.iter().zip(assign).any(|(members, &a)| {
            let below = |m: &str| {
                self.graph
                    .descendants(m)
                    .map(|d| d.contains(w))
                    .unwrap_or(false)
            };
            !below(&members[a]) && members.iter().any(|m| below(m))
        })
    }
}

fn strip_def(e: RelationExpr) -> RelationExpr {
    match e {
        RelationExpr::Def(inner) => *inner,
        other => other,
    }
}

/// All index tuples `t` with `t[i] < sizes[i]`, last position fastest.
fn product(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect();
    }
    out
}

/// Compose one selection into candidate composites.
///
/// Returns the candidates (domains not yet filtered) and whether a cap cut
/// the enumeration short.
pub fn compose(
    selection: &SelectionSet,
    graph: &PipelineGraph,
    catalog: &Catalog,
    policy: &CombinationPolicy,
) -> Result<(Vec<CompositeCandidate>, bool)> {
    let order = graph.topological_order()?;
    let composer = Composer {
        graph,
        selection,
        policy,
        position: order.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect(),
    };
    let preds: BTreeMap<String, BTreeSet<String>> = order
        .iter()
        .filter(|v| composer.participates(v))
        .map(|v| (v.clone(), composer.relation_preds(v)))
        .collect();

    let mut partials: Vec<(RelationExpr, Vec<ProvenanceStep>)> =
        vec![(RelationExpr::ConstTrue, Vec::new())];
    let mut truncated = false;
    let mut done: BTreeSet<String> = BTreeSet::new();

    for v in order.iter().filter(|v| composer.participates(v)) {
        if done.contains(v) {
            continue;
        }
        let cluster = composer.cluster(v, &preds, &done);
        let simple = cluster.len() == 1 && graph.group_of(v).is_none();
        let alternatives: Vec<(RelationExpr, String)> = if simple {
            vec![(composer.relation(v), format!("{v} extends the chain"))]
        } else {
            let (alts, cut) = composer.cluster_alternatives(&cluster)?;
            truncated |= cut;
            alts
        };
        done.extend(cluster.iter().cloned());

        let step = if simple { 5 } else if alternatives.iter().any(|(_, n)| n != "fan-out") { 6 } else { 5 };
        let mut next = Vec::new();
        'outer: for (c, prov) in &partials {
            for (alt, note) in &alternatives {
                if next.len() >= policy.max_candidates {
                    truncated = true;
                    break 'outer;
                }
                let mut p = prov.clone();
                let members: Vec<&str> = cluster.iter().map(String::as_str).collect();
                p.push(ProvenanceStep {
                    step,
                    choice: if simple {
                        note.clone()
                    } else {
                        format!("{note} over [{}]: {}", members.join(", "), alt)
                    },
                });
                next.push((RelationExpr::and(c.clone(), alt.clone()).simplify(), p));
            }
        }
        partials = next;
    }

    for cross in catalog.cross_atoms() {
        for (c, prov) in &mut partials {
            *c = RelationExpr::and(c.clone(), RelationExpr::atom(&cross.id)).simplify();
            prov.push(ProvenanceStep {
                step: 5,
                choice: format!("cross-vertex relation {} appended", cross.id),
            });
        }
    }

    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (expr, provenance) in partials {
        if !seen.insert(expr.normal_form()) {
            continue;
        }
        let domain = domain_in(catalog, &expr)?;
        out.push(CompositeCandidate {
            expr,
            domain,
            provenance,
        });
    }
    Ok((out, truncated))
}
