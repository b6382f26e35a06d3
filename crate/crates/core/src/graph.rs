//! The system under test as a DAG of components.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::{DomainSet, RelationExpr};
use crate::error::{Error, Result};
use crate::relation::{AtomBinding, Catalog};

/// `vertex.port`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PortRef {
    pub vertex: String,
    pub port: String,
}

impl PortRef {
    pub fn new(vertex: impl Into<String>, port: impl Into<String>) -> Self {
        Self {
            vertex: vertex.into(),
            port: port.into(),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.vertex, self.port)
    }
}

impl FromStr for PortRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.rsplit_once('.') {
            Some((v, p)) if !v.is_empty() && !p.is_empty() => Ok(PortRef::new(v, p)),
            _ => Err(Error::config(format!("`{s}` is not of the form vertex.port"))),
        }
    }
}

impl TryFrom<String> for PortRef {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PortRef> for String {
    fn from(p: PortRef) -> String {
        p.to_string()
    }
}

/// How a vertex is executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecutorRef {
    /// A function registered in the built-in registry, with string parameters.
    Builtin {
        name: String,
        params: BTreeMap<String, String>,
    },
    /// A shell command template; see `harness::exec` for placeholders.
    Command(String),
}

impl ExecutorRef {
    pub fn builtin(name: impl Into<String>) -> Self {
        ExecutorRef::Builtin {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSpec {
    pub id: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub executor: ExecutorRef,
    pub branch_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: PortRef,
    pub to: PortRef,
}

impl FromStr for Edge {
    type Err = Error;

    /// `"a.out -> b.in"`
    fn from_str(s: &str) -> Result<Self> {
        let (l, r) = s
            .split_once("->")
            .ok_or_else(|| Error::config(format!("edge `{s}` must look like `a.out -> b.in`")))?;
        Ok(Edge {
            from: l.parse()?,
            to: r.parse()?,
        })
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

/// Mutually exclusive execution branches. Exactly one member runs per test,
/// chosen by the trimmed contents of the guard port's file via `select`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchGroup {
    pub name: String,
    pub members: Vec<String>,
    pub guard: PortRef,
    pub select: BTreeMap<String, String>,
    /// Input classes on which a member is known not to run. Used to split the
    /// relations downstream of that member.
    pub not_taken: BTreeMap<String, DomainSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    Empty,
    DuplicateVertex(String),
    NoOutputs(String),
    UnknownVertex { context: String, vertex: String },
    UnknownPort { context: String, port: PortRef },
    Cycle(Vec<String>),
    FanIn(PortRef),
    Unconnected(PortRef),
    SystemInputFed(PortRef),
    BranchSignature { group: String, vertex: String },
    BranchMembership { group: String, vertex: String },
    BranchSelect { group: String, member: String },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::Empty => f.write_str("graph has no vertices"),
            GraphError::DuplicateVertex(v) => write!(f, "duplicate vertex `{v}`"),
            GraphError::NoOutputs(v) => write!(f, "vertex `{v}` declares no output ports"),
            GraphError::UnknownVertex { context, vertex } => {
                write!(f, "{context}: unknown vertex `{vertex}`")
            }
            GraphError::UnknownPort { context, port } => write!(f, "{context}: unknown port `{port}`"),
            GraphError::Cycle(vs) => write!(f, "cycle detected among [{}]", vs.join(", ")),
            GraphError::FanIn(p) => write!(f, "fan-in on port `{p}`: more than one incoming edge"),
            GraphError::Unconnected(p) => {
                write!(f, "input port `{p}` has no incoming edge and is not a system input")
            }
            GraphError::SystemInputFed(p) => {
                write!(f, "system input `{p}` also has an incoming edge")
            }
            GraphError::BranchSignature { group, vertex } => write!(
                f,
                "branch group `{group}`: vertex `{vertex}` has a different port signature"
            ),
            GraphError::BranchMembership { group, vertex } => write!(
                f,
                "branch group `{group}`: vertex `{vertex}` does not declare membership"
            ),
            GraphError::BranchSelect { group, member } => write!(
                f,
                "branch group `{group}`: `{member}` is never selected by the guard"
            ),
        }
    }
}

/// A set of vertices together with all edges between them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subsystem {
    pub vertex_ids: BTreeSet<String>,
}

impl Subsystem {
    pub fn contains(&self, v: &str) -> bool {
        self.vertex_ids.contains(v)
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    pub fn extend(&mut self, other: &Subsystem) {
        self.vertex_ids.extend(other.vertex_ids.iter().cloned());
    }
}

impl<S: Into<String>> FromIterator<S> for Subsystem {
    fn from_iter<T: IntoIterator<Item = S>>(iter: T) -> Self {
        Subsystem {
            vertex_ids: iter.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineGraph {
    pub vertices: BTreeMap<String, VertexSpec>,
    pub edges: Vec<Edge>,
    pub system_inputs: Vec<PortRef>,
    pub system_outputs: Vec<PortRef>,
    pub branch_groups: BTreeMap<String, BranchGroup>,
}

impl PipelineGraph {
    pub fn add_vertex(&mut self, v: VertexSpec) -> Result<()> {
        if self.vertices.contains_key(&v.id) {
            return Err(Error::config(GraphError::DuplicateVertex(v.id).to_string()));
        }
        self.vertices.insert(v.id.clone(), v);
        Ok(())
    }

    pub fn vertex(&self, id: &str) -> Result<&VertexSpec> {
        self.vertices
            .get(id)
            .ok_or_else(|| Error::usage(format!("unknown vertex `{id}`")))
    }

    /// Every invariant violation; `Ok` iff there are none.
    pub fn validate(&self) -> std::result::Result<(), Vec<GraphError>> {
        let mut errs = Vec::new();
        if self.vertices.is_empty() {
            errs.push(GraphError::Empty);
        }
        for v in self.vertices.values() {
            if v.outputs.is_empty() {
                errs.push(GraphError::NoOutputs(v.id.clone()));
            }
        }

        let port_exists = |p: &PortRef, input: bool| {
            self.vertices.get(&p.vertex).is_some_and(|v| {
                let ports = if input { &v.inputs } else { &v.outputs };
                ports.iter().any(|x| x == &p.port)
            })
        };
        let check_port = |errs: &mut Vec<GraphError>, ctx: String, p: &PortRef, input: bool| {
            if !self.vertices.contains_key(&p.vertex) {
                errs.push(GraphError::UnknownVertex {
                    context: ctx,
                    vertex: p.vertex.clone(),
                });
            } else if !port_exists(p, input) {
                errs.push(GraphError::UnknownPort {
                    context: ctx,
                    port: p.clone(),
                });
            }
        };

        let mut incoming: BTreeMap<&PortRef, usize> = BTreeMap::new();
        for e in &self.edges {
            check_port(&mut errs, format!("edge `{e}`"), &e.from, false);
            check_port(&mut errs, format!("edge `{e}`"), &e.to, true);
            *incoming.entry(&e.to).or_default() += 1;
        }
        for (p, n) in &incoming {
            if *n > 1 {
                errs.push(GraphError::FanIn((*p).clone()));
            }
        }
        let sys_in: BTreeSet<&PortRef> = self.system_inputs.iter().collect();
        for p in &self.system_inputs {
            check_port(&mut errs, "system input".into(), p, true);
            if incoming.contains_key(p) {
                errs.push(GraphError::SystemInputFed(p.clone()));
            }
        }
        for p in &self.system_outputs {
            check_port(&mut errs, "system output".into(), p, false);
        }
        for v in self.vertices.values() {
            for port in &v.inputs {
                let p = PortRef::new(&v.id, port);
                if !incoming.contains_key(&p) && !sys_in.contains(&p) {
                    errs.push(GraphError::Unconnected(p));
                }
            }
        }

        for g in self.branch_groups.values() {
            check_port(&mut errs, format!("guard of branch group `{}`", g.name), &g.guard, false);
            let mut signature: Option<(&Vec<String>, &Vec<String>)> = None;
            for m in &g.members {
                let Some(v) = self.vertices.get(m) else {
                    errs.push(GraphError::UnknownVertex {
                        context: format!("branch group `{}`", g.name),
                        vertex: m.clone(),
                    });
                    continue;
                };
                if v.branch_group.as_deref() != Some(g.name.as_str()) {
                    errs.push(GraphError::BranchMembership {
                        group: g.name.clone(),
                        vertex: m.clone(),
                    });
                }
                match signature {
                    None => signature = Some((&v.inputs, &v.outputs)),
                    Some((i, o)) if i != &v.inputs || o != &v.outputs => {
                        errs.push(GraphError::BranchSignature {
                            group: g.name.clone(),
                            vertex: m.clone(),
                        })
                    }
                    _ => {}
                }
                if !g.select.values().any(|x| x == m) {
                    errs.push(GraphError::BranchSelect {
                        group: g.name.clone(),
                        member: m.clone(),
                    });
                }
            }
            for target in g.select.values() {
                if !g.members.contains(target) {
                    errs.push(GraphError::UnknownVertex {
                        context: format!("select of branch group `{}`", g.name),
                        vertex: target.clone(),
                    });
                }
            }
        }
        for v in self.vertices.values() {
            if let Some(g) = &v.branch_group {
                let listed = self
                    .branch_groups
                    .get(g)
                    .is_some_and(|bg| bg.members.contains(&v.id));
                if !listed {
                    errs.push(GraphError::BranchMembership {
                        group: g.clone(),
                        vertex: v.id.clone(),
                    });
                }
            }
        }

        if let Err(cycle) = self.kahn() {
            errs.push(GraphError::Cycle(cycle));
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Validate, folding all violations into one configuration error.
    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().map_err(|errs| {
            Error::config(
                errs.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })
    }

    /// Distinct source vertices of edges into `v`, plus the guard source when
    /// `v` is a branch member.
    pub fn predecessors(&self, v: &str) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self
            .edges
            .iter()
            .filter(|e| e.to.vertex == v)
            .map(|e| e.from.vertex.as_str())
            .collect();
        if let Some(g) = self.group_of(v) {
            if self.vertices.contains_key(&g.guard.vertex) {
                out.insert(g.guard.vertex.as_str());
            }
        }
        out
    }

    pub fn successors(&self, v: &str) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self
            .edges
            .iter()
            .filter(|e| e.from.vertex == v)
            .map(|e| e.to.vertex.as_str())
            .collect();
        for g in self.branch_groups.values() {
            if g.guard.vertex == v {
                out.extend(g.members.iter().map(String::as_str));
            }
        }
        out
    }

    pub fn group_of(&self, v: &str) -> Option<&BranchGroup> {
        let name = self.vertices.get(v)?.branch_group.as_ref()?;
        self.branch_groups.get(name)
    }

    fn kahn(&self) -> std::result::Result<Vec<String>, Vec<String>> {
        let mut indeg: BTreeMap<&str, usize> =
            self.vertices.keys().map(|k| (k.as_str(), 0)).collect();
        let mut succ: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for v in self.vertices.keys() {
            let s: BTreeSet<&str> = self
                .successors(v)
                .into_iter()
                .filter(|x| self.vertices.contains_key(*x))
                .collect();
            for t in &s {
                *indeg.get_mut(t).expect("known vertex") += 1;
            }
            succ.insert(v.as_str(), s);
        }
        let mut ready: BTreeSet<&str> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(v, _)| *v)
            .collect();
        let mut order = Vec::with_capacity(self.vertices.len());
        while let Some(v) = ready.pop_first() {
            order.push(v.to_string());
            for t in &succ[v] {
                let d = indeg.get_mut(t).expect("known vertex");
                *d -= 1;
                if *d == 0 {
                    ready.insert(t);
                }
            }
        }
        if order.len() == self.vertices.len() {
            Ok(order)
        } else {
            let placed: BTreeSet<&str> = order.iter().map(String::as_str).collect();
            Err(self
                .vertices
                .keys()
                .filter(|v| !placed.contains(v.as_str()))
                .cloned()
                .collect())
        }
    }

    /// Kahn's algorithm with ties broken by lexicographic vertex id.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        self.validate().map_err(|errs| {
            Error::usage(format!(
                "graph is invalid: {}",
                errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            ))
        })?;
        self.kahn()
            .map_err(|c| Error::usage(GraphError::Cycle(c).to_string()))
    }

    /// `v` together with every vertex that has a directed path to `v`.
    pub fn ancestors(&self, v: &str) -> Result<Subsystem> {
        self.vertex(v)?;
        Ok(self.reach(v, |g, x| g.predecessors(x)))
    }

    /// `v` together with every vertex reachable from `v`.
    pub fn descendants(&self, v: &str) -> Result<Subsystem> {
        self.vertex(v)?;
        Ok(self.reach(v, |g, x| g.successors(x)))
    }

    fn reach<'a>(
        &'a self,
        start: &str,
        next: impl Fn(&'a Self, &str) -> BTreeSet<&'a str>,
    ) -> Subsystem {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut queue = VecDeque::from([start.to_string()]);
        while let Some(x) = queue.pop_front() {
            if !seen.insert(x.clone()) {
                continue;
            }
            for n in next(self, &x) {
                if !seen.contains(n) {
                    queue.push_back(n.to_string());
                }
            }
        }
        Subsystem { vertex_ids: seen }
    }

    pub fn full_subsystem(&self) -> Subsystem {
        self.vertices.keys().cloned().collect()
    }
}

/// Relation of a subsystem: atoms bound outside `sub` become constant true.
///
/// Cross-vertex atoms survive only when every vertex they read lies in `sub`.
pub fn subsystem_expr(composite: &RelationExpr, sub: &Subsystem, catalog: &Catalog) -> RelationExpr {
    composite
        .map_atoms(&mut |id| {
            let keep = match catalog.get(id).map(|a| &a.binding) {
                Some(AtomBinding::Vertex(v)) => sub.contains(v),
                Some(AtomBinding::Cross(reads)) => reads.iter().all(|v| sub.contains(v)),
                None => false,
            };
            if keep {
                RelationExpr::atom(id)
            } else {
                RelationExpr::ConstTrue
            }
        })
        .simplify()
}
