//! Per-component metamorphic relations and the catalog that holds them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use crate::algebra::{is_ident_char, DomainSet, TriValue};
use crate::error::{Error, Result};
use crate::graph::{PipelineGraph, PortRef};

/// Which outputs a relation reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtomBinding {
    /// The outputs of one vertex.
    Vertex(String),
    /// The outputs of several vertices at once. Cross atoms are never combined
    /// with other relations; they are conjoined onto every composite.
    Cross(Vec<String>),
}

impl AtomBinding {
    pub fn read_vertices(&self) -> Vec<&str> {
        match self {
            AtomBinding::Vertex(v) => vec![v.as_str()],
            AtomBinding::Cross(vs) => vs.iter().map(String::as_str).collect(),
        }
    }
}

/// What a verdict sees: every output file of the vertices it reads, per test,
/// in series order.
pub struct VerdictInput<'a> {
    pub atom: &'a RelationAtom,
    pub outputs: Vec<BTreeMap<PortRef, PathBuf>>,
    /// Input class of the test group.
    pub class: &'a str,
    pub metadata: &'a BTreeMap<String, String>,
}

impl VerdictInput<'_> {
    /// Path of `port` on test `test`.
    pub fn file(&self, test: usize, port: &PortRef) -> Result<&PathBuf> {
        self.outputs
            .get(test)
            .and_then(|m| m.get(port))
            .ok_or_else(|| Error::usage(format!("no output `{port}` for test {test}")))
    }

    /// Path of `vertex.port` on test `test`.
    pub fn vertex_file(&self, test: usize, vertex: &str, port: &str) -> Result<&PathBuf> {
        self.file(test, &PortRef::new(vertex, port))
    }

    pub fn series_len(&self) -> usize {
        self.outputs.len()
    }
}

/// The executable check behind a relation.
pub trait Verdict: Send + Sync {
    /// TRUE if the relation holds over the whole series, FALSE if violated.
    /// NOT_COMPUTED means the outputs could not be judged.
    fn check(&self, input: &VerdictInput<'_>) -> Result<TriValue>;

    /// Per adjacent pair `(j, j+1)`, whether the pair violates the relation.
    /// `None` when the relation has no per-pair reading.
    fn pair_failures(&self, _input: &VerdictInput<'_>) -> Result<Option<Vec<bool>>> {
        Ok(None)
    }
}

/// A verdict from a plain function, handy for tests and small demos.
pub struct FnVerdict<F>(pub F);

impl<F> Verdict for FnVerdict<F>
where
    F: Fn(&VerdictInput<'_>) -> Result<TriValue> + Send + Sync,
{
    fn check(&self, input: &VerdictInput<'_>) -> Result<TriValue> {
        (self.0)(input)
    }
}

/// A relation checked pair by pair: it holds when every adjacent pair
/// `(j, j+1)` passes.
pub struct PairVerdict<F>(pub F);

impl<F> Verdict for PairVerdict<F>
where
    F: Fn(&VerdictInput<'_>, usize) -> Result<bool> + Send + Sync,
{
    fn check(&self, input: &VerdictInput<'_>) -> Result<TriValue> {
        let failures = self.pair_failures(input)?.unwrap_or_default();
        Ok(TriValue::from_bool(!failures.iter().any(|f| *f)))
    }

    fn pair_failures(&self, input: &VerdictInput<'_>) -> Result<Option<Vec<bool>>> {
        let n = input.series_len();
        let mut out = Vec::with_capacity(n.saturating_sub(1));
        for j in 0..n.saturating_sub(1) {
            out.push(!(self.0)(input, j)?);
        }
        Ok(Some(out))
    }
}

#[derive(Clone)]
pub struct RelationAtom {
    pub id: String,
    pub binding: AtomBinding,
    pub domain: DomainSet,
    /// Minimum number of executions the relation compares.
    pub arity: usize,
    pub verdict: Arc<dyn Verdict>,
    /// The relation may be inapplicable to some inputs of its domain, so it
    /// is wrapped in `def(...)` during derivation.
    pub may_be_undefined: bool,
}

impl fmt::Debug for RelationAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RelationAtom")
            .field("id", &self.id)
            .field("binding", &self.binding)
            .field("domain", &self.domain)
            .field("arity", &self.arity)
            .field("may_be_undefined", &self.may_be_undefined)
            .finish_non_exhaustive()
    }
}

impl RelationAtom {
    pub fn new(
        id: impl Into<String>,
        binding: AtomBinding,
        domain: DomainSet,
        verdict: Arc<dyn Verdict>,
    ) -> Self {
        RelationAtom {
            id: id.into(),
            binding,
            domain,
            arity: 2,
            verdict,
            may_be_undefined: false,
        }
    }

    pub fn vertex(&self) -> Option<&str> {
        match &self.binding {
            AtomBinding::Vertex(v) => Some(v),
            AtomBinding::Cross(_) => None,
        }
    }

    pub fn is_cross(&self) -> bool {
        matches!(self.binding, AtomBinding::Cross(_))
    }
}

/// All relations of a system plus the universe of input classes.
///
/// Iteration follows insertion order.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    universe: DomainSet,
    atoms: Vec<RelationAtom>,
    index: BTreeMap<String, usize>,
}

impl Catalog {
    pub fn new(universe: DomainSet) -> Self {
        Catalog {
            universe,
            ..Default::default()
        }
    }

    pub fn universe(&self) -> &DomainSet {
        &self.universe
    }

    pub fn insert(&mut self, atom: RelationAtom) -> Result<()> {
        if atom.id.is_empty() || !atom.id.chars().all(is_ident_char) {
            return Err(Error::config(format!("`{}` is not a valid relation id", atom.id)));
        }
        if self.index.contains_key(&atom.id) {
            return Err(Error::config(format!("duplicate relation `{}`", atom.id)));
        }
        if !atom.domain.is_subset(&self.universe) {
            return Err(Error::config(format!(
                "domain {} of relation `{}` is not within the declared classes {}",
                atom.domain, atom.id, self.universe
            )));
        }
        if atom.arity < 2 {
            return Err(Error::config(format!(
                "relation `{}` must compare at least two executions",
                atom.id
            )));
        }
        if let AtomBinding::Cross(vs) = &atom.binding {
            if vs.is_empty() {
                return Err(Error::config(format!("cross relation `{}` reads no vertex", atom.id)));
            }
        }
        self.index.insert(atom.id.clone(), self.atoms.len());
        self.atoms.push(atom);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&RelationAtom> {
        self.index.get(id).map(|&i| &self.atoms[i])
    }

    pub fn require(&self, id: &str) -> Result<&RelationAtom> {
        self.get(id)
            .ok_or_else(|| Error::usage(format!("unknown relation `{id}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationAtom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn for_vertex<'a>(&'a self, v: &'a str) -> impl Iterator<Item = &'a RelationAtom> + 'a {
        self.atoms.iter().filter(move |a| a.vertex() == Some(v))
    }

    pub fn cross_atoms(&self) -> impl Iterator<Item = &RelationAtom> {
        self.atoms.iter().filter(|a| a.is_cross())
    }

    pub fn domain(&self, id: &str) -> Option<&DomainSet> {
        self.get(id).map(|a| &a.domain)
    }

    /// Every binding must name a vertex of `graph`.
    pub fn check_bindings(&self, graph: &PipelineGraph) -> Result<()> {
        for a in &self.atoms {
            for v in a.binding.read_vertices() {
                if !graph.vertices.contains_key(v) {
                    return Err(Error::config(format!(
                        "relation `{}` is bound to unknown vertex `{v}`",
                        a.id
                    )));
                }
            }
        }
        Ok(())
    }
}
