//! The declarative TOML file that describes a system: classes, vertices,
//! edges, branch groups, relations, derivation policy and test groups.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::algebra::DomainSet;
use crate::derive::CombinationPolicy;
use crate::error::{Error, Result};
use crate::graph::{BranchGroup, Edge, ExecutorRef, PipelineGraph, PortRef, VertexSpec};
use crate::harness::{CommandVerdict, GeneratorRequest, Registry, System, TestGroup};
use crate::relation::{AtomBinding, Catalog, RelationAtom};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub classes: Vec<String>,
    #[serde(default)]
    pub system_inputs: Vec<String>,
    #[serde(default)]
    pub system_outputs: Vec<String>,
    #[serde(default)]
    pub edges: Vec<String>,
    #[serde(default, rename = "vertex")]
    pub vertices: Vec<VertexDecl>,
    #[serde(default, rename = "branch_group")]
    pub branch_groups: Vec<BranchGroupDecl>,
    #[serde(default, rename = "atom")]
    pub atoms: Vec<AtomDecl>,
    #[serde(default)]
    pub policy: CombinationPolicy,
    #[serde(default, rename = "group")]
    pub groups: Vec<GroupDecl>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDecl {
    pub id: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub builtin: Option<String>,
    pub command: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    pub branch_group: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchGroupDecl {
    pub name: String,
    pub members: Vec<String>,
    pub guard: String,
    pub select: BTreeMap<String, String>,
    #[serde(default)]
    pub not_taken: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDecl {
    pub id: String,
    pub vertex: Option<String>,
    pub cross: Option<Vec<String>>,
    /// Defaults to every declared class.
    pub domain: Option<Vec<String>>,
    pub verdict: Option<String>,
    pub checker: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub may_be_undefined: bool,
    #[serde(default = "two")]
    pub arity: usize,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDecl {
    pub id: String,
    pub class: String,
    pub generator: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    /// Explicit inputs: per test, system-input port to file.
    #[serde(default)]
    pub tests: Vec<BTreeMap<String, PathBuf>>,
    /// Files bound on every test.
    #[serde(default)]
    pub shared: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// A parsed spec with everything but the test groups resolved.
pub struct LoadedSpec {
    pub system: System,
    pub groups: Vec<GroupDecl>,
    /// Relative paths in the spec are resolved against this directory.
    pub base_dir: PathBuf,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<SpecFile> {
        toml::from_str(text).map_err(|e| {
            let offset = e.span().map(|s| s.start).unwrap_or(0);
            let line = text[..offset.min(text.len())].matches('\n').count() + 1;
            Error::config(format!("line {line}: {}", e.message()))
        })
    }

    pub fn graph(&self) -> Result<PipelineGraph> {
        let mut g = PipelineGraph::default();
        for v in &self.vertices {
            let executor = match (&v.builtin, &v.command) {
                (Some(name), None) => ExecutorRef::Builtin {
                    name: name.clone(),
                    params: v.params.clone(),
                },
                (None, Some(cmd)) => ExecutorRef::Command(cmd.clone()),
                _ => {
                    return Err(Error::config(format!(
                        "vertex `{}` needs exactly one of `builtin` or `command`",
                        v.id
                    )))
                }
            };
            g.add_vertex(VertexSpec {
                id: v.id.clone(),
                inputs: v.inputs.clone(),
                outputs: v.outputs.clone(),
                executor,
                branch_group: v.branch_group.clone(),
            })?;
        }
        g.edges = self.edges.iter().map(|e| e.parse::<Edge>()).collect::<Result<_>>()?;
        g.system_inputs = parse_ports(&self.system_inputs)?;
        g.system_outputs = parse_ports(&self.system_outputs)?;
        for b in &self.branch_groups {
            let not_taken = b
                .not_taken
                .iter()
                .map(|(m, cs)| (m.clone(), DomainSet::from_tags(cs.iter().cloned())))
                .collect();
            if g.branch_groups.contains_key(&b.name) {
                return Err(Error::config(format!("duplicate branch group `{}`", b.name)));
            }
            g.branch_groups.insert(
                b.name.clone(),
                BranchGroup {
                    name: b.name.clone(),
                    members: b.members.clone(),
                    guard: b.guard.parse()?,
                    select: b.select.clone(),
                    not_taken,
                },
            );
        }
        g.ensure_valid()?;
        Ok(g)
    }

    pub fn catalog(&self, registry: &Registry) -> Result<Catalog> {
        let universe = DomainSet::from_tags(self.classes.iter().cloned());
        if universe.len() != self.classes.len() {
            return Err(Error::config("duplicate class in `classes`"));
        }
        let mut c = Catalog::new(universe.clone());
        for a in &self.atoms {
            let binding = match (&a.vertex, &a.cross) {
                (Some(v), None) => AtomBinding::Vertex(v.clone()),
                (None, Some(vs)) => AtomBinding::Cross(vs.clone()),
                _ => {
                    return Err(Error::config(format!(
                        "atom `{}` needs exactly one of `vertex` or `cross`",
                        a.id
                    )))
                }
            };
            let verdict = match (&a.verdict, &a.checker) {
                (Some(name), None) => registry
                    .verdict(name, &a.params)
                    .map_err(|e| Error::config(format!("atom `{}`: {e}", a.id)))?,
                (None, Some(cmd)) => Arc::new(CommandVerdict {
                    template: cmd.clone(),
                }),
                _ => {
                    return Err(Error::config(format!(
                        "atom `{}` needs exactly one of `verdict` or `checker`",
                        a.id
                    )))
                }
            };
            let domain = match &a.domain {
                Some(d) => DomainSet::from_tags(d.iter().cloned()),
                None => universe.clone(),
            };
            let mut atom = RelationAtom::new(&a.id, binding, domain, verdict);
            atom.arity = a.arity;
            atom.may_be_undefined = a.may_be_undefined;
            c.insert(atom)?;
        }
        Ok(c)
    }

    /// Resolve graph, relations and policy; test groups stay declarations.
    pub fn load(&self, registry: &Registry, base_dir: &Path) -> Result<LoadedSpec> {
        let graph = self.graph()?;
        let catalog = self.catalog(registry)?;
        catalog.check_bindings(&graph)?;
        registry.check_executors(&graph)?;
        for g in &self.groups {
            if !catalog.universe().contains(&g.class) {
                return Err(Error::config(format!(
                    "group `{}` has undeclared class `{}`",
                    g.id, g.class
                )));
            }
        }
        for b in &self.branch_groups {
            for classes in b.not_taken.values() {
                for c in classes {
                    if !catalog.universe().contains(c) {
                        return Err(Error::config(format!(
                            "branch group `{}` names undeclared class `{c}`",
                            b.name
                        )));
                    }
                }
            }
        }
        Ok(LoadedSpec {
            system: System {
                graph,
                catalog,
                policy: self.policy.clone(),
                groups: Vec::new(),
                registry: registry.clone(),
            },
            groups: self.groups.clone(),
            base_dir: base_dir.to_path_buf(),
        })
    }
}

fn parse_ports(ps: &[String]) -> Result<Vec<PortRef>> {
    ps.iter().map(|p| p.parse()).collect()
}

impl LoadedSpec {
    pub fn from_file(path: &Path, registry: &Registry) -> Result<LoadedSpec> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec = SpecFile::parse(&text)
            .map_err(|e| Error::config(format!("{}: {}", path.display(), strip_prefix(&e))))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        spec.load(registry, &base)
    }

    /// Produce the test groups: generators write into `workdir/<id>/inputs`.
    pub fn materialize_groups(&mut self, workdir: &Path) -> Result<()> {
        let mut groups = Vec::new();
        for d in &self.groups {
            let mut group = match &d.generator {
                Some(name) => {
                    if !d.tests.is_empty() {
                        return Err(Error::config(format!(
                            "group `{}` has both a generator and explicit tests",
                            d.id
                        )));
                    }
                    let dir = workdir.join(&d.id).join("inputs");
                    self.system.registry.generator(name)?.generate(&GeneratorRequest {
                        group_id: &d.id,
                        class: &d.class,
                        params: &d.params,
                        dir: &dir,
                    })?
                }
                None => TestGroup {
                    id: d.id.clone(),
                    class: d.class.clone(),
                    tests: d
                        .tests
                        .iter()
                        .map(|t| {
                            t.iter()
                                .map(|(p, f)| Ok((p.parse()?, self.base_dir.join(f))))
                                .collect::<Result<BTreeMap<_, _>>>()
                        })
                        .collect::<Result<_>>()?,
                    metadata: BTreeMap::new(),
                },
            };
            for test in &mut group.tests {
                for (p, f) in &d.shared {
                    test.insert(p.parse()?, self.base_dir.join(f));
                }
            }
            group.metadata.extend(d.metadata.clone());
            group.check(&self.system.graph)?;
            groups.push(group);
        }
        self.system.groups = groups;
        Ok(())
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
