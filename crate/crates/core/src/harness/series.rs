//! Running a test series through the graph and recording every value.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{PipelineGraph, PortRef};

use super::exec::{ExecContext, Registry};

/// One ordered series of related system inputs, all of one input class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestGroup {
    pub id: String,
    pub class: String,
    /// Per test, the file bound to each system-input port.
    pub tests: Vec<BTreeMap<PortRef, PathBuf>>,
    pub metadata: BTreeMap<String, String>,
}

impl TestGroup {
    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn check(&self, graph: &PipelineGraph) -> Result<()> {
        if self.tests.len() < 2 {
            return Err(Error::config(format!(
                "test group `{}` needs at least two tests, has {}",
                self.id,
                self.tests.len()
            )));
        }
        for (k, t) in self.tests.iter().enumerate() {
            for p in &graph.system_inputs {
                if !t.contains_key(p) {
                    return Err(Error::config(format!(
                        "test {k} of group `{}` has no file for system input `{p}`",
                        self.id
                    )));
                }
            }
            for p in t.keys() {
                if !graph.system_inputs.contains(p) {
                    return Err(Error::config(format!(
                        "test {k} of group `{}` binds `{p}`, which is not a system input",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexStatus {
    Executed,
    /// Ran but reported failure; no outputs were kept.
    Failed,
    /// Not run: an input was missing or the branch was not selected.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub test_index: usize,
    pub vertex: String,
    pub status: VertexStatus,
    /// Port name to file, relative to the series directory when inside it.
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub input_digests: BTreeMap<String, String>,
    pub output_digests: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub message: String,
}

/// Every vertex's status and files on every test of one group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub group_id: String,
    pub class: String,
    pub series_len: usize,
    pub records: Vec<TraceRecord>,
    /// Directory the relative paths are resolved against.
    #[serde(skip)]
    pub root: PathBuf,
}

pub const MANIFEST: &str = "trace.json";

impl ExecutionTrace {
    pub fn record(&self, test: usize, vertex: &str) -> Option<&TraceRecord> {
        self.records
            .iter()
            .find(|r| r.test_index == test && r.vertex == vertex)
    }

    pub fn status(&self, test: usize, vertex: &str) -> Option<VertexStatus> {
        self.record(test, vertex).map(|r| r.status)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Absolute path of an output file.
    pub fn output(&self, test: usize, port: &PortRef) -> Option<PathBuf> {
        let r = self.record(test, &port.vertex)?;
        r.outputs.get(&port.port).map(|p| self.resolve(p))
    }

    pub fn load(dir: &Path) -> Result<ExecutionTrace> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut t: ExecutionTrace = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        t.root = dir.to_path_buf();
        Ok(t)
    }

    pub fn save(&self) -> Result<()> {
        let path = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(self).expect("trace serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn relative_to(p: &Path, root: &Path) -> PathBuf {
    p.strip_prefix(root).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
}

/// Execute every test of `group` in topological order, writing outputs under
/// `workdir/<group id>/`. With `resume`, records from an earlier manifest are
/// reused when their input digests and output files still match.
pub fn run_series(
    graph: &PipelineGraph,
    registry: &Registry,
    group: &TestGroup,
    workdir: &Path,
    resume: bool,
) -> Result<ExecutionTrace> {
    graph.ensure_valid()?;
    group.check(graph)?;
    let order = graph.topological_order()?;
    let root = workdir.join(&group.id);
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;

    let previous = if resume && root.join(MANIFEST).exists() {
        ExecutionTrace::load(&root).ok()
    } else {
        None
    };

    let mut trace = ExecutionTrace {
        group_id: group.id.clone(),
        class: group.class.clone(),
        series_len: group.len(),
        records: Vec::new(),
        root: root.clone(),
    };
    let empty = BTreeMap::new();

    for (k, test) in group.tests.iter().enumerate() {
        let test_dir = root.join(format!("test-{k:02}"));
        for v in &order {
            let spec = &graph.vertices[v];
            let mut inputs: BTreeMap<String, PathBuf> = BTreeMap::new();
            let mut missing: Option<String> = None;
            for port in &spec.inputs {
                let here = PortRef::new(v, port);
                let file = if let Some(f) = test.get(&here) {
                    Some(f.clone())
                } else {
                    let e = graph.edges.iter().find(|e| e.to == here).expect("validated");
                    match trace.status(k, &e.from.vertex) {
                        Some(VertexStatus::Executed) => trace.output(k, &e.from),
                        _ => None,
                    }
                };
                match file {
                    Some(f) => {
                        inputs.insert(port.clone(), f);
                    }
                    None => {
                        missing.get_or_insert_with(|| format!("input `{port}` was not produced"));
                    }
                }
            }

            if missing.is_none() {
                if let Some(g) = graph.group_of(v) {
                    let guard = match trace.status(k, &g.guard.vertex) {
                        Some(VertexStatus::Executed) => trace.output(k, &g.guard),
                        _ => None,
                    };
                    match guard {
                        None => missing = Some(format!("guard `{}` was not produced", g.guard)),
                        Some(path) => {
                            let value = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                            let value = value.trim();
                            match g.select.get(value) {
                                Some(m) if m == v => {}
                                Some(m) => missing = Some(format!("branch `{m}` selected")),
                                None => {
                                    missing = Some(format!("guard value `{value}` selects no branch"))
                                }
                            }
                        }
                    }
                }
            }

            let rel_inputs: BTreeMap<String, PathBuf> = inputs
                .iter()
                .map(|(p, f)| (p.clone(), relative_to(f, &root)))
                .collect();

            if let Some(reason) = missing {
                trace.records.push(TraceRecord {
                    test_index: k,
                    vertex: v.clone(),
                    status: VertexStatus::Skipped,
                    inputs: rel_inputs,
                    outputs: BTreeMap::new(),
                    input_digests: BTreeMap::new(),
                    output_digests: BTreeMap::new(),
                    message: reason,
                });
                continue;
            }

            let mut input_digests = BTreeMap::new();
            for (p, f) in &inputs {
                input_digests.insert(p.clone(), sha256_file(f)?);
            }
            let vdir = test_dir.join(v);
            let outputs: BTreeMap<String, PathBuf> = spec
                .outputs
                .iter()
                .map(|p| (p.clone(), vdir.join(p)))
                .collect();
            let rel_outputs: BTreeMap<String, PathBuf> = outputs
                .iter()
                .map(|(p, f)| (p.clone(), relative_to(f, &root)))
                .collect();

            if let Some(prev) = previous.as_ref().and_then(|t| t.record(k, v)) {
                if prev.status == VertexStatus::Executed
                    && prev.input_digests == input_digests
                    && prev.outputs == rel_outputs
                    && outputs_match(&root, prev)
                {
                    trace.records.push(prev.clone());
                    continue;
                }
            }

            fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
            for f in outputs.values() {
                if f.exists() {
                    fs::remove_file(f).map_err(|e| Error::io(f, e))?;
                }
            }
            let params = match &spec.executor {
                crate::graph::ExecutorRef::Builtin { params, .. } => params,
                _ => &empty,
            };
            let ctx = ExecContext {
                test_index: k,
                series_len: group.len(),
                vertex: v,
                metadata: &group.metadata,
                params,
            };
            let executor = registry.resolve(&spec.executor)?;
            let mut result = executor.execute(&ctx, &inputs, &outputs);
            if result.is_ok() {
                if let Some((p, _)) = outputs.iter().find(|(_, f)| !f.is_file()) {
                    result = Err(format!("output `{p}` was not written"));
                }
            }
            match result {
                Ok(()) => {
                    let mut output_digests = BTreeMap::new();
                    for (p, f) in &outputs {
                        output_digests.insert(p.clone(), sha256_file(f)?);
                    }
                    trace.records.push(TraceRecord {
                        test_index: k,
                        vertex: v.clone(),
                        status: VertexStatus::Executed,
                        inputs: rel_inputs,
                        outputs: rel_outputs,
                        input_digests,
                        output_digests,
                        message: String::new(),
                    });
                }
                Err(msg) => {
                    for f in outputs.values() {
                        let _ = fs::remove_file(f);
                    }
                    trace.records.push(TraceRecord {
                        test_index: k,
                        vertex: v.clone(),
                        status: VertexStatus::Failed,
                        inputs: rel_inputs,
                        outputs: BTreeMap::new(),
                        input_digests,
                        output_digests: BTreeMap::new(),
                        message: msg,
                    });
                }
            }
        }
        // checkpoint after every test so an interrupted run can resume
        trace.save()?;
    }
    Ok(trace)
}

fn outputs_match(root: &Path, rec: &TraceRecord) -> bool {
    rec.outputs.iter().all(|(p, f)| {
        let full = root.join(f);
        match (sha256_file(&full), rec.output_digests.get(p)) {
            (Ok(d), Some(want)) => &d == want,
            _ => false,
        }
    })
}
