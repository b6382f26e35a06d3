//! Component executors: built-in functions and external commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use crate::algebra::TriValue;
use crate::error::{Error, Result};
use crate::graph::{ExecutorRef, PortRef};
use crate::relation::{Verdict, VerdictInput};

use super::series::TestGroup;

/// What an executor knows about the test it is running.
pub struct ExecContext<'a> {
    /// Zero-based position in the series.
    pub test_index: usize,
    pub series_len: usize,
    pub vertex: &'a str,
    /// Metadata of the test group (generator parameters and the like).
    pub metadata: &'a BTreeMap<String, String>,
    /// Parameters attached to the vertex's executor declaration.
    pub params: &'a BTreeMap<String, String>,
}

impl ExecContext<'_> {
    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }
}

/// Runs one component on one test. Inputs and outputs map port names to
/// files; an `Err` is a component failure, reported in the trace.
pub trait Executor: Send + Sync {
    fn execute(
        &self,
        ctx: &ExecContext<'_>,
        inputs: &BTreeMap<String, PathBuf>,
        outputs: &BTreeMap<String, PathBuf>,
    ) -> std::result::Result<(), String>;
}

impl<F> Executor for F
where
    F: Fn(&ExecContext<'_>, &BTreeMap<String, PathBuf>, &BTreeMap<String, PathBuf>) -> std::result::Result<(), String>
        + Send
        + Sync,
{
    fn execute(
        &self,
        ctx: &ExecContext<'_>,
        inputs: &BTreeMap<String, PathBuf>,
        outputs: &BTreeMap<String, PathBuf>,
    ) -> std::result::Result<(), String> {
        self(ctx, inputs, outputs)
    }
}

/// Builds a verdict from the string parameters of an atom declaration.
pub type VerdictFactory =
    Arc<dyn Fn(&BTreeMap<String, String>) -> Result<Arc<dyn Verdict>> + Send + Sync>;

/// Writes the inputs of one test group into `dir` and describes it.
pub trait Generator: Send + Sync {
    fn generate(&self, request: &GeneratorRequest<'_>) -> Result<TestGroup>;
}

pub struct GeneratorRequest<'a> {
    pub group_id: &'a str,
    pub class: &'a str,
    pub params: &'a BTreeMap<String, String>,
    /// Directory for the generated files.
    pub dir: &'a Path,
}

impl GeneratorRequest<'_> {
    pub fn param<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.params.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                Error::config(format!(
                    "group `{}`: parameter `{key}` = `{raw}` is malformed",
                    self.group_id
                ))
            }),
        }
    }
}

/// Built-in executors, verdicts and input generators by name.
#[derive(Clone, Default)]
pub struct Registry {
    executors: BTreeMap<String, Arc<dyn Executor>>,
    verdicts: BTreeMap<String, VerdictFactory>,
    generators: BTreeMap<String, Arc<dyn Generator>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_executor(&mut self, name: impl Into<String>, e: impl Executor + 'static) -> &mut Self {
        self.executors.insert(name.into(), Arc::new(e));
        self
    }

    pub fn add_verdict<F>(&mut self, name: impl Into<String>, factory: F) -> &mut Self
    where
        F: Fn(&BTreeMap<String, String>) -> Result<Arc<dyn Verdict>> + Send + Sync + 'static,
    {
        self.verdicts.insert(name.into(), Arc::new(factory));
        self
    }

    pub fn add_generator(&mut self, name: impl Into<String>, g: impl Generator + 'static) -> &mut Self {
        self.generators.insert(name.into(), Arc::new(g));
        self
    }

    pub fn verdict(&self, name: &str, params: &BTreeMap<String, String>) -> Result<Arc<dyn Verdict>> {
        let f = self
            .verdicts
            .get(name)
            .ok_or_else(|| Error::config(format!("unknown built-in verdict `{name}`")))?;
        f(params)
    }

    pub fn generator(&self, name: &str) -> Result<Arc<dyn Generator>> {
        self.generators
            .get(name)
            .cloned()
            .ok_or_else(|| Error::config(format!("unknown test generator `{name}`")))
    }

    pub fn resolve(&self, r: &ExecutorRef) -> Result<Arc<dyn Executor>> {
        match r {
            ExecutorRef::Builtin { name, .. } => self
                .executors
                .get(name)
                .cloned()
                .ok_or_else(|| Error::config(format!("unknown built-in executor `{name}`"))),
            ExecutorRef::Command(template) => Ok(Arc::new(CommandExecutor {
                template: template.clone(),
            })),
        }
    }

    /// Fail on executor names that cannot be resolved.
    pub fn check_executors(&self, graph: &crate::graph::PipelineGraph) -> Result<()> {
        for v in graph.vertices.values() {
            self.resolve(&v.executor)
                .map_err(|e| Error::config(format!("vertex `{}`: {e}", v.id)))?;
        }
        Ok(())
    }
}

pub(crate) fn shell_quote(p: &Path) -> String {
    let s = p.to_string_lossy();
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Replace every `{key:name}` placeholder via `lookup(key, name)`.
fn expand(template: &str, lookup: &dyn Fn(&str, &str) -> Result<String>) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| Error::config(format!("unclosed placeholder in `{template}`")))?;
        let inner = &after[..close];
        match inner.split_once(':') {
            Some((key, name)) => out.push_str(&lookup(key, name)?),
            None => {
                return Err(Error::config(format!(
                    "placeholder `{{{inner}}}` in `{template}` must look like {{in:port}}"
                )))
            }
        }
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Runs `sh -c` on a template with `{in:port}` and `{out:port}` placeholders
/// replaced by quoted file paths. Exit status 0 is success.
pub struct CommandExecutor {
    pub template: String,
}

impl Executor for CommandExecutor {
    fn execute(
        &self,
        ctx: &ExecContext<'_>,
        inputs: &BTreeMap<String, PathBuf>,
        outputs: &BTreeMap<String, PathBuf>,
    ) -> std::result::Result<(), String> {
        let cmd = expand(&self.template, &|key, name| {
            let map = match key {
                "in" => inputs,
                "out" => outputs,
                _ => return Err(Error::config(format!("unknown placeholder kind `{key}`"))),
            };
            map.get(name)
                .map(|p| shell_quote(p))
                .ok_or_else(|| Error::config(format!("no port `{name}` on `{}`", ctx.vertex)))
        })
        .map_err(|e| e.to_string())?;
        let out = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .env("COMPMR_TEST_INDEX", ctx.test_index.to_string())
            .env("COMPMR_SERIES_LEN", ctx.series_len.to_string())
            .output()
            .map_err(|e| format!("cannot start `sh`: {e}"))?;
        if out.status.success() {
            Ok(())
        } else {
            let stderr = String::from_utf8_lossy(&out.stderr);
            Err(format!(
                "`{cmd}` exited with {}: {}",
                out.status,
                stderr.trim()
            ))
        }
    }
}

/// A relation checked by an external command.
///
/// `{files:vertex.port}` expands to the quoted paths of that port's file on
/// every test, in series order. Exit 0 means the relation holds, exit 1 that
/// it is violated; anything else leaves it not computed.
pub struct CommandVerdict {
    pub template: String,
}

impl Verdict for CommandVerdict {
    fn check(&self, input: &VerdictInput<'_>) -> Result<TriValue> {
        let cmd = expand(&self.template, &|key, name| {
            if key != "files" {
                return Err(Error::config(format!("unknown placeholder kind `{key}` in checker")));
            }
            let port: PortRef = name.parse()?;
            let mut parts = Vec::new();
            for t in 0..input.series_len() {
                parts.push(shell_quote(input.file(t, &port)?));
            }
            Ok(parts.join(" "))
        })?;
        let status = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .status()
            .map_err(|e| Error::io("sh", e))?;
        Ok(match status.code() {
            Some(0) => TriValue::True,
            Some(1) => TriValue::False,
            _ => TriValue::NOT_COMPUTED,
        })
    }
}
