//! General-purpose executors and verdicts usable from any spec file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::algebra::TriValue;
use crate::error::{Error, Result};
use crate::graph::PortRef;
use crate::harness::{ExecContext, Registry};
use crate::relation::{FnVerdict, PairVerdict, Verdict, VerdictInput};

/// Non-empty lines of a file, as a set.
pub fn line_set(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Copy input port `p` to output port `p` for every output port.
fn copy(
    ctx: &ExecContext<'_>,
    inputs: &BTreeMap<String, PathBuf>,
    outputs: &BTreeMap<String, PathBuf>,
) -> std::result::Result<(), String> {
    for (port, dst) in outputs {
        let src_port = ctx.param(port).unwrap_or(port);
        let src = inputs
            .get(src_port)
            .ok_or_else(|| format!("no input `{src_port}` to copy into `{port}`"))?;
        fs::copy(src, dst).map_err(|e| format!("{}: {e}", src.display()))?;
    }
    Ok(())
}

fn required<'a>(params: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    params
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::config(format!("verdict parameter `{key}` is required")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Growth {
    /// Exactly one new line, none lost.
    OneMore,
    /// Identical sets.
    Same,
    /// None lost.
    Superset,
}

impl std::str::FromStr for Growth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-more" => Ok(Growth::OneMore),
            "same" => Ok(Growth::Same),
            "superset" => Ok(Growth::Superset),
            other => Err(Error::config(format!(
                "unknown growth `{other}` (expected one-more, same or superset)"
            ))),
        }
    }
}

/// `set-growth`: compares the line sets of `port` on adjacent tests. The
/// expected change is given per input class (`<class> = one-more | same |
/// superset`), or by `default`.
fn set_growth(params: &BTreeMap<String, String>) -> Result<Arc<dyn Verdict>> {
    let port: PortRef = required(params, "port")?.parse()?;
    let mut per_class = BTreeMap::new();
    for (k, v) in params {
        if k != "port" {
            per_class.insert(k.clone(), v.parse::<Growth>()?);
        }
    }
    Ok(Arc::new(PairVerdict(move |input: &VerdictInput<'_>, j: usize| {
        let growth = per_class
            .get(input.class)
            .or_else(|| per_class.get("default"))
            .ok_or_else(|| Error::config(format!("no expectation for class `{}`", input.class)))?;
        let a = line_set(input.file(j, &port)?)?;
        let b = line_set(input.file(j + 1, &port)?)?;
        Ok(match growth {
            Growth::OneMore => a.is_subset(&b) && b.len() == a.len() + 1,
            Growth::Same => a == b,
            Growth::Superset => a.is_subset(&b),
        })
    })))
}

/// `non-empty`: every output file of the read vertices is non-empty on every
/// test.
fn non_empty(_: &BTreeMap<String, String>) -> Result<Arc<dyn Verdict>> {
    Ok(Arc::new(FnVerdict(|input: &VerdictInput<'_>| {
        for files in &input.outputs {
            for f in files.values() {
                let len = fs::metadata(f).map_err(|e| Error::io(f, e))?.len();
                if len == 0 {
                    return Ok(TriValue::False);
                }
            }
        }
        Ok(TriValue::True)
    })))
}

pub fn register(reg: &mut Registry) {
    reg.add_executor("copy", copy);
    reg.add_verdict("set-growth", set_growth);
    reg.add_verdict("non-empty", non_empty);
}

/// Registry with every built-in executor, verdict and generator.
pub fn registry() -> Registry {
    let mut reg = Registry::new();
    register(&mut reg);
    crate::detector::register(&mut reg);
    crate::genomics::register(&mut reg);
    reg
}
