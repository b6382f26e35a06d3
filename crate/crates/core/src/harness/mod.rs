//! Executing test series, evaluating composites and reporting.

mod evaluate;
mod exec;
mod report;
mod series;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::algebra::{DomainSet, RelationExpr, TriValue};
use crate::derive::CombinationPolicy;
use crate::error::{Error, Result};
use crate::graph::PipelineGraph;
use crate::relation::Catalog;

pub use evaluate::{eval_atom, evaluate, failures_metric, pair_fraction, AtomOutcome, GroupVerdict};
pub use exec::{
    CommandExecutor, CommandVerdict, ExecContext, Executor, Generator, GeneratorRequest, Registry,
    VerdictFactory,
};
pub use report::{format_fraction, Report, Table2Row, Table3Row};
pub use series::{run_series, sha256_file, ExecutionTrace, TestGroup, TraceRecord, VertexStatus, MANIFEST};

/// Everything needed to derive and run composites for one system.
#[derive(Clone)]
pub struct System {
    pub graph: PipelineGraph,
    pub catalog: Catalog,
    pub policy: CombinationPolicy,
    pub groups: Vec<TestGroup>,
    pub registry: Registry,
}

/// Verdicts of one composite over the applicable groups.
#[derive(Debug, Clone)]
pub struct CompositeRun {
    pub expr: RelationExpr,
    pub domain: DomainSet,
    pub verdicts: Vec<GroupVerdict>,
    /// Groups left out because their class is outside the domain.
    pub inapplicable: Vec<String>,
}

impl CompositeRun {
    pub fn any_false(&self) -> bool {
        self.verdicts
            .iter()
            .any(|v| v.composite_value == TriValue::False)
    }
}

/// Run every group whose class is in the composite's domain and evaluate
/// the composite on each. Groups run concurrently on at most `parallel`
/// threads; results keep group order.
pub fn run_composite(
    system: &System,
    catalog: &Catalog,
    expr: &RelationExpr,
    workdir: &Path,
    parallel: usize,
    resume: bool,
) -> Result<CompositeRun> {
    let domain = expr.domain_of(catalog.universe(), &|id| catalog.domain(id))?;
    let (applicable, inapplicable): (Vec<&TestGroup>, Vec<&TestGroup>) = system
        .groups
        .iter()
        .partition(|g| domain.contains(&g.class));
    if applicable.is_empty() {
        return Err(Error::config(format!(
            "no applicable test groups: none of the groups' classes is in {domain}"
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::usage(format!("cannot start worker pool: {e}")))?;
    let verdicts: Vec<Result<GroupVerdict>> = pool.install(|| {
        applicable
            .par_iter()
            .map(|g| {
                let trace = run_series(&system.graph, &system.registry, g, workdir, resume)?;
                evaluate(expr, catalog, &system.graph, g, &trace)
            })
            .collect()
    });
    Ok(CompositeRun {
        expr: expr.clone(),
        domain,
        verdicts: verdicts.into_iter().collect::<Result<_>>()?,
        inapplicable: inapplicable.iter().map(|g| g.id.clone()).collect(),
    })
}

/// Re-evaluate a composite from persisted traces, without executing anything.
pub fn reevaluate(
    system: &System,
    catalog: &Catalog,
    expr: &RelationExpr,
    workdir: &Path,
) -> Result<Vec<GroupVerdict>> {
    let domain = expr.domain_of(catalog.universe(), &|id| catalog.domain(id))?;
    let mut out = Vec::new();
    for g in system.groups.iter().filter(|g| domain.contains(&g.class)) {
        let trace = ExecutionTrace::load(&workdir.join(&g.id))?;
        out.push(evaluate(expr, catalog, &system.graph, g, &trace)?);
    }
    Ok(out)
}

/// Group metadata helper: parse a required key.
pub fn meta<T: std::str::FromStr>(metadata: &BTreeMap<String, String>, key: &str) -> std::result::Result<T, String> {
    let raw = metadata
        .get(key)
        .ok_or_else(|| format!("group metadata lacks `{key}`"))?;
    raw.parse()
        .map_err(|_| format!("group metadata `{key}` = `{raw}` is malformed"))
}
