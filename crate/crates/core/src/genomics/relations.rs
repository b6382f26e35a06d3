//! Verdicts for the demo relations.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::call::{read_calls, VariantCall};
use super::pileup::{elevated_regions, read_ratios};
use crate::error::{Error, Result};
use crate::graph::PortRef;
use crate::relation::{PairVerdict, Verdict, VerdictInput};

fn port_param(params: &BTreeMap<String, String>, key: &str) -> Result<PortRef> {
    params
        .get(key)
        .ok_or_else(|| Error::config(format!("verdict parameter `{key}` is required")))?
        .parse()
}

fn calls(input: &VerdictInput<'_>, test: usize, port: &PortRef) -> Result<BTreeSet<VariantCall>> {
    read_calls(input.file(test, port)?).map_err(Error::config)
}

/// `call-subset`: the calls on `port` for test j are all present on test j+1.
pub fn call_subset(params: &BTreeMap<String, String>) -> Result<Arc<dyn Verdict>> {
    let port = port_param(params, "port")?;
    Ok(Arc::new(PairVerdict(move |input: &VerdictInput<'_>, j: usize| {
        Ok(calls(input, j, &port)?.is_subset(&calls(input, j + 1, &port)?))
    })))
}

/// Share of a region's length that must reappear on the next test.
pub const PERSIST_OVERLAP: f64 = 0.5;

/// `depth-persistence`: every elevated depth-ratio region on test j is
/// still elevated, over at least half its length, on test j+1.
pub fn depth_persistence(params: &BTreeMap<String, String>) -> Result<Arc<dyn Verdict>> {
    let port = port_param(params, "port")?;
    Ok(Arc::new(PairVerdict(move |input: &VerdictInput<'_>, j: usize| {
        let regions = |t: usize| -> Result<Vec<(usize, usize)>> {
            let rows = read_ratios(input.file(t, &port)?).map_err(Error::config)?;
            Ok(elevated_regions(&rows))
        };
        let (before, after) = (regions(j)?, regions(j + 1)?);
        Ok(before.iter().all(|&(s, e)| {
            let kept: usize = after
                .iter()
                .map(|&(a, b)| b.min(e).saturating_sub(a.max(s)))
                .sum();
            kept as f64 >= PERSIST_OVERLAP * (e - s) as f64
        }))
    })))
}

/// `germline-split`: the tumor germline calls are the normal germline calls
/// plus the somatic calls, with nothing in both. Checked on the first test
/// and then on the calls each test adds to its predecessor.
pub fn germline_split(params: &BTreeMap<String, String>) -> Result<Arc<dyn Verdict>> {
    let tumor = port_param(params, "tumor")?;
    let normal = port_param(params, "normal")?;
    let somatic = port_param(params, "somatic")?;
    Ok(Arc::new(PairVerdict(move |input: &VerdictInput<'_>, j: usize| {
        let at = |t: usize| -> Result<[BTreeSet<VariantCall>; 3]> {
            Ok([calls(input, t, &tumor)?, calls(input, t, &normal)?, calls(input, t, &somatic)?])
        };
        let split_holds = |[t, n, s]: &[BTreeSet<VariantCall>; 3]| -> bool {
            let xor: BTreeSet<VariantCall> = n.symmetric_difference(s).cloned().collect();
            *t == xor
        };
        let prev = at(j)?;
        let next = at(j + 1)?;
        if j == 0 && !split_holds(&prev) {
            return Ok(false);
        }
        let added = |k: usize| -> BTreeSet<VariantCall> { next[k].difference(&prev[k]).cloned().collect() };
        Ok(split_holds(&[added(0), added(1), added(2)]))
    })))
}
