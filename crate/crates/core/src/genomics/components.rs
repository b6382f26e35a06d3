//! Executors for the demo pipeline. Each takes an optional `fault`
//! parameter; faults read the mutation plan named by the group's `plan`
//! metadata to decide what to perturb.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::align::{align_all, read_alignments, write_alignments, Alignment};
use super::call::{call_indels, call_somatic, write_calls, VariantCall};
use super::faults::{near, targets, FaultKind, Relevance};
use super::pileup::Pileup;
use super::plan::{read_reference, Mutation, MutationPlan};
use super::reads::read_reads;
use crate::harness::ExecContext;

type Ports = BTreeMap<String, PathBuf>;
type Outcome = std::result::Result<(), String>;

fn port<'a>(map: &'a Ports, name: &str) -> std::result::Result<&'a Path, String> {
    map.get(name)
        .map(PathBuf::as_path)
        .ok_or_else(|| format!("missing port `{name}`"))
}

fn reference(inputs: &Ports) -> std::result::Result<Vec<u8>, String> {
    read_reference(port(inputs, "reference")?)
        .map(String::into_bytes)
        .map_err(|e| e.to_string())
}

/// The fault to apply on this test, with the plan it needs.
fn active_fault(ctx: &ExecContext<'_>) -> std::result::Result<Option<(FaultKind, MutationPlan)>, String> {
    let Some(raw) = ctx.param("fault") else {
        return Ok(None);
    };
    let fault: FaultKind = raw.parse().map_err(|e: crate::Error| e.to_string())?;
    if ctx.test_index + 1 != ctx.series_len {
        return Ok(None);
    }
    let path = ctx
        .metadata
        .get("plan")
        .ok_or("a faulty component needs the group's `plan` metadata")?;
    let plan = MutationPlan::load(Path::new(path)).map_err(|e| e.to_string())?;
    Ok(Some((fault, plan)))
}

fn perturb_calls(
    ctx: &ExecContext<'_>,
    relevance: Relevance,
    calls: impl IntoIterator<Item = VariantCall>,
) -> std::result::Result<Vec<VariantCall>, String> {
    let calls: Vec<VariantCall> = calls.into_iter().collect();
    let Some((fault, plan)) = active_fault(ctx)? else {
        return Ok(calls);
    };
    if fault == FaultKind::OffsetPositions {
        return Ok(calls
            .into_iter()
            .map(|c| VariantCall { pos: c.pos + 1, ..c })
            .collect());
    }
    let hit: Vec<&Mutation> = targets(&plan, relevance, fault);
    Ok(calls
        .into_iter()
        .filter(|c| !near(&hit, c.pos - 1, c.pos))
        .collect())
}

/// `toy-align`: inputs `normal_reads`, `tumor_reads`, `reference`; outputs
/// `normal`, `tumor`.
pub fn toy_align(ctx: &ExecContext<'_>, inputs: &Ports, outputs: &Ports) -> Outcome {
    let r = reference(inputs)?;
    let mut normal = align_all(&read_reads(port(inputs, "normal_reads")?)?, &r);
    let mut tumor = align_all(&read_reads(port(inputs, "tumor_reads")?)?, &r);
    if let Some((fault, plan)) = active_fault(ctx)? {
        let apply = |alns: Vec<Alignment>| -> Vec<Alignment> {
            if fault == FaultKind::OffsetPositions {
                return alns.iter().map(|a| a.shifted(1)).collect();
            }
            let hit = targets(&plan, Relevance::AllIndels, fault);
            alns.into_iter().filter(|a| !near(&hit, a.start, a.end)).collect()
        };
        normal = apply(normal);
        tumor = apply(tumor);
    }
    write_alignments(port(outputs, "normal")?, &normal)?;
    write_alignments(port(outputs, "tumor")?, &tumor)
}

/// `call-germline`: inputs `alignments`, `reference`; output `calls`. The
/// `sample` parameter (`normal` or `tumor`) says which mutations the
/// component can see, which is what its faults act on.
pub fn call_germline(ctx: &ExecContext<'_>, inputs: &Ports, outputs: &Ports) -> Outcome {
    let relevance = match ctx.param("sample").unwrap_or("tumor") {
        "normal" => Relevance::Germline,
        "tumor" => Relevance::AllIndels,
        other => return Err(format!("unknown sample `{other}`")),
    };
    let r = reference(inputs)?;
    let alns = read_alignments(port(inputs, "alignments")?)?;
    let calls = perturb_calls(ctx, relevance, call_indels(&alns, &r))?;
    write_calls(port(outputs, "calls")?, &calls)
}

/// `call-somatic`: inputs `normal`, `tumor`, `reference`; output `calls`.
pub fn call_somatic_exec(ctx: &ExecContext<'_>, inputs: &Ports, outputs: &Ports) -> Outcome {
    let r = reference(inputs)?;
    let normal = read_alignments(port(inputs, "normal")?)?;
    let tumor = read_alignments(port(inputs, "tumor")?)?;
    let calls = perturb_calls(ctx, Relevance::Somatic, call_somatic(&normal, &tumor, &r))?;
    write_calls(port(outputs, "calls")?, &calls)
}

/// `depth-stat`: inputs `normal`, `tumor`, `reference`; output `depth`.
/// Under a fault, targeted duplications lose their elevation (the tumor
/// depth there is reported equal to the normal depth) or every position is
/// shifted by the longest possible duplication.
pub fn depth_stat(ctx: &ExecContext<'_>, inputs: &Ports, outputs: &Ports) -> Outcome {
    let r = reference(inputs)?;
    let normal = read_alignments(port(inputs, "normal")?)?;
    let tumor = read_alignments(port(inputs, "tumor")?)?;
    let mut pileup = Pileup::new(&normal, &tumor, r.len());
    let mut offset = 0;
    if let Some((fault, plan)) = active_fault(ctx)? {
        if fault == FaultKind::OffsetPositions {
            offset = plan.config.max_dup_size;
        } else {
            for m in targets(&plan, Relevance::Duplications, fault) {
                let (s, e) = m.span();
                for i in s..e.min(r.len()) {
                    pileup.tumor[i] = pileup.normal[i];
                }
            }
        }
    }
    pileup.write(port(outputs, "depth")?, offset)
}
