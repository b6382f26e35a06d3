//! Oracles shared by the integration targets.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use compmr::builtins::registry;
use compmr::genomics::align::Indel;
use compmr::genomics::call::VariantCall;
use compmr::genomics::{full_composite, GenomicsDemo, Lineage, MutationPlan, MutationType, Sample};
use compmr::harness::{run_composite, CompositeRun};
use compmr::spec_file::{LoadedSpec, SpecFile};

const WINDOW: usize = 120;

pub fn load(demo: &GenomicsDemo, workdir: &Path) -> LoadedSpec {
    let spec = SpecFile::parse(&demo.spec_text().unwrap()).unwrap();
    let mut loaded = spec.load(&registry(), workdir).unwrap();
    loaded.materialize_groups(workdir).unwrap();
    loaded
}

/// Run the full composite of the demo's first kind over its groups.
pub fn run(demo: &GenomicsDemo) -> CompositeRun {
    let dir = tempfile::tempdir().unwrap();
    let loaded = load(demo, dir.path());
    let kind = demo.kinds[0];
    let sys = &loaded.system;
    run_composite(sys, &sys.catalog, &full_composite(kind), dir.path(), 4, false).unwrap()
}

/// Truth calls straight from the plan: each active indel, left-aligned on
/// the reference by trying every earlier placement inside a window around
/// it and keeping the first that yields the same sequence.
pub fn truth(plan: &MutationPlan, test: usize, lineage: Option<Lineage>, sample: Sample) -> BTreeSet<VariantCall> {
    let r = plan.reference.as_bytes();
    plan.mutations
        .iter()
        .filter(|m| m.is_indel() && m.present_in(test, sample))
        .filter(|m| lineage.is_none_or(|l| m.lineage == l))
        .map(|m| {
            let (lo, hi) = (m.position.saturating_sub(WINDOW), (m.position + m.length + WINDOW).min(r.len()));
            let applied = |ind: &Indel| -> Vec<u8> {
                match ind {
                    Indel::Insertion { pos, seq } => [&r[lo..*pos], seq.as_bytes(), &r[*pos..hi]].concat(),
                    Indel::Deletion { pos, len } => [&r[lo..*pos], &r[pos + len..hi]].concat(),
                }
            };
            let original = match m.kind {
                MutationType::MicroInsertion => Indel::Insertion { pos: m.position, seq: m.payload.clone() },
                _ => Indel::Deletion { pos: m.position, len: m.length },
            };
            let target = applied(&original);
            // leftmost placement producing the same sequence
            let leftmost = (lo.max(1)..=m.position)
                .find_map(|p| {
                    let cand = match &original {
                        Indel::Insertion { .. } => {
                            Indel::Insertion { pos: p, seq: String::from_utf8(target[p - lo..p - lo + m.length].to_vec()).unwrap() }
                        }
                        Indel::Deletion { len, .. } => Indel::Deletion { pos: p, len: *len },
                    };
                    (applied(&cand) == target).then_some(cand)
                })
                .unwrap();
            let (pos, seq_ref, alt) = match &leftmost {
                Indel::Insertion { pos, seq } => {
                    let a = r[pos - 1] as char;
                    (*pos, a.to_string(), format!("{a}{seq}"))
                }
                Indel::Deletion { pos, len } => (
                    *pos,
                    String::from_utf8(r[pos - 1..pos + len].to_vec()).unwrap(),
                    (r[pos - 1] as char).to_string(),
                ),
            };
            VariantCall { pos, reference: seq_ref, alt }
        })
        .collect()
}
