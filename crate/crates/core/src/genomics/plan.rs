use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::config::{GeneratorConfig, MutationKind};
use crate::error::{Error, Result};

pub const BASES: [u8; 4] = *b"ACGT";

/// Minimum distance between two micro-indels.
pub const INDEL_SPACING: usize = 300;
const MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationType {
    MicroInsertion,
    MicroDeletion,
    Duplication,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lineage {
    Germline,
    Somatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sample {
    Normal,
    Tumor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Indels,
    Duplications,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
}

/// One planned change to the reference. Positions are 0-based reference
/// coordinates: an insertion goes before `position`, a deletion removes
/// `length` bases from `position`, a duplication repeats
/// `[position, position + length)` right after itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub position: usize,
    pub kind: MutationType,
    pub length: usize,
    /// Inserted bases; empty for other kinds.
    pub payload: String,
    pub lineage: Lineage,
    /// First test (1-based) whose genomes carry the mutation.
    pub introduced_at: usize,
}

impl Mutation {
    pub fn is_indel(&self) -> bool {
        self.kind != MutationType::Duplication
    }

    /// Reference interval touched by the mutation.
    pub fn span(&self) -> (usize, usize) {
        match self.kind {
            MutationType::MicroInsertion => (self.position, self.position + 1),
            _ => (self.position, self.position + self.length),
        }
    }

    pub fn present_in(&self, test: usize, sample: Sample) -> bool {
        self.introduced_at <= test && (sample == Sample::Tumor || self.lineage == Lineage::Germline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationPlan {
    pub config: GeneratorConfig,
    /// Seed that produced the plan; later than `config.seed` after retries.
    pub seed_used: u64,
    pub reference: String,
    pub segments: Vec<Segment>,
    /// Sorted by position.
    pub mutations: Vec<Mutation>,
}

impl MutationPlan {
    pub fn load(path: &Path) -> Result<MutationPlan> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("plan serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn series_length(&self) -> usize {
        self.config.series_length
    }

    /// Genome of `sample` on test `test` (1-based): the reference with every
    /// mutation introduced so far applied.
    pub fn genome(&self, test: usize, sample: Sample) -> Vec<u8> {
        let r = self.reference.as_bytes();
        let mut out = Vec::with_capacity(r.len() + r.len() / 4);
        let mut at = 0;
        for m in self.mutations.iter().filter(|m| m.present_in(test, sample)) {
            match m.kind {
                MutationType::MicroInsertion => {
                    out.extend_from_slice(&r[at..m.position]);
                    out.extend_from_slice(m.payload.as_bytes());
                    at = m.position;
                }
                MutationType::MicroDeletion => {
                    out.extend_from_slice(&r[at..m.position]);
                    at = m.position + m.length;
                }
                MutationType::Duplication => {
                    let end = m.position + m.length;
                    out.extend_from_slice(&r[at..end]);
                    out.extend_from_slice(&r[m.position..end]);
                    at = end;
                }
            }
        }
        out.extend_from_slice(&r[at..]);
        out
    }
}

pub fn random_bases(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| BASES[rng.random_range(0..4)]).collect()
}

/// Read an external reference: whitespace is ignored, FASTA header lines are
/// skipped, and only A, C, G, T are accepted.
pub fn read_reference(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    for line in text.lines().filter(|l| !l.starts_with('>')) {
        for c in line.chars().filter(|c| !c.is_whitespace()) {
            let c = c.to_ascii_uppercase();
            if !"ACGT".contains(c) {
                return Err(Error::config(format!("{}: unexpected base `{c}`", path.display())));
            }
            out.push(c);
        }
    }
    Ok(out)
}

/// Sample a plan. With `require_all_kinds`, seeds `seed, seed+1, ...` are
/// tried until the plan has a germline indel, a somatic indel and a
/// duplication that all appear before the last test; otherwise only an
/// empty plan triggers a retry.
pub fn generate_plan(config: &GeneratorConfig, reference: Option<&str>) -> Result<MutationPlan> {
    config.validate()?;
    let mut config = config.clone();
    if let Some(r) = reference {
        config.reference_length = r.len();
        config.validate()?;
    }
    let nothing_possible = config.indel_probability == 0.0 && config.copynumber_probability == 0.0;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = config.seed.wrapping_add(attempt);
        let plan = sample_plan(&config, seed, reference);
        if nothing_possible || usable(&plan, config.require_all_kinds) {
            return Ok(plan);
        }
    }
    Err(Error::config(format!(
        "no usable mutation plan after {MAX_ATTEMPTS} seeds starting at {}; raise the mutation probabilities",
        config.seed
    )))
}

fn usable(plan: &MutationPlan, require_all_kinds: bool) -> bool {
    if !require_all_kinds {
        return !plan.mutations.is_empty();
    }
    let before_last = plan.series_length() - 1;
    let has = |pred: &dyn Fn(&Mutation) -> bool| {
        plan.mutations.iter().any(|m| m.introduced_at <= before_last && pred(m))
    };
    has(&|m| m.is_indel() && m.lineage == Lineage::Germline)
        && has(&|m| m.is_indel() && m.lineage == Lineage::Somatic)
        && has(&|m| m.kind == MutationType::Duplication)
}

fn binomial(rng: &mut ChaCha8Rng, n: usize, p: f64) -> usize {
    Binomial::new(n as u64, p).expect("probability validated").sample(rng) as usize
}

fn sample_plan(config: &GeneratorConfig, seed: u64, reference: Option<&str>) -> MutationPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference = match reference {
        Some(r) => r.to_string(),
        None => String::from_utf8(random_bases(&mut rng, config.reference_length)).expect("ascii"),
    };
    let len = reference.len();
    let nseg = (len / config.segment_length).max(1);
    let mut kinds: Vec<SegmentKind> = (0..nseg)
        .map(|i| if i % 2 == 0 { SegmentKind::Indels } else { SegmentKind::Duplications })
        .collect();
    kinds.shuffle(&mut rng);
    let segments: Vec<Segment> = kinds
        .into_iter()
        .enumerate()
        .map(|(i, kind)| Segment {
            start: i * config.segment_length,
            end: if i + 1 == nseg { len } else { (i + 1) * config.segment_length },
            kind,
        })
        .collect();

    let margin = config.margin();
    let indel_type = match config.mutation_kind {
        MutationKind::Insertions => MutationType::MicroInsertion,
        MutationKind::Deletions => MutationType::MicroDeletion,
    };
    let dup_cap = (nseg / 4).max(1);
    let mut mutations = Vec::new();
    for seg in &segments {
        let lo = seg.start + margin;
        let hi = seg.end.saturating_sub(margin + config.max_indel_size);
        match seg.kind {
            SegmentKind::Indels if hi > lo => {
                let count = binomial(&mut rng, hi - lo, config.indel_probability);
                let mut placed: Vec<usize> = Vec::new();
                for _ in 0..count {
                    // rejection sampling keeps indels apart; give up on crowded segments
                    let Some(pos) = (0..1000)
                        .map(|_| rng.random_range(lo..hi))
                        .find(|p| placed.iter().all(|q| p.abs_diff(*q) >= INDEL_SPACING))
                    else {
                        break;
                    };
                    placed.push(pos);
                    let length = rng.random_range(config.min_indel_size..=config.max_indel_size);
                    let payload = match indel_type {
                        MutationType::MicroInsertion => {
                            String::from_utf8(random_bases(&mut rng, length)).expect("ascii")
                        }
                        _ => String::new(),
                    };
                    let lineage = if rng.random_bool(0.5) { Lineage::Germline } else { Lineage::Somatic };
                    mutations.push(Mutation {
                        position: pos,
                        kind: indel_type,
                        length,
                        payload,
                        lineage,
                        introduced_at: rng.random_range(1..=config.series_length),
                    });
                }
            }
            SegmentKind::Duplications => {
                let count = binomial(&mut rng, seg.end - seg.start, config.copynumber_probability).min(dup_cap);
                if count == 0 {
                    continue;
                }
                let length = rng.random_range(config.min_dup_size..=config.max_dup_size);
                let Some(room) = (seg.end - seg.start).checked_sub(2 * margin + length) else {
                    continue;
                };
                let position = seg.start + margin + rng.random_range(0..=room);
                // copy number changes are tumor-only, so depth_ratio can see them
                mutations.push(Mutation {
                    position,
                    kind: MutationType::Duplication,
                    length,
                    payload: String::new(),
                    lineage: Lineage::Somatic,
                    introduced_at: rng.random_range(1..=config.series_length),
                });
            }
            _ => {}
        }
    }
    mutations.sort_by_key(|m| m.position);
    MutationPlan {
        config: config.clone(),
        seed_used: seed,
        reference,
        segments,
        mutations,
    }
}
