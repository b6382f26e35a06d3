//! Toy sequencer and the read file format: FASTA-style `>id` / bases pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plan::{MutationPlan, Sample, BASES};
use crate::error::{Error, Result};

pub struct Read {
    pub id: String,
    pub seq: Vec<u8>,
}

/// Reads over `genome` at the given mean depth. Start positions are
/// stratified: the genome is cut into as many equal strata as there are
/// reads and each read starts uniformly inside its stratum, which keeps
/// coverage close to uniform. Each base is then substituted with
/// probability `noise_rate`.
pub fn sequence(
    genome: &[u8],
    read_length: usize,
    coverage: f64,
    noise_rate: f64,
    rng: &mut impl Rng,
    prefix: &str,
) -> Vec<Read> {
    if genome.len() < read_length {
        return Vec::new();
    }
    let starts = genome.len() - read_length + 1;
    let n = ((coverage * genome.len() as f64) / read_length as f64).ceil() as usize;
    let width = starts as f64 / n as f64;
    (0..n)
        .map(|i| {
            let start = ((i as f64 + rng.random::<f64>()) * width) as usize;
            let start = start.min(starts - 1);
            let mut seq = genome[start..start + read_length].to_vec();
            if noise_rate > 0.0 {
                for b in &mut seq {
                    if rng.random_bool(noise_rate) {
                        let others: Vec<u8> = BASES.iter().copied().filter(|c| c != b).collect();
                        *b = others[rng.random_range(0..3)];
                    }
                }
            }
            Read {
                id: format!("{prefix}-{i}"),
                seq,
            }
        })
        .collect()
}

/// Reads for one sample on one test (1-based), seeded from the plan so that
/// the same plan always yields the same bytes.
pub fn sequence_sample(plan: &MutationPlan, test: usize, sample: Sample) -> Vec<Read> {
    let c = &plan.config;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed_used);
    let lane = match sample {
        Sample::Normal => 0,
        Sample::Tumor => 1,
    };
    rng.set_stream(1 + 2 * test as u64 + lane);
    let prefix = format!("{}-t{test}", if lane == 0 { "normal" } else { "tumor" });
    sequence(
        &plan.genome(test, sample),
        c.read_length,
        c.coverage_depth,
        c.noise_rate,
        &mut rng,
        &prefix,
    )
}

pub fn write_reads(path: &Path, reads: &[Read]) -> Result<()> {
    let mut out = String::with_capacity(reads.len() * (reads.first().map_or(0, |r| r.seq.len()) + 24));
    for r in reads {
        let _ = writeln!(out, ">{}", r.id);
        out.push_str(std::str::from_utf8(&r.seq).expect("ascii bases"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_reads(path: &Path) -> std::result::Result<Vec<Read>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    let mut lines = text.lines().filter(|l| !l.is_empty());
    while let Some(header) = lines.next() {
        let id = header
            .strip_prefix('>')
            .ok_or_else(|| format!("{}: expected `>id`, got `{header}`", path.display()))?;
        let seq = lines
            .next()
            .ok_or_else(|| format!("{}: read `{id}` has no sequence", path.display()))?;
        out.push(Read {
            id: id.to_string(),
            seq: seq.as_bytes().to_vec(),
        });
    }
    Ok(out)
}
