//! Pileup-threshold indel calling and the call-set file format: a TSV with
//! header `POS REF ALT` in VCF conventions (1-based anchor base).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::align::{Alignment, Indel};

pub const MIN_SUPPORT: usize = 2;
pub const MIN_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariantCall {
    pub pos: usize,
    pub reference: String,
    pub alt: String,
}

/// Left-align an indel and express it as a VCF-style call. `None` when the
/// indel would need an anchor before the first reference base.
pub fn normalize(indel: &Indel, reference: &[u8]) -> Option<VariantCall> {
    match indel {
        Indel::Deletion { pos, len } => {
            let (mut p, l) = (*pos, *len);
            if l == 0 || p + l > reference.len() {
                return None;
            }
            while p > 0 && reference[p - 1] == reference[p + l - 1] {
                p -= 1;
            }
            if p == 0 {
                return None;
            }
            Some(VariantCall {
                pos: p,
                reference: String::from_utf8_lossy(&reference[p - 1..p + l]).into_owned(),
                alt: (reference[p - 1] as char).to_string(),
            })
        }
        Indel::Insertion { pos, seq } => {
            let mut p = *pos;
            let mut s: Vec<u8> = seq.as_bytes().to_vec();
            if s.is_empty() || p > reference.len() {
                return None;
            }
            while p > 0 && reference[p - 1] == *s.last().expect("non-empty") {
                s.pop();
                s.insert(0, reference[p - 1]);
                p -= 1;
            }
            if p == 0 {
                return None;
            }
            let anchor = reference[p - 1] as char;
            Some(VariantCall {
                pos: p,
                reference: anchor.to_string(),
                alt: format!("{anchor}{}", String::from_utf8_lossy(&s)),
            })
        }
    }
}

/// Per-position count of alignments covering each reference base.
pub fn depth(alignments: &[Alignment], len: usize) -> Vec<u32> {
    let mut diff = vec![0i64; len + 1];
    for a in alignments {
        let (s, e) = (a.start.min(len), a.end.min(len));
        diff[s] += 1;
        diff[e] -= 1;
    }
    let mut out = Vec::with_capacity(len);
    let mut run = 0i64;
    for d in &diff[..len] {
        run += d;
        out.push(run as u32);
    }
    out
}

/// Indels supported by at least `MIN_SUPPORT` alignments and by at least
/// `MIN_FRACTION` of the depth at the anchor base.
pub fn call_indels(alignments: &[Alignment], reference: &[u8]) -> BTreeSet<VariantCall> {
    let mut support: BTreeMap<VariantCall, usize> = BTreeMap::new();
    for a in alignments {
        if let Some(c) = a.indel.as_ref().and_then(|i| normalize(i, reference)) {
            *support.entry(c).or_default() += 1;
        }
    }
    let cov = depth(alignments, reference.len());
    support
        .into_iter()
        .filter(|(c, n)| {
            let d = cov[c.pos - 1].max(1) as f64;
            *n >= MIN_SUPPORT && *n as f64 >= MIN_FRACTION * d
        })
        .map(|(c, _)| c)
        .collect()
}

/// Tumor calls that the normal sample does not show.
pub fn call_somatic(
    normal: &[Alignment],
    tumor: &[Alignment],
    reference: &[u8],
) -> BTreeSet<VariantCall> {
    let n = call_indels(normal, reference);
    call_indels(tumor, reference).difference(&n).cloned().collect()
}

pub fn write_calls<'a>(
    path: &Path,
    calls: impl IntoIterator<Item = &'a VariantCall>,
) -> Result<(), String> {
    let mut out = String::from("POS\tREF\tALT\n");
    for c in calls {
        let _ = writeln!(out, "{}\t{}\t{}", c.pos, c.reference, c.alt);
    }
    fs::write(path, out).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_calls(path: &Path) -> Result<BTreeSet<VariantCall>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = BTreeSet::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        match f.as_slice() {
            [pos, r, a] => {
                out.insert(VariantCall {
                    pos: pos
                        .parse()
                        .map_err(|_| format!("{}: line {}: bad POS", path.display(), n + 1))?,
                    reference: r.to_string(),
                    alt: a.to_string(),
                });
            }
            _ => return Err(format!("{}: line {}: expected POS REF ALT", path.display(), n + 1)),
        }
    }
    Ok(out)
}
