//! Toy aligner: unique k-mer seeds, then an ungapped placement or, failing
//! that, a placement with a single insertion or deletion.
//!
//! Output is a TSV with header `read_id start end indel mismatches`; `start`
//! and `end` are the 0-based half-open reference span, `indel` is `.`,
//! `I<pos>:<bases>` (bases inserted before reference `pos`) or
//! `D<pos>:<len>`.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rustc_hash::FxHashMap;

use super::reads::Read;

pub const K: usize = 16;
pub const MAX_MISMATCHES: usize = 4;
pub const MAX_INDEL: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Indel {
    Insertion { pos: usize, seq: String },
    Deletion { pos: usize, len: usize },
}

impl fmt::Display for Indel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Indel::Insertion { pos, seq } => write!(f, "I{pos}:{seq}"),
            Indel::Deletion { pos, len } => write!(f, "D{pos}:{len}"),
        }
    }
}

impl FromStr for Indel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("malformed indel `{s}`");
        let (head, tail) = s.split_once(':').ok_or_else(bad)?;
        let pos = head.get(1..).and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        match head.as_bytes().first() {
            Some(b'I') => Ok(Indel::Insertion { pos, seq: tail.to_string() }),
            Some(b'D') => Ok(Indel::Deletion {
                pos,
                len: tail.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub read_id: String,
    pub start: usize,
    pub end: usize,
    pub indel: Option<Indel>,
    pub mismatches: usize,
}

impl Alignment {
    /// Shift every coordinate by `d`.
    pub fn shifted(&self, d: usize) -> Alignment {
        let indel = self.indel.clone().map(|i| match i {
            Indel::Insertion { pos, seq } => Indel::Insertion { pos: pos + d, seq },
            Indel::Deletion { pos, len } => Indel::Deletion { pos: pos + d, len },
        });
        Alignment {
            read_id: self.read_id.clone(),
            start: self.start + d,
            end: self.end + d,
            indel,
            mismatches: self.mismatches,
        }
    }
}

fn encode(kmer: &[u8]) -> Option<u32> {
    let mut v = 0u32;
    for b in kmer {
        v = (v << 2)
            | match b {
                b'A' => 0,
                b'C' => 1,
                b'G' => 2,
                b'T' => 3,
                _ => return None,
            };
    }
    Some(v)
}

/// Positions of the k-mers that occur exactly once in the reference.
pub struct KmerIndex {
    unique: FxHashMap<u32, u32>,
}

impl KmerIndex {
    pub fn new(reference: &[u8]) -> KmerIndex {
        let mut seen: FxHashMap<u32, u32> = FxHashMap::default();
        seen.reserve(reference.len());
        for (i, w) in reference.windows(K).enumerate() {
            if let Some(code) = encode(w) {
                seen.entry(code)
                    .and_modify(|p| *p = u32::MAX)
                    .or_insert(i as u32);
            }
        }
        seen.retain(|_, p| *p != u32::MAX);
        KmerIndex { unique: seen }
    }

    fn lookup(&self, kmer: &[u8]) -> Option<usize> {
        encode(kmer).and_then(|c| self.unique.get(&c)).map(|p| *p as usize)
    }
}

fn mismatch(read: &[u8], reference: &[u8], i: usize, diag: i64) -> bool {
    let r = i as i64 + diag;
    r < 0 || r as usize >= reference.len() || reference[r as usize] != read[i]
}

/// Place one read, or `None` when it cannot be placed.
pub fn align_read(read: &Read, reference: &[u8], index: &KmerIndex) -> Option<Alignment> {
    let seq = &read.seq;
    let len = seq.len();
    if len < K {
        return None;
    }
    // (diagonal, votes, first offset); reads touch only a few diagonals
    let mut ranked: Vec<(i64, usize, usize)> = Vec::new();
    for off in 0..=len - K {
        if let Some(q) = index.lookup(&seq[off..off + K]) {
            let d = q as i64 - off as i64;
            match ranked.iter_mut().find(|e| e.0 == d) {
                Some(e) => e.1 += 1,
                None => ranked.push((d, 1, off)),
            }
        }
    }
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let &(best, _, best_off) = ranked.first()?;

    let ungapped = (0..len).filter(|&i| mismatch(seq, reference, i, best)).count();
    if best >= 0 && best as usize + len <= reference.len() && ungapped <= MAX_MISMATCHES {
        return Some(Alignment {
            read_id: read.id.clone(),
            start: best as usize,
            end: best as usize + len,
            indel: None,
            mismatches: ungapped,
        });
    }

    let &(other, _, other_off) = ranked
        .iter()
        .skip(1)
        .find(|(d, _, _)| d.abs_diff(best) as usize <= MAX_INDEL)?;
    let (left, right) = if best_off <= other_off { (best, other) } else { (other, best) };
    if left < 0 || right + len as i64 > reference.len() as i64 {
        return None;
    }
    let delta = right - left;
    // prefix[p]: mismatches of seq[..p] on the left diagonal
    let mut prefix = vec![0usize; len + 1];
    for i in 0..len {
        prefix[i + 1] = prefix[i] + mismatch(seq, reference, i, left) as usize;
    }
    // suffix[p]: mismatches of seq[p..] on the right diagonal
    let mut suffix = vec![0usize; len + 1];
    for i in (0..len).rev() {
        suffix[i] = suffix[i + 1] + mismatch(seq, reference, i, right) as usize;
    }
    let (mm, indel) = if delta > 0 {
        let (p, mm) = (1..len).map(|p| (p, prefix[p] + suffix[p])).min_by_key(|&(p, mm)| (mm, p))?;
        let pos = (left + p as i64) as usize;
        (mm, Indel::Deletion { pos, len: delta as usize })
    } else {
        let ins = (-delta) as usize;
        if ins + 2 > len {
            return None;
        }
        let (p, mm) = (1..len - ins)
            .map(|p| (p, prefix[p] + suffix[p + ins]))
            .min_by_key(|&(p, mm)| (mm, p))?;
        let pos = (left + p as i64) as usize;
        let bases = String::from_utf8(seq[p..p + ins].to_vec()).ok()?;
        (mm, Indel::Insertion { pos, seq: bases })
    };
    if mm > MAX_MISMATCHES {
        return None;
    }
    Some(Alignment {
        read_id: read.id.clone(),
        start: left as usize,
        end: (right + len as i64) as usize,
        indel: Some(indel),
        mismatches: mm,
    })
}

pub fn align_all(reads: &[Read], reference: &[u8]) -> Vec<Alignment> {
    let index = KmerIndex::new(reference);
    reads
        .iter()
        .filter_map(|r| align_read(r, reference, &index))
        .collect()
}

pub fn write_alignments(path: &Path, alignments: &[Alignment]) -> Result<(), String> {
    let mut out = String::new();
    if !alignments.is_empty() {
        out.push_str("read_id\tstart\tend\tindel\tmismatches\n");
    }
    for a in alignments {
        let indel = a.indel.as_ref().map_or(".".to_string(), Indel::to_string);
        let _ = writeln!(out, "{}\t{}\t{}\t{indel}\t{}", a.read_id, a.start, a.end, a.mismatches);
    }
    fs::write(path, out).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_alignments(path: &Path) -> Result<Vec<Alignment>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || format!("{}: line {}: malformed alignment", path.display(), n + 1);
        if f.len() != 5 {
            return Err(bad());
        }
        out.push(Alignment {
            read_id: f[0].to_string(),
            start: f[1].parse().map_err(|_| bad())?,
            end: f[2].parse().map_err(|_| bad())?,
            indel: if f[3] == "." { None } else { Some(f[3].parse()?) },
            mismatches: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genomics::plan::random_bases;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> Vec<u8> {
        random_bases(&mut ChaCha8Rng::seed_from_u64(11), 5000)
    }

    fn read(seq: &[u8]) -> Read {
        Read { id: "r".into(), seq: seq.to_vec() }
    }

    #[test]
    fn verbatim_read_aligns_in_place() {
        let r = reference();
        let idx = KmerIndex::new(&r);
        let a = align_read(&read(&r[100..200]), &r, &idx).unwrap();
        assert_eq!((a.start, a.end, a.indel, a.mismatches), (100, 200, None, 0));
    }

    #[test]
    fn read_over_an_insertion() {
        let r = reference();
        let idx = KmerIndex::new(&r);
        let mut s = r[1000..1040].to_vec();
        s.extend_from_slice(b"TTTTTGGG");
        s.extend_from_slice(&r[1040..1092]);
        let a = align_read(&read(&s), &r, &idx).unwrap();
        assert_eq!(a.start, 1000);
        assert_eq!(a.end, 1092);
        match a.indel.unwrap() {
            Indel::Insertion { pos, seq } => {
                assert!(pos <= 1040 && pos + 8 >= 1040);
                assert_eq!(seq.len(), 8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn read_over_a_deletion() {
        let r = reference();
        let idx = KmerIndex::new(&r);
        let mut s = r[2000..2050].to_vec();
        s.extend_from_slice(&r[2062..2112]);
        let a = align_read(&read(&s), &r, &idx).unwrap();
        assert_eq!((a.start, a.end), (2000, 2112));
        assert!(matches!(a.indel, Some(Indel::Deletion { len: 12, .. })));
    }

    #[test]
    fn random_reads_are_dropped() {
        let r = reference();
        let idx = KmerIndex::new(&r);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let placed = (0..50)
            .filter(|_| align_read(&read(&random_bases(&mut rng, 100)), &r, &idx).is_some())
            .count();
        assert_eq!(placed, 0);
    }

    #[test]
    fn indel_text_round_trips() {
        for s in ["I10:ACG", "D5:3"] {
            assert_eq!(s.parse::<Indel>().unwrap().to_string(), s);
        }
        assert!("X1:2".parse::<Indel>().is_err());
    }
}
