//! Depth statistics: a TSV with header `pos depth_normal depth_tumor
//! depth_ratio`, one row per reference base (1-based `pos`). The ratio is
//! `NA` where the normal sample has no coverage.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::align::Alignment;
use super::call::depth;

/// Ratio at or above which a position counts as elevated.
pub const ELEVATED_RATIO: f64 = 1.5;
/// Shortest run of elevated positions that counts as a region.
pub const MIN_REGION: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Pileup {
    pub normal: Vec<u32>,
    pub tumor: Vec<u32>,
}

impl Pileup {
    pub fn new(normal: &[Alignment], tumor: &[Alignment], len: usize) -> Pileup {
        Pileup {
            normal: depth(normal, len),
            tumor: depth(tumor, len),
        }
    }

    pub fn ratio(&self, i: usize) -> Option<f64> {
        match self.normal[i] {
            0 => None,
            n => Some(self.tumor[i] as f64 / n as f64),
        }
    }

    /// Rows are written for positions `1 + offset ..= len + offset`.
    pub fn write(&self, path: &Path, offset: usize) -> Result<(), String> {
        let mut out = String::from("pos\tdepth_normal\tdepth_tumor\tdepth_ratio\n");
        for i in 0..self.normal.len() {
            let ratio = self.ratio(i).map_or("NA".to_string(), |r| format!("{r:.4}"));
            let _ = writeln!(out, "{}\t{}\t{}\t{ratio}", i + 1 + offset, self.normal[i], self.tumor[i]);
        }
        fs::write(path, out).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// `(pos, ratio)` rows of a depth table.
pub fn read_ratios(path: &Path) -> Result<Vec<(usize, Option<f64>)>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || format!("{}: line {}: malformed depth row", path.display(), n + 1);
        if f.len() != 4 {
            return Err(bad());
        }
        let pos = f[0].parse().map_err(|_| bad())?;
        let ratio = match f[3] {
            "NA" => None,
            r => Some(r.parse().map_err(|_| bad())?),
        };
        out.push((pos, ratio));
    }
    Ok(out)
}

/// Maximal runs of consecutive positions with ratio >= `ELEVATED_RATIO`
/// that are at least `MIN_REGION` long, as half-open `(start, end)`.
pub fn elevated_regions(rows: &[(usize, Option<f64>)]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for &(pos, ratio) in rows {
        let up = ratio.is_some_and(|r| r >= ELEVATED_RATIO);
        run = match (run, up) {
            (Some((s, e)), true) if e == pos => Some((s, pos + 1)),
            (prev, true) => {
                out.extend(prev);
                Some((pos, pos + 1))
            }
            (prev, false) => {
                out.extend(prev);
                None
            }
        };
    }
    out.extend(run);
    out.retain(|(s, e)| e - s >= MIN_REGION);
    out
}
