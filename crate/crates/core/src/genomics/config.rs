use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    Insertions,
    Deletions,
}

impl MutationKind {
    /// The input class of series built with this kind.
    pub fn class(self) -> &'static str {
        match self {
            MutationKind::Insertions => "add-insertions",
            MutationKind::Deletions => "add-deletions",
        }
    }

    /// Suffix of the relation ids for this kind (`S_i`, `GT_d`, ...).
    pub fn suffix(self) -> &'static str {
        match self {
            MutationKind::Insertions => "i",
            MutationKind::Deletions => "d",
        }
    }

    pub fn from_class(class: &str) -> Option<MutationKind> {
        match class {
            "add-insertions" => Some(MutationKind::Insertions),
            "add-deletions" => Some(MutationKind::Deletions),
            _ => None,
        }
    }
}

impl FromStr for MutationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "insertions" | "i" => Ok(MutationKind::Insertions),
            "deletions" | "d" => Ok(MutationKind::Deletions),
            other => Err(Error::usage(format!(
                "unknown mutation kind `{other}` (expected insertions or deletions)"
            ))),
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MutationKind::Insertions => "insertions",
            MutationKind::Deletions => "deletions",
        })
    }
}

/// Parameters of a synthetic test series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Per-base probability of a micro-indel inside an indel segment.
    pub indel_probability: f64,
    /// Per-base probability of a duplication inside a duplication segment.
    pub copynumber_probability: f64,
    pub min_indel_size: usize,
    pub max_indel_size: usize,
    pub min_dup_size: usize,
    pub max_dup_size: usize,
    pub series_length: usize,
    pub mutation_kind: MutationKind,
    pub reference_length: usize,
    pub segment_length: usize,
    pub read_length: usize,
    pub coverage_depth: f64,
    /// Per-base substitution probability of the sequencer.
    pub noise_rate: f64,
    /// Resample (with the next seed) until the plan has a germline indel, a
    /// somatic indel and a duplication that all appear before the last test.
    pub require_all_kinds: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            indel_probability: 0.0005,
            copynumber_probability: 0.001,
            min_indel_size: 1,
            max_indel_size: 50,
            min_dup_size: 5000,
            max_dup_size: 10000,
            series_length: 9,
            mutation_kind: MutationKind::Insertions,
            reference_length: 50_000,
            segment_length: 12_000,
            read_length: 100,
            coverage_depth: 30.0,
            noise_rate: 0.0,
            require_all_kinds: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("generator config: {m}")));
        if !(1 <= self.min_indel_size && self.min_indel_size <= self.max_indel_size && self.max_indel_size <= 50) {
            return bad("need 1 <= min_indel_size <= max_indel_size <= 50");
        }
        if self.min_dup_size > self.max_dup_size || self.min_dup_size == 0 {
            return bad("need 0 < min_dup_size <= max_dup_size");
        }
        for (name, p) in [
            ("indel_probability", self.indel_probability),
            ("copynumber_probability", self.copynumber_probability),
            ("noise_rate", self.noise_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.series_length < 2 {
            return bad("series_length must be at least 2");
        }
        if self.read_length < 32 {
            return bad("read_length must be at least 32");
        }
        if self.coverage_depth <= 0.0 {
            return bad("coverage_depth must be positive");
        }
        if self.segment_length < self.max_dup_size + 2 * self.margin() {
            return bad("segment_length too small for the largest duplication");
        }
        if self.reference_length < self.segment_length {
            return bad("reference_length must hold at least one segment");
        }
        Ok(())
    }

    /// Distance kept between mutations and segment boundaries.
    pub fn margin(&self) -> usize {
        self.read_length + 50
    }
}
