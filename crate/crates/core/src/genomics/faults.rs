//! Deterministic faults for the demo components. A faulty component behaves
//! normally except on the last test of a series, where it perturbs the
//! output that concerns mutations already present on the previous test.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::plan::{Lineage, Mutation, MutationPlan, MutationType};
use crate::error::{Error, Result};

/// Calls within this many bases of a targeted mutation are affected.
pub const WINDOW: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// Loses the calls of the outermost mutations (lowest and highest
    /// position).
    DropEdgeCalls,
    /// Reports every position shifted to the right.
    OffsetPositions,
    /// Loses the call of the most recently introduced mutation.
    SwallowLastMutation,
}

impl FaultKind {
    pub const ALL: [FaultKind; 3] = [
        FaultKind::DropEdgeCalls,
        FaultKind::OffsetPositions,
        FaultKind::SwallowLastMutation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::DropEdgeCalls => "drop-edge",
            FaultKind::OffsetPositions => "offset",
            FaultKind::SwallowLastMutation => "swallow",
        }
    }
}

impl FromStr for FaultKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "drop-edge" | "drop-edge-calls" => Ok(FaultKind::DropEdgeCalls),
            "offset" | "offset-positions" => Ok(FaultKind::OffsetPositions),
            "swallow" | "swallow-last-mutation" => Ok(FaultKind::SwallowLastMutation),
            other => Err(Error::usage(format!(
                "unknown fault `{other}` (expected drop-edge, offset or swallow)"
            ))),
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which mutations a component is able to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relevance {
    AllIndels,
    Germline,
    Somatic,
    Duplications,
}

impl Relevance {
    fn admits(self, m: &Mutation) -> bool {
        match self {
            Relevance::AllIndels => m.is_indel(),
            Relevance::Germline => m.is_indel() && m.lineage == Lineage::Germline,
            Relevance::Somatic => m.is_indel() && m.lineage == Lineage::Somatic,
            Relevance::Duplications => m.kind == MutationType::Duplication,
        }
    }
}

/// Mutations whose output the fault removes on the last test.
pub fn targets(plan: &MutationPlan, relevance: Relevance, fault: FaultKind) -> Vec<&Mutation> {
    let before_last = plan.series_length() - 1;
    let relevant: Vec<&Mutation> = plan
        .mutations
        .iter()
        .filter(|m| m.introduced_at <= before_last && relevance.admits(m))
        .collect();
    match fault {
        FaultKind::OffsetPositions => Vec::new(),
        FaultKind::SwallowLastMutation => relevant
            .iter()
            .max_by_key(|m| (m.introduced_at, m.position))
            .into_iter()
            .copied()
            .collect(),
        FaultKind::DropEdgeCalls => {
            let mut out: Vec<&Mutation> = relevant.first().into_iter().copied().collect();
            if relevant.len() > 1 {
                out.extend(relevant.last().copied());
            }
            out
        }
    }
}

/// Whether 0-based reference interval `[start, end)` comes near a target.
pub fn near(targets: &[&Mutation], start: usize, end: usize) -> bool {
    targets.iter().any(|m| {
        let (s, e) = m.span();
        start < e + WINDOW && s.saturating_sub(WINDOW) < end
    })
}
