use serde::{Deserialize, Serialize};

use crate::algebra::Op;

/// How relations of mutually exclusive branches are brought together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchMode {
    /// Combine the branch relations into one relation, then compose.
    #[default]
    Joint,
    /// Compose once per branch, then combine the per-branch composites.
    PerBranch,
}

impl std::str::FromStr for BranchMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "joint" => Ok(BranchMode::Joint),
            "per-branch" | "per_branch" => Ok(BranchMode::PerBranch),
            other => Err(crate::Error::usage(format!(
                "unknown branch mode `{other}` (expected joint or per-branch)"
            ))),
        }
    }
}

/// Operator whitelists and size caps that stand in for the human choices made
/// while deriving composites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombinationPolicy {
    /// Operators used to grow a vertex's relation set.
    pub extend_ops: Vec<Op>,
    /// Operators used to join the relations of consumers sharing a producer.
    pub fanout_ops: Vec<Op>,
    /// Operators used to join relations (or composites) of exclusive branches.
    pub branch_ops: Vec<Op>,
    pub branch_mode: BranchMode,
    /// Rounds of pairwise extension; 0 leaves the sets as declared.
    pub extension_rounds: usize,
    pub max_set_size: usize,
    pub max_selections: usize,
    pub max_candidates: usize,
}

impl Default for CombinationPolicy {
    fn default() -> Self {
        CombinationPolicy {
            extend_ops: Op::NON_XOR.to_vec(),
            fanout_ops: Op::NON_XOR.to_vec(),
            branch_ops: Op::ALL.to_vec(),
            branch_mode: BranchMode::Joint,
            extension_rounds: 1,
            max_set_size: 32,
            max_selections: 256,
            max_candidates: 4096,
        }
    }
}
