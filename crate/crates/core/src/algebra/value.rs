//! Three-valued relation outcomes and the operator table.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Why a relation produced no verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefCause {
    /// The test group's input class is outside the relation's domain.
    OutOfDomain,
    /// A value the relation reads was never produced (vertex skipped or crashed).
    NotComputed,
}

/// Outcome of evaluating a relation on one test group.
///
/// The cause is carried inside the `Undef` variant, so "cause present iff
/// undefined" holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriValue {
    True,
    False,
    Undef(UndefCause),
}

impl TriValue {
    pub const OUT_OF_DOMAIN: TriValue = TriValue::Undef(UndefCause::OutOfDomain);
    pub const NOT_COMPUTED: TriValue = TriValue::Undef(UndefCause::NotComputed);

    /// Every value of the domain, in a fixed order.
    pub const ALL: [TriValue; 4] = [
        TriValue::True,
        TriValue::False,
        TriValue::OUT_OF_DOMAIN,
        TriValue::NOT_COMPUTED,
    ];

    pub fn from_bool(b: bool) -> Self {
        if b {
            TriValue::True
        } else {
            TriValue::False
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            TriValue::True => Some(true),
            TriValue::False => Some(false),
            TriValue::Undef(_) => None,
        }
    }

    pub fn is_defined(self) -> bool {
        !matches!(self, TriValue::Undef(_))
    }

    pub fn undef_cause(self) -> Option<UndefCause> {
        match self {
            TriValue::Undef(c) => Some(c),
            _ => None,
        }
    }

    /// Short label used in reports and CSV cells.
    pub fn label(self) -> &'static str {
        match self {
            TriValue::True => "true",
            TriValue::False => "false",
            TriValue::OUT_OF_DOMAIN => "undef:out_of_domain",
            TriValue::NOT_COMPUTED => "undef:not_computed",
        }
    }
}

impl fmt::Display for TriValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The six binary combinators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    And,
    Or,
    Xor,
    HatAnd,
    HatOr,
    HatXor,
}

impl Op {
    pub const ALL: [Op; 6] = [Op::And, Op::Or, Op::Xor, Op::HatAnd, Op::HatOr, Op::HatXor];
    /// Operators allowed when extending relation sets and at fan-out points.
    pub const NON_XOR: [Op; 4] = [Op::HatOr, Op::HatAnd, Op::Or, Op::And];

    /// Domain-extending variant (falls back to the defined operand).
    pub fn is_hat(self) -> bool {
        matches!(self, Op::HatAnd | Op::HatOr | Op::HatXor)
    }

    /// `x op x == x` for every value.
    pub fn is_idempotent(self) -> bool {
        !matches!(self, Op::Xor | Op::HatXor)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Op::And => "and",
            Op::Or => "or",
            Op::Xor => "xor",
            Op::HatAnd => "hat_and",
            Op::HatOr => "hat_or",
            Op::HatXor => "hat_xor",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.keyword() == s)
    }

    /// Math-style symbol used in human-readable tables.
    pub fn symbol(self) -> &'static str {
        match self {
            Op::And => "∩",
            Op::Or => "∪",
            Op::Xor => "⊕",
            Op::HatAnd => "∩̂",
            Op::HatOr => "∪̂",
            Op::HatXor => "⊕̂",
        }
    }

    fn apply_bool(self, a: bool, b: bool) -> bool {
        match self {
            Op::And | Op::HatAnd => a && b,
            Op::Or | Op::HatOr => a || b,
            Op::Xor | Op::HatXor => a ^ b,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl std::str::FromStr for Op {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Op::from_keyword(s).ok_or_else(|| format!("unknown operator `{s}`"))
    }
}

/// Combine two outcomes.
///
/// Resolution order:
/// 1. hat operators return the other operand when exactly one side is out of
///    domain (both out of domain stays out of domain);
/// 2. plain operators are out of domain when either side is, unless the other
///    side is not-computed (not-computed outranks out-of-domain);
/// 3. with both sides in {true, false, not-computed}: two booleans combine
///    classically; a false conjunct or a true disjunct decides the result
///    regardless of a not-computed partner; anything else is not-computed.
pub fn combine(op: Op, a: TriValue, b: TriValue) -> TriValue {
    use TriValue::*;
    const OOD: TriValue = TriValue::OUT_OF_DOMAIN;
    const NC: TriValue = TriValue::NOT_COMPUTED;

    if op.is_hat() {
        match (a, b) {
            (OOD, other) | (other, OOD) => return other,
            _ => {}
        }
    } else {
        match (a, b) {
            (NC, OOD) | (OOD, NC) => return NC,
            (OOD, _) | (_, OOD) => return OOD,
            _ => {}
        }
    }

    match (a.as_bool(), b.as_bool()) {
        (Some(x), Some(y)) => TriValue::from_bool(op.apply_bool(x, y)),
        (Some(x), None) | (None, Some(x)) => match op {
            Op::And | Op::HatAnd if !x => False,
            Op::Or | Op::HatOr if x => True,
            _ => NC,
        },
        (None, None) => NC,
    }
}
