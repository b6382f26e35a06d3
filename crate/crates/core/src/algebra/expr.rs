use std::collections::BTreeSet;
use std::fmt;

use super::domain::DomainSet;
use super::value::{combine, Op, TriValue, UndefCause};
use crate::error::{Error, Result};

/// A composite relation: per-component atoms joined by the six combinators,
/// optionally wrapped in the totalizing `def` / `indef` forms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationExpr {
    Atom(String),
    ConstTrue,
    Binary(Op, Box<RelationExpr>, Box<RelationExpr>),
    Def(Box<RelationExpr>),
    Indef(Box<RelationExpr>),
}

impl RelationExpr {
    pub fn atom(id: impl Into<String>) -> Self {
        RelationExpr::Atom(id.into())
    }

    pub fn binary(op: Op, l: RelationExpr, r: RelationExpr) -> Self {
        RelationExpr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn and(l: RelationExpr, r: RelationExpr) -> Self {
        Self::binary(Op::And, l, r)
    }

    pub fn def(e: RelationExpr) -> Self {
        RelationExpr::Def(Box::new(e))
    }

    pub fn indef(e: RelationExpr) -> Self {
        RelationExpr::Indef(Box::new(e))
    }

    /// Left fold of `exprs` with `op`; `None` for an empty slice.
    pub fn fold(op: Op, exprs: &[RelationExpr]) -> Option<RelationExpr> {
        let mut iter = exprs.iter().cloned();
        let first = iter.next()?;
        Some(iter.fold(first, |acc, e| RelationExpr::binary(op, acc, e)))
    }

    pub fn is_wrapped(&self) -> bool {
        matches!(self, RelationExpr::Def(_) | RelationExpr::Indef(_))
    }

    /// Atom ids referenced anywhere in the tree.
    pub fn atoms(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            RelationExpr::Atom(id) => {
                out.insert(id);
            }
            RelationExpr::ConstTrue => {}
            RelationExpr::Binary(_, l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            RelationExpr::Def(e) | RelationExpr::Indef(e) => e.collect_atoms(out),
        }
    }

    /// Atom occurrences in left-to-right order, duplicates kept.
    pub fn atom_occurrences(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk_atoms(&mut |id| out.push(id));
        out
    }

    fn walk_atoms<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            RelationExpr::Atom(id) => f(id),
            RelationExpr::ConstTrue => {}
            RelationExpr::Binary(_, l, r) => {
                l.walk_atoms(f);
                r.walk_atoms(f);
            }
            RelationExpr::Def(e) | RelationExpr::Indef(e) => e.walk_atoms(f),
        }
    }

    /// Rebuild the tree with every atom replaced by `f(id)`.
    pub fn map_atoms(&self, f: &mut impl FnMut(&str) -> RelationExpr) -> RelationExpr {
        match self {
            RelationExpr::Atom(id) => f(id),
            RelationExpr::ConstTrue => RelationExpr::ConstTrue,
            RelationExpr::Binary(op, l, r) => {
                RelationExpr::binary(*op, l.map_atoms(f), r.map_atoms(f))
            }
            RelationExpr::Def(e) => RelationExpr::def(e.map_atoms(f)),
            RelationExpr::Indef(e) => RelationExpr::indef(e.map_atoms(f)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            RelationExpr::Atom(_) | RelationExpr::ConstTrue => 1,
            RelationExpr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
            RelationExpr::Def(e) | RelationExpr::Indef(e) => 1 + e.node_count(),
        }
    }

    /// Evaluate with atom values supplied by `lookup`.
    ///
    /// `lookup` returns an error for ids it cannot resolve; evaluation stops at
    /// the first such error.
    pub fn eval_with<F>(&self, lookup: &mut F) -> Result<TriValue>
    where
        F: FnMut(&str) -> Result<TriValue>,
    {
        Ok(match self {
            RelationExpr::Atom(id) => lookup(id)?,
            RelationExpr::ConstTrue => TriValue::True,
            RelationExpr::Binary(op, l, r) => {
                let a = l.eval_with(lookup)?;
                let b = r.eval_with(lookup)?;
                combine(*op, a, b)
            }
            RelationExpr::Def(e) => match e.eval_with(lookup)? {
                TriValue::Undef(_) => TriValue::True,
                v => v,
            },
            RelationExpr::Indef(e) => match e.eval_with(lookup)? {
                TriValue::Undef(UndefCause::NotComputed) => TriValue::True,
                TriValue::Undef(UndefCause::OutOfDomain) => TriValue::OUT_OF_DOMAIN,
                _ => TriValue::False,
            },
        })
    }

    /// Symbolic domain of the expression.
    ///
    /// `lookup` maps an atom id to its declared domain. Plain operators
    /// intersect domains, hat operators unite them, and `def`/`indef`/`true`
    /// are total.
    pub fn domain_of<'a, F>(&self, universe: &DomainSet, lookup: &F) -> Result<DomainSet>
    where
        F: Fn(&str) -> Option<&'a DomainSet>,
    {
        Ok(match self {
            RelationExpr::Atom(id) => {
                let dom = lookup(id).ok_or_else(|| Error::config(format!("unknown atom `{id}`")))?;
                if !dom.is_subset(universe) {
                    let extra = dom.difference(universe);
                    return Err(Error::config(format!(
                        "atom `{id}` references undeclared classes {extra}"
                    )));
                }
                dom.clone()
            }
            RelationExpr::ConstTrue => universe.clone(),
            RelationExpr::Def(e) | RelationExpr::Indef(e) => {
                // still validate the subtree
                e.domain_of(universe, lookup)?;
                universe.clone()
            }
            RelationExpr::Binary(op, l, r) => {
                let dl = l.domain_of(universe, lookup)?;
                let dr = r.domain_of(universe, lookup)?;
                if op.is_hat() {
                    dl.union(&dr)
                } else {
                    dl.intersection(&dr)
                }
            }
        })
    }

    /// Light structural cleanup that never changes the evaluated value:
    /// drops `true` conjuncts of plain `and`, collapses `def(def(e))`,
    /// and merges identical operands of idempotent operators.
    pub fn simplify(&self) -> RelationExpr {
        match self {
            RelationExpr::Atom(_) | RelationExpr::ConstTrue => self.clone(),
            RelationExpr::Def(e) => match e.simplify() {
                inner @ RelationExpr::Def(_) => inner,
                RelationExpr::ConstTrue => RelationExpr::ConstTrue,
                inner => RelationExpr::def(inner),
            },
            RelationExpr::Indef(e) => RelationExpr::indef(e.simplify()),
            RelationExpr::Binary(op, l, r) => {
                let l = l.simplify();
                let r = r.simplify();
                if *op == Op::And {
                    if l == RelationExpr::ConstTrue {
                        return r;
                    }
                    if r == RelationExpr::ConstTrue {
                        return l;
                    }
                }
                if op.is_idempotent() && l == r {
                    return l;
                }
                RelationExpr::binary(*op, l, r)
            }
        }
    }

    /// Canonical form for syntactic comparison: chains of one operator are
    /// flattened, their operands sorted, then rebuilt left-nested.
    ///
    /// This is a comparison key only; it is not guaranteed to preserve the
    /// evaluated value when not-computed and out-of-domain operands mix.
    pub fn normal_form(&self) -> RelationExpr {
        match self {
            RelationExpr::Atom(_) | RelationExpr::ConstTrue => self.clone(),
            RelationExpr::Def(e) => RelationExpr::def(e.normal_form()),
            RelationExpr::Indef(e) => RelationExpr::indef(e.normal_form()),
            RelationExpr::Binary(op, _, _) => {
                let mut operands = Vec::new();
                self.flatten_into(*op, &mut operands);
                let mut keyed: Vec<(String, RelationExpr)> = operands
                    .into_iter()
                    .map(|e| {
                        let n = e.normal_form();
                        (n.to_string(), n)
                    })
                    .collect();
                keyed.sort_by(|a, b| a.0.cmp(&b.0));
                let sorted: Vec<RelationExpr> = keyed.into_iter().map(|(_, e)| e).collect();
                RelationExpr::fold(*op, &sorted).expect("binary node has operands")
            }
        }
    }

    fn flatten_into<'a>(&'a self, op: Op, out: &mut Vec<&'a RelationExpr>) {
        match self {
            RelationExpr::Binary(o, l, r) if *o == op => {
                l.flatten_into(op, out);
                r.flatten_into(op, out);
            }
            other => out.push(other),
        }
    }

    /// Human-readable infix rendering with set-style operator symbols.
    pub fn pretty(&self) -> String {
        match self {
            RelationExpr::Atom(id) => id.clone(),
            RelationExpr::ConstTrue => "1".to_string(),
            RelationExpr::Def(e) => format!("DEF({})", e.pretty()),
            RelationExpr::Indef(e) => format!("INDEF({})", e.pretty()),
            RelationExpr::Binary(op, l, r) => {
                let side = |e: &RelationExpr| match e {
                    RelationExpr::Binary(inner, _, _) if inner == op && !matches!(op, Op::Xor | Op::HatXor) => {
                        e.pretty()
                    }
                    RelationExpr::Binary(..) => format!("({})", e.pretty()),
                    _ => e.pretty(),
                };
                format!("{} {} {}", side(l), op.symbol(), side(r))
            }
        }
    }
}

impl fmt::Display for RelationExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        super::text::write_expr(self, f)
    }
}
