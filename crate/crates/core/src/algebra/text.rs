//! Canonical prefix text form for relation expressions.
//!
//! ```text
//! expr  := "true" | "atom(" ident ")" | "def(" expr ")" | "indef(" expr ")"
//!        | op "(" expr "," expr ")"
//! op    := "and" | "or" | "xor" | "hat_and" | "hat_or" | "hat_xor"
//! ident := one or more of [A-Za-z0-9_*'.+-]
//! ```
//!
//! Whitespace between tokens is ignored. Printing always emits `", "` between
//! binary operands.

use std::fmt;

use super::expr::RelationExpr;
use super::value::Op;
use crate::error::{Error, Result};

pub(super) fn write_expr(e: &RelationExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        RelationExpr::Atom(id) => write!(f, "atom({id})"),
        RelationExpr::ConstTrue => f.write_str("true"),
        RelationExpr::Def(inner) => {
            f.write_str("def(")?;
            write_expr(inner, f)?;
            f.write_str(")")
        }
        RelationExpr::Indef(inner) => {
            f.write_str("indef(")?;
            write_expr(inner, f)?;
            f.write_str(")")
        }
        RelationExpr::Binary(op, l, r) => {
            write!(f, "{}(", op.keyword())?;
            write_expr(l, f)?;
            f.write_str(", ")?;
            write_expr(r, f)?;
            f.write_str(")")
        }
    }
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '*' | '\'' | '.' | '+' | '-')
}

/// Parse the canonical text form.
pub fn parse_expr(input: &str) -> Result<RelationExpr> {
    let mut p = Parser { src: input, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != input.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

impl std::str::FromStr for RelationExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .char_indices()
            .find(|&(_, c)| !is_ident_char(c))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += len;
        &rest[..len]
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<RelationExpr> {
        let start = self.pos;
        let head = self.word();
        if head.is_empty() {
            return Err(self.error("expected an expression"));
        }
        match head {
            "true" => Ok(RelationExpr::ConstTrue),
            "atom" => {
                self.expect('(')?;
                let id = self.word();
                if id.is_empty() {
                    return Err(self.error("expected an atom id"));
                }
                self.expect(')')?;
                Ok(RelationExpr::atom(id))
            }
            "def" | "indef" => {
                self.expect('(')?;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(if head == "def" {
                    RelationExpr::def(inner)
                } else {
                    RelationExpr::indef(inner)
                })
            }
            other => {
                let op = Op::from_keyword(other).ok_or(Error::Parse {
                    offset: start,
                    message: format!("unknown form `{other}`"),
                })?;
                self.expect('(')?;
                let l = self.expr()?;
                self.expect(',')?;
                let r = self.expr()?;
                self.expect(')')?;
                Ok(RelationExpr::binary(op, l, r))
            }
        }
    }
}
