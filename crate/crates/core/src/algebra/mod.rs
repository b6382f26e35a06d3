//! Three-valued relation algebra: outcomes, domains, composite expressions.

mod domain;
mod expr;
mod text;
mod value;

pub use domain::DomainSet;
pub use expr::RelationExpr;
pub use text::{is_ident_char, parse_expr};
pub use value::{combine, Op, TriValue, UndefCause};
