//! Policy language frontend: parsing, grounding and queries.

mod ast;
mod ground;
mod parse;
mod print;
mod query;

pub use ast::*;
pub use ground::{ground, GroundAction, GroundAtom, GroundLimits, GroundRead, Policy};
pub use parse::parse_policy;
pub use print::{print_policy, formula as print_formula};
pub use query::{parse_query, parse_query_with, Query};

/// Parses and grounds in one step.
pub fn load_policy(src: &str, limits: GroundLimits) -> crate::error::Result<Policy> {
    ground(parse_policy(src)?, limits)
}
