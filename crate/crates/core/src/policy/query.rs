//! Query files: a single `ι : φ` entry, possibly spread over several lines.

use super::Policy;
use crate::ctlk::{Ctlk, Vocabulary};
use crate::error::{Error, Result, SyntaxError};
use crate::expr::Expr;
use crate::kernel;
use crate::syntax::{self, parse_formula, Cursor, Tok, Token};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub init: Expr,
    pub property: Ctlk,
}

/// Parses a query against the derived proposition names of `policy`.
pub fn parse_query(src: &str, policy: &Policy) -> Result<Query> {
    let u = kernel::universe(policy);
    let props: HashMap<String, usize> = u
        .names(&policy.atom_names, &policy.agents)
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    let vocab = Vocabulary {
        props: &props,
        agents: &policy.agents,
        objects: &policy.source.objects,
        macros: &policy.macros,
    };
    parse_query_with(src, &vocab)
}

pub fn parse_query_with(src: &str, vocab: &Vocabulary) -> Result<Query> {
    let mut toks: Vec<Token> = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let mut t = syntax::lex(line, ln + 1, 1)?;
        t.pop();
        toks.extend(t);
    }
    let Some(split) = toks.iter().position(|t| t.tok == Tok::Colon) else {
        let (line, col) = toks.first().map(|t| (t.line, t.col)).unwrap_or((1, 1));
        return Err(SyntaxError::new(line, col, "expected a query of the form 'init : property'").into());
    };
    let end = |toks: &[Token], fallback: &Token| Token {
        tok: Tok::Eof,
        line: toks.last().unwrap_or(fallback).line,
        col: toks.last().unwrap_or(fallback).col + 1,
    };
    let colon = toks[split].clone();
    let mut lhs: Vec<Token> = toks[..split].to_vec();
    let mut rhs: Vec<Token> = toks[split + 1..].to_vec();
    lhs.push(end(&lhs, &colon));
    rhs.push(end(&rhs, &colon));

    let mut c = Cursor::new(lhs);
    let iota = parse_formula(&mut c)?;
    c.expect_end()?;
    let mut c = Cursor::new(rhs);
    let phi = parse_formula(&mut c)?;
    c.expect_end()?;

    let init = vocab.to_expr(&iota).map_err(|e| match e {
        Error::Unsupported(_) => Error::Unsupported("the initial condition must be propositional".into()),
        other => other,
    })?;
    let property = vocab.to_ctlk(&phi)?;
    Ok(Query { init, property })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{ground, parse_policy, GroundLimits};

    fn crs_like() -> Policy {
        let src = "predicates:\n  author/2, reviewer/2\nobjects:\n  p1\nagents:\n  a1 a2\n\
                   macros:\n  Assigned = exists r. reviewer(p1,r)\n";
        ground(parse_policy(src).unwrap(), GroundLimits::default()).unwrap()
    }

    #[test]
    fn query_one_shape() {
        let pol = crs_like();
        let q = parse_query("author(p1,a1) & ~reviewer(p1,a1) : AG(~reviewer(p1,a1))", &pol).unwrap();
        let r = pol.atom_by_name("reviewer(p1,a1)").unwrap();
        assert_eq!(q.property, Ctlk::AG(Box::new(Ctlk::Not(Box::new(Ctlk::Atom(r))))));
        assert!(q.init.support().contains(&pol.atom_by_name("author(p1,a1)").unwrap()));
    }

    #[test]
    fn trivial_query() {
        let q = parse_query("true : AG(true)", &crs_like()).unwrap();
        assert_eq!(q.init, Expr::Const(true));
        assert_eq!(q.property, Ctlk::AG(Box::new(Ctlk::True)));
    }

    #[test]
    fn macro_and_knowledge() {
        let pol = crs_like();
        let q = parse_query(
            "author(p1,a1) : AG(Assigned & reviewer(p1,a2) -> ~K_a1 reviewer(p1,a2))",
            &pol,
        )
        .unwrap();
        assert_eq!(q.property.agents().len(), 1);
        assert!(!q.property.is_actlk());
    }

    #[test]
    fn rejects_bad_queries() {
        let pol = crs_like();
        assert!(parse_query("author(p1,a1) AG(true)", &pol).is_err());
        assert!(parse_query("true : AG(paper(p1))", &pol).is_err());
        assert!(parse_query("true : K_zed true", &pol).is_err());
        assert!(parse_query("AG true : true", &pol).is_err());
        assert!(parse_query("true : read[a1](reviewer(p1,a2)) & loc[a2](author(p1,a1))", &pol).is_ok());
    }
}
