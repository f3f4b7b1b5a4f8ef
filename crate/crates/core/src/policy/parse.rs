//! Parser for `.acp` policy files.
//!
//! ```text
//! predicates:
//!   paper/1, reviewer/2
//! objects:
//!   p1 p2
//! agents:
//!   a1 a2
//! init:                       # optional; closes the world over unmentioned atoms
//!   paper(p1) & paper(p2)
//! macros:
//!   Assigned = exists r. reviewer(p1,r)
//! actions:
//!   assign(x,r,p): {+reviewer(p,r)} <- paper(p) & ~reviewer(p,r)
//! reads:
//!   seeAssign(x,p,r): reviewer(p,r) <- paper(p)
//! ```
//!
//! Section headers start in column 1. An indented line continues the previous
//! entry when that entry is still open, otherwise it starts a new one. `#`
//! starts a comment. Effects are `+atom`, `-atom` or `forall v. <effect>`.

use super::ast::*;
use crate::error::SyntaxError;
use crate::syntax::{self, parse_atom, parse_formula, AtomSyntax, Arg, Cursor, Surface, Tok, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Predicates,
    Objects,
    Agents,
    Init,
    Macros,
    Actions,
    Reads,
}

impl Section {
    fn from_header(s: &str) -> Option<Section> {
        Some(match s {
            "predicates:" => Section::Predicates,
            "objects:" => Section::Objects,
            "agents:" => Section::Agents,
            "init:" => Section::Init,
            "macros:" => Section::Macros,
            "actions:" => Section::Actions,
            "reads:" => Section::Reads,
            _ => return None,
        })
    }
}

struct Entry {
    toks: Vec<Token>,
}

impl Entry {
    fn cursor(&self) -> Cursor {
        let mut toks = self.toks.clone();
        let last = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
        toks.push(Token {
            tok: Tok::Eof,
            line: last.0,
            col: last.1,
        });
        Cursor::new(toks)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Entries are open while they end in a binary operator, `<-`, `,` or an
/// unbalanced bracket.
fn is_open(toks: &[Token]) -> bool {
    let mut depth = 0i64;
    for t in toks {
        match t.tok {
            Tok::LParen | Tok::LBrack | Tok::LBrace => depth += 1,
            Tok::RParen | Tok::RBrack | Tok::RBrace => depth -= 1,
            _ => {}
        }
    }
    depth > 0
        || matches!(
            toks.last().map(|t| &t.tok),
            Some(Tok::Amp | Tok::Pipe | Tok::Arrow | Tok::LArrow | Tok::Iff | Tok::Comma | Tok::Tilde | Tok::Dot | Tok::Colon | Tok::Eq)
        )
}

pub fn parse_policy(src: &str) -> Result<PolicySource, SyntaxError> {
    let mut sections: Vec<(Section, Vec<Entry>)> = Vec::new();
    for (ln, raw) in src.lines().enumerate() {
        let line_no = ln + 1;
        let body = strip_comment(raw);
        if body.trim().is_empty() {
            continue;
        }
        let indented = body.starts_with(char::is_whitespace);
        if !indented {
            if let Some(sec) = Section::from_header(body.trim_end()) {
                if sections.iter().any(|(s, _)| *s == sec) {
                    return Err(SyntaxError::new(line_no, 1, format!("duplicate section '{}'", body.trim_end())));
                }
                sections.push((sec, Vec::new()));
                continue;
            }
        }
        let Some((_, entries)) = sections.last_mut() else {
            return Err(SyntaxError::new(line_no, 1, "expected a section header such as 'predicates:'"));
        };
        let mut toks = syntax::lex(body, line_no, 1)?;
        toks.pop();
        match entries.last_mut() {
            Some(prev) if indented && is_open(&prev.toks) => prev.toks.extend(toks),
            _ => entries.push(Entry { toks }),
        }
    }

    let mut out = PolicySource::default();
    let take = |sections: &mut Vec<(Section, Vec<Entry>)>, sec: Section| -> Option<Vec<Entry>> {
        let i = sections.iter().position(|(s, _)| *s == sec)?;
        Some(sections.remove(i).1)
    };

    for e in take(&mut sections, Section::Predicates).unwrap_or_default() {
        let mut c = e.cursor();
        while !c.at_end() {
            let tok = c.here().clone();
            let name = c.ident("predicate name")?;
            check_name(&name, &tok)?;
            c.expect(&Tok::Slash, "'/' and an arity")?;
            let arity = match c.bump() {
                Tok::Number(n) => n as usize,
                other => {
                    return Err(SyntaxError::new(tok.line, tok.col, format!("expected arity, found {}", syntax::describe(&other))))
                }
            };
            if out.predicate(&name).is_some() {
                return Err(SyntaxError::new(tok.line, tok.col, format!("duplicate predicate '{name}'")));
            }
            out.predicates.push(PredicateDecl { name, arity });
            c.eat(&Tok::Comma);
        }
    }

    for e in take(&mut sections, Section::Objects).unwrap_or_default() {
        for (name, tok) in name_list(&e)? {
            if out.object(&name).is_some() {
                return Err(SyntaxError::new(tok.line, tok.col, format!("duplicate object '{name}'")));
            }
            out.objects.push(name);
        }
    }
    for e in take(&mut sections, Section::Agents).unwrap_or_default() {
        for (name, tok) in name_list(&e)? {
            let idx = match out.object(&name) {
                Some(i) => i,
                None => {
                    out.objects.push(name.clone());
                    out.objects.len() - 1
                }
            };
            if out.agents.contains(&idx) {
                return Err(SyntaxError::new(tok.line, tok.col, format!("duplicate agent '{name}'")));
            }
            out.agents.push(idx);
        }
    }

    for e in take(&mut sections, Section::Macros).unwrap_or_default() {
        let mut c = e.cursor();
        let tok = c.here().clone();
        let name = c.ident("macro name")?;
        check_name(&name, &tok)?;
        if out.predicate(&name).is_some() || out.macro_index(&name).is_some() {
            return Err(SyntaxError::new(tok.line, tok.col, format!("macro '{name}' clashes with an earlier declaration")));
        }
        c.expect(&Tok::Eq, "'='")?;
        let body = parse_formula(&mut c)?;
        c.expect_end()?;
        let body = resolve(&out, &body, &mut Vec::new())?;
        out.macros.push(MacroDef { name, body });
    }

    if let Some(entries) = take(&mut sections, Section::Init) {
        let mut init = Vec::new();
        for e in entries {
            let mut c = e.cursor();
            let f = parse_formula(&mut c)?;
            c.expect_end()?;
            init.push(resolve(&out, &f, &mut Vec::new())?);
        }
        out.init = Some(init);
    }

    for e in take(&mut sections, Section::Actions).unwrap_or_default() {
        let mut c = e.cursor();
        let (id, params) = rule_head(&mut c)?;
        if out.actions.iter().any(|a| a.id == id) {
            return Err(SyntaxError::new(e.toks[0].line, e.toks[0].col, format!("duplicate action rule '{id}'")));
        }
        c.expect(&Tok::LBrace, "'{' opening the effect list")?;
        let mut effects = Vec::new();
        if !c.eat(&Tok::RBrace) {
            loop {
                let mut scope = params.clone();
                effects.push(effect(&out, &mut c, &mut scope)?);
                if c.eat(&Tok::Comma) {
                    continue;
                }
                c.expect(&Tok::RBrace, "',' or '}'")?;
                break;
            }
        }
        c.expect(&Tok::LArrow, "'<-'")?;
        let g = parse_formula(&mut c)?;
        c.expect_end()?;
        let guard = resolve(&out, &g, &mut params.clone())?;
        out.actions.push(ActionRule {
            id,
            params,
            effects,
            guard,
        });
    }

    for e in take(&mut sections, Section::Reads).unwrap_or_default() {
        let mut c = e.cursor();
        let (id, params) = rule_head(&mut c)?;
        if out.reads.iter().any(|r| r.id == id) {
            return Err(SyntaxError::new(e.toks[0].line, e.toks[0].col, format!("duplicate read rule '{id}'")));
        }
        let target = parse_atom(&mut c)?;
        let target = atom_template(&out, &target, &params)?;
        c.expect(&Tok::LArrow, "'<-'")?;
        let g = parse_formula(&mut c)?;
        c.expect_end()?;
        let guard = resolve(&out, &g, &mut params.clone())?;
        out.reads.push(ReadRule {
            id,
            params,
            target,
            guard,
        });
    }

    Ok(out)
}

fn check_name(name: &str, tok: &Token) -> Result<(), SyntaxError> {
    if syntax::is_reserved(name) {
        Err(SyntaxError::new(tok.line, tok.col, format!("'{name}' is reserved")))
    } else {
        Ok(())
    }
}

fn name_list(e: &Entry) -> Result<Vec<(String, Token)>, SyntaxError> {
    let mut c = e.cursor();
    let mut out = Vec::new();
    while !c.at_end() {
        let tok = c.here().clone();
        let name = c.ident("name")?;
        check_name(&name, &tok)?;
        out.push((name, tok));
        c.eat(&Tok::Comma);
    }
    Ok(out)
}

fn rule_head(c: &mut Cursor) -> Result<(String, Vec<String>), SyntaxError> {
    let tok = c.here().clone();
    let id = c.ident("rule name")?;
    check_name(&id, &tok)?;
    c.expect(&Tok::LParen, "'(' opening the parameter list")?;
    let mut params: Vec<String> = Vec::new();
    if !c.eat(&Tok::RParen) {
        loop {
            let ptok = c.here().clone();
            let p = c.ident("parameter")?;
            check_name(&p, &ptok)?;
            if params.contains(&p) {
                return Err(SyntaxError::new(ptok.line, ptok.col, format!("duplicate parameter '{p}'")));
            }
            params.push(p);
            if c.eat(&Tok::Comma) {
                continue;
            }
            c.expect(&Tok::RParen, "',' or ')'")?;
            break;
        }
    }
    if params.is_empty() {
        return Err(SyntaxError::new(tok.line, tok.col, format!("rule '{id}' needs an agent parameter")));
    }
    c.expect(&Tok::Colon, "':'")?;
    Ok((id, params))
}

fn effect(src: &PolicySource, c: &mut Cursor, scope: &mut Vec<String>) -> Result<EffectTemplate, SyntaxError> {
    let mut binders = Vec::new();
    while matches!(c.peek(), Tok::Ident(s) if s == "forall") {
        c.bump();
        let tok = c.here().clone();
        let v = c.ident("bound variable")?;
        check_name(&v, &tok)?;
        c.expect(&Tok::Dot, "'.'")?;
        scope.push(v.clone());
        binders.push(v);
    }
    let positive = match c.bump() {
        Tok::Plus => true,
        Tok::Minus => false,
        other => return Err(c.error(format!("expected '+' or '-', found {}", syntax::describe(&other)))),
    };
    let at = parse_atom(c)?;
    let atom = atom_template(src, &at, scope)?;
    Ok(EffectTemplate {
        binders,
        positive,
        atom,
    })
}

fn atom_template(src: &PolicySource, at: &AtomSyntax, scope: &[String]) -> Result<AtomTemplate, SyntaxError> {
    let err = |m: String| SyntaxError::new(at.line, at.col, m);
    if at.index.is_some() {
        return Err(err(format!("local proposition '{at}' is not allowed in a policy")));
    }
    let pred = src
        .predicate(&at.name)
        .ok_or_else(|| err(format!("unknown predicate '{}'", at.name)))?;
    let arity = src.predicates[pred].arity;
    if at.args.len() != arity {
        return Err(err(format!(
            "predicate '{}' has arity {arity} but is applied to {} argument(s)",
            at.name,
            at.args.len()
        )));
    }
    let mut args = Vec::with_capacity(arity);
    for a in &at.args {
        match a {
            Arg::Atom(inner) => return Err(err(format!("nested atom '{inner}' is not a term"))),
            Arg::Name(n) if scope.iter().any(|v| v == n) => args.push(Term::Var(n.clone())),
            Arg::Name(n) => match src.object(n) {
                Some(o) => args.push(Term::Obj(o)),
                None => return Err(err(format!("'{n}' is neither a declared object nor a bound variable"))),
            },
        }
    }
    Ok(AtomTemplate { pred, args })
}

/// Resolves a surface formula against the declarations, with `scope` holding
/// the variables bound so far.
pub(crate) fn resolve(src: &PolicySource, f: &Surface, scope: &mut Vec<String>) -> Result<Formula, SyntaxError> {
    Ok(match f {
        Surface::True => Formula::True,
        Surface::False => Formula::False,
        Surface::Atom(at) => {
            if at.index.is_none() && !at.has_parens {
                if let Some(m) = src.macro_index(&at.name) {
                    return Ok(Formula::Macro(m));
                }
            }
            Formula::Atom(atom_template(src, at, scope)?)
        }
        Surface::Not(a) => Formula::Not(Box::new(resolve(src, a, scope)?)),
        Surface::And(a, b) => Formula::And(Box::new(resolve(src, a, scope)?), Box::new(resolve(src, b, scope)?)),
        Surface::Or(a, b) => Formula::Or(Box::new(resolve(src, a, scope)?), Box::new(resolve(src, b, scope)?)),
        Surface::Implies(a, b) => {
            Formula::Implies(Box::new(resolve(src, a, scope)?), Box::new(resolve(src, b, scope)?))
        }
        Surface::Iff(a, b) => {
            let (a, b) = (resolve(src, a, scope)?, resolve(src, b, scope)?);
            Formula::And(
                Box::new(Formula::Implies(Box::new(a.clone()), Box::new(b.clone()))),
                Box::new(Formula::Implies(Box::new(b), Box::new(a))),
            )
        }
        Surface::Forall(v, a) | Surface::Exists(v, a) => {
            scope.push(v.clone());
            let body = resolve(src, a, scope);
            scope.pop();
            let body = Box::new(body?);
            if matches!(f, Surface::Forall(..)) {
                Formula::Forall(v.clone(), body)
            } else {
                Formula::Exists(v.clone(), body)
            }
        }
        Surface::K(..) | Surface::Unary(..) | Surface::Until(..) | Surface::Release(..) => {
            return Err(SyntaxError::new(0, 0, "temporal and epistemic operators are not allowed in a policy"))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "predicates:\n  pcmember/1, author/2, reviewer/2\nobjects:\n  p\nagents:\n  alice bob\n";

    #[test]
    fn action_rule_params_and_effects() {
        let src = format!("{BASE}actions:\n  assignReviewer(x,y,p): {{+reviewer(p,y)}} <- pcmember(x) & ~author(p,y)\n");
        let pol = parse_policy(&src).unwrap();
        let r = &pol.actions[0];
        assert_eq!(r.params, vec!["x", "y", "p"]);
        assert_eq!(r.effects.len(), 1);
        assert!(r.effects[0].positive);
        assert_eq!(r.effects[0].atom.args, vec![Term::Var("p".into()), Term::Var("y".into())]);
    }

    #[test]
    fn declarations_only() {
        let pol = parse_policy(BASE).unwrap();
        assert!(pol.actions.is_empty() && pol.reads.is_empty());
        assert_eq!(pol.objects, vec!["p", "alice", "bob"]);
        assert_eq!(pol.agents, vec![1, 2]);
        assert!(pol.init.is_none());
    }

    #[test]
    fn continuation_lines_join_open_entries() {
        let src = format!("{BASE}actions:\n  a(x,p): {{+reviewer(p,x)}} <-\n      pcmember(x) &\n      ~author(p,x)\n");
        let pol = parse_policy(&src).unwrap();
        assert!(matches!(pol.actions[0].guard, Formula::And(..)));
    }

    fn err_of(body: &str) -> SyntaxError {
        parse_policy(&format!("{BASE}{body}")).unwrap_err()
    }

    #[test]
    fn static_errors_carry_positions() {
        let e = err_of("actions:\n  a(x): {+nosuch(x)} <- true\n");
        assert!(e.message.contains("unknown predicate"), "{e}");
        assert_eq!((e.line, e.col), (8, 11));
        let e = err_of("actions:\n  a(x): {+author(x)} <- true\n");
        assert!(e.message.contains("arity"), "{e}");
        let e = err_of("actions:\n  a(x): {+author(x,z)} <- true\n");
        assert!(e.message.contains("'z'"), "{e}");
        let e = err_of("reads:\n  r(x): author(p,x) <- reviewer(p,w)\n");
        assert!(e.message.contains("'w'"), "{e}");
        let e = err_of("actions:\n  a(x): {+pcmember(x)} <- pcmember(x) $\n");
        assert!(e.message.contains("unexpected character"), "{e}");
    }

    #[test]
    fn bound_variables_are_in_scope() {
        let src = format!(
            "{BASE}actions:\n  a(x,p): {{forall v. -reviewer(p,v)}} <- forall v. (author(p,v) -> ~reviewer(p,v))\n"
        );
        let pol = parse_policy(&src).unwrap();
        assert_eq!(pol.actions[0].effects[0].binders, vec!["v"]);
    }

    #[test]
    fn rejects_text_before_sections_and_unknown_headers() {
        assert!(parse_policy("p/1\n").is_err());
        assert!(parse_policy("predicates:\n  p/1\nfoo:\n  x\n").is_err());
    }
}
