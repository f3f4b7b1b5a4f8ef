//! Pretty printer producing text that [`super::parse_policy`] reads back.

use super::ast::*;
use std::fmt::Write;

pub fn print_policy(p: &PolicySource) -> String {
    let mut out = String::new();
    out.push_str("predicates:\n");
    for d in &p.predicates {
        let _ = writeln!(out, "  {}/{}", d.name, d.arity);
    }
    out.push_str("objects:\n");
    if !p.objects.is_empty() {
        let _ = writeln!(out, "  {}", p.objects.join(" "));
    }
    out.push_str("agents:\n");
    if !p.agents.is_empty() {
        let _ = writeln!(out, "  {}", p.agent_names().join(" "));
    }
    if !p.macros.is_empty() {
        out.push_str("macros:\n");
        for m in &p.macros {
            let _ = writeln!(out, "  {} = {}", m.name, formula(p, &m.body));
        }
    }
    if let Some(init) = &p.init {
        out.push_str("init:\n");
        for f in init {
            let _ = writeln!(out, "  {}", formula(p, f));
        }
    }
    if !p.actions.is_empty() {
        out.push_str("actions:\n");
        for a in &p.actions {
            let effects: Vec<String> = a.effects.iter().map(|e| effect(p, e)).collect();
            let _ = writeln!(
                out,
                "  {}({}): {{{}}} <- {}",
                a.id,
                a.params.join(","),
                effects.join(", "),
                formula(p, &a.guard)
            );
        }
    }
    if !p.reads.is_empty() {
        out.push_str("reads:\n");
        for r in &p.reads {
            let _ = writeln!(
                out,
                "  {}({}): {} <- {}",
                r.id,
                r.params.join(","),
                atom(p, &r.target),
                formula(p, &r.guard)
            );
        }
    }
    out
}

fn effect(p: &PolicySource, e: &EffectTemplate) -> String {
    let mut s = String::new();
    for b in &e.binders {
        let _ = write!(s, "forall {b}. ");
    }
    s.push(if e.positive { '+' } else { '-' });
    s.push_str(&atom(p, &e.atom));
    s
}

pub fn atom(p: &PolicySource, a: &AtomTemplate) -> String {
    let name = &p.predicates[a.pred].name;
    if a.args.is_empty() {
        return name.clone();
    }
    let args: Vec<&str> = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => v.as_str(),
            Term::Obj(o) => p.objects[*o].as_str(),
        })
        .collect();
    format!("{name}({})", args.join(","))
}

pub fn formula(p: &PolicySource, f: &Formula) -> String {
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Atom(a) => atom(p, a),
        Formula::Macro(m) => p.macros[*m].name.clone(),
        Formula::Not(a) => format!("~{}", operand(p, a)),
        Formula::And(a, b) => format!("{} & {}", operand(p, a), operand(p, b)),
        Formula::Or(a, b) => format!("{} | {}", operand(p, a), operand(p, b)),
        Formula::Implies(a, b) => format!("{} -> {}", operand(p, a), operand(p, b)),
        Formula::Forall(v, a) => format!("forall {v}. {}", formula(p, a)),
        Formula::Exists(v, a) => format!("exists {v}. {}", formula(p, a)),
    }
}

fn operand(p: &PolicySource, f: &Formula) -> String {
    match f {
        Formula::True | Formula::False | Formula::Atom(_) | Formula::Macro(_) | Formula::Not(_) => formula(p, f),
        _ => format!("({})", formula(p, f)),
    }
}
