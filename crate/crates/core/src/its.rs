//! Raw interpreted systems given as explicit state listings (`.its`).
//!
//! ```text
//! env: p q l
//! agent a: r t
//! state A: q l r
//! state B: p q l r t
//! state C: p l r t
//! state D: p q t
//! state E: l
//! state F: q l t
//! init: A E
//! trans a11 by e: A -> B
//! trans a12 by e: A -> D
//! trans a2 by e: B -> C
//! trans a3 by e: E -> F
//! ```
//!
//! A `state` line lists the propositions true in it. Each `trans` line
//! becomes one action whose guard is the full valuation of its source and
//! whose effect sets the bits that differ in its target. The performer is an
//! agent name or `e` for the environment. Names are any run of
//! non-whitespace characters other than `:`; `#` starts a comment.

use crate::bits::State;
use crate::error::{semantic, Result};
use crate::expr::Expr;
use crate::mc::Reachability;
use crate::system::{Action, Owner, Prop, System};
use std::collections::HashMap;
use std::fmt::Write;

pub fn encode_raw_system(src: &str) -> Result<System> {
    let mut props: Vec<Prop> = Vec::new();
    let mut agents: Vec<String> = Vec::new();
    let mut states: HashMap<String, State> = HashMap::new();
    let mut state_lines: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut init_names: Vec<(usize, String)> = Vec::new();
    let mut trans: Vec<(usize, String, String, String, String)> = Vec::new();

    for (ln, raw) in src.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| semantic(format!("line {ln}: {m}"));
        let (head, body) = line.split_once(':').ok_or_else(|| err("expected 'keyword ...: ...'"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        let body: Vec<String> = body.split_whitespace().map(str::to_string).collect();
        match head.as_slice() {
            ["env"] => {
                for n in body {
                    props.push(Prop { name: n, owner: Owner::Env });
                }
            }
            ["agent", name] => {
                if agents.iter().any(|a| a == name) || *name == "e" {
                    return Err(err(&format!("duplicate or reserved agent name '{name}'")));
                }
                agents.push(name.to_string());
                for n in body {
                    props.push(Prop {
                        name: n,
                        owner: Owner::Agent(agents.len() - 1),
                    });
                }
            }
            ["state", name] => state_lines.push((ln, name.to_string(), body)),
            ["init"] => init_names.extend(body.into_iter().map(|n| (ln, n))),
            ["trans", label, "by", who] => {
                if who.contains(',') {
                    return Err(err("a transition is performed by exactly one agent"));
                }
                let [src, arrow, dst] = body.as_slice() else {
                    return Err(err("expected 'SRC -> DST'"));
                };
                if arrow != "->" {
                    return Err(err("expected 'SRC -> DST'"));
                }
                trans.push((ln, label.to_string(), who.to_string(), src.clone(), dst.clone()));
            }
            ["trans", ..] => return Err(err("expected 'trans LABEL by AGENT: SRC -> DST'")),
            _ => return Err(err(&format!("unknown declaration '{}'", head.join(" ")))),
        }
    }

    let index: HashMap<&str, usize> = props.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    if index.len() != props.len() {
        return Err(semantic("duplicate proposition name"));
    }
    for (ln, name, trues) in &state_lines {
        let mut s = State::zeros(props.len());
        for t in trues {
            let v = index
                .get(t.as_str())
                .ok_or_else(|| semantic(format!("line {ln}: unknown proposition '{t}'")))?;
            s.set(*v, true);
        }
        if states.insert(name.clone(), s).is_some() {
            return Err(semantic(format!("line {ln}: duplicate state '{name}'")));
        }
    }
    let lookup = |ln: usize, n: &str| {
        states
            .get(n)
            .cloned()
            .ok_or_else(|| semantic(format!("line {ln}: unknown state '{n}'")))
    };
    let mut init = Vec::new();
    for (ln, n) in &init_names {
        init.push(lookup(*ln, n)?);
    }
    let mut actions = Vec::new();
    for (ln, label, who, src, dst) in &trans {
        let (s, t) = (lookup(*ln, src)?, lookup(*ln, dst)?);
        let performer = match agents.iter().position(|a| a == who) {
            Some(i) => Owner::Agent(i),
            None if who == "e" => Owner::Env,
            None => return Err(semantic(format!("line {ln}: unknown agent '{who}'"))),
        };
        let guard = Expr::cube((0..props.len()).map(|v| (v, s.get(v))));
        let effect = (0..props.len()).filter(|&v| s.get(v) != t.get(v)).map(|v| (v, t.get(v))).collect();
        actions.push(Action {
            id: label.clone(),
            performer,
            effect,
            guard,
        });
    }
    System::new(agents, props, actions, init)
}

/// The reachable part of `sys` in `.its` form, with states named `s<k>` in
/// discovery order.
pub fn dump_reachable(sys: &System, reach: &Reachability) -> String {
    let mut out = String::new();
    let names = |o: Owner| -> Vec<&str> {
        sys.props
            .iter()
            .filter(|p| p.owner == o)
            .map(|p| p.name.as_str())
            .collect()
    };
    let _ = writeln!(out, "env: {}", names(Owner::Env).join(" "));
    for (i, a) in sys.agents.iter().enumerate() {
        let _ = writeln!(out, "agent {a}: {}", names(Owner::Agent(i)).join(" "));
    }
    for (k, s) in reach.states.iter().enumerate() {
        let trues: Vec<&str> = s.ones().map(|v| sys.prop_name(v)).collect();
        let _ = writeln!(out, "state s{k}: {}", trues.join(" "));
    }
    let inits: Vec<String> = (0..reach.num_init).map(|k| format!("s{k}")).collect();
    let _ = writeln!(out, "init: {}", inits.join(" "));
    for (k, outs) in reach.succ.iter().enumerate() {
        for &(a, t) in outs {
            let act = &sys.actions[a];
            let _ = writeln!(out, "trans {} by {}: s{k} -> s{t}", act.id, sys.owner_name(act.performer));
        }
    }
    out
}
