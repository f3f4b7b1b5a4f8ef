//! Independent oracles and random generators shared by the integration tests.
//!
//! Nothing here calls the library's evaluators, image operators or model
//! checker; systems are read through their public fields only.

#![allow(dead_code)]

use aclk::abstraction::AbstractSystem;
use aclk::ctlk::Ctlk;
use aclk::expr::Expr;
use aclk::mc::{CexTree, Edge};
use aclk::system::{Action, Owner, Prop, System};
use aclk::State;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap, VecDeque};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- propositional evaluation and transitions ----

pub fn eval(e: &Expr, s: &State) -> bool {
    match e {
        Expr::Const(b) => *b,
        Expr::Var(v) => s.get(*v),
        Expr::Not(x) => !eval(x, s),
        Expr::And(xs) => xs.iter().all(|x| eval(x, s)),
        Expr::Or(xs) => xs.iter().any(|x| eval(x, s)),
    }
}

pub fn fire(a: &Action, s: &State) -> Option<State> {
    if !eval(&a.guard, s) {
        return None;
    }
    let mut t = s.clone();
    for &(v, b) in &a.effect {
        t.set(v, b);
    }
    Some(t)
}

/// Successors including the stutter step, labelled by action (None for Λ).
pub fn successors(sys: &System, s: &State) -> Vec<(Option<usize>, State)> {
    let mut out = vec![(None, s.clone())];
    for (i, a) in sys.actions.iter().enumerate() {
        if let Some(t) = fire(a, s) {
            out.push((Some(i), t));
        }
    }
    out
}

pub fn local(sys: &System, s: &State, agent: usize) -> Vec<bool> {
    sys.props
        .iter()
        .enumerate()
        .filter(|(_, p)| p.owner == Owner::Agent(agent))
        .map(|(v, _)| s.get(v))
        .collect()
}

/// Explicit reachable graph built by plain breadth-first search.
pub struct Graph {
    pub states: Vec<State>,
    pub index: HashMap<State, usize>,
    pub succ: Vec<Vec<(Option<usize>, usize)>>,
    pub init: Vec<bool>,
}

impl Graph {
    pub fn new(sys: &System, cap: usize) -> Option<Graph> {
        let mut g = Graph {
            states: Vec::new(),
            index: HashMap::new(),
            succ: Vec::new(),
            init: Vec::new(),
        };
        let mut queue = VecDeque::new();
        for s in &sys.init {
            if !g.index.contains_key(s) {
                g.index.insert(s.clone(), g.states.len());
                g.states.push(s.clone());
                g.init.push(true);
                queue.push_back(s.clone());
            }
        }
        while let Some(s) = queue.pop_front() {
            let mut out = Vec::new();
            for (a, t) in successors(sys, &s) {
                let id = match g.index.get(&t) {
                    Some(&id) => id,
                    None => {
                        if g.states.len() >= cap {
                            return None;
                        }
                        let id = g.states.len();
                        g.index.insert(t.clone(), id);
                        g.states.push(t.clone());
                        g.init.push(false);
                        queue.push_back(t);
                        id
                    }
                };
                out.push((a, id));
            }
            g.succ.push(out);
        }
        Some(g)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn state_set(&self) -> BTreeSet<State> {
        self.states.iter().cloned().collect()
    }
}

// ---- CTLK satisfaction by the definitions ----

/// Satisfaction vector of `f` over the reachable states.
pub fn sat(sys: &System, g: &Graph, f: &Ctlk) -> Vec<bool> {
    let n = g.len();
    let next = |i: usize| g.succ[i].iter().map(|&(_, j)| j).collect::<Vec<_>>();
    match f {
        Ctlk::True => vec![true; n],
        Ctlk::False => vec![false; n],
        Ctlk::Atom(v) => g.states.iter().map(|s| s.get(*v)).collect(),
        Ctlk::Not(x) => sat(sys, g, x).into_iter().map(|b| !b).collect(),
        Ctlk::And(x, y) => zip(sat(sys, g, x), sat(sys, g, y), |a, b| a && b),
        Ctlk::Or(x, y) => zip(sat(sys, g, x), sat(sys, g, y), |a, b| a || b),
        Ctlk::Implies(x, y) => zip(sat(sys, g, x), sat(sys, g, y), |a, b| !a || b),
        Ctlk::K(i, x) => {
            let sx = sat(sys, g, x);
            let locs: Vec<Vec<bool>> = g.states.iter().map(|s| local(sys, s, *i)).collect();
            (0..n).map(|s| (0..n).all(|t| locs[t] != locs[s] || sx[t])).collect()
        }
        Ctlk::EX(x) => {
            let sx = sat(sys, g, x);
            (0..n).map(|s| next(s).iter().any(|&t| sx[t])).collect()
        }
        Ctlk::AX(x) => {
            let sx = sat(sys, g, x);
            (0..n).map(|s| next(s).iter().all(|&t| sx[t])).collect()
        }
        Ctlk::EF(x) => {
            let sx = sat(sys, g, x);
            (0..n).map(|s| reach_from(g, s, &vec![true; n]).iter().any(|&t| sx[t])).collect()
        }
        Ctlk::AG(x) => {
            let sx = sat(sys, g, x);
            (0..n).map(|s| reach_from(g, s, &vec![true; n]).iter().all(|&t| sx[t])).collect()
        }
        Ctlk::EU(x, y) => {
            let (sx, sy) = (sat(sys, g, x), sat(sys, g, y));
            (0..n).map(|s| eu(g, s, &sx, &sy)).collect()
        }
        Ctlk::EG(x) => {
            let sx = sat(sys, g, x);
            (0..n).map(|s| eg(g, s, &sx)).collect()
        }
        Ctlk::AF(x) => {
            let sx = sat(sys, g, x);
            au_all(g, &vec![true; n], &sx)
        }
        Ctlk::AU(x, y) => au_all(g, &sat(sys, g, x), &sat(sys, g, y)),
        // x R y: no path reaches ¬y before x has held.
        Ctlk::ER(x, y) => {
            // Some path keeps y until x∧y, or keeps y forever.
            let (sx, sy) = (sat(sys, g, x), sat(sys, g, y));
            let xy: Vec<bool> = zip(sx, sy.clone(), |a, b| a && b);
            (0..n).map(|s| eu(g, s, &sy, &xy) || eg(g, s, &sy)).collect()
        }
        Ctlk::AR(x, y) => {
            let (sx, sy) = (sat(sys, g, x), sat(sys, g, y));
            let nx: Vec<bool> = sx.iter().map(|b| !b).collect();
            let ny: Vec<bool> = sy.iter().map(|b| !b).collect();
            (0..n).map(|s| !eu(g, s, &nx, &ny)).collect()
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

/// States reachable from `s` moving only through `allowed` states after `s`.
fn reach_from(g: &Graph, s: usize, allowed: &[bool]) -> Vec<usize> {
    let mut seen = vec![false; g.len()];
    let mut stack = vec![s];
    seen[s] = true;
    let mut out = Vec::new();
    while let Some(u) = stack.pop() {
        out.push(u);
        for &(_, v) in &g.succ[u] {
            if !seen[v] && allowed[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    out
}

/// A finite path of x-states ending in a y-state.
fn eu(g: &Graph, s: usize, sx: &[bool], sy: &[bool]) -> bool {
    if sy[s] {
        return true;
    }
    if !sx[s] {
        return false;
    }
    let allowed: Vec<bool> = (0..g.len()).map(|i| sx[i] || sy[i]).collect();
    let mut seen = vec![false; g.len()];
    let mut stack = vec![s];
    seen[s] = true;
    while let Some(u) = stack.pop() {
        if sy[u] {
            return true;
        }
        if !sx[u] {
            continue;
        }
        for &(_, v) in &g.succ[u] {
            if !seen[v] && allowed[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    false
}

/// An infinite path of x-states: some x-state reachable through x-states
/// lies on a cycle of x-states.
fn eg(g: &Graph, s: usize, sx: &[bool]) -> bool {
    if !sx[s] {
        return false;
    }
    reach_from(g, s, sx).into_iter().any(|u| {
        g.succ[u]
            .iter()
            .any(|&(_, v)| sx[v] && reach_from(g, v, sx).contains(&u))
    })
}

/// A(x U y) by bounded unfolding: on a finite graph every path reaches y
/// within |G| steps or some path avoids y forever.
fn au_all(g: &Graph, sx: &[bool], sy: &[bool]) -> Vec<bool> {
    let n = g.len();
    let mut cur: Vec<bool> = sy.to_vec();
    for _ in 0..=n {
        let next: Vec<bool> = (0..n)
            .map(|s| sy[s] || sx[s] && g.succ[s].iter().all(|&(_, t)| cur[t]))
            .collect();
        cur = next;
    }
    cur
}

pub fn holds(sys: &System, g: &Graph, f: &Ctlk) -> bool {
    let v = sat(sys, g, f);
    (0..g.len()).all(|i| !g.init[i] || v[i])
}

// ---- concrete-tree matching ----

/// Whether some assignment of reachable concrete states to the nodes of the
/// abstract tree `ce` forms a concrete counterexample: root initial, every
/// node mapped into its abstract state, temporal edges taken by a member
/// action (or Λ), epistemic edges between states with equal local state.
/// With `witnesses`, an epistemic target must also end a concrete run
/// that follows the edge's abstract witness path.
pub fn tree_exists(ce: &CexTree, sys: &System, abs: &AbstractSystem, g: &Graph, witnesses: bool) -> bool {
    let h = |s: &State| abs.map.h(s);
    let cands: Vec<Vec<usize>> = ce
        .nodes
        .iter()
        .enumerate()
        .map(|(k, node)| {
            (0..g.len())
                .filter(|&i| h(&g.states[i]) == node.state && (k > 0 || g.init[i]))
                .filter(|&i| match (&node.parent, witnesses) {
                    (Some((_, Edge::Epistemic { witness, .. })), true) => {
                        witness_ends(sys, abs, witness).contains(&g.states[i])
                    }
                    _ => true,
                })
                .collect()
        })
        .collect();
    let mut pick = vec![usize::MAX; ce.nodes.len()];
    assign(ce, sys, abs, g, &cands, &mut pick, 0)
}

fn assign(
    ce: &CexTree,
    sys: &System,
    abs: &AbstractSystem,
    g: &Graph,
    cands: &[Vec<usize>],
    pick: &mut Vec<usize>,
    k: usize,
) -> bool {
    if k == ce.nodes.len() {
        return true;
    }
    for &c in &cands[k] {
        let ok = match &ce.nodes[k].parent {
            None => true,
            Some((p, edge)) => {
                let s = &g.states[pick[*p]];
                let t = &g.states[c];
                edge_ok(sys, abs, edge, s, t)
            }
        };
        if ok {
            pick[k] = c;
            if assign(ce, sys, abs, g, cands, pick, k + 1) {
                return true;
            }
        }
    }
    false
}

fn edge_ok(sys: &System, abs: &AbstractSystem, edge: &Edge, s: &State, t: &State) -> bool {
    match edge {
        Edge::Temporal(None) => s == t,
        Edge::Temporal(Some(a)) => abs.members(*a).iter().any(|&m| fire(&sys.actions[m], s).as_ref() == Some(t)),
        Edge::Epistemic { agent, .. } => local(sys, s, *agent) == local(sys, t, *agent),
    }
}

fn witness_ends(sys: &System, abs: &AbstractSystem, w: &aclk::mc::Witness) -> BTreeSet<State> {
    let mut cur: BTreeSet<State> = sys.init.iter().filter(|s| abs.map.h(s) == w.states[0]).cloned().collect();
    for (k, a) in w.actions.iter().enumerate() {
        let target = &w.states[k + 1];
        let mut next = BTreeSet::new();
        for s in &cur {
            match a {
                None => {
                    next.insert(s.clone());
                }
                Some(a) => {
                    for &m in abs.members(*a) {
                        if let Some(t) = fire(&sys.actions[m], s) {
                            next.insert(t);
                        }
                    }
                }
            }
        }
        cur = next.into_iter().filter(|t| &abs.map.h(t) == target).collect();
    }
    cur
}

/// Checks a concrete tree against the concrete system directly.
pub fn concrete_tree_ok(tree: &CexTree, sys: &System, g: &Graph) -> Result<(), String> {
    let root = &tree.nodes[0].state;
    if !sys.init.contains(root) {
        return Err("root is not initial".into());
    }
    for (k, n) in tree.nodes.iter().enumerate() {
        if !g.index.contains_key(&n.state) {
            return Err(format!("node {k} is unreachable"));
        }
        let Some((p, edge)) = &n.parent else { continue };
        let s = &tree.nodes[*p].state;
        let ok = match edge {
            Edge::Temporal(None) => s == &n.state,
            Edge::Temporal(Some(a)) => fire(&sys.actions[*a], s).as_ref() == Some(&n.state),
            Edge::Epistemic { agent, .. } => local(sys, s, *agent) == local(sys, &n.state, *agent),
        };
        if !ok {
            return Err(format!("edge into node {k} is not realized"));
        }
    }
    Ok(())
}

// ---- random systems ----

pub struct Shape {
    pub env: usize,
    pub locals: Vec<usize>,
    pub actions: usize,
    pub init: usize,
}

pub fn random_shape(r: &mut ChaCha8Rng, max_bits: usize) -> Shape {
    loop {
        let env = r.gen_range(1..=3);
        let agents = r.gen_range(1..=2);
        let locals: Vec<usize> = (0..agents).map(|_| r.gen_range(1..=2)).collect();
        if env + locals.iter().sum::<usize>() <= max_bits {
            return Shape {
                env,
                locals,
                actions: r.gen_range(2..=6),
                init: r.gen_range(1..=3),
            };
        }
    }
}

fn random_cube(r: &mut ChaCha8Rng, width: usize, max_lits: usize) -> Expr {
    let mut vars: Vec<usize> = (0..width).collect();
    vars.shuffle(r);
    let k = r.gen_range(0..=max_lits.min(width));
    Expr::cube(vars[..k].iter().map(|&v| (v, r.gen_bool(0.5))))
}

pub fn random_system(r: &mut ChaCha8Rng, shape: &Shape) -> System {
    let mut props = Vec::new();
    for k in 0..shape.env {
        props.push(Prop {
            name: format!("e{k}"),
            owner: Owner::Env,
        });
    }
    for (i, &n) in shape.locals.iter().enumerate() {
        for k in 0..n {
            props.push(Prop {
                name: format!("l{i}_{k}"),
                owner: Owner::Agent(i),
            });
        }
    }
    let width = props.len();
    let agents: Vec<String> = (0..shape.locals.len()).map(|i| format!("ag{i}")).collect();
    let mut actions = Vec::new();
    for k in 0..shape.actions {
        let guard = if r.gen_bool(0.25) {
            Expr::or(random_cube(r, width, 2), random_cube(r, width, 2))
        } else {
            random_cube(r, width, 3)
        };
        let mut vars: Vec<usize> = (0..width).collect();
        vars.shuffle(r);
        let m = r.gen_range(1..=2.min(width));
        let mut effect: Vec<(usize, bool)> = vars[..m].iter().map(|&v| (v, r.gen_bool(0.5))).collect();
        effect.sort();
        let performer = match r.gen_range(0..=shape.locals.len()) {
            0 => Owner::Env,
            i => Owner::Agent(i - 1),
        };
        actions.push(Action {
            id: format!("t{k}"),
            performer,
            effect,
            guard,
        });
    }
    let init = (0..shape.init)
        .map(|_| State::from_bools(&(0..width).map(|_| r.gen_bool(0.5)).collect::<Vec<_>>()))
        .collect();
    System::new(agents, props, actions, init).expect("generated system is well formed")
}

fn random_literal(r: &mut ChaCha8Rng, atoms: &[usize]) -> Ctlk {
    match r.gen_range(0..10) {
        0 => Ctlk::True,
        1 => Ctlk::False,
        k => {
            let a = Ctlk::Atom(*atoms.choose(r).unwrap());
            if k % 2 == 0 {
                a
            } else {
                Ctlk::not(a)
            }
        }
    }
}

/// ACTLK safety formulas in negation normal form.
pub fn random_safety(r: &mut ChaCha8Rng, atoms: &[usize], agents: usize, depth: usize) -> Ctlk {
    if depth == 0 || r.gen_bool(0.25) {
        return random_literal(r, atoms);
    }
    let sub = |r: &mut ChaCha8Rng| Box::new(random_safety(r, atoms, agents, depth - 1));
    match r.gen_range(0..5) {
        0 => Ctlk::And(sub(r), sub(r)),
        1 => Ctlk::Or(sub(r), sub(r)),
        2 if agents > 0 => Ctlk::K(r.gen_range(0..agents), sub(r)),
        3 => Ctlk::AX(sub(r)),
        _ => Ctlk::AG(sub(r)),
    }
}

/// Arbitrary CTLK formulas over every operator.
pub fn random_ctlk(r: &mut ChaCha8Rng, atoms: &[usize], agents: usize, depth: usize) -> Ctlk {
    if depth == 0 || r.gen_bool(0.2) {
        return random_literal(r, atoms);
    }
    let sub = |r: &mut ChaCha8Rng| Box::new(random_ctlk(r, atoms, agents, depth - 1));
    match r.gen_range(0..17) {
        0 => Ctlk::Not(sub(r)),
        1 => Ctlk::And(sub(r), sub(r)),
        2 => Ctlk::Or(sub(r), sub(r)),
        3 => Ctlk::Implies(sub(r), sub(r)),
        4 => Ctlk::K(r.gen_range(0..agents.max(1)), sub(r)),
        5 => Ctlk::EX(sub(r)),
        6 => Ctlk::EF(sub(r)),
        7 => Ctlk::EG(sub(r)),
        8 => Ctlk::EU(sub(r), sub(r)),
        9 => Ctlk::ER(sub(r), sub(r)),
        10 => Ctlk::AX(sub(r)),
        11 => Ctlk::AF(sub(r)),
        12 => Ctlk::AG(sub(r)),
        13 => Ctlk::AU(sub(r), sub(r)),
        14 => Ctlk::AR(sub(r), sub(r)),
        15 => Ctlk::K(r.gen_range(0..agents.max(1)), Box::new(Ctlk::not(*sub(r)))),
        _ => Ctlk::Not(Box::new(Ctlk::K(r.gen_range(0..agents.max(1)), sub(r)))),
    }
}

// ---- random micro-policies ----

fn guard_text(r: &mut ChaCha8Rng, props: &[&str]) -> String {
    let lit = |r: &mut ChaCha8Rng| {
        let p = props.choose(r).unwrap();
        if r.gen_bool(0.5) {
            p.to_string()
        } else {
            format!("~{p}")
        }
    };
    match r.gen_range(0..5) {
        0 => "true".into(),
        1 => lit(r),
        2 => format!("{} & {}", lit(r), lit(r)),
        3 => format!("{} | {}", lit(r), lit(r)),
        _ => format!("({} | {}) & {}", lit(r), lit(r), lit(r)),
    }
}

/// A policy over up to three nullary predicates and two agents, with
/// random actions and read permissions.
pub fn random_policy(r: &mut ChaCha8Rng) -> String {
    let all = ["p", "q", "s"];
    let n = r.gen_range(1..=3);
    let props = &all[..n];
    let mut src = String::from("predicates:\n  ");
    src.push_str(&props.iter().map(|p| format!("{p}/0")).collect::<Vec<_>>().join(", "));
    src.push_str("\nagents:\n  a1 a2\nactions:\n");
    for k in 0..r.gen_range(1..=4) {
        let m = r.gen_range(1..=n);
        let mut ps = props.to_vec();
        ps.shuffle(r);
        let eff: Vec<String> = ps[..m]
            .iter()
            .map(|p| format!("{}{p}", if r.gen_bool(0.5) { "+" } else { "-" }))
            .collect();
        src.push_str(&format!("  act{k}(x): {{{}}} <- {}\n", eff.join(", "), guard_text(r, props)));
    }
    src.push_str("reads:\n");
    for k in 0..r.gen_range(1..=4) {
        let p = props.choose(r).unwrap();
        src.push_str(&format!("  rd{k}(x): {p} <- {}\n", guard_text(r, props)));
    }
    src
}
