//! Tree-like counterexamples for the safety fragment of ACTLK.
//!
//! A tree is a set of nodes rooted at an initial state. Temporal edges carry
//! an action (or Λ); epistemic edges carry an agent and a shortest temporal
//! witness path from S_0 to their target. The same global state may label
//! several nodes.

use super::check::Checker;
use super::reach::Reachability;
use crate::bits::State;
use crate::ctlk::Ctlk;
use crate::error::{Error, Result};
use crate::system::System;
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub states: Vec<State>,
    /// `actions[k]` leads from `states[k]` to `states[k + 1]`.
    pub actions: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Edge {
    /// `None` is the Λ joint action.
    Temporal(Option<usize>),
    Epistemic { agent: usize, witness: Witness },
}

impl Edge {
    pub fn is_temporal(&self) -> bool {
        matches!(self, Edge::Temporal(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub state: State,
    pub parent: Option<(usize, Edge)>,
    pub children: Vec<usize>,
    /// Subformulas (in negation normal form) shown false at this node.
    pub refutes: Vec<Ctlk>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CexTree {
    pub nodes: Vec<Node>,
}

impl CexTree {
    pub fn single(root: State) -> Self {
        CexTree {
            nodes: vec![Node {
                state: root,
                parent: None,
                children: Vec::new(),
                refutes: Vec::new(),
            }],
        }
    }

    pub fn root(&self) -> &State {
        &self.nodes[0].state
    }

    pub fn add_child(&mut self, parent: usize, edge: Edge, state: State) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            state,
            parent: Some((parent, edge)),
            children: Vec::new(),
            refutes: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Children with temporal edges first, otherwise in insertion order.
    pub fn ordered_children(&self, n: usize) -> Vec<usize> {
        let mut c = self.nodes[n].children.clone();
        c.sort_by_key(|&k| !self.edge_into(k).is_some_and(Edge::is_temporal));
        c
    }

    pub fn edge_into(&self, n: usize) -> Option<&Edge> {
        self.nodes[n].parent.as_ref().map(|(_, e)| e)
    }

    /// Root-to-leaf node sequences, depth first with temporal children first.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![0usize]];
        while let Some(path) = stack.pop() {
            let last = *path.last().unwrap();
            let kids = self.ordered_children(last);
            if kids.is_empty() {
                out.push(path);
                continue;
            }
            for &k in kids.iter().rev() {
                let mut p = path.clone();
                p.push(k);
                stack.push(p);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All epistemic witnesses, with the node their edge enters.
    pub fn witnesses(&self) -> impl Iterator<Item = (usize, usize, &Witness)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match &n.parent {
            Some((_, Edge::Epistemic { agent, witness })) => Some((i, *agent, witness)),
            _ => None,
        })
    }
}

/// Builds a counterexample for `f` when it fails. `f` must lie in the
/// fragment recognized by [`Ctlk::is_cex_fragment`].
pub fn counterexample(sys: &System, reach: &Reachability, f: &Ctlk) -> Result<Option<CexTree>> {
    if !f.is_cex_fragment() {
        return Err(Error::Unsupported(
            "counterexamples are built only for literals, &, |, K, AX, AG and ~K over propositions".into(),
        ));
    }
    let mut checker = Checker::new(reach);
    let Some(root) = checker.first_failing_init(f) else {
        return Ok(None);
    };
    let mut b = Builder {
        sys,
        reach,
        checker,
        tree: CexTree::single(reach.states[root].clone()),
    };
    b.refute(0, root, &f.nnf())?;
    Ok(Some(b.tree))
}

struct Builder<'a> {
    sys: &'a System,
    reach: &'a Reachability,
    checker: Checker<'a>,
    tree: CexTree,
}

impl Builder<'_> {
    fn fails(&mut self, f: &Ctlk, s: usize) -> bool {
        !self.checker.sat(f)[s]
    }

    fn witness(&self, s: usize) -> Witness {
        let (states, actions) = self.reach.witness(s);
        Witness {
            states: states.into_iter().map(|i| self.reach.states[i].clone()).collect(),
            actions: actions.into_iter().map(Some).collect(),
        }
    }

    fn refute(&mut self, node: usize, s: usize, f: &Ctlk) -> Result<()> {
        debug_assert!(self.fails(f, s));
        self.tree.nodes[node].refutes.push(f.clone());
        match f {
            // Literals and ¬K_i ψ are leaves.
            Ctlk::False | Ctlk::Atom(_) | Ctlk::Not(_) => Ok(()),
            Ctlk::And(x, y) => {
                if self.fails(x, s) {
                    self.refute(node, s, x)
                } else {
                    self.refute(node, s, y)
                }
            }
            Ctlk::Or(x, y) => {
                self.refute(node, s, x)?;
                self.refute(node, s, y)
            }
            Ctlk::K(a, x) => {
                let sat = self.checker.sat(x);
                let t = self
                    .reach
                    .indistinguishable(*a, s)
                    .iter()
                    .copied()
                    .filter(|&t| !sat[t])
                    .min_by_key(|&t| (self.reach.depth[t], t))
                    .ok_or_else(|| Error::Internal("K refutation without witness".into()))?;
                let edge = Edge::Epistemic {
                    agent: *a,
                    witness: self.witness(t),
                };
                let child = self.tree.add_child(node, edge, self.reach.states[t].clone());
                self.refute(child, t, x)
            }
            Ctlk::AX(x) => {
                let sat = self.checker.sat(x);
                let step = self.reach.succ[s].iter().copied().find(|&(_, t)| !sat[t]);
                let (label, t) = match step {
                    Some((a, t)) => (Some(a), t),
                    None if !sat[s] => (None, s),
                    None => return Err(Error::Internal("AX refutation without successor".into())),
                };
                let child = self.tree.add_child(node, Edge::Temporal(label), self.reach.states[t].clone());
                self.refute(child, t, x)
            }
            Ctlk::AG(x) => {
                let sat = self.checker.sat(x);
                let path = self.shortest_to(s, |t| !sat[t])?;
                let mut cur = node;
                for &(a, t) in &path {
                    cur = self.tree.add_child(cur, Edge::Temporal(Some(a)), self.reach.states[t].clone());
                }
                let end = path.last().map(|p| p.1).unwrap_or(s);
                self.refute(cur, end, x)
            }
            other => Err(Error::Unsupported(format!(
                "no counterexample rule for {}",
                other.display(&|v| self.sys.prop_name(v).to_string(), &|i| self.sys.agents[i].clone())
            ))),
        }
    }

    /// Shortest action path from `s` to a state satisfying `goal`.
    fn shortest_to(&self, s: usize, goal: impl Fn(usize) -> bool) -> Result<Vec<(usize, usize)>> {
        if goal(s) {
            return Ok(Vec::new());
        }
        let n = self.reach.len();
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &(a, t) in &self.reach.succ[u] {
                if seen[t] {
                    continue;
                }
                seen[t] = true;
                prev[t] = Some((u, a));
                if goal(t) {
                    let mut path = vec![(a, t)];
                    let mut cur = u;
                    while cur != s {
                        let (p, a) = prev[cur].unwrap();
                        path.push((a, cur));
                        cur = p;
                    }
                    path.reverse();
                    return Ok(path);
                }
                queue.push_back(t);
            }
        }
        Err(Error::Internal("AG refutation without a violating state".into()))
    }
}
