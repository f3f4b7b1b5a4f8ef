//! Validation of abstract tree counterexamples against the concrete system.
//!
//! Vertices are tree nodes, so one abstract state occurring at two nodes may
//! be matched by two different concrete states. Sets of concrete states are
//! explicit; a preimage h⁻¹(s̃) is only ever used as a filter.
//!
//! The two epistemic rules differ on purpose. Inside tree checking, the
//! candidate targets are cut down to r^Π̃ before the shared-local filter;
//! plain path checking applies the filter alone.

use super::StateSet;
use crate::abstraction::AbstractSystem;
use crate::bits::State;
use crate::error::{Error, Result};
use crate::kernel::{theta, theta_inverse_within};
use crate::mc::{CexTree, Edge, Reachability, Witness};
use crate::system::System;
use std::collections::{BTreeSet, HashMap};

/// Which concrete states an epistemic edge may reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WitnessMode {
    /// Those reached along the edge's one abstract witness path.
    #[default]
    Single,
    /// Those reached along any abstract path, i.e. G ∩ h⁻¹(s̃′). Needs G.
    AllPaths,
}

/// The concrete side of a check.
#[derive(Clone, Copy)]
pub struct Concrete<'a> {
    pub sys: &'a System,
    /// G, required by [`WitnessMode::AllPaths`].
    pub reach: Option<&'a Reachability>,
    pub mode: WitnessMode,
}

/// r_s̃ for one vertex: either all of h⁻¹(s̃) or an explicit subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RSet {
    Preimage,
    Set(StateSet),
}

impl RSet {
    pub fn contains(&self, s: &State) -> bool {
        match self {
            RSet::Preimage => true,
            RSet::Set(x) => x.contains(s),
        }
    }

    pub fn meet(&self, other: &StateSet) -> StateSet {
        match self {
            RSet::Preimage => other.clone(),
            RSet::Set(x) => x.intersection(other).cloned().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, RSet::Set(x) if x.is_empty())
    }
}

/// Forward and backward sets of one processed path.
#[derive(Debug, Clone)]
pub struct PathRecord {
    /// Node ids from the root to a leaf.
    pub path: Vec<usize>,
    /// Sets reached by ⇒ at each position.
    pub forward: Vec<StateSet>,
    /// r^π̃ at each position, from ⇐.
    pub backward: Vec<StateSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Spuriousness {
    /// ⇒* along path `path` (index into the tree's paths) dies at `position`.
    PathDies { path: usize, position: usize },
    /// After adding path `path`, r at `node` became empty.
    NoCommonState { path: usize, node: usize },
    /// Every r stayed nonempty, but no single concrete tree fits them.
    NoConsistentTree,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    /// A concrete tree of the same shape, node for node.
    Valid(CexTree),
    Spurious(Spuriousness),
}

#[derive(Debug, Clone)]
pub struct CeCheck {
    pub verdict: Verdict,
    pub records: Vec<PathRecord>,
    /// r^Π̃ per node after the last processed path.
    pub r: Vec<RSet>,
}

impl CeCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self.verdict, Verdict::Valid(_))
    }
}

/// Shared machinery for the forward and backward rules.
pub(crate) struct Ctx<'a> {
    pub conc: Concrete<'a>,
    pub abs: &'a AbstractSystem,
    pub ce: &'a CexTree,
    /// ⇒*_t along each epistemic witness, keyed by the node the edge enters.
    witness_runs: HashMap<usize, Vec<StateSet>>,
    targets: HashMap<usize, StateSet>,
}

impl<'a> Ctx<'a> {
    pub fn new(conc: Concrete<'a>, abs: &'a AbstractSystem, ce: &'a CexTree) -> Result<Self> {
        if conc.mode == WitnessMode::AllPaths && conc.reach.is_none() {
            return Err(Error::Internal("all-paths witnesses need the concrete reachable states".into()));
        }
        if ce.is_empty() || abs.system.init.binary_search(ce.root()).is_err() {
            return Err(Error::Malformed("the root is not an abstract initial state".into()));
        }
        for (i, n) in ce.nodes.iter().enumerate() {
            if let Some((p, _)) = &n.parent {
                if *p >= i {
                    return Err(Error::Malformed(format!("node {i} does not follow its parent")));
                }
            }
        }
        Ok(Ctx {
            conc,
            abs,
            ce,
            witness_runs: HashMap::new(),
            targets: HashMap::new(),
        })
    }

    pub fn sys(&self) -> &'a System {
        self.conc.sys
    }

    pub fn abstract_state(&self, node: usize) -> &'a State {
        &self.ce.nodes[node].state
    }

    /// S_0 ∩ h⁻¹(s̃).
    pub fn initial_in(&self, s: &State) -> StateSet {
        self.sys().init.iter().filter(|c| &self.abs.map.h(c) == s).cloned().collect()
    }

    /// ⋃_{α ∈ h_A⁻¹(α̃)} Θ_α(st) ∩ h⁻¹(target); Λ is the identity.
    pub fn post(&self, label: Option<usize>, st: &StateSet, target: &State) -> StateSet {
        let mut out = StateSet::new();
        match label {
            Some(a) => {
                for &m in self.abs.members(a) {
                    out.extend(theta(self.sys(), m, st));
                }
            }
            None => out.extend(st.iter().cloned()),
        }
        out.retain(|s| &self.abs.map.h(s) == target);
        out
    }

    /// ⋃_{α ∈ h_A⁻¹(α̃)} Θ⁻¹_α(st) ∩ within.
    pub fn pre_within(&self, label: Option<usize>, st: &StateSet, within: &StateSet) -> StateSet {
        match label {
            Some(a) => {
                let mut out = StateSet::new();
                for &m in self.abs.members(a) {
                    out.extend(theta_inverse_within(self.sys(), m, st, within));
                }
                out
            }
            None => within.intersection(st).cloned().collect(),
        }
    }

    /// (π′, S_0 ∩ h⁻¹(s̃′_0)) ⇒*_t, one set per position.
    pub fn run_witness(&self, w: &Witness) -> Vec<StateSet> {
        let mut sets = vec![self.initial_in(&w.states[0])];
        for (k, label) in w.actions.iter().enumerate() {
            let next = self.post(*label, &sets[k], &w.states[k + 1]);
            sets.push(next);
        }
        sets
    }

    /// st′ for the epistemic edge entering `node`: concrete states in
    /// h⁻¹(s̃′) reachable along the witness (or along any path).
    pub fn epistemic_targets(&mut self, node: usize, w: &Witness) -> StateSet {
        if let Some(t) = self.targets.get(&node) {
            return t.clone();
        }
        let t = match self.conc.mode {
            WitnessMode::Single => {
                let run = self.run_witness(w);
                let last = run.last().cloned().unwrap_or_default();
                self.witness_runs.insert(node, run);
                last
            }
            WitnessMode::AllPaths => {
                let reach = self.conc.reach.expect("checked in Ctx::new");
                let target = self.abstract_state(node);
                reach.states.iter().filter(|s| &self.abs.map.h(s) == target).cloned().collect()
            }
        };
        self.targets.insert(node, t.clone());
        t
    }

    pub fn witness_run(&self, node: usize) -> Option<&Vec<StateSet>> {
        self.witness_runs.get(&node)
    }

    pub fn locals(&self, agent: usize, st: &StateSet) -> BTreeSet<State> {
        st.iter().map(|s| self.sys().local_state(s, agent)).collect()
    }

    /// { s ∈ candidates : l_a(s) ∈ L_a(from) }.
    pub fn share_local(&self, agent: usize, from: &StateSet, candidates: &StateSet) -> StateSet {
        let l = self.locals(agent, from);
        candidates
            .iter()
            .filter(|s| l.contains(&self.sys().local_state(s, agent)))
            .cloned()
            .collect()
    }

    /// One forward step into `node`. With `r`, the step follows the tree
    /// rules that also intersect with r^Π̃ of the target.
    pub fn step(&mut self, node: usize, st: &StateSet, r: Option<&RSet>) -> StateSet {
        let target = self.abstract_state(node);
        match self.ce.edge_into(node).expect("not the root") {
            Edge::Temporal(label) => {
                let mut out = self.post(*label, st, target);
                if let Some(r) = r {
                    out = r.meet(&out);
                }
                out
            }
            Edge::Epistemic { agent, witness } => {
                let (agent, witness) = (*agent, witness.clone());
                let mut cand = self.epistemic_targets(node, &witness);
                if let Some(r) = r {
                    cand = r.meet(&cand);
                }
                self.share_local(agent, st, &cand)
            }
        }
    }

    /// ⇒* along `path` from `start`; stops after the first empty set.
    pub fn forward(&mut self, path: &[usize], start: StateSet, r: Option<&[RSet]>) -> Vec<StateSet> {
        let mut sets = vec![start];
        for &node in &path[1..] {
            if sets.last().unwrap().is_empty() {
                break;
            }
            let next = self.step(node, sets.last().unwrap(), r.map(|r| &r[node]));
            sets.push(next);
        }
        sets
    }

    /// ⇐* along `path`, given the full forward run.
    pub fn backward(&mut self, path: &[usize], forward: &[StateSet]) -> Vec<StateSet> {
        let n = path.len();
        let mut r = vec![StateSet::new(); n];
        r[n - 1] = forward[n - 1].clone();
        for k in (0..n - 1).rev() {
            let node = path[k + 1];
            r[k] = match self.ce.edge_into(node).expect("not the root") {
                Edge::Temporal(label) => self.pre_within(*label, &r[k + 1], &forward[k]),
                Edge::Epistemic { agent, witness } => {
                    let (agent, witness) = (*agent, witness.clone());
                    let st_prime = self.epistemic_targets(node, &witness);
                    let meet: StateSet = r[k + 1].intersection(&st_prime).cloned().collect();
                    self.share_local(agent, &meet, &forward[k])
                }
            };
        }
        r
    }

    /// r^∅: S_0 ∩ h⁻¹ at the root, h⁻¹ elsewhere.
    pub fn initial_records(&self) -> Vec<RSet> {
        let mut r = vec![RSet::Preimage; self.ce.len()];
        r[0] = RSet::Set(self.initial_in(self.ce.root()));
        r
    }
}

/// Path-wise forward and backward checking over the root-to-leaf paths (temporal children
/// first), followed by an exact search for one concrete tree inside the
/// surviving sets.
pub fn check_ce(ce: &CexTree, conc: Concrete<'_>, abs: &AbstractSystem) -> Result<CeCheck> {
    let mut ctx = Ctx::new(conc, abs, ce)?;
    let mut r = ctx.initial_records();
    let mut records = Vec::new();
    for (pi, path) in ce.paths().into_iter().enumerate() {
        let RSet::Set(start) = &r[0] else { unreachable!() };
        let forward = ctx.forward(&path, start.clone(), None);
        if forward.len() < path.len() || forward.last().unwrap().is_empty() {
            let position = forward.len() - 1;
            records.push(PathRecord {
                path,
                forward,
                backward: Vec::new(),
            });
            return Ok(CeCheck {
                verdict: Verdict::Spurious(Spuriousness::PathDies { path: pi, position }),
                records,
                r,
            });
        }
        let backward = ctx.backward(&path, &forward);
        let mut emptied = None;
        for (k, &node) in path.iter().enumerate() {
            let meet = r[node].meet(&backward[k]);
            if meet.is_empty() && emptied.is_none() {
                emptied = Some(node);
            }
            r[node] = RSet::Set(meet);
        }
        records.push(PathRecord { path, forward, backward });
        if let Some(node) = emptied {
            return Ok(CeCheck {
                verdict: Verdict::Spurious(Spuriousness::NoCommonState { path: pi, node }),
                records,
                r,
            });
        }
    }
    let verdict = match concretize(&mut ctx, &r)? {
        Some(tree) => Verdict::Valid(tree),
        None => Verdict::Spurious(Spuriousness::NoConsistentTree),
    };
    Ok(CeCheck { verdict, records, r })
}

/// Bottom-up: the states of each node's candidate set from which the whole
/// subtree below can be matched.
pub(crate) fn supported(ctx: &mut Ctx<'_>, cand: &[RSet]) -> Result<Vec<StateSet>> {
    let n = ctx.ce.len();
    let mut ok: Vec<StateSet> = vec![StateSet::new(); n];
    for node in (0..n).rev() {
        let RSet::Set(c) = &cand[node] else {
            return Err(Error::Internal(format!("node {node} was never constrained")));
        };
        let mut keep = c.clone();
        for &child in &ctx.ce.nodes[node].children {
            keep = match ctx.ce.edge_into(child).unwrap() {
                Edge::Temporal(label) => {
                    let label = *label;
                    keep.into_iter()
                        .filter(|s| {
                            let single = StateSet::from([s.clone()]);
                            ctx.post(label, &single, ctx.abstract_state(child))
                                .iter()
                                .any(|t| ok[child].contains(t))
                        })
                        .collect()
                }
                Edge::Epistemic { agent, .. } => ctx.share_local(*agent, &ok[child], &keep),
            };
        }
        ok[node] = keep;
    }
    Ok(ok)
}

/// Picks one concrete state per node inside `r`, or `None` if no
/// concrete tree of the same shape exists there.
fn concretize(ctx: &mut Ctx<'_>, r: &[RSet]) -> Result<Option<CexTree>> {
    let ok = supported(ctx, r)?;
    let Some(root) = ok[0].iter().next().cloned() else {
        return Ok(None);
    };
    let ce = ctx.ce;
    let mut tree = CexTree::single(root);
    tree.nodes[0].refutes = ce.nodes[0].refutes.clone();
    for node in 1..ce.len() {
        let (parent, edge) = ce.nodes[node].parent.clone().unwrap();
        let from = tree.nodes[parent].state.clone();
        let (edge, state) = match edge {
            Edge::Temporal(None) => (Edge::Temporal(None), from),
            Edge::Temporal(Some(a)) => {
                let (m, t) = ctx
                    .abs
                    .members(a)
                    .iter()
                    .filter_map(|&m| ctx.sys().apply(m, &from).map(|t| (m, t)))
                    .find(|(_, t)| ok[node].contains(t))
                    .ok_or_else(|| Error::Internal("supported state without a successor".into()))?;
                (Edge::Temporal(Some(m)), t)
            }
            Edge::Epistemic { agent, witness } => {
                let l = ctx.sys().local_state(&from, agent);
                let t = ok[node]
                    .iter()
                    .find(|t| ctx.sys().local_state(t, agent) == l)
                    .cloned()
                    .ok_or_else(|| Error::Internal("supported state without a match".into()))?;
                let w = concrete_witness(ctx, node, &witness, &t)?;
                (Edge::Epistemic { agent, witness: w }, t)
            }
        };
        let id = tree.add_child(parent, edge, state);
        tree.nodes[id].refutes = ce.nodes[node].refutes.clone();
    }
    Ok(Some(tree))
}

/// A concrete path from S_0 to `target`: backwards through the witness run,
/// or the BFS path of G when every path counts.
fn concrete_witness(ctx: &Ctx<'_>, node: usize, w: &Witness, target: &State) -> Result<Witness> {
    if let (WitnessMode::AllPaths, Some(reach)) = (ctx.conc.mode, ctx.conc.reach) {
        let id = reach.id(target).ok_or_else(|| Error::Internal("witness target is unreachable".into()))?;
        let (states, actions) = reach.witness(id);
        return Ok(Witness {
            states: states.into_iter().map(|i| reach.states[i].clone()).collect(),
            actions: actions.into_iter().map(Some).collect(),
        });
    }
    let run = ctx
        .witness_run(node)
        .ok_or_else(|| Error::Internal("witness was never run".into()))?;
    let mut states = vec![target.clone()];
    let mut actions = Vec::new();
    for k in (0..w.actions.len()).rev() {
        let cur = states.last().unwrap().clone();
        let step = run[k].iter().find_map(|s| match w.actions[k] {
            None => (s == &cur).then(|| (s.clone(), None)),
            Some(a) => ctx
                .abs
                .members(a)
                .iter()
                .find(|&&m| ctx.sys().apply(m, s).as_ref() == Some(&cur))
                .map(|&m| (s.clone(), Some(m))),
        });
        let (s, a) = step.ok_or_else(|| Error::Internal("witness run has no predecessor".into()))?;
        states.push(s);
        actions.push(a);
    }
    states.reverse();
    actions.reverse();
    Ok(Witness { states, actions })
}
