//! Failure states of spurious counterexamples and the refinement they induce.

use super::check::{supported, CeCheck, Concrete, Ctx, RSet, Spuriousness, Verdict};
use super::clauses::{conflict_clauses, set_formula, varying};
use super::StateSet;
use crate::abstraction::{AbstractSystem, AbstractionMap};
use crate::bits::State;
use crate::error::{Error, Result};
use crate::expr::{Clause, Expr};
use crate::mc::{CexTree, Edge, Witness};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailingEdge {
    /// Abstract action, or Λ.
    Temporal(Option<usize>),
    Epistemic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// No member action is enabled anywhere in the dead ends.
    Unperformable,
    /// Successors of the dead ends all miss r of the next vertex.
    MissesRecord,
    /// The witness of the epistemic edge has no concrete counterpart.
    SpuriousWitness,
    /// The witness reaches only states outside r of the next vertex.
    WitnessMissesRecord,
    /// The dead ends share no local state with the epistemic targets.
    NoSharedLocal,
}

/// Where the failure was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// The tree rules over r^Π̃, path by path.
    TreeRules,
    /// The exact matching of the whole tree, when every r^Π̃ stayed nonempty.
    Concretization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conflict {
    pub base: Expr,
    pub conflict: Expr,
    /// Conflict clauses, fewest literals first; `None` if the CNF overflowed.
    pub clauses: Option<Vec<Clause>>,
}

#[derive(Debug, Clone)]
pub struct FailureDiagnosis {
    /// Failure vertex s̃_i and its successor s̃_{i+1} on the failing path.
    pub node: usize,
    pub next: usize,
    /// For a spurious witness: the position inside the witness path.
    pub witness_position: Option<usize>,
    /// The abstract failure state.
    pub failure_state: State,
    pub edge: FailingEdge,
    pub kind: FailureKind,
    pub dead_end: StateSet,
    pub bad: StateSet,
    pub conflicts: Vec<Conflict>,
    pub source: Source,
    /// Hidden propositions the failing step depends on, for escalation.
    pub support: BTreeSet<usize>,
}

impl FailureDiagnosis {
    /// The smallest conflict clause of each conflict.
    pub fn chosen_clauses(&self) -> Vec<&Clause> {
        self.conflicts
            .iter()
            .filter_map(|c| c.clauses.as_ref().and_then(|cs| cs.first()))
            .collect()
    }
}

/// Locates the failure state of a counterexample that `check` found
/// spurious.
pub fn find_failure(ce: &CexTree, conc: Concrete<'_>, abs: &AbstractSystem, check: &CeCheck) -> Result<FailureDiagnosis> {
    let mut ctx = Ctx::new(conc, abs, ce)?;
    match &check.verdict {
        Verdict::Valid(_) => Err(Error::Internal("no failure in a valid counterexample".into())),
        Verdict::Spurious(Spuriousness::NoConsistentTree) => concretization_failure(&mut ctx, &check.r),
        Verdict::Spurious(_) => tree_failure(&mut ctx),
    }
}

/// Grows Π̃ path by path and runs the tree rules over each new path until
/// one dies: (π̃, r_s̃₀) ⇒* (π̃₁, st_d) ⇒ (π̃₂, ∅).
fn tree_failure(ctx: &mut Ctx<'_>) -> Result<FailureDiagnosis> {
    let mut r = ctx.initial_records();
    for path in ctx.ce.paths() {
        let RSet::Set(start) = r[0].clone() else { unreachable!() };
        let fwd = ctx.forward(&path, start.clone(), Some(&r));
        if fwd.len() < path.len() || fwd.last().unwrap().is_empty() {
            let k = fwd.len() - 2;
            let pool = ctx.forward(&path[..=k], start, None).pop().unwrap_or_default();
            return diagnose(ctx, &path[..k + 2], fwd[k].clone(), &r[path[k + 1]], pool, Source::TreeRules);
        }
        let plain = ctx.forward(&path, start, None);
        let back = ctx.backward(&path, &plain);
        for (k, &node) in path.iter().enumerate() {
            r[node] = RSet::Set(r[node].meet(&back[k]));
        }
    }
    Err(Error::Internal("spurious counterexample without a failure state".into()))
}

/// Every root candidate fails some child: report the first child that some
/// of them cannot reach inside its supported set.
fn concretization_failure(ctx: &mut Ctx<'_>, r: &[RSet]) -> Result<FailureDiagnosis> {
    let ok = supported(ctx, r)?;
    let RSet::Set(st) = &r[0] else { unreachable!() };
    for child in ctx.ce.ordered_children(0) {
        let target = RSet::Set(ok[child].clone());
        let stuck: StateSet = st
            .iter()
            .filter(|s| ctx.step(child, &StateSet::from([(*s).clone()]), Some(&target)).is_empty())
            .cloned()
            .collect();
        if !stuck.is_empty() {
            return diagnose(ctx, &[0, child], stuck, &target, st.clone(), Source::Concretization);
        }
    }
    Err(Error::Internal("unmatched root without a failing child".into()))
}

fn diagnose(
    ctx: &mut Ctx<'_>,
    path: &[usize],
    dead_end: StateSet,
    target: &RSet,
    pool: StateSet,
    source: Source,
) -> Result<FailureDiagnosis> {
    let (node, next) = (path[path.len() - 2], path[path.len() - 1]);
    let sys = ctx.sys();
    let edge = ctx.ce.edge_into(next).unwrap().clone();
    let mut d = FailureDiagnosis {
        node,
        next,
        witness_position: None,
        failure_state: ctx.abstract_state(node).clone(),
        edge: match &edge {
            Edge::Temporal(l) => FailingEdge::Temporal(*l),
            Edge::Epistemic { agent, .. } => FailingEdge::Epistemic(*agent),
        },
        kind: FailureKind::MissesRecord,
        dead_end: dead_end.clone(),
        bad: StateSet::new(),
        conflicts: Vec::new(),
        source,
        support: BTreeSet::new(),
    };
    match edge {
        Edge::Temporal(label) => {
            let target_state = ctx.abstract_state(next).clone();
            d.bad = pool
                .iter()
                .filter(|s| {
                    let succ = ctx.post(label, &StateSet::from([(*s).clone()]), &target_state);
                    succ.iter().any(|t| target.contains(t))
                })
                .cloned()
                .collect();
            match label {
                None => {
                    let RSet::Set(t) = target else { unreachable!() };
                    d.conflicts.push(separate(t, &dead_end, 0..sys.width()));
                }
                Some(a) => {
                    let members = ctx.abs.members(a);
                    for &m in members {
                        d.support.extend(sys.actions[m].guard.support());
                    }
                    let images: Vec<(usize, StateSet)> = members
                        .iter()
                        .map(|&m| (m, crate::kernel::theta(sys, m, &dead_end)))
                        .collect();
                    if images.iter().all(|(_, img)| img.is_empty()) {
                        d.kind = FailureKind::Unperformable;
                        for &m in members {
                            d.conflicts.push(unperformable(&sys.actions[m].guard, &dead_end));
                        }
                    } else {
                        let RSet::Set(t) = target else {
                            return Err(Error::Internal("successors left the abstract state".into()));
                        };
                        for (_, img) in images.iter().filter(|(_, img)| !img.is_empty()) {
                            d.conflicts.push(separate(t, img, 0..sys.width()));
                        }
                    }
                }
            }
        }
        Edge::Epistemic { agent, witness } => {
            d.support.extend(sys.local_bits(agent).iter().copied());
            let st_prime = ctx.epistemic_targets(next, &witness);
            if st_prime.is_empty() {
                return witness_failure(ctx, d, &witness);
            }
            let reachable_targets = target.meet(&st_prime);
            d.bad = ctx.share_local(agent, &reachable_targets, &pool);
            if reachable_targets.is_empty() {
                d.kind = FailureKind::WitnessMissesRecord;
                let RSet::Set(t) = target else { unreachable!() };
                d.conflicts.push(separate(t, &st_prime, 0..sys.width()));
            } else {
                d.kind = FailureKind::NoSharedLocal;
                let bits = sys.local_bits(agent).to_vec();
                d.conflicts.push(separate(&dead_end, &reachable_targets, bits));
            }
        }
    }
    Ok(d)
}

/// Base: the dead ends over the guard's variables. Conflict: the guard.
fn unperformable(guard: &Expr, dead_end: &StateSet) -> Conflict {
    let vars: Vec<usize> = guard.support().into_iter().collect();
    let base = set_formula(dead_end, &vars);
    Conflict {
        clauses: conflict_clauses(&base, guard).ok(),
        base,
        conflict: guard.clone(),
    }
}

/// Base and conflict formulas for two disjoint sets, over the variables
/// (among `among`) on which they are not constant.
fn separate(base: &StateSet, conflict: &StateSet, among: impl IntoIterator<Item = usize>) -> Conflict {
    let vars = varying(&[base, conflict], among);
    let (b, c) = (set_formula(base, &vars), set_formula(conflict, &vars));
    Conflict {
        clauses: conflict_clauses(&b, &c).ok(),
        base: b,
        conflict: c,
    }
}

/// The witness path of an epistemic edge is itself spurious: find where its
/// forward run dies, as for a linear counterexample.
fn witness_failure(ctx: &mut Ctx<'_>, mut d: FailureDiagnosis, w: &Witness) -> Result<FailureDiagnosis> {
    let run = ctx.run_witness(w);
    let j = run
        .iter()
        .position(StateSet::is_empty)
        .filter(|&j| j > 0)
        .ok_or_else(|| Error::Internal("witness run does not die".into()))?
        - 1;
    let sys = ctx.sys();
    d.kind = FailureKind::SpuriousWitness;
    d.witness_position = Some(j);
    d.failure_state = w.states[j].clone();
    d.dead_end = run[j].clone();
    d.bad = StateSet::new();
    d.conflicts.clear();
    d.support.clear();
    if let Some(a) = w.actions[j] {
        for &m in ctx.abs.members(a) {
            let g = &sys.actions[m].guard;
            d.support.extend(g.support());
            d.conflicts.push(unperformable(g, &run[j]));
        }
    }
    Ok(d)
}

/// How a refinement found its new propositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Escalation {
    /// Conflict clauses gave nothing new: hidden variables on which dead
    /// ends and bad states differ.
    DeadEndVsBad,
    /// Hidden variables of the failing step (guards or local state).
    StepSupport,
    /// Every hidden proposition.
    AllHidden,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub map: AbstractionMap,
    pub added: Vec<usize>,
    pub escalation: Option<Escalation>,
}

/// Φ̃′ = Φ̃ ∪ props(chosen clauses), escalating when that adds nothing.
/// The visible set always grows strictly.
pub fn refine(map: &AbstractionMap, diag: &FailureDiagnosis) -> Result<Refinement> {
    let hidden = map.hidden();
    if hidden.is_empty() {
        return Err(Error::Internal("spurious counterexample over the identity abstraction".into()));
    }
    let from_clauses: BTreeSet<usize> = diag
        .chosen_clauses()
        .into_iter()
        .flat_map(|c| c.iter().map(|l| l.0))
        .filter(|v| hidden.contains(v))
        .collect();
    let (added, escalation) = if !from_clauses.is_empty() {
        (from_clauses, None)
    } else {
        let differ: BTreeSet<usize> = if diag.bad.is_empty() {
            BTreeSet::new()
        } else {
            varying(&[&diag.dead_end, &diag.bad], hidden.iter().copied()).into_iter().collect()
        };
        let support: BTreeSet<usize> = diag.support.intersection(&hidden).copied().collect();
        if !differ.is_empty() {
            (differ, Some(Escalation::DeadEndVsBad))
        } else if !support.is_empty() {
            (support, Some(Escalation::StepSupport))
        } else {
            (hidden, Some(Escalation::AllHidden))
        }
    };
    Ok(Refinement {
        map: map.extend(added.iter().copied()),
        added: added.into_iter().collect(),
        escalation,
    })
}
