//! Counterexample-guided refinement of variable-hiding abstractions.
//!
//! Each round abstracts the concrete system, model-checks the abstract one,
//! validates a failing verdict's tree counterexample against the concrete
//! system, and on a spurious tree makes more propositions visible.
//!
//! Properties with ¬K_i (over propositional operands) may hold abstractly
//! only because the abstract ∼_i relates too much. In interactive mode the
//! selector then chooses hidden local propositions of those agents, until a
//! valid counterexample appears or their local states are fully visible.
//! A verdict of "holds" reached that way is not guaranteed by preservation
//! and is reported as inconclusive. Before asking, the loop tries the ACTLK
//! property obtained by replacing each ¬K_i ψ with ¬ψ, which implies the
//! original one.

mod check;
mod clauses;
mod failure;

pub use check::{check_ce, CeCheck, Concrete, PathRecord, RSet, Spuriousness, Verdict, WitnessMode};
pub use clauses::{conflict_clauses, set_formula, varying, CNF_CAP};
pub use failure::{
    find_failure, refine, Conflict, Escalation, FailingEdge, FailureDiagnosis, FailureKind, Refinement, Source,
};

use crate::abstraction::{abstract_is, initial_abstraction, AbstractionMap};
use crate::bits::State;
use crate::ctlk::Ctlk;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mc::{counterexample, reachable, CexTree, Checker, Edge, Reachability};
use crate::system::{Owner, System};
use serde::Serialize;
use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write;

pub type StateSet = BTreeSet<State>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Automatic,
    Interactive,
}

/// Chooses hidden local propositions to reveal when a property with ¬K
/// holds abstractly.
pub trait PropSelector {
    /// `candidates` are proposition names; an empty answer aborts the run.
    fn select(&mut self, agents: &[String], candidates: &[String]) -> Vec<String>;
}

/// Answers from a script: one name per line, a blank line ends a round,
/// `*` selects every candidate. An exhausted script answers nothing.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSelector {
    rounds: VecDeque<Vec<String>>,
}

impl ScriptedSelector {
    pub fn new(script: &str) -> Self {
        let mut rounds = VecDeque::new();
        let mut cur = Vec::new();
        for line in script.lines().map(str::trim) {
            if line.is_empty() {
                if !cur.is_empty() {
                    rounds.push_back(std::mem::take(&mut cur));
                }
            } else if !line.starts_with('#') {
                cur.push(line.to_string());
            }
        }
        if !cur.is_empty() {
            rounds.push_back(cur);
        }
        ScriptedSelector { rounds }
    }
}

impl PropSelector for ScriptedSelector {
    fn select(&mut self, _agents: &[String], candidates: &[String]) -> Vec<String> {
        let Some(round) = self.rounds.pop_front() else {
            return Vec::new();
        };
        if round.iter().any(|r| r == "*") {
            return candidates.to_vec();
        }
        round
    }
}

/// Reveals every candidate at once.
pub struct SelectAll;

impl PropSelector for SelectAll {
    fn select(&mut self, _agents: &[String], candidates: &[String]) -> Vec<String> {
        candidates.to_vec()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CegarOptions {
    pub mode: Mode,
    pub witness: WitnessMode,
    pub max_states: usize,
}

impl Default for CegarOptions {
    fn default() -> Self {
        CegarOptions {
            mode: Mode::Automatic,
            witness: WitnessMode::Single,
            max_states: 10_000_000,
        }
    }
}

/// One round of the loop, for the refinement trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Iteration {
    pub index: usize,
    pub visible: usize,
    pub abstract_states: usize,
    pub abstract_actions: usize,
    pub abstract_holds: bool,
    /// Canonical text of the abstract counterexample.
    pub counterexample: Option<String>,
    pub valid: Option<bool>,
    pub spurious: Option<String>,
    pub failure_state: Option<String>,
    pub failure_kind: Option<String>,
    pub clauses: Vec<String>,
    pub added: Vec<String>,
    pub escalation: Option<Escalation>,
    /// Propositions chosen by the selector.
    pub selected: Vec<String>,
    /// Round of the pre-pass on the strengthened property.
    pub strengthened: bool,
}

#[derive(Debug, Clone)]
pub struct CegarResult {
    pub holds: bool,
    /// False when "holds" rests on a ¬K property whose local states were
    /// refined by selection rather than by preservation.
    pub conclusive: bool,
    /// A concrete counterexample when the property fails.
    pub counterexample: Option<CexTree>,
    pub trace: Vec<Iteration>,
    pub map: AbstractionMap,
}

impl CegarResult {
    /// Largest abstract reachable state space over all rounds.
    pub fn max_abstract_states(&self) -> usize {
        self.trace.iter().map(|i| i.abstract_states).max().unwrap_or(0)
    }

    pub fn refinements(&self) -> usize {
        self.trace.iter().filter(|i| !i.added.is_empty() || !i.selected.is_empty()).count()
    }
}

/// Deterministic text of a tree: one line per node with its parent, edge
/// and true propositions.
pub fn fingerprint(ce: &CexTree, sys: &System) -> String {
    let mut out = String::new();
    for (i, n) in ce.nodes.iter().enumerate() {
        let edge = match &n.parent {
            None => "root".to_string(),
            Some((p, Edge::Temporal(a))) => {
                format!("{p} -{}->", a.map_or("Λ", |a| sys.actions[a].id.as_str()))
            }
            Some((p, Edge::Epistemic { agent, .. })) => format!("{p} ~{}", sys.agents[*agent]),
        };
        let _ = writeln!(out, "{i}: {edge} {}", sys.describe_state(&n.state));
    }
    out
}

/// Abstract, check, validate, refine; until the abstract verdict carries
/// over or a counterexample is confirmed.
pub fn cegar_loop(
    sys: &System,
    phi: &Ctlk,
    iota: Option<&Expr>,
    opts: CegarOptions,
    selector: &mut dyn PropSelector,
) -> Result<CegarResult> {
    let negk = phi.has_negative_knowledge();
    match opts.mode {
        Mode::Automatic if !phi.is_actlk_safety() => {
            return Err(Error::Unsupported(
                "automatic refinement needs an ACTLK safety property (literals, &, |, K, AX, AG)".into(),
            ))
        }
        Mode::Interactive if !phi.is_cex_fragment() => {
            return Err(Error::Unsupported(
                "interactive refinement needs a safety property whose ~K operands are propositional".into(),
            ))
        }
        _ => {}
    }
    let concrete_reach: Option<Reachability> = match opts.witness {
        WitnessMode::AllPaths => Some(reachable(sys, opts.max_states)?),
        WitnessMode::Single => None,
    };
    let conc = Concrete {
        sys,
        reach: concrete_reach.as_ref(),
        mode: opts.witness,
    };
    let mut trace = Vec::new();
    if opts.mode == Mode::Interactive && negk {
        // Decide φ[¬K_i ψ := ¬ψ] automatically first; it implies φ, so a
        // positive answer is conclusive and needs no selection.
        let strong = phi.strengthen_negative_knowledge();
        if strong.is_actlk_safety() {
            let auto = CegarOptions {
                mode: Mode::Automatic,
                ..opts
            };
            let mut pre = cegar_loop(sys, &strong, iota, auto, selector)?;
            for it in &mut pre.trace {
                it.strengthened = true;
            }
            if pre.holds {
                return Ok(pre);
            }
            trace = pre.trace;
        }
    }
    let frozen = frozen_props(sys);
    let mut map = initial_abstraction(sys, phi, iota);
    let mut conclusive = true;
    loop {
        let abs = abstract_is(sys, &map)?;
        let ar = reachable(&abs.system, opts.max_states)?;
        let aphi = map
            .abstract_formula(phi)
            .ok_or_else(|| Error::Internal("property mentions a hidden proposition".into()))?;
        let mut it = Iteration {
            index: trace.len(),
            visible: map.visible().len(),
            abstract_states: ar.len(),
            abstract_actions: abs.classes.len(),
            abstract_holds: Checker::new(&ar).holds(&aphi),
            counterexample: None,
            valid: None,
            spurious: None,
            failure_state: None,
            failure_kind: None,
            clauses: Vec::new(),
            added: Vec::new(),
            escalation: None,
            selected: Vec::new(),
            strengthened: false,
        };
        tracing::debug!(round = it.index, visible = it.visible, states = it.abstract_states, "abstract model");

        if it.abstract_holds {
            if !(negk && opts.mode == Mode::Interactive) {
                trace.push(it);
                return Ok(CegarResult {
                    holds: true,
                    conclusive,
                    counterexample: None,
                    trace,
                    map,
                });
            }
            let agents: BTreeSet<usize> = phi.negative_knowledge().into_iter().map(|(a, _)| a).collect();
            let candidates: Vec<usize> = map
                .hidden()
                .into_iter()
                .filter(|&v| matches!(sys.props[v].owner, Owner::Agent(a) if agents.contains(&a)))
                .filter(|v| !frozen.contains(v))
                .collect();
            conclusive = false;
            if candidates.is_empty() {
                trace.push(it);
                return Ok(CegarResult {
                    holds: true,
                    conclusive,
                    counterexample: None,
                    trace,
                    map,
                });
            }
            let names: Vec<String> = candidates.iter().map(|&v| sys.props[v].name.clone()).collect();
            let agent_names: Vec<String> = agents.iter().map(|&a| sys.agents[a].clone()).collect();
            let chosen = selector.select(&agent_names, &names);
            if chosen.is_empty() {
                return Err(Error::Aborted(format!(
                    "no local propositions selected while {} remain hidden",
                    names.len()
                )));
            }
            let mut add = Vec::new();
            for c in &chosen {
                match names.iter().position(|n| n == c) {
                    Some(k) => add.push(candidates[k]),
                    None => return Err(Error::Aborted(format!("'{c}' is not a hidden local proposition"))),
                }
            }
            it.selected = chosen;
            map = map.extend(add);
            trace.push(it);
            continue;
        }

        let ce = counterexample(&abs.system, &ar, &aphi)?
            .ok_or_else(|| Error::Internal("failing property without a counterexample".into()))?;
        it.counterexample = Some(fingerprint(&ce, &abs.system));
        let check = check_ce(&ce, conc, &abs)?;
        if let Verdict::Valid(tree) = check.verdict {
            it.valid = Some(true);
            trace.push(it);
            return Ok(CegarResult {
                holds: false,
                conclusive: true,
                counterexample: Some(tree),
                trace,
                map,
            });
        }
        it.valid = Some(false);
        let Verdict::Spurious(why) = &check.verdict else { unreachable!() };
        it.spurious = Some(format!("{why:?}"));
        let diag = find_failure(&ce, conc, &abs, &check)?;
        let names = abs.system.prop_names();
        it.failure_state = Some(abs.system.describe_state(&diag.failure_state));
        it.failure_kind = Some(format!("{:?}", diag.kind));
        it.clauses = diag
            .chosen_clauses()
            .into_iter()
            .map(|c| Expr::clause(c).display(&|v| sys.props[v].name.clone()).to_string())
            .collect();
        let _ = names;
        let step = refine(&map, &diag)?;
        it.added = step.added.iter().map(|&v| sys.props[v].name.clone()).collect();
        it.escalation = step.escalation;
        map = step.map;
        trace.push(it);
    }
}

/// Propositions that start equal to some b in every initial state and that
/// every action writes only to b. They are constant on G, so revealing one
/// never splits an abstract state.
fn frozen_props(sys: &System) -> BTreeSet<usize> {
    let Some(first) = sys.init.first() else {
        return BTreeSet::new();
    };
    (0..sys.width())
        .filter(|&v| {
            let b = first.get(v);
            sys.init.iter().all(|s| s.get(v) == b)
                && sys.actions.iter().all(|a| a.writes(v).map_or(true, |w| w == b))
        })
        .collect()
}

/// Concrete verdict and counterexample, for comparison with the loop.
pub fn direct(sys: &System, phi: &Ctlk, max_states: usize) -> Result<(bool, Option<CexTree>, usize)> {
    let (reach, holds, ce) = crate::mc::verify(sys, phi, max_states)?;
    Ok((holds, ce, reach.len()))
}
