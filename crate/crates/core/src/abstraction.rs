//! Variable hiding: an abstract interpreted system over a visible subset of
//! the propositions, together with the surjections h, h_i and h_A.
//!
//! Abstract states are valuations of the visible propositions (in ascending
//! concrete order). Agents are kept as they are; an agent's abstract local
//! state is its visible local propositions.

use crate::bits::State;
use crate::ctlk::Ctlk;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mc::Reachability;
use crate::system::{Action, Owner, Prop, System};
use std::collections::{BTreeSet, HashMap};
use std::fmt;

/// Above this many essential variables, quantified guards are compared
/// pairwise with a satisfiability check instead of by truth table.
pub const TRUTH_TABLE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractionMap {
    visible: Vec<usize>,
    /// Concrete position → abstract position.
    index: Vec<Option<usize>>,
}

impl AbstractionMap {
    pub fn new(width: usize, visible: impl IntoIterator<Item = usize>) -> Self {
        let visible: Vec<usize> = visible.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut index = vec![None; width];
        for (k, &v) in visible.iter().enumerate() {
            index[v] = Some(k);
        }
        AbstractionMap { visible, index }
    }

    pub fn identity(width: usize) -> Self {
        AbstractionMap::new(width, 0..width)
    }

    /// Φ̃, ascending.
    pub fn visible(&self) -> &[usize] {
        &self.visible
    }

    pub fn hidden(&self) -> BTreeSet<usize> {
        (0..self.index.len()).filter(|&v| self.index[v].is_none()).collect()
    }

    pub fn width(&self) -> usize {
        self.index.len()
    }

    pub fn is_visible(&self, v: usize) -> bool {
        self.index[v].is_some()
    }

    pub fn is_identity(&self) -> bool {
        self.visible.len() == self.index.len()
    }

    pub fn abstract_var(&self, v: usize) -> Option<usize> {
        self.index.get(v).copied().flatten()
    }

    /// h: projection onto Φ̃.
    pub fn h(&self, s: &State) -> State {
        s.project(&self.visible)
    }

    /// The map with `extra` made visible as well.
    pub fn extend(&self, extra: impl IntoIterator<Item = usize>) -> Self {
        AbstractionMap::new(self.width(), self.visible.iter().copied().chain(extra))
    }

    /// `f` over abstract positions; `None` if it mentions a hidden atom.
    pub fn abstract_formula(&self, f: &Ctlk) -> Option<Ctlk> {
        f.map_atoms(&|v| self.abstract_var(v))
    }
}

/// Φ̃ = atoms(φ) ∪ atoms(ι).
pub fn initial_abstraction(sys: &System, phi: &Ctlk, iota: Option<&Expr>) -> AbstractionMap {
    let mut vis = phi.atoms();
    if let Some(i) = iota {
        vis.extend(i.support());
    }
    AbstractionMap::new(sys.width(), vis)
}

/// ∃H.ℓ: hidden variables removed by cofactor disjunction.
pub fn exists_quantify(guard: &Expr, hidden: &BTreeSet<usize>) -> Expr {
    guard.exists(hidden).simplify()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractAction {
    /// Member concrete actions, ascending.
    pub members: Vec<usize>,
    /// ε̃ over abstract positions.
    pub effect: Vec<(usize, bool)>,
    /// ℓ̃ = ∃(Φ∖Φ̃).ℓ over abstract positions.
    pub guard: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum GuardKey {
    Table(Vec<usize>, Vec<u64>),
    /// Index of the first bucket member, for guards too wide to tabulate.
    Wide(Vec<usize>, usize),
}

/// Partitions the actions by performer, visible effect and the semantic
/// class of the quantified guard. Classes are ordered by first member.
pub fn classify_actions(sys: &System, map: &AbstractionMap) -> Vec<AbstractAction> {
    let hidden = map.hidden();
    let mut out: Vec<AbstractAction> = Vec::new();
    let mut keys: HashMap<(Owner, Vec<(usize, bool)>, GuardKey), usize> = HashMap::new();
    // Wide guards seen so far per (performer, effect, support): (class, guard).
    let mut wide: HashMap<(Owner, Vec<(usize, bool)>, Vec<usize>), Vec<(usize, Expr)>> =
        HashMap::new();
    for (i, a) in sys.actions.iter().enumerate() {
        let effect: Vec<(usize, bool)> = a
            .effect
            .iter()
            .filter_map(|&(v, b)| map.abstract_var(v).map(|k| (k, b)))
            .collect();
        let q = exists_quantify(&a.guard, &hidden).map_vars(&|v| map.abstract_var(v).expect("quantified guard is visible"));
        let support: Vec<usize> = q.essential_support().into_iter().collect();
        let gk = if support.len() <= TRUTH_TABLE_LIMIT {
            GuardKey::Table(support.clone(), q.truth_table(&support))
        } else {
            let bucket = wide.entry((a.performer, effect.clone(), support.clone())).or_default();
            match bucket.iter().find(|(_, g)| g.equivalent(&q)) {
                Some(&(c, _)) => GuardKey::Wide(support, c),
                None => {
                    bucket.push((i, q.clone()));
                    GuardKey::Wide(support, i)
                }
            }
        };
        match keys.get(&(a.performer, effect.clone(), gk.clone())) {
            Some(&c) => out[c].members.push(i),
            None => {
                keys.insert((a.performer, effect.clone(), gk), out.len());
                out.push(AbstractAction {
                    members: vec![i],
                    effect,
                    guard: q,
                });
            }
        }
    }
    out
}

/// Ĩ together with h_A.
#[derive(Debug, Clone)]
pub struct AbstractSystem {
    pub map: AbstractionMap,
    pub system: System,
    pub classes: Vec<AbstractAction>,
    /// h_A: concrete action → abstract action.
    pub class_of: Vec<usize>,
}

impl AbstractSystem {
    pub fn members(&self, abstract_action: usize) -> &[usize] {
        &self.classes[abstract_action].members
    }
}

fn class_id(sys: &System, members: &[usize]) -> String {
    let ids: Vec<&str> = members.iter().map(|&m| sys.actions[m].id.as_str()).collect();
    if ids.len() <= 3 {
        ids.join("|")
    } else {
        format!("{}|...(+{})", ids[0], ids.len() - 1)
    }
}

/// Builds Ĩ: visible propositions, classified actions with evolution
/// ε̃ ← ℓ̃, and S̃_0 = h(S_0).
pub fn abstract_is(sys: &System, map: &AbstractionMap) -> Result<AbstractSystem> {
    if map.width() != sys.width() {
        return Err(Error::Internal("abstraction map of the wrong width".into()));
    }
    let props: Vec<Prop> = map.visible().iter().map(|&v| sys.props[v].clone()).collect();
    let classes = classify_actions(sys, map);
    let mut class_of = vec![0; sys.actions.len()];
    let mut actions = Vec::with_capacity(classes.len());
    for (c, cls) in classes.iter().enumerate() {
        for &m in &cls.members {
            class_of[m] = c;
        }
        actions.push(Action {
            id: class_id(sys, &cls.members),
            performer: sys.actions[cls.members[0]].performer,
            effect: cls.effect.clone(),
            guard: cls.guard.clone(),
        });
    }
    let init: Vec<State> = sys.init.iter().map(|s| map.h(s)).collect();
    let system = System::new(sys.agents.clone(), props, actions, init)?;
    Ok(AbstractSystem {
        map: map.clone(),
        system,
        classes,
        class_of,
    })
}

/// A violated clause of the simulation definition, with the states involved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationFailure {
    /// 1: initial cover, 2: visible agreement, 3: temporal, 4: epistemic.
    pub clause: u8,
    pub states: Vec<State>,
    pub detail: String,
}

impl fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "simulation clause {} violated: {}", self.clause, self.detail)
    }
}

/// Checks that H = {(s, h(s)) : s ∈ G} is a simulation of the concrete
/// system by the abstract one, clause by clause, over both reachable parts.
pub fn simulation_check(
    sys: &System,
    reach: &Reachability,
    abs: &AbstractSystem,
    abs_reach: &Reachability,
) -> std::result::Result<(), SimulationFailure> {
    let map = &abs.map;
    let asys = &abs.system;
    let fail = |clause, states, detail: String| Err(SimulationFailure { clause, states, detail });

    for s in &sys.init {
        let t = map.h(s);
        if asys.init.binary_search(&t).is_err() {
            return fail(1, vec![s.clone()], format!("h({}) is not initial", sys.describe_state(s)));
        }
    }
    for (sid, outs) in reach.succ.iter().enumerate() {
        for &(a, tid) in outs {
            let (s, t) = (&reach.states[sid], &reach.states[tid]);
            if asys.apply(abs.class_of[a], &map.h(s)).as_ref() != Some(&map.h(t)) {
                return fail(
                    3,
                    vec![s.clone(), t.clone()],
                    format!(
                        "{} --{}--> {} has no abstract counterpart",
                        sys.describe_state(s),
                        sys.actions[a].id,
                        sys.describe_state(t)
                    ),
                );
            }
        }
    }
    let mut image = Vec::with_capacity(reach.len());
    for s in &reach.states {
        let t = map.h(s);
        let Some(tid) = abs_reach.id(&t) else {
            return fail(2, vec![s.clone()], format!("h({}) is not reachable", sys.describe_state(s)));
        };
        for (k, &v) in map.visible().iter().enumerate() {
            if asys.props[k].name != sys.props[v].name || t.get(k) != s.get(v) {
                return fail(2, vec![s.clone(), t], format!("disagreement on {}", sys.props[v].name));
            }
        }
        image.push(tid);
    }
    for agent in 0..sys.num_agents() {
        for class in &reach.classes[agent] {
            let first = image[class[0]];
            for &s in &class[1..] {
                if abs_reach.class_of[agent][image[s]] != abs_reach.class_of[agent][first] {
                    return fail(
                        4,
                        vec![reach.states[class[0]].clone(), reach.states[s].clone()],
                        format!("indistinguishable for {} but not after abstraction", sys.agents[agent]),
                    );
                }
            }
        }
    }
    Ok(())
}

/// Sizes before and after abstraction, for logs.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct AbstractionReport {
    pub visible: Vec<String>,
    pub hidden: usize,
    pub concrete_actions: usize,
    pub abstract_actions: usize,
    pub abstract_states: usize,
}

impl AbstractionReport {
    pub fn new(sys: &System, abs: &AbstractSystem, abs_reach: &Reachability) -> Self {
        AbstractionReport {
            visible: abs.map.visible().iter().map(|&v| sys.props[v].name.clone()).collect(),
            hidden: sys.width() - abs.map.visible().len(),
            concrete_actions: sys.actions.len(),
            abstract_actions: abs.classes.len(),
            abstract_states: abs_reach.len(),
        }
    }
}

impl fmt::Display for AbstractionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "visible {} ({} hidden): {}; actions {} -> {}; abstract states {}",
            self.visible.len(),
            self.hidden,
            self.visible.join(" "),
            self.concrete_actions,
            self.abstract_actions,
            self.abstract_states
        )
    }
}
