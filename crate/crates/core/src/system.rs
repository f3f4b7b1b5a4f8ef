//! Interpreted systems with guarded, deterministic, asynchronous actions.

use crate::bits::State;
use crate::error::{semantic, Result};
use crate::expr::Expr;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Owner {
    Env,
    Agent(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prop {
    pub name: String,
    pub owner: Owner,
}

/// `id: effect <- guard`, performed by `performer`.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub id: String,
    pub performer: Owner,
    /// Signed bit positions, sorted and without repeats.
    pub effect: Vec<(usize, bool)>,
    pub guard: Expr,
}

impl Action {
    pub fn enabled(&self, s: &State) -> bool {
        self.guard.eval_state(s)
    }

    /// The effect update, ignoring the guard.
    pub fn update(&self, s: &State) -> State {
        let mut t = s.clone();
        for &(v, b) in &self.effect {
            t.set(v, b);
        }
        t
    }

    pub fn writes(&self, v: usize) -> Option<bool> {
        self.effect
            .binary_search_by_key(&v, |e| e.0)
            .ok()
            .map(|i| self.effect[i].1)
    }
}

#[derive(Debug, Clone)]
pub struct System {
    pub agents: Vec<String>,
    pub props: Vec<Prop>,
    pub actions: Vec<Action>,
    /// S_0, sorted.
    pub init: Vec<State>,
    local: Vec<Vec<usize>>,
    prop_index: HashMap<String, usize>,
}

impl System {
    pub fn new(agents: Vec<String>, props: Vec<Prop>, mut actions: Vec<Action>, init: Vec<State>) -> Result<System> {
        let width = props.len();
        let mut prop_index = HashMap::new();
        for (i, p) in props.iter().enumerate() {
            if prop_index.insert(p.name.clone(), i).is_some() {
                return Err(semantic(format!("duplicate proposition '{}'", p.name)));
            }
            if let Owner::Agent(a) = p.owner {
                if a >= agents.len() {
                    return Err(semantic(format!("proposition '{}' owned by unknown agent", p.name)));
                }
            }
        }
        let mut local = vec![Vec::new(); agents.len()];
        for (i, p) in props.iter().enumerate() {
            if let Owner::Agent(a) = p.owner {
                local[a].push(i);
            }
        }
        for a in &mut actions {
            a.effect.sort();
            for w in a.effect.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(semantic(format!("action '{}' writes bit {} twice", a.id, w[0].0)));
                }
            }
            if a.effect.iter().any(|&(v, _)| v >= width) || a.guard.support().iter().any(|&v| v >= width) {
                return Err(semantic(format!("action '{}' refers to an unknown proposition", a.id)));
            }
            if let Owner::Agent(i) = a.performer {
                if i >= agents.len() {
                    return Err(semantic(format!("action '{}' performed by unknown agent", a.id)));
                }
            }
        }
        let init: BTreeSet<State> = init.into_iter().collect();
        if init.iter().any(|s| s.width() != width) {
            return Err(semantic("initial state of the wrong width"));
        }
        Ok(System {
            agents,
            props,
            actions,
            init: init.into_iter().collect(),
            local,
            prop_index,
        })
    }

    pub fn width(&self) -> usize {
        self.props.len()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn prop(&self, name: &str) -> Option<usize> {
        self.prop_index.get(name).copied()
    }

    pub fn agent(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a == name)
    }

    pub fn prop_name(&self, v: usize) -> &str {
        &self.props[v].name
    }

    /// Bit positions of Φ_i, ascending.
    pub fn local_bits(&self, agent: usize) -> &[usize] {
        &self.local[agent]
    }

    pub fn local_state(&self, s: &State, agent: usize) -> State {
        s.project(&self.local[agent])
    }

    /// τ(α, s): defined iff the guard holds.
    pub fn apply(&self, action: usize, s: &State) -> Option<State> {
        let a = &self.actions[action];
        a.enabled(s).then(|| a.update(s))
    }

    /// Non-Λ successors in action order.
    pub fn successors<'a>(&'a self, s: &'a State) -> impl Iterator<Item = (usize, State)> + 'a {
        (0..self.actions.len()).filter_map(move |a| self.apply(a, s).map(|t| (a, t)))
    }

    pub fn owner_name(&self, o: Owner) -> &str {
        match o {
            Owner::Env => "e",
            Owner::Agent(i) => &self.agents[i],
        }
    }

    /// Names of the true propositions, for messages and dumps.
    pub fn describe_state(&self, s: &State) -> String {
        let names: Vec<&str> = s.ones().map(|v| self.prop_name(v)).collect();
        format!("{{{}}}", names.join(", "))
    }

    pub fn prop_names(&self) -> impl Fn(usize) -> String + '_ {
        move |v| self.props[v].name.clone()
    }
}
