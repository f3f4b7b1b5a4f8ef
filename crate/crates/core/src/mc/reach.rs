//! Reachable states, transition maps and the per-agent partitions of G.

use crate::bits::State;
use crate::error::{Error, Result};
use crate::system::System;
use std::collections::{HashMap, VecDeque};

/// Explicit reachable fragment. States are numbered in discovery order;
/// initial states come first.
#[derive(Debug, Clone)]
pub struct Reachability {
    pub states: Vec<State>,
    index: HashMap<State, usize>,
    /// Non-Λ successors as (action, target), in action-id order.
    pub succ: Vec<Vec<(usize, usize)>>,
    pub pred: Vec<Vec<(usize, usize)>>,
    /// BFS parent from S_0: (predecessor, action).
    pub parent: Vec<Option<(usize, usize)>>,
    pub depth: Vec<usize>,
    pub num_init: usize,
    /// Per agent: state → class id, and the classes themselves.
    pub class_of: Vec<Vec<usize>>,
    pub classes: Vec<Vec<Vec<usize>>>,
    /// Action indices sorted by id.
    pub action_order: Vec<usize>,
}

impl Reachability {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn id(&self, s: &State) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn is_init(&self, id: usize) -> bool {
        id < self.num_init
    }

    /// States sharing agent `agent`'s local state with `id` (including itself).
    pub fn indistinguishable(&self, agent: usize, id: usize) -> &[usize] {
        &self.classes[agent][self.class_of[agent][id]]
    }

    /// Shortest path from S_0 to `id`: states and the actions between them.
    pub fn witness(&self, id: usize) -> (Vec<usize>, Vec<usize>) {
        let mut states = vec![id];
        let mut actions = Vec::new();
        let mut cur = id;
        while let Some((p, a)) = self.parent[cur] {
            states.push(p);
            actions.push(a);
            cur = p;
        }
        states.reverse();
        actions.reverse();
        (states, actions)
    }
}

pub fn action_order(sys: &System) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sys.actions.len()).collect();
    order.sort_by(|&a, &b| sys.actions[a].id.cmp(&sys.actions[b].id).then(a.cmp(&b)));
    order
}

/// Breadth-first closure of S_0 under the transition relation. Fails once
/// more than `max_states` states are found.
pub fn reachable(sys: &System, max_states: usize) -> Result<Reachability> {
    let order = action_order(sys);
    let mut states: Vec<State> = Vec::new();
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut parent = Vec::new();
    let mut depth = Vec::new();
    let mut succ: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut queue = VecDeque::new();
    let overflow = || Error::Capacity(format!("more than {max_states} reachable states"));

    for s in &sys.init {
        if index.contains_key(s) {
            continue;
        }
        if states.len() >= max_states {
            return Err(overflow());
        }
        index.insert(s.clone(), states.len());
        queue.push_back(states.len());
        states.push(s.clone());
        parent.push(None);
        depth.push(0);
    }
    let num_init = states.len();
    while let Some(id) = queue.pop_front() {
        let mut out = Vec::new();
        for &a in &order {
            let Some(t) = sys.apply(a, &states[id]) else { continue };
            let tid = match index.get(&t) {
                Some(&tid) => tid,
                None => {
                    if states.len() >= max_states {
                        return Err(overflow());
                    }
                    let tid = states.len();
                    index.insert(t.clone(), tid);
                    states.push(t);
                    parent.push(Some((id, a)));
                    depth.push(depth[id] + 1);
                    queue.push_back(tid);
                    tid
                }
            };
            out.push((a, tid));
        }
        if succ.len() <= id {
            succ.resize(id + 1, Vec::new());
        }
        succ[id] = out;
    }
    succ.resize(states.len(), Vec::new());
    let mut pred = vec![Vec::new(); states.len()];
    for (s, outs) in succ.iter().enumerate() {
        for &(a, t) in outs {
            pred[t].push((a, s));
        }
    }

    let mut class_of = Vec::with_capacity(sys.num_agents());
    let mut classes = Vec::with_capacity(sys.num_agents());
    for agent in 0..sys.num_agents() {
        let mut ids: HashMap<State, usize> = HashMap::new();
        let mut cls: Vec<Vec<usize>> = Vec::new();
        let mut of = Vec::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            let l = sys.local_state(s, agent);
            let c = *ids.entry(l).or_insert_with(|| {
                cls.push(Vec::new());
                cls.len() - 1
            });
            cls[c].push(i);
            of.push(c);
        }
        class_of.push(of);
        classes.push(cls);
    }

    Ok(Reachability {
        states,
        index,
        succ,
        pred,
        parent,
        depth,
        num_init,
        class_of,
        classes,
        action_order: order,
    })
}
