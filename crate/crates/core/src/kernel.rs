//! Derived interpreted system of a grounded policy, and the symbolic
//! transition functions Θ and Θ⁻¹.
//!
//! Bit layout over Φ for `n` policy atoms and `k` agents: atoms occupy
//! `[0, n)`, agent `i` owns `[n + 2n·i, n + 2n·(i+1))` with its `p_loc` copies
//! first and its `p_read` flags second.

use crate::bits::State;
use crate::error::{Error, Result};
use crate::expr::{all_models, Expr};
use crate::policy::{GroundRead, Policy};
use crate::system::{Action, Owner, Prop, System};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropKind {
    Env(usize),
    Loc(usize, usize),
    Read(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Universe {
    pub atoms: usize,
    pub agents: usize,
}

impl Universe {
    pub fn width(&self) -> usize {
        self.atoms * (1 + 2 * self.agents)
    }

    pub fn loc(&self, agent: usize, p: usize) -> usize {
        self.atoms + 2 * self.atoms * agent + p
    }

    pub fn read(&self, agent: usize, p: usize) -> usize {
        self.atoms + 2 * self.atoms * agent + self.atoms + p
    }

    pub fn kind(&self, v: usize) -> PropKind {
        let n = self.atoms;
        if v < n {
            return PropKind::Env(v);
        }
        let off = v - n;
        let (i, r) = (off / (2 * n), off % (2 * n));
        if r < n {
            PropKind::Loc(i, r)
        } else {
            PropKind::Read(i, r - n)
        }
    }

    pub fn owner(&self, v: usize) -> Owner {
        match self.kind(v) {
            PropKind::Env(_) => Owner::Env,
            PropKind::Loc(i, _) | PropKind::Read(i, _) => Owner::Agent(i),
        }
    }

    /// `reviewer(p1,a2)`, `loc[a1](reviewer(p1,a2))`, `read[a1](reviewer(p1,a2))`.
    pub fn names(&self, atom_names: &[String], agents: &[String]) -> Vec<String> {
        (0..self.width())
            .map(|v| match self.kind(v) {
                PropKind::Env(p) => atom_names[p].clone(),
                PropKind::Loc(i, p) => format!("loc[{}]({})", agents[i], atom_names[p]),
                PropKind::Read(i, p) => format!("read[{}]({})", agents[i], atom_names[p]),
            })
            .collect()
    }
}

pub fn universe(policy: &Policy) -> Universe {
    Universe {
        atoms: policy.num_atoms(),
        agents: policy.agents.len(),
    }
}

/// Value of a local copy when its read flag is down in an initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalInit {
    /// Any value.
    #[default]
    Free,
    /// False.
    Cleared,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub local_init: LocalInit,
    pub max_actions: usize,
    pub max_init_states: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            local_init: LocalInit::Free,
            max_actions: 100_000,
            max_init_states: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub ground_actions: usize,
    pub static_atoms: usize,
    pub disabled_actions: usize,
    pub derived_actions: usize,
    pub initial_states: usize,
    pub warnings: Vec<String>,
}

/// Read guard ℓ_r per (agent, atom): the disjunction of matching rules, ⊥ if none.
pub fn read_guards(reads: &[GroundRead], universe: Universe) -> Vec<Vec<Expr>> {
    let mut out = vec![vec![Vec::new(); universe.atoms]; universe.agents];
    for r in reads {
        out[r.agent][r.target].push(r.guard.clone());
    }
    out.into_iter()
        .map(|row| row.into_iter().map(Expr::or_all).collect())
        .collect()
}

/// Splits every action so that each agent's local copies and
/// read flags follow the read permissions in the successor state.
/// Unsatisfiable splits are dropped.
pub fn inc_knowledge(
    actions: Vec<Action>,
    read_guards: &[Vec<Expr>],
    universe: Universe,
    max_actions: usize,
) -> Result<Vec<Action>> {
    let mut current = actions;
    for (i, row) in read_guards.iter().enumerate() {
        for (p, lr) in row.iter().enumerate() {
            let lr_support = lr.support();
            let loc = universe.loc(i, p);
            let read = universe.read(i, p);
            let mut next = Vec::with_capacity(current.len());
            for a in current {
                let touches_p = a.writes(p);
                if touches_p.is_none() && !lr_support.iter().any(|&q| a.writes(q).is_some()) {
                    next.push(a);
                    continue;
                }
                let lr_next = lr.substitute(&|v| a.writes(v));
                let mut variants: Vec<(Vec<(usize, bool)>, Expr)> = Vec::new();
                match touches_p {
                    Some(sign) => {
                        variants.push((vec![(loc, sign), (read, true)], lr_next.clone()));
                        variants.push((vec![(read, false)], Expr::not(lr_next)));
                    }
                    None => {
                        variants.push((
                            vec![(loc, true), (read, true)],
                            Expr::and(lr_next.clone(), Expr::var(p)),
                        ));
                        variants.push((
                            vec![(loc, false), (read, true)],
                            Expr::and(lr_next.clone(), Expr::not(Expr::var(p))),
                        ));
                        variants.push((vec![(read, false)], Expr::not(lr_next)));
                    }
                }
                for (k, (extra, cond)) in variants.into_iter().enumerate() {
                    let guard = Expr::and(a.guard.clone(), cond);
                    if !guard.is_satisfiable() {
                        continue;
                    }
                    let mut effect = a.effect.clone();
                    effect.extend(extra);
                    effect.sort();
                    next.push(Action {
                        id: format!("{}.{}", a.id, k + 1),
                        performer: a.performer,
                        effect,
                        guard,
                    });
                }
                if next.len() > max_actions {
                    return Err(Error::Capacity(format!(
                        "read-permission splitting exceeds {max_actions} actions"
                    )));
                }
            }
            current = next;
        }
    }
    Ok(current)
}

/// Builds the interpreted system derived from `policy` with initial
/// condition `iota` (a formula over Φ).
///
/// S_0 holds the states satisfying `iota`, the policy's `init:` section and,
/// when that section exists, falsity of every policy atom mentioned by
/// neither. Read flags not fixed by `iota` start at the value of their read
/// guard; local copies agree with readable atoms and follow `local_init`
/// otherwise. Atoms that no action writes and that are constant over S_0 are
/// substituted into guards before splitting.
pub fn build_is(policy: &Policy, iota: &Expr, opts: BuildOptions) -> Result<(System, BuildReport)> {
    let u = universe(policy);
    let n = u.atoms;
    let mut report = BuildReport {
        ground_actions: policy.actions.len(),
        ..Default::default()
    };

    let mut cond = iota.clone();
    if let Some(init) = &policy.init {
        cond = Expr::and(cond, init.clone());
        let mentioned = cond.support();
        let closed = (0..n).filter(|p| !mentioned.contains(p)).map(|p| Expr::lit(p, false));
        cond = Expr::and(cond, Expr::and_all(closed.collect::<Vec<_>>()));
    }
    let support: Vec<usize> = cond.support().into_iter().collect();
    let fixed_models = all_models(&cond, &support, opts.max_init_states).ok_or_else(|| {
        Error::Capacity(format!("more than {} initial states", opts.max_init_states))
    })?;
    let free_env: Vec<usize> = (0..n).filter(|p| support.binary_search(p).is_err()).collect();

    // Environment valuations of S_0, with any local bits fixed by iota.
    let mut seeds: Vec<(State, Vec<Option<bool>>)> = Vec::new();
    for m in &fixed_models {
        let mut s = State::zeros(u.width());
        let mut fixed_local = vec![None; u.width()];
        for (&v, &b) in support.iter().zip(m) {
            s.set(v, b);
            if v >= n {
                fixed_local[v] = Some(b);
            }
        }
        if free_env.len() >= 63 || (seeds.len() as u128) << free_env.len() > opts.max_init_states as u128 {
            return Err(Error::Capacity(format!("more than {} initial states", opts.max_init_states)));
        }
        for k in 0u64..1 << free_env.len() {
            let mut t = s.clone();
            for (j, &p) in free_env.iter().enumerate() {
                t.set(p, k >> j & 1 == 1);
            }
            seeds.push((t, fixed_local.clone()));
        }
    }
    if seeds.is_empty() {
        report
            .warnings
            .push("the initial condition is unsatisfiable; every property holds vacuously".into());
    }

    // Static atoms: never written and constant across S_0.
    let written: BTreeSet<usize> = policy.actions.iter().flat_map(|a| a.effect.iter().map(|e| e.0)).collect();
    let mut statics: HashMap<usize, bool> = HashMap::new();
    if let Some((first, _)) = seeds.first() {
        for p in (0..n).filter(|p| !written.contains(p)) {
            let b = first.get(p);
            if seeds.iter().all(|(s, _)| s.get(p) == b) {
                statics.insert(p, b);
            }
        }
    }
    report.static_atoms = statics.len();
    let fold = |e: &Expr| e.substitute(&|v| statics.get(&v).copied());

    let mut actions = Vec::new();
    for a in &policy.actions {
        let guard = fold(&a.guard);
        if !guard.is_satisfiable() {
            report.disabled_actions += 1;
            continue;
        }
        actions.push(Action {
            id: a.id.clone(),
            performer: Owner::Agent(a.agent),
            effect: a.effect.clone(),
            guard,
        });
    }
    let raw_guards = read_guards(&policy.reads, u);
    let guards: Vec<Vec<Expr>> = raw_guards.iter().map(|row| row.iter().map(fold).collect()).collect();
    let actions = inc_knowledge(actions, &guards, u, opts.max_actions)?;
    report.derived_actions = actions.len();

    let mut init = Vec::new();
    for (env, fixed) in &seeds {
        let mut partial = env.clone();
        let mut open = Vec::new();
        let mut consistent = true;
        for (i, row) in raw_guards.iter().enumerate() {
            for (p, lr) in row.iter().enumerate() {
                let (loc, read) = (u.loc(i, p), u.read(i, p));
                let r = fixed[read].unwrap_or_else(|| lr.eval_state(env));
                partial.set(read, r);
                match fixed[loc] {
                    Some(l) => {
                        if r && l != env.get(p) {
                            consistent = false;
                        }
                        partial.set(loc, l);
                    }
                    None if r => partial.set(loc, env.get(p)),
                    None => match opts.local_init {
                        LocalInit::Cleared => partial.set(loc, false),
                        LocalInit::Free => open.push(loc),
                    },
                }
            }
        }
        if !consistent || !iota.eval_state(&partial) && open.is_empty() {
            continue;
        }
        if open.len() >= 63 || init.len() as u128 + (1u128 << open.len()) > opts.max_init_states as u128 {
            return Err(Error::Capacity(format!("more than {} initial states", opts.max_init_states)));
        }
        for k in 0u64..1 << open.len() {
            let mut s = partial.clone();
            for (j, &v) in open.iter().enumerate() {
                s.set(v, k >> j & 1 == 1);
            }
            if iota.eval_state(&s) {
                init.push(s);
            }
        }
    }
    report.initial_states = init.len();
    if init.is_empty() && !seeds.is_empty() {
        report
            .warnings
            .push("no initial state survives the read-permission closure".into());
    }

    let names = u.names(&policy.atom_names, &policy.agents);
    let props = names
        .into_iter()
        .enumerate()
        .map(|(v, name)| Prop { name, owner: u.owner(v) })
        .collect();
    let sys = System::new(policy.agents.clone(), props, actions, init)?;
    Ok((sys, report))
}

/// Θ_α(st).
pub fn theta(sys: &System, action: usize, st: &BTreeSet<State>) -> BTreeSet<State> {
    st.iter().filter_map(|s| sys.apply(action, s)).collect()
}

/// Θ⁻¹_α(st), enumerating only the bits the effect overwrites. Fails when
/// more than `cap` candidate predecessors would be produced.
pub fn theta_inverse(sys: &System, action: usize, st: &BTreeSet<State>, cap: usize) -> Result<BTreeSet<State>> {
    let a = &sys.actions[action];
    let bits: Vec<usize> = a.effect.iter().map(|e| e.0).collect();
    let mut out = BTreeSet::new();
    for t in st {
        if a.effect.iter().any(|&(v, b)| t.get(v) != b) {
            continue;
        }
        let guard = a.guard.substitute(&|v| (bits.binary_search(&v).is_err()).then(|| t.get(v)));
        let sup: Vec<usize> = guard.support().into_iter().collect();
        let free: Vec<usize> = bits.iter().copied().filter(|v| sup.binary_search(v).is_err()).collect();
        let Some(models) = all_models(&guard, &sup, cap) else {
            return Err(Error::Capacity("too many predecessors".into()));
        };
        if free.len() >= 63 || models.len() as u128 * (1u128 << free.len()) + out.len() as u128 > cap as u128 {
            return Err(Error::Capacity("too many predecessors".into()));
        }
        for m in &models {
            let mut s = t.clone();
            for (&v, &b) in sup.iter().zip(m) {
                s.set(v, b);
            }
            for k in 0u64..1 << free.len() {
                let mut s2 = s.clone();
                for (j, &v) in free.iter().enumerate() {
                    s2.set(v, k >> j & 1 == 1);
                }
                out.insert(s2);
            }
        }
    }
    Ok(out)
}

/// Θ⁻¹_α(st) ∩ within, without enumerating predecessors.
pub fn theta_inverse_within(
    sys: &System,
    action: usize,
    st: &BTreeSet<State>,
    within: &BTreeSet<State>,
) -> BTreeSet<State> {
    within
        .iter()
        .filter(|s| sys.apply(action, s).is_some_and(|t| st.contains(&t)))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{ground, parse_policy, GroundLimits};

    fn policy(src: &str) -> Policy {
        ground(parse_policy(src).unwrap(), GroundLimits::default()).unwrap()
    }

    #[test]
    fn layout_round_trips() {
        let u = Universe { atoms: 3, agents: 2 };
        assert_eq!(u.width(), 15);
        for v in 0..u.width() {
            let back = match u.kind(v) {
                PropKind::Env(p) => p,
                PropKind::Loc(i, p) => u.loc(i, p),
                PropKind::Read(i, p) => u.read(i, p),
            };
            assert_eq!(back, v);
        }
    }

    #[test]
    fn constant_read_guard_splits_in_two() {
        let pol = policy("predicates:\n  p/0\nagents:\n  a\nactions:\n  set(x): {+p} <- true\nreads:\n  see(x): p <- true\n");
        let u = universe(&pol);
        let acts = vec![Action {
            id: "set(a)".into(),
            performer: Owner::Agent(0),
            effect: pol.actions[0].effect.clone(),
            guard: pol.actions[0].guard.clone(),
        }];
        let out = inc_knowledge(acts, &read_guards(&pol.reads, u), u, 100).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].effect, vec![(0, true), (u.loc(0, 0), true), (u.read(0, 0), true)]);
    }

    #[test]
    fn untouched_action_passes_through() {
        let pol = policy(
            "predicates:\n  p/0, q/0, r/0\nagents:\n  a\nactions:\n  set(x): {+q} <- true\nreads:\n  see(x): p <- r\n",
        );
        let u = universe(&pol);
        let guards = read_guards(&pol.reads, u);
        let act = Action {
            id: "set(a)".into(),
            performer: Owner::Agent(0),
            effect: pol.actions[0].effect.clone(),
            guard: Expr::Const(true),
        };
        let out = inc_knowledge(vec![act.clone()], &guards[..], u, 100).unwrap();
        let q = pol.atom_by_name("q").unwrap();
        // p is untouched and r is not written, so only the q-splits apply
        // (q has no read rule: a single read-flag-lowering variant).
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].effect, vec![(q, true), (u.read(0, q), false)]);
    }

    #[test]
    fn empty_initial_condition_warns() {
        let pol = policy("predicates:\n  p/0\nagents:\n  a\n");
        let (sys, rep) = build_is(&pol, &Expr::Const(false), BuildOptions::default()).unwrap();
        assert!(sys.init.is_empty());
        assert!(!rep.warnings.is_empty());
    }

    #[test]
    fn initial_closure_matches_read_guards() {
        let pol = policy("predicates:\n  p/0, q/0\nagents:\n  a\nreads:\n  see(x): p <- q\n");
        let (sys, _) = build_is(&pol, &Expr::Const(true), BuildOptions::default()).unwrap();
        let u = universe(&pol);
        let (p, q) = (pol.atom_by_name("p").unwrap(), pol.atom_by_name("q").unwrap());
        for s in &sys.init {
            assert_eq!(s.get(u.read(0, p)), s.get(q));
            if s.get(u.read(0, p)) {
                assert_eq!(s.get(u.loc(0, p)), s.get(p));
            }
            assert!(!s.get(u.read(0, q)));
        }
        // 4 env valuations; unreadable copies are free: 2 copies when q is
        // false, 1 when q is true.
        assert_eq!(sys.init.len(), 2 * 4 + 2 * 2);
    }

    #[test]
    fn theta_inverse_matches_definition() {
        let pol = policy("predicates:\n  p/0, q/0\nagents:\n  a\nactions:\n  go(x): {+p, -q} <- q\n");
        let (sys, _) = build_is(&pol, &Expr::Const(true), BuildOptions::default()).unwrap();
        let all: BTreeSet<State> = (0..1u64 << sys.width()).map(|k| State::from_u64(sys.width(), k)).collect();
        for a in 0..sys.actions.len() {
            for t in &all {
                let st: BTreeSet<State> = [t.clone()].into();
                let pre = theta_inverse(&sys, a, &st, 1 << 16).unwrap();
                let expected: BTreeSet<State> = all.iter().filter(|s| sys.apply(a, s).as_ref() == Some(t)).cloned().collect();
                assert_eq!(pre, expected);
                assert_eq!(theta_inverse_within(&sys, a, &st, &all), expected);
            }
        }
    }
}
