//! Instantiation of rule templates over the finite object set.

use super::ast::*;
use crate::error::{semantic, Error, Result};
use crate::expr::Expr;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub pred: usize,
    pub args: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundAction {
    pub id: String,
    /// Index into [`Policy::agents`].
    pub agent: usize,
    /// Signed atom ids, sorted by atom.
    pub effect: Vec<(usize, bool)>,
    pub guard: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundRead {
    pub id: String,
    pub agent: usize,
    pub target: usize,
    pub guard: Expr,
}

#[derive(Debug, Clone, Copy)]
pub struct GroundLimits {
    pub max_actions: usize,
    pub max_atoms: usize,
}

impl Default for GroundLimits {
    fn default() -> Self {
        GroundLimits {
            max_actions: 100_000,
            max_atoms: 1 << 14,
        }
    }
}

/// A grounded policy. Atom ids follow the order of (predicate name, argument
/// names) and double as environment bit positions in the derived system.
#[derive(Debug, Clone)]
pub struct Policy {
    pub source: PolicySource,
    pub atoms: Vec<GroundAtom>,
    pub atom_names: Vec<String>,
    pub agents: Vec<String>,
    pub actions: Vec<GroundAction>,
    pub reads: Vec<GroundRead>,
    pub init: Option<Expr>,
    pub macros: Vec<(String, Expr)>,
    atom_index: HashMap<GroundAtom, usize>,
}

impl Policy {
    pub fn atom_id(&self, a: &GroundAtom) -> Option<usize> {
        self.atom_index.get(a).copied()
    }

    pub fn atom_by_name(&self, name: &str) -> Option<usize> {
        self.atom_names.iter().position(|n| n == name)
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }
}

fn tuples(domain: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * domain.len());
        for t in &out {
            for &d in domain {
                let mut t2 = t.clone();
                t2.push(d);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

fn instance_count(agents: usize, objects: usize, params: usize) -> Option<usize> {
    let mut n = agents;
    for _ in 1..params {
        n = n.checked_mul(objects)?;
    }
    Some(n)
}

struct Grounder<'a> {
    src: &'a PolicySource,
    atom_index: &'a HashMap<GroundAtom, usize>,
    macros: Vec<Expr>,
}

type Env = Vec<(String, usize)>;

impl Grounder<'_> {
    fn atom(&self, a: &AtomTemplate, env: &Env) -> Result<usize> {
        let mut args = Vec::with_capacity(a.args.len());
        for t in &a.args {
            args.push(match t {
                Term::Obj(o) => *o,
                Term::Var(v) => env
                    .iter()
                    .rev()
                    .find(|(n, _)| n == v)
                    .map(|(_, o)| *o)
                    .ok_or_else(|| semantic(format!("unbound variable '{v}'")))?,
            });
        }
        let ga = GroundAtom { pred: a.pred, args };
        self.atom_index
            .get(&ga)
            .copied()
            .ok_or_else(|| Error::Internal("ground atom missing from the index".into()))
    }

    fn formula(&self, f: &Formula, env: &mut Env) -> Result<Expr> {
        Ok(match f {
            Formula::True => Expr::Const(true),
            Formula::False => Expr::Const(false),
            Formula::Atom(a) => Expr::var(self.atom(a, env)?),
            Formula::Macro(m) => self.macros[*m].clone(),
            Formula::Not(a) => Expr::not(self.formula(a, env)?),
            Formula::And(a, b) => Expr::and(self.formula(a, env)?, self.formula(b, env)?),
            Formula::Or(a, b) => Expr::or(self.formula(a, env)?, self.formula(b, env)?),
            Formula::Implies(a, b) => Expr::implies(self.formula(a, env)?, self.formula(b, env)?),
            Formula::Forall(v, a) | Formula::Exists(v, a) => {
                let mut parts = Vec::with_capacity(self.src.objects.len());
                for o in 0..self.src.objects.len() {
                    env.push((v.clone(), o));
                    let r = self.formula(a, env);
                    env.pop();
                    parts.push(r?);
                }
                if matches!(f, Formula::Forall(..)) {
                    Expr::and_all(parts)
                } else {
                    Expr::or_all(parts)
                }
            }
        })
    }

    fn effect(&self, effects: &[EffectTemplate], env: &mut Env) -> Result<Vec<(usize, bool)>> {
        // Later entries overwrite earlier ones, so the last quantification wins.
        let mut signs = BTreeMap::new();
        for e in effects {
            let all: Vec<usize> = (0..self.src.objects.len()).collect();
            for tuple in tuples(&all, e.binders.len()) {
                let mark = env.len();
                env.extend(e.binders.iter().cloned().zip(tuple));
                let id = self.atom(&e.atom, env);
                env.truncate(mark);
                signs.insert(id?, e.positive);
            }
        }
        Ok(signs.into_iter().collect())
    }
}

fn instance_id(rule: &str, src: &PolicySource, args: &[usize]) -> String {
    let names: Vec<&str> = args.iter().map(|&o| src.objects[o].as_str()).collect();
    format!("{rule}({})", names.join(","))
}

/// Grounds every rule: the first parameter ranges over Σ_Ag, the rest over Σ.
pub fn ground(src: PolicySource, limits: GroundLimits) -> Result<Policy> {
    if src.agents.is_empty() {
        return Err(semantic("the policy declares no agents"));
    }
    let n_obj = src.objects.len();

    let mut pred_order: Vec<usize> = (0..src.predicates.len()).collect();
    pred_order.sort_by(|&a, &b| src.predicates[a].name.cmp(&src.predicates[b].name));
    let mut obj_order: Vec<usize> = (0..n_obj).collect();
    obj_order.sort_by(|&a, &b| src.objects[a].cmp(&src.objects[b]));

    let mut total_atoms = 0usize;
    for d in &src.predicates {
        let c = (n_obj as u128).pow(d.arity as u32);
        total_atoms = total_atoms.saturating_add(c.min(usize::MAX as u128) as usize);
    }
    if total_atoms > limits.max_atoms {
        return Err(Error::Capacity(format!(
            "{total_atoms} ground atoms exceed the limit of {}",
            limits.max_atoms
        )));
    }

    let mut atoms = Vec::new();
    let mut atom_names = Vec::new();
    let mut atom_index = HashMap::new();
    for &p in &pred_order {
        let d = &src.predicates[p];
        for args in tuples(&obj_order, d.arity) {
            let name = if args.is_empty() {
                d.name.clone()
            } else {
                instance_id(&d.name, &src, &args)
            };
            let ga = GroundAtom { pred: p, args };
            atom_index.insert(ga.clone(), atoms.len());
            atoms.push(ga);
            atom_names.push(name);
        }
    }

    for (what, rules) in [
        ("actions", src.actions.iter().map(|r| r.params.len()).collect::<Vec<_>>()),
        ("read permissions", src.reads.iter().map(|r| r.params.len()).collect()),
    ] {
        let mut total = 0usize;
        for k in rules {
            total = instance_count(src.agents.len(), n_obj, k)
                .and_then(|c| total.checked_add(c))
                .unwrap_or(usize::MAX);
        }
        if total > limits.max_actions {
            return Err(Error::Capacity(format!(
                "grounding yields {total} {what}, over the limit of {}",
                limits.max_actions
            )));
        }
    }

    let mut g = Grounder {
        src: &src,
        atom_index: &atom_index,
        macros: Vec::new(),
    };
    let mut macros = Vec::new();
    for m in &src.macros {
        let e = g.formula(&m.body, &mut Vec::new())?;
        g.macros.push(e.clone());
        macros.push((m.name.clone(), e));
    }
    let init = match &src.init {
        None => None,
        Some(fs) => {
            let mut parts = Vec::new();
            for f in fs {
                parts.push(g.formula(f, &mut Vec::new())?);
            }
            Some(Expr::and_all(parts))
        }
    };

    let all: Vec<usize> = (0..n_obj).collect();
    let mut actions = Vec::new();
    for rule in &src.actions {
        for (ai, &agent_obj) in src.agents.iter().enumerate() {
            for rest in tuples(&all, rule.params.len() - 1) {
                let mut args = vec![agent_obj];
                args.extend(rest);
                let mut env: Env = rule.params.iter().cloned().zip(args.iter().copied()).collect();
                let effect = g.effect(&rule.effects, &mut env)?;
                let guard = g.formula(&rule.guard, &mut env)?;
                actions.push(GroundAction {
                    id: instance_id(&rule.id, &src, &args),
                    agent: ai,
                    effect,
                    guard,
                });
            }
        }
    }
    let mut reads = Vec::new();
    for rule in &src.reads {
        for (ai, &agent_obj) in src.agents.iter().enumerate() {
            for rest in tuples(&all, rule.params.len() - 1) {
                let mut args = vec![agent_obj];
                args.extend(rest);
                let mut env: Env = rule.params.iter().cloned().zip(args.iter().copied()).collect();
                let target = g.atom(&rule.target, &env)?;
                let guard = g.formula(&rule.guard, &mut env)?;
                reads.push(GroundRead {
                    id: instance_id(&rule.id, &src, &args),
                    agent: ai,
                    target,
                    guard,
                });
            }
        }
    }

    let agents = src.agent_names();
    Ok(Policy {
        atoms,
        atom_names,
        agents,
        actions,
        reads,
        init,
        macros,
        atom_index,
        source: src,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::parse_policy;

    fn grounded(src: &str) -> Policy {
        ground(parse_policy(src).unwrap(), GroundLimits::default()).unwrap()
    }

    #[test]
    fn counts_instances_with_agent_typed_first_parameter() {
        let p = grounded("predicates:\n  w/2\nobjects:\n  c\nagents:\n  a1 a2\nactions:\n  act(x,y): {+w(x,y)} <- true\n");
        assert_eq!(p.actions.len(), 2 * 3);
        assert!(p.actions.iter().all(|a| a.id.starts_with("act(a")));
    }

    #[test]
    fn atoms_are_ordered_by_predicate_then_arguments() {
        let p = grounded("predicates:\n  zz/0, b/1, a/1\nobjects:\n  y x\nagents:\n  ag\n");
        assert_eq!(p.atom_names, vec!["a(ag)", "a(x)", "a(y)", "b(ag)", "b(x)", "b(y)", "zz"]);
    }

    #[test]
    fn last_quantification_wins() {
        let p = grounded(
            "predicates:\n  w/2\nobjects:\n  c d\nagents:\n  ag\nactions:\n  act(x): {forall x2. +w(c,x2), forall y. -w(y,d)} <- true\n",
        );
        let wcd = p.atom_by_name("w(c,d)").unwrap();
        let wcc = p.atom_by_name("w(c,c)").unwrap();
        let eff = &p.actions[0].effect;
        assert!(eff.contains(&(wcd, false)));
        assert!(eff.contains(&(wcc, true)));
        let mut ids: Vec<usize> = eff.iter().map(|e| e.0).collect();
        ids.dedup();
        assert_eq!(ids.len(), eff.len());
    }

    #[test]
    fn guard_quantifier_expands_to_conjunction() {
        let p = grounded(
            "predicates:\n  author/2, reviewer/2\nobjects:\n  p\nagents:\n  a1 a2\nactions:\n  act(x): {} <- forall v. (author(p,v) -> ~reviewer(p,v))\n",
        );
        let g = &p.actions[0].guard;
        let Expr::And(parts) = g else { panic!("{g:?}") };
        assert_eq!(parts.len(), 3);
    }

    #[test]
    fn caps_are_enforced() {
        let src = parse_policy("predicates:\n  w/2\nobjects:\n  c\nagents:\n  a1 a2\nactions:\n  act(x,y,z): {} <- true\n").unwrap();
        let err = ground(src, GroundLimits { max_actions: 17, max_atoms: 100 }).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
        let src = parse_policy("predicates:\n  w/1\nobjects:\n  c\n").unwrap();
        assert!(matches!(ground(src, GroundLimits::default()), Err(Error::Semantic(_))));
    }
}
