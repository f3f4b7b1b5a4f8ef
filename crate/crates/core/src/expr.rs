//! Ground propositional formulas over numbered variables.
//!
//! Guards, read conditions, initial conditions and the state-set formulas used
//! during refinement all live here. Variables are plain indices whose meaning
//! depends on the surrounding system.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::bits::State;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(bool),
    Var(usize),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

/// A literal: variable and the polarity it asserts.
pub type Lit = (usize, bool);

/// A disjunction of literals, kept sorted and duplicate-free.
pub type Clause = BTreeSet<Lit>;

pub const TRUE: Expr = Expr::Const(true);
pub const FALSE: Expr = Expr::Const(false);

impl Expr {
    pub fn var(v: usize) -> Expr {
        Expr::Var(v)
    }

    pub fn lit(v: usize, positive: bool) -> Expr {
        if positive {
            Expr::Var(v)
        } else {
            Expr::Not(Box::new(Expr::Var(v)))
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        match e {
            Expr::Const(b) => Expr::Const(!b),
            Expr::Not(inner) => *inner,
            other => Expr::Not(Box::new(other)),
        }
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::and_all([a, b])
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::or_all([a, b])
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::or(Expr::not(a), b)
    }

    pub fn iff(a: Expr, b: Expr) -> Expr {
        Expr::and(
            Expr::implies(a.clone(), b.clone()),
            Expr::implies(b, a),
        )
    }

    /// Conjunction with constant folding, flattening and detection of
    /// complementary literals.
    pub fn and_all(items: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out: Vec<Expr> = Vec::new();
        let mut lits: BTreeMap<usize, bool> = BTreeMap::new();
        for e in items {
            match e {
                Expr::Const(true) => {}
                Expr::Const(false) => return FALSE,
                Expr::And(inner) => {
                    for i in inner {
                        if !push_junct(&mut out, &mut lits, i) {
                            return FALSE;
                        }
                    }
                }
                other => {
                    if !push_junct(&mut out, &mut lits, other) {
                        return FALSE;
                    }
                }
            }
        }
        match out.len() {
            0 => TRUE,
            1 => out.pop().unwrap(),
            _ => Expr::And(out),
        }
    }

    /// Disjunction with constant folding, flattening and detection of
    /// complementary literals.
    pub fn or_all(items: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out: Vec<Expr> = Vec::new();
        let mut lits: BTreeMap<usize, bool> = BTreeMap::new();
        for e in items {
            match e {
                Expr::Const(false) => {}
                Expr::Const(true) => return TRUE,
                Expr::Or(inner) => {
                    for i in inner {
                        if !push_junct(&mut out, &mut lits, i) {
                            return TRUE;
                        }
                    }
                }
                other => {
                    if !push_junct(&mut out, &mut lits, other) {
                        return TRUE;
                    }
                }
            }
        }
        match out.len() {
            0 => FALSE,
            1 => out.pop().unwrap(),
            _ => Expr::Or(out),
        }
    }

    /// Conjunction of literals.
    pub fn cube(lits: impl IntoIterator<Item = Lit>) -> Expr {
        Expr::and_all(lits.into_iter().map(|(v, b)| Expr::lit(v, b)))
    }

    pub fn clause(c: &Clause) -> Expr {
        Expr::or_all(c.iter().map(|&(v, b)| Expr::lit(v, b)))
    }

    pub fn as_literal(&self) -> Option<Lit> {
        match self {
            Expr::Var(v) => Some((*v, true)),
            Expr::Not(inner) => match **inner {
                Expr::Var(v) => Some((v, false)),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn eval(&self, val: &impl Fn(usize) -> bool) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Var(v) => val(*v),
            Expr::Not(e) => !e.eval(val),
            Expr::And(es) => es.iter().all(|e| e.eval(val)),
            Expr::Or(es) => es.iter().any(|e| e.eval(val)),
        }
    }

    /// Evaluation with variable `v` read from bit `v` of the state.
    pub fn eval_state(&self, s: &State) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Var(v) => s.get(*v),
            Expr::Not(e) => !e.eval_state(s),
            Expr::And(es) => es.iter().all(|e| e.eval_state(s)),
            Expr::Or(es) => es.iter().any(|e| e.eval_state(s)),
        }
    }

    pub fn support(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_support(&mut out);
        out
    }

    fn collect_support(&self, out: &mut BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Not(e) => e.collect_support(out),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.collect_support(out)),
        }
    }

    /// Partial evaluation: variables mapped to `Some(b)` are replaced by
    /// constants and the result is simplified.
    pub fn substitute(&self, f: &impl Fn(usize) -> Option<bool>) -> Expr {
        match self {
            Expr::Const(b) => Expr::Const(*b),
            Expr::Var(v) => match f(*v) {
                Some(b) => Expr::Const(b),
                None => Expr::Var(*v),
            },
            Expr::Not(e) => Expr::not(e.substitute(f)),
            Expr::And(es) => Expr::and_all(es.iter().map(|e| e.substitute(f))),
            Expr::Or(es) => Expr::or_all(es.iter().map(|e| e.substitute(f))),
        }
    }

    pub fn assign(&self, v: usize, b: bool) -> Expr {
        self.substitute(&|x| (x == v).then_some(b))
    }

    /// Renames variables. `f` must be total on the support.
    pub fn map_vars(&self, f: &impl Fn(usize) -> usize) -> Expr {
        match self {
            Expr::Const(b) => Expr::Const(*b),
            Expr::Var(v) => Expr::Var(f(*v)),
            Expr::Not(e) => Expr::not(e.map_vars(f)),
            Expr::And(es) => Expr::and_all(es.iter().map(|e| e.map_vars(f))),
            Expr::Or(es) => Expr::or_all(es.iter().map(|e| e.map_vars(f))),
        }
    }

    /// Rebuilds the formula through the smart constructors.
    pub fn simplify(&self) -> Expr {
        self.substitute(&|_| None)
    }

    pub fn is_const(&self) -> Option<bool> {
        match self {
            Expr::Const(b) => Some(*b),
            _ => None,
        }
    }

    pub fn is_satisfiable(&self) -> bool {
        match self {
            Expr::Const(b) => *b,
            Expr::Var(_) => true,
            Expr::Not(inner) if matches!(**inner, Expr::Var(_)) => true,
            Expr::Or(es) => es.iter().any(|e| e.is_satisfiable()),
            _ => {
                let v = self.branch_var().expect("non-constant formula has a variable");
                self.assign(v, true).is_satisfiable() || self.assign(v, false).is_satisfiable()
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        !Expr::not(self.clone()).is_satisfiable()
    }

    pub fn equivalent(&self, other: &Expr) -> bool {
        !Expr::or(
            Expr::and(self.clone(), Expr::not(other.clone())),
            Expr::and(Expr::not(self.clone()), other.clone()),
        )
        .is_satisfiable()
    }

    /// A variable worth splitting on: the most frequent one.
    fn branch_var(&self) -> Option<usize> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        self.count_vars(&mut counts);
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(v, _)| v)
    }

    fn count_vars(&self, counts: &mut BTreeMap<usize, usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => *counts.entry(*v).or_default() += 1,
            Expr::Not(e) => e.count_vars(counts),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.count_vars(counts)),
        }
    }

    /// Existential quantification by cofactor disjunction:
    /// `∃x.f = f[0/x] ∨ f[1/x]`, applied to each listed variable in turn.
    /// Junctions are expanded only where they mention `x`, and a variable
    /// occurring with a single polarity is fixed to it.
    pub fn exists(&self, vars: &BTreeSet<usize>) -> Expr {
        let mut e = self.nnf();
        for v in self.support().intersection(vars) {
            e = e.exists_var(*v);
        }
        e
    }

    fn mentions(&self, x: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == x,
            Expr::Not(e) => e.mentions(x),
            Expr::And(es) | Expr::Or(es) => es.iter().any(|e| e.mentions(x)),
        }
    }

    fn exists_var(&self, x: usize) -> Expr {
        if !self.mentions(x) {
            return self.clone();
        }
        match self {
            Expr::Var(_) | Expr::Not(_) if self.as_literal().is_some() => TRUE,
            Expr::Or(es) => Expr::or_all(es.iter().map(|e| e.exists_var(x))),
            Expr::And(es) => {
                let (with, without): (Vec<&Expr>, Vec<&Expr>) = es.iter().partition(|e| e.mentions(x));
                let inner = if with.len() == 1 {
                    with[0].exists_var(x)
                } else {
                    Expr::and_all(with.into_iter().cloned()).cofactor_exists(x)
                };
                Expr::and_all(without.into_iter().cloned().chain([inner]))
            }
            _ => self.cofactor_exists(x),
        }
    }

    fn cofactor_exists(&self, x: usize) -> Expr {
        let mut signs = (false, false);
        self.polarities(x, true, &mut signs);
        match signs {
            (true, false) => self.assign(x, true),
            (false, true) => self.assign(x, false),
            _ => Expr::or(self.assign(x, false), self.assign(x, true)),
        }
    }

    /// Records whether `x` occurs positively and negatively (formula in NNF).
    fn polarities(&self, x: usize, pos: bool, out: &mut (bool, bool)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) if *v == x => {
                if pos {
                    out.0 = true
                } else {
                    out.1 = true
                }
            }
            Expr::Var(_) => {}
            Expr::Not(e) => e.polarities(x, !pos, out),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.polarities(x, pos, out)),
        }
    }

    /// Negation normal form: negations only on variables.
    pub fn nnf(&self) -> Expr {
        self.nnf_signed(true)
    }

    fn nnf_signed(&self, pos: bool) -> Expr {
        match self {
            Expr::Const(b) => Expr::Const(*b == pos),
            Expr::Var(v) => Expr::lit(*v, pos),
            Expr::Not(e) => e.nnf_signed(!pos),
            Expr::And(es) if pos => Expr::and_all(es.iter().map(|e| e.nnf_signed(true))),
            Expr::And(es) => Expr::or_all(es.iter().map(|e| e.nnf_signed(false))),
            Expr::Or(es) if pos => Expr::or_all(es.iter().map(|e| e.nnf_signed(true))),
            Expr::Or(es) => Expr::and_all(es.iter().map(|e| e.nnf_signed(false))),
        }
    }

    /// Truth table over `vars` (at most 64 entries per word); entry `k` holds
    /// the value under the assignment whose bit `j` is `vars[j]`.
    pub fn truth_table(&self, vars: &[usize]) -> Vec<u64> {
        assert!(vars.len() <= 24, "truth table over too many variables");
        let rows = 1usize << vars.len();
        let mut table = vec![0u64; rows.div_ceil(64)];
        let index: BTreeMap<usize, usize> = vars.iter().enumerate().map(|(j, &v)| (v, j)).collect();
        for k in 0..rows {
            let val = |v: usize| index.get(&v).is_some_and(|&j| k >> j & 1 == 1);
            if self.eval(&val) {
                table[k / 64] |= 1 << (k % 64);
            }
        }
        table
    }

    /// Variables the function actually depends on.
    pub fn essential_support(&self) -> BTreeSet<usize> {
        self.support()
            .into_iter()
            .filter(|&v| !self.assign(v, false).equivalent(&self.assign(v, true)))
            .collect()
    }

    /// Conjunctive normal form by distribution. Tautological clauses are
    /// dropped and subsumed clauses removed. Fails once more than `cap`
    /// clauses would be produced.
    pub fn to_cnf(&self, cap: usize) -> Result<Vec<Clause>, CnfOverflow> {
        let clauses = self.cnf_rec(true, cap)?;
        Ok(minimize_clauses(clauses))
    }

    fn cnf_rec(&self, positive: bool, cap: usize) -> Result<Vec<Clause>, CnfOverflow> {
        match (self, positive) {
            (Expr::Const(b), pos) => Ok(if *b == pos { vec![] } else { vec![Clause::new()] }),
            (Expr::Var(v), pos) => Ok(vec![[(*v, pos)].into_iter().collect()]),
            (Expr::Not(e), pos) => e.cnf_rec(!pos, cap),
            (Expr::And(es), true) | (Expr::Or(es), false) => {
                let mut out = Vec::new();
                for e in es {
                    out.extend(e.cnf_rec(positive, cap)?);
                    if out.len() > cap {
                        return Err(CnfOverflow);
                    }
                }
                Ok(minimize_clauses(out))
            }
            (Expr::Or(es), true) | (Expr::And(es), false) => {
                let mut acc: Vec<Clause> = vec![Clause::new()];
                for e in es {
                    let part = e.cnf_rec(positive, cap)?;
                    let mut next = Vec::new();
                    for a in &acc {
                        for b in &part {
                            let mut c = a.clone();
                            c.extend(b.iter().copied());
                            if !is_tautology(&c) {
                                next.push(c);
                            }
                        }
                        if next.len() > cap {
                            return Err(CnfOverflow);
                        }
                    }
                    acc = minimize_clauses(next);
                }
                Ok(acc)
            }
        }
    }

    /// Display using a name for each variable.
    pub fn display<'a>(&'a self, names: &'a dyn Fn(usize) -> String) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

fn push_junct(out: &mut Vec<Expr>, lits: &mut BTreeMap<usize, bool>, e: Expr) -> bool {
    // Returns false when `e` makes the whole junction absorbing.
    if let Some((v, b)) = e.as_literal() {
        match lits.get(&v) {
            Some(&prev) if prev != b => return false,
            Some(_) => return true,
            None => {
                lits.insert(v, b);
            }
        }
    } else if out.contains(&e) {
        return true;
    }
    out.push(e);
    true
}

fn is_tautology(c: &Clause) -> bool {
    c.iter().any(|&(v, b)| b && c.contains(&(v, false)))
}

/// Removes duplicate and subsumed clauses, keeping a deterministic order.
pub fn minimize_clauses(mut clauses: Vec<Clause>) -> Vec<Clause> {
    clauses.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    clauses.dedup();
    let mut kept: Vec<Clause> = Vec::new();
    for c in clauses {
        if !kept.iter().any(|k| k.is_subset(&c)) {
            kept.push(c);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("conjunctive normal form exceeds the clause budget")]
pub struct CnfOverflow;

/// Enumerates every assignment to `vars` satisfying `e`, in lexicographic
/// order (false before true). Variables outside `vars` must not occur in `e`.
/// Returns `None` once more than `cap` models exist.
pub fn all_models(e: &Expr, vars: &[usize], cap: usize) -> Option<Vec<Vec<bool>>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(vars.len());
    if models_rec(e, vars, &mut current, &mut out, cap) {
        Some(out)
    } else {
        None
    }
}

fn models_rec(
    e: &Expr,
    vars: &[usize],
    current: &mut Vec<bool>,
    out: &mut Vec<Vec<bool>>,
    cap: usize,
) -> bool {
    if e.is_const() == Some(false) {
        return true;
    }
    let Some((&v, rest)) = vars.split_first() else {
        debug_assert_eq!(e.is_const(), Some(true));
        if out.len() >= cap {
            return false;
        }
        out.push(current.clone());
        return true;
    };
    for b in [false, true] {
        current.push(b);
        let ok = models_rec(&e.assign(v, b), rest, current, out, cap);
        current.pop();
        if !ok {
            return false;
        }
    }
    true
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a dyn Fn(usize) -> String,
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>, top: bool) -> fmt::Result {
        match e {
            Expr::Const(true) => f.write_str("true"),
            Expr::Const(false) => f.write_str("false"),
            Expr::Var(v) => f.write_str(&(self.names)(*v)),
            Expr::Not(inner) => {
                f.write_str("~")?;
                self.write(inner, f, false)
            }
            Expr::And(es) | Expr::Or(es) => {
                let op = if matches!(e, Expr::And(_)) { " & " } else { " | " };
                if !top {
                    f.write_str("(")?;
                }
                for (i, x) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(op)?;
                    }
                    self.write(x, f, false)?;
                }
                if !top {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f, true)
    }
}
