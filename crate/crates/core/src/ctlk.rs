//! CTLK formulas: name resolution, normalization to the adequate set
//! {¬, ∧, ∨, K_i, EX, EG, EU}, and recognizers for the universal fragment.

use crate::error::{semantic, Error, Result};
use crate::expr::Expr;
use crate::syntax::{Arg, AtomSyntax, PathQ, Surface, TemporalOp};
use std::collections::{BTreeSet, HashMap};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ctlk {
    True,
    False,
    Atom(usize),
    Not(Box<Ctlk>),
    And(Box<Ctlk>, Box<Ctlk>),
    Or(Box<Ctlk>, Box<Ctlk>),
    Implies(Box<Ctlk>, Box<Ctlk>),
    K(usize, Box<Ctlk>),
    EX(Box<Ctlk>),
    EF(Box<Ctlk>),
    EG(Box<Ctlk>),
    EU(Box<Ctlk>, Box<Ctlk>),
    ER(Box<Ctlk>, Box<Ctlk>),
    AX(Box<Ctlk>),
    AF(Box<Ctlk>),
    AG(Box<Ctlk>),
    AU(Box<Ctlk>, Box<Ctlk>),
    AR(Box<Ctlk>, Box<Ctlk>),
}

use Ctlk::*;

fn b(f: Ctlk) -> Box<Ctlk> {
    Box::new(f)
}

impl Ctlk {
    pub fn not(f: Ctlk) -> Ctlk {
        match f {
            True => False,
            False => True,
            Not(inner) => *inner,
            other => Not(b(other)),
        }
    }

    pub fn and(x: Ctlk, y: Ctlk) -> Ctlk {
        And(b(x), b(y))
    }

    pub fn or(x: Ctlk, y: Ctlk) -> Ctlk {
        Or(b(x), b(y))
    }

    pub fn from_expr(e: &Expr) -> Ctlk {
        match e {
            Expr::Const(true) => True,
            Expr::Const(false) => False,
            Expr::Var(v) => Atom(*v),
            Expr::Not(x) => Ctlk::not(Ctlk::from_expr(x)),
            Expr::And(xs) => xs.iter().map(Ctlk::from_expr).reduce(Ctlk::and).unwrap_or(True),
            Expr::Or(xs) => xs.iter().map(Ctlk::from_expr).reduce(Ctlk::or).unwrap_or(False),
        }
    }

    /// The propositional content, if there is no modality.
    pub fn to_expr(&self) -> Option<Expr> {
        Some(match self {
            True => Expr::Const(true),
            False => Expr::Const(false),
            Atom(v) => Expr::var(*v),
            Not(x) => Expr::not(x.to_expr()?),
            And(x, y) => Expr::and(x.to_expr()?, y.to_expr()?),
            Or(x, y) => Expr::or(x.to_expr()?, y.to_expr()?),
            Implies(x, y) => Expr::implies(x.to_expr()?, y.to_expr()?),
            _ => return None,
        })
    }

    pub fn is_propositional(&self) -> bool {
        match self {
            True | False | Atom(_) => true,
            Not(x) => x.is_propositional(),
            And(x, y) | Or(x, y) | Implies(x, y) => x.is_propositional() && y.is_propositional(),
            _ => false,
        }
    }

    pub fn atoms(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<usize>) {
        match self {
            True | False => {}
            Atom(v) => {
                out.insert(*v);
            }
            Not(x) | K(_, x) | EX(x) | EF(x) | EG(x) | AX(x) | AF(x) | AG(x) => x.collect_atoms(out),
            And(x, y) | Or(x, y) | Implies(x, y) | EU(x, y) | ER(x, y) | AU(x, y) | AR(x, y) => {
                x.collect_atoms(out);
                y.collect_atoms(out);
            }
        }
    }

    pub fn agents(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let K(i, _) = f {
                out.insert(*i);
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Ctlk)) {
        f(self);
        match self {
            True | False | Atom(_) => {}
            Not(x) | K(_, x) | EX(x) | EF(x) | EG(x) | AX(x) | AF(x) | AG(x) => x.visit(f),
            And(x, y) | Or(x, y) | Implies(x, y) | EU(x, y) | ER(x, y) | AU(x, y) | AR(x, y) => {
                x.visit(f);
                y.visit(f);
            }
        }
    }

    /// Renames atoms. Fails as a whole if `f` rejects any atom.
    pub fn map_atoms(&self, f: &impl Fn(usize) -> Option<usize>) -> Option<Ctlk> {
        let m = |x: &Ctlk| x.map_atoms(f).map(b);
        Some(match self {
            True => True,
            False => False,
            Atom(v) => Atom(f(*v)?),
            Not(x) => Not(m(x)?),
            K(i, x) => K(*i, m(x)?),
            EX(x) => EX(m(x)?),
            EF(x) => EF(m(x)?),
            EG(x) => EG(m(x)?),
            AX(x) => AX(m(x)?),
            AF(x) => AF(m(x)?),
            AG(x) => AG(m(x)?),
            And(x, y) => And(m(x)?, m(y)?),
            Or(x, y) => Or(m(x)?, m(y)?),
            Implies(x, y) => Implies(m(x)?, m(y)?),
            EU(x, y) => EU(m(x)?, m(y)?),
            ER(x, y) => ER(m(x)?, m(y)?),
            AU(x, y) => AU(m(x)?, m(y)?),
            AR(x, y) => AR(m(x)?, m(y)?),
        })
    }

    pub fn depth(&self) -> usize {
        match self {
            True | False | Atom(_) => 0,
            Not(x) | K(_, x) | EX(x) | EF(x) | EG(x) | AX(x) | AF(x) | AG(x) => 1 + x.depth(),
            And(x, y) | Or(x, y) | Implies(x, y) | EU(x, y) | ER(x, y) | AU(x, y) | AR(x, y) => {
                1 + x.depth().max(y.depth())
            }
        }
    }

    /// Rewrites into ⊤, atoms, ¬, ∧, ∨, K_i, EX, EG and EU.
    pub fn normalize(&self) -> Ctlk {
        let n = |x: &Ctlk| x.normalize();
        let nn = |x: &Ctlk| Ctlk::not(x.normalize());
        match self {
            True => True,
            False => Not(b(True)),
            Atom(v) => Atom(*v),
            Not(x) => nn(x),
            And(x, y) => Ctlk::and(n(x), n(y)),
            Or(x, y) => Ctlk::or(n(x), n(y)),
            Implies(x, y) => Ctlk::or(nn(x), n(y)),
            K(i, x) => K(*i, b(n(x))),
            EX(x) => EX(b(n(x))),
            EG(x) => EG(b(n(x))),
            EU(x, y) => EU(b(n(x)), b(n(y))),
            EF(x) => EU(b(True), b(n(x))),
            // E(x R y) = ¬A(¬x U ¬y)
            ER(x, y) => Ctlk::not(AU(b(Ctlk::not((**x).clone())), b(Ctlk::not((**y).clone()))).normalize()),
            AX(x) => Ctlk::not(EX(b(nn(x)))),
            AF(x) => Ctlk::not(EG(b(nn(x)))),
            AG(x) => Ctlk::not(EU(b(True), b(nn(x)))),
            // A(x U y) = ¬E(¬y U (¬x ∧ ¬y)) ∧ ¬EG ¬y
            AU(x, y) => {
                let (nx, ny) = (nn(x), nn(y));
                Ctlk::and(
                    Ctlk::not(EU(b(ny.clone()), b(Ctlk::and(nx, ny.clone())))),
                    Ctlk::not(EG(b(ny))),
                )
            }
            // A(x R y) = ¬E(¬x U ¬y)
            AR(x, y) => Ctlk::not(EU(b(nn(x)), b(nn(y)))),
        }
    }

    /// Negation normal form, using the path-quantifier dualities.
    pub fn nnf(&self) -> Ctlk {
        self.nnf_signed(true)
    }

    fn nnf_signed(&self, pos: bool) -> Ctlk {
        let p = |x: &Ctlk| x.nnf_signed(pos);
        match (self, pos) {
            (True, true) | (False, false) => True,
            (True, false) | (False, true) => False,
            (Atom(v), true) => Atom(*v),
            (Atom(v), false) => Not(b(Atom(*v))),
            (Not(x), _) => x.nnf_signed(!pos),
            (And(x, y), true) | (Or(x, y), false) => Ctlk::and(p(x), p(y)),
            (Or(x, y), true) | (And(x, y), false) => Ctlk::or(p(x), p(y)),
            (Implies(x, y), true) => Ctlk::or(x.nnf_signed(false), y.nnf_signed(true)),
            (Implies(x, y), false) => Ctlk::and(x.nnf_signed(true), y.nnf_signed(false)),
            (K(i, x), true) => K(*i, b(p(x))),
            (K(i, x), false) => Not(b(K(*i, b(x.nnf_signed(true))))),
            (EX(x), true) | (AX(x), false) => EX(b(p(x))),
            (AX(x), true) | (EX(x), false) => AX(b(p(x))),
            (EF(x), true) | (AG(x), false) => EF(b(p(x))),
            (AG(x), true) | (EF(x), false) => AG(b(p(x))),
            (EG(x), true) | (AF(x), false) => EG(b(p(x))),
            (AF(x), true) | (EG(x), false) => AF(b(p(x))),
            (EU(x, y), true) | (AR(x, y), false) => EU(b(p(x)), b(p(y))),
            (AR(x, y), true) | (EU(x, y), false) => AR(b(p(x)), b(p(y))),
            (AU(x, y), true) | (ER(x, y), false) => AU(b(p(x)), b(p(y))),
            (ER(x, y), true) | (AU(x, y), false) => ER(b(p(x)), b(p(y))),
        }
    }

    /// ACTLK: literals, ∧, ∨, K_i, AX, AU, AR (and their AF, AG forms) after
    /// negation normal form.
    pub fn is_actlk(&self) -> bool {
        fn ok(f: &Ctlk) -> bool {
            match f {
                True | False | Atom(_) => true,
                Not(x) => matches!(**x, Atom(_)),
                And(x, y) | Or(x, y) | AU(x, y) | AR(x, y) => ok(x) && ok(y),
                K(_, x) | AX(x) | AF(x) | AG(x) => ok(x),
                _ => false,
            }
        }
        ok(&self.nnf())
    }

    /// The ACTLK fragment for which finite tree counterexamples are built:
    /// literals, ∧, ∨, K_i, AX and AG.
    pub fn is_actlk_safety(&self) -> bool {
        fn ok(f: &Ctlk) -> bool {
            match f {
                True | False | Atom(_) => true,
                Not(x) => matches!(**x, Atom(_)),
                And(x, y) | Or(x, y) => ok(x) && ok(y),
                K(_, x) | AX(x) | AG(x) => ok(x),
                _ => false,
            }
        }
        ok(&self.nnf())
    }

    /// The safety fragment extended with ¬K_i over propositional operands,
    /// which tree counterexamples treat as leaves.
    pub fn is_cex_fragment(&self) -> bool {
        fn ok(f: &Ctlk) -> bool {
            match f {
                True | False | Atom(_) => true,
                Not(x) => match &**x {
                    Atom(_) => true,
                    K(_, y) => y.is_propositional(),
                    _ => false,
                },
                And(x, y) | Or(x, y) => ok(x) && ok(y),
                K(_, x) | AX(x) | AG(x) => ok(x),
                _ => false,
            }
        }
        ok(&self.nnf())
    }

    /// Whether some ¬K_i occurs positively after negation normal form.
    pub fn has_negative_knowledge(&self) -> bool {
        let mut found = false;
        self.nnf().visit(&mut |f| {
            if let Not(x) = f {
                if matches!(**x, K(..)) {
                    found = true;
                }
            }
        });
        found
    }

    /// ¬K_i agents in positive position, with their operands (in NNF).
    pub fn negative_knowledge(&self) -> Vec<(usize, Ctlk)> {
        let mut out = Vec::new();
        self.nnf().visit(&mut |f| {
            if let Not(x) = f {
                if let K(i, y) = &**x {
                    out.push((*i, (**y).clone()));
                }
            }
        });
        out
    }

    /// Replaces every positive ¬K_i ψ by ¬ψ. Since K_i ψ implies ψ, the
    /// result implies `self`.
    pub fn strengthen_negative_knowledge(&self) -> Ctlk {
        fn go(f: &Ctlk) -> Ctlk {
            let g = |x: &Ctlk| b(go(x));
            match f {
                Not(x) => match &**x {
                    K(_, y) => go(&Ctlk::not((**y).clone()).nnf()),
                    _ => f.clone(),
                },
                True | False | Atom(_) => f.clone(),
                And(x, y) => And(g(x), g(y)),
                Or(x, y) => Or(g(x), g(y)),
                Implies(x, y) => Implies(g(x), g(y)),
                K(i, x) => K(*i, g(x)),
                EX(x) => EX(g(x)),
                EF(x) => EF(g(x)),
                EG(x) => EG(g(x)),
                AX(x) => AX(g(x)),
                AF(x) => AF(g(x)),
                AG(x) => AG(g(x)),
                EU(x, y) => EU(g(x), g(y)),
                ER(x, y) => ER(g(x), g(y)),
                AU(x, y) => AU(g(x), g(y)),
                AR(x, y) => AR(g(x), g(y)),
            }
        }
        go(&self.nnf())
    }

    pub fn display<'a>(&'a self, props: &'a dyn Fn(usize) -> String, agents: &'a dyn Fn(usize) -> String) -> CtlkDisplay<'a> {
        CtlkDisplay { f: self, props, agents }
    }
}

pub struct CtlkDisplay<'a> {
    f: &'a Ctlk,
    props: &'a dyn Fn(usize) -> String,
    agents: &'a dyn Fn(usize) -> String,
}

impl fmt::Display for CtlkDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |g: &'_ Ctlk| CtlkDisplay {
            f: g,
            props: self.props,
            agents: self.agents,
        }
        .to_string();
        let wrap = |g: &Ctlk| match g {
            True | False | Atom(_) | Not(_) | K(..) | EX(_) | EF(_) | EG(_) | AX(_) | AF(_) | AG(_) | EU(..)
            | ER(..) | AU(..) | AR(..) => sub(g),
            _ => format!("({})", sub(g)),
        };
        match self.f {
            True => write!(out, "true"),
            False => write!(out, "false"),
            Atom(v) => write!(out, "{}", (self.props)(*v)),
            Not(x) => write!(out, "~{}", wrap(x)),
            And(x, y) => {
                let part = |g: &Ctlk| if matches!(g, And(..)) { sub(g) } else { wrap(g) };
                write!(out, "{} & {}", part(x), part(y))
            }
            Or(x, y) => {
                let part = |g: &Ctlk| if matches!(g, Or(..)) { sub(g) } else { wrap(g) };
                write!(out, "{} | {}", part(x), part(y))
            }
            Implies(x, y) => write!(out, "{} -> {}", wrap(x), wrap(y)),
            K(i, x) => write!(out, "K_{} {}", (self.agents)(*i), wrap(x)),
            EX(x) => write!(out, "EX {}", wrap(x)),
            EF(x) => write!(out, "EF {}", wrap(x)),
            EG(x) => write!(out, "EG {}", wrap(x)),
            AX(x) => write!(out, "AX {}", wrap(x)),
            AF(x) => write!(out, "AF {}", wrap(x)),
            AG(x) => write!(out, "AG {}", wrap(x)),
            EU(x, y) => write!(out, "E({} U {})", sub(x), sub(y)),
            ER(x, y) => write!(out, "E({} R {})", sub(x), sub(y)),
            AU(x, y) => write!(out, "A({} U {})", sub(x), sub(y)),
            AR(x, y) => write!(out, "A({} R {})", sub(x), sub(y)),
        }
    }
}

/// Names available when resolving a formula.
pub struct Vocabulary<'a> {
    pub props: &'a HashMap<String, usize>,
    pub agents: &'a [String],
    /// Domain of `forall`/`exists`.
    pub objects: &'a [String],
    pub macros: &'a [(String, Expr)],
}

type Bindings = Vec<(String, String)>;

impl Vocabulary<'_> {
    fn key(&self, at: &AtomSyntax, env: &Bindings) -> String {
        let mut s = at.name.clone();
        if let Some(ix) = &at.index {
            let ix = lookup(env, ix).unwrap_or(ix);
            s.push('[');
            s.push_str(ix);
            s.push(']');
        }
        if !at.args.is_empty() {
            let parts: Vec<String> = at
                .args
                .iter()
                .map(|a| match a {
                    Arg::Name(n) => lookup(env, n).unwrap_or(n).to_string(),
                    Arg::Atom(inner) => self.key(inner, env),
                })
                .collect();
            s.push('(');
            s.push_str(&parts.join(","));
            s.push(')');
        }
        s
    }

    fn atom(&self, at: &AtomSyntax, env: &Bindings) -> Result<Expr> {
        if at.index.is_none() && at.args.is_empty() {
            if let Some((_, e)) = self.macros.iter().find(|(n, _)| *n == at.name) {
                return Ok(e.clone());
            }
        }
        let key = self.key(at, env);
        self.props
            .get(&key)
            .map(|&v| Expr::var(v))
            .ok_or_else(|| semantic(format!("{}:{}: unknown proposition '{key}'", at.line, at.col)))
    }

    fn agent(&self, name: &str, env: &Bindings) -> Result<usize> {
        let name = lookup(env, name).unwrap_or(name);
        self.agents
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| semantic(format!("unknown agent '{name}' in knowledge operator")))
    }

    pub fn to_expr(&self, f: &Surface) -> Result<Expr> {
        self.expr(f, &mut Vec::new())
    }

    pub fn to_ctlk(&self, f: &Surface) -> Result<Ctlk> {
        self.ctlk(f, &mut Vec::new())
    }

    fn expand<T>(
        &self,
        v: &str,
        body: &Surface,
        env: &mut Bindings,
        mut each: impl FnMut(&Self, &Surface, &mut Bindings) -> Result<T>,
    ) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.objects.len());
        for o in self.objects {
            env.push((v.to_string(), o.clone()));
            let r = each(self, body, env);
            env.pop();
            out.push(r?);
        }
        Ok(out)
    }

    fn expr(&self, f: &Surface, env: &mut Bindings) -> Result<Expr> {
        Ok(match f {
            Surface::True => Expr::Const(true),
            Surface::False => Expr::Const(false),
            Surface::Atom(at) => self.atom(at, env)?,
            Surface::Not(x) => Expr::not(self.expr(x, env)?),
            Surface::And(x, y) => Expr::and(self.expr(x, env)?, self.expr(y, env)?),
            Surface::Or(x, y) => Expr::or(self.expr(x, env)?, self.expr(y, env)?),
            Surface::Implies(x, y) => Expr::implies(self.expr(x, env)?, self.expr(y, env)?),
            Surface::Iff(x, y) => Expr::iff(self.expr(x, env)?, self.expr(y, env)?),
            Surface::Forall(v, x) => Expr::and_all(self.expand(v, x, env, Self::expr)?),
            Surface::Exists(v, x) => Expr::or_all(self.expand(v, x, env, Self::expr)?),
            _ => return Err(Error::Unsupported("a propositional formula is required here".into())),
        })
    }

    fn ctlk(&self, f: &Surface, env: &mut Bindings) -> Result<Ctlk> {
        let mut c = |x: &Surface| self.ctlk(x, env);
        Ok(match f {
            Surface::True => True,
            Surface::False => False,
            Surface::Atom(at) => Ctlk::from_expr(&self.atom(at, env)?),
            Surface::Not(x) => Ctlk::not(c(x)?),
            Surface::And(x, y) => Ctlk::and(c(x)?, c(y)?),
            Surface::Or(x, y) => Ctlk::or(c(x)?, c(y)?),
            Surface::Implies(x, y) => Implies(b(c(x)?), b(c(y)?)),
            Surface::Iff(x, y) => {
                let (x, y) = (c(x)?, c(y)?);
                Ctlk::and(Implies(b(x.clone()), b(y.clone())), Implies(b(y), b(x)))
            }
            Surface::Forall(v, x) => self
                .expand(v, x, env, Self::ctlk)?
                .into_iter()
                .reduce(Ctlk::and)
                .unwrap_or(True),
            Surface::Exists(v, x) => self
                .expand(v, x, env, Self::ctlk)?
                .into_iter()
                .reduce(Ctlk::or)
                .unwrap_or(False),
            Surface::K(a, x) => {
                let i = self.agent(a, env)?;
                K(i, b(self.ctlk(x, env)?))
            }
            Surface::Unary(op, x) => {
                let x = b(c(x)?);
                match op {
                    TemporalOp::AX => AX(x),
                    TemporalOp::AF => AF(x),
                    TemporalOp::AG => AG(x),
                    TemporalOp::EX => EX(x),
                    TemporalOp::EF => EF(x),
                    TemporalOp::EG => EG(x),
                }
            }
            Surface::Until(q, x, y) => {
                let (x, y) = (b(c(x)?), b(c(y)?));
                match q {
                    PathQ::A => AU(x, y),
                    PathQ::E => EU(x, y),
                }
            }
            Surface::Release(q, x, y) => {
                let (x, y) = (b(c(x)?), b(c(y)?));
                match q {
                    PathQ::A => AR(x, y),
                    PathQ::E => ER(x, y),
                }
            }
        })
    }
}

fn lookup<'a>(env: &'a Bindings, name: &str) -> Option<&'a str> {
    env.iter().rev().find(|(v, _)| v == name).map(|(_, o)| o.as_str())
}
