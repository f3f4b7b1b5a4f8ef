//! Rule templates as parsed, with predicate and object names resolved.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    /// Index into [`PolicySource::objects`].
    Obj(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomTemplate {
    pub pred: usize,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Atom(AtomTemplate),
    /// Reference into [`PolicySource::macros`].
    Macro(usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
}

impl Formula {
    /// Calls `f` on every atom template, outermost first.
    pub fn visit_atoms(&self, f: &mut impl FnMut(&AtomTemplate)) {
        match self {
            Formula::True | Formula::False | Formula::Macro(_) => {}
            Formula::Atom(a) => f(a),
            Formula::Not(a) | Formula::Forall(_, a) | Formula::Exists(_, a) => a.visit_atoms(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }
}

/// A signed atom, optionally under universal binders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectTemplate {
    pub binders: Vec<String>,
    pub positive: bool,
    pub atom: AtomTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRule {
    pub id: String,
    pub params: Vec<String>,
    pub effects: Vec<EffectTemplate>,
    pub guard: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadRule {
    pub id: String,
    pub params: Vec<String>,
    pub target: AtomTemplate,
    pub guard: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroDef {
    pub name: String,
    pub body: Formula,
}

/// A parsed but ungrounded policy.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolicySource {
    pub predicates: Vec<PredicateDecl>,
    /// Σ in declaration order; agents not listed under `objects:` are appended.
    pub objects: Vec<String>,
    /// Σ_Ag as indices into `objects`.
    pub agents: Vec<usize>,
    /// `None` when the file has no `init:` section.
    pub init: Option<Vec<Formula>>,
    pub macros: Vec<MacroDef>,
    pub actions: Vec<ActionRule>,
    pub reads: Vec<ReadRule>,
}

impl PolicySource {
    pub fn predicate(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn object(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o == name)
    }

    pub fn macro_index(&self, name: &str) -> Option<usize> {
        self.macros.iter().position(|m| m.name == name)
    }

    pub fn agent_names(&self) -> Vec<String> {
        self.agents.iter().map(|&o| self.objects[o].clone()).collect()
    }
}
