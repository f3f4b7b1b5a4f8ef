//! The `aclk` pipeline: load a policy (or raw system) and a query, verify
//! directly or through abstraction refinement, and render a report.

use aclk::abstraction::{abstract_is, AbstractionReport};
use aclk::cegar::{cegar_loop, CegarOptions, Iteration, Mode, PropSelector, ScriptedSelector, WitnessMode};
use aclk::ctlk::{Ctlk, Vocabulary};
use aclk::expr::Expr;
use aclk::kernel::{build_is, BuildOptions, LocalInit};
use aclk::mc::{self, render_text, report, CexReport, CexTree};
use aclk::policy::{load_policy, parse_query, parse_query_with, GroundLimits};
use aclk::system::System;
use aclk::{its, Error};
use serde::Serialize;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use thiserror::Error as ThisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RunMode {
    Direct,
    CegarAuto,
    CegarInteractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InitLocals {
    Free,
    Cleared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Witnesses {
    Single,
    AllPaths,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub policy: PathBuf,
    pub query: PathBuf,
    pub mode: RunMode,
    pub max_states: usize,
    pub max_actions: usize,
    pub format: Format,
    pub select_from: Option<PathBuf>,
    pub dump_system: Option<PathBuf>,
    pub trace: bool,
    pub local_init: InitLocals,
    pub witness: Witnesses,
}

impl RunConfig {
    pub fn new(policy: impl Into<PathBuf>, query: impl Into<PathBuf>, mode: RunMode) -> Self {
        RunConfig {
            policy: policy.into(),
            query: query.into(),
            mode,
            max_states: 1_000_000,
            max_actions: 100_000,
            format: Format::Text,
            select_from: None,
            dump_system: None,
            trace: false,
            local_init: InitLocals::Cleared,
            witness: Witnesses::Single,
        }
    }
}

#[derive(Debug, ThisError)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Input { path: String, source: Error },
    #[error(transparent)]
    Engine(#[from] Error),
}

impl RunError {
    /// 2 for usage, input and engine errors, 3 for exceeded caps.
    pub fn status(&self) -> i32 {
        match self {
            RunError::Input { source: Error::Capacity(_), .. } | RunError::Engine(Error::Capacity(_)) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildSummary {
    pub propositions: usize,
    pub actions: usize,
    pub initial_states: usize,
    pub ground_actions: Option<usize>,
    pub static_atoms: Option<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub verdict: &'static str,
    /// False when an interactive run ended with local states fully revealed
    /// rather than by preservation.
    pub conclusive: bool,
    pub query: String,
    pub system: BuildSummary,
    pub concrete_states: Option<usize>,
    pub abstraction: Option<AbstractionReport>,
    pub iterations: Option<usize>,
    pub counterexample: Option<CexReport>,
    #[serde(skip)]
    pub counterexample_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<Iteration>>,
}

impl Report {
    pub fn holds(&self) -> bool {
        self.verdict == "holds"
    }

    pub fn status(&self) -> i32 {
        if self.holds() {
            0
        } else {
            1
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            Format::Text => self.text(),
        }
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "query: {}", self.query);
        let s = &self.system;
        let _ = writeln!(
            out,
            "system: {} propositions, {} actions, {} initial states",
            s.propositions, s.actions, s.initial_states
        );
        for w in &s.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        if let Some(n) = self.concrete_states {
            let _ = writeln!(out, "reachable states: {n}");
        }
        if let Some(a) = &self.abstraction {
            let _ = writeln!(out, "{a}");
        }
        if let Some(n) = self.iterations {
            let _ = writeln!(out, "refinement rounds: {n}");
        }
        if let Some(trace) = &self.trace {
            for it in trace {
                let _ = writeln!(
                    out,
                    "round {}{}: {} visible, {} abstract states, {} abstract actions, {}",
                    it.index,
                    if it.strengthened { " (strengthened)" } else { "" },
                    it.visible,
                    it.abstract_states,
                    it.abstract_actions,
                    match (it.abstract_holds, it.valid) {
                        (true, _) => "holds abstractly",
                        (false, Some(true)) => "valid counterexample",
                        (false, _) => "spurious counterexample",
                    }
                );
                if let Some(f) = &it.failure_state {
                    let _ = writeln!(out, "  failure state: {f}");
                }
                for c in &it.clauses {
                    let _ = writeln!(out, "  clause: {c}");
                }
                if !it.added.is_empty() {
                    let _ = writeln!(out, "  revealed: {}", it.added.join(" "));
                }
                if !it.selected.is_empty() {
                    let _ = writeln!(out, "  selected: {}", it.selected.join(" "));
                }
            }
        }
        let _ = writeln!(
            out,
            "verdict: {}{}",
            self.verdict,
            if self.conclusive { "" } else { " (not guaranteed: local states were refined by selection)" }
        );
        if let Some(t) = &self.counterexample_text {
            let _ = writeln!(out, "counterexample:");
            out.push_str(t);
        }
        out
    }
}

/// Reads answers from a reader, prompting on a writer. One name per line,
/// a blank line or end of input ends the round.
pub struct PromptSelector<R, W> {
    input: R,
    prompt: W,
}

impl<R: BufRead, W: std::io::Write> PromptSelector<R, W> {
    pub fn new(input: R, prompt: W) -> Self {
        PromptSelector { input, prompt }
    }
}

impl<R: BufRead, W: std::io::Write> PropSelector for PromptSelector<R, W> {
    fn select(&mut self, agents: &[String], candidates: &[String]) -> Vec<String> {
        let _ = writeln!(
            self.prompt,
            "the property holds abstractly through ~K for {}; hidden local propositions:",
            agents.join(", ")
        );
        for c in candidates {
            let _ = writeln!(self.prompt, "  {c}");
        }
        let _ = writeln!(self.prompt, "names to reveal, one per line ('*' for all, blank line to finish):");
        let _ = self.prompt.flush();
        let mut chosen = Vec::new();
        let mut line = String::new();
        loop {
            line.clear();
            match self.input.read_line(&mut line) {
                Ok(0) | Err(_) => break,
                Ok(_) => {}
            }
            let t = line.trim();
            if t.is_empty() {
                break;
            }
            if t == "*" {
                return candidates.to_vec();
            }
            chosen.push(t.to_string());
        }
        chosen
    }
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn input_err(path: &Path) -> impl Fn(Error) -> RunError + '_ {
    move |source| RunError::Input {
        path: path.display().to_string(),
        source,
    }
}

pub struct Loaded {
    pub system: System,
    pub iota: Expr,
    pub property: Ctlk,
    pub summary: BuildSummary,
}

/// Builds the concrete system and resolves the query. Files ending in
/// `.its` are raw systems; anything else is a policy.
pub fn load(cfg: &RunConfig) -> Result<Loaded, RunError> {
    let psrc = read(&cfg.policy)?;
    let qsrc = read(&cfg.query)?;
    if cfg.policy.extension().is_some_and(|e| e == "its") {
        let raw = its::encode_raw_system(&psrc).map_err(input_err(&cfg.policy))?;
        let props: HashMap<String, usize> =
            raw.props.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        let vocab = Vocabulary {
            props: &props,
            agents: &raw.agents,
            objects: &[],
            macros: &[],
        };
        let q = parse_query_with(&qsrc, &vocab).map_err(input_err(&cfg.query))?;
        let init = raw.init.iter().filter(|s| q.init.eval_state(s)).cloned().collect();
        let system = System::new(raw.agents.clone(), raw.props.clone(), raw.actions.clone(), init)?;
        let summary = BuildSummary {
            propositions: system.width(),
            actions: system.actions.len(),
            initial_states: system.init.len(),
            ground_actions: None,
            static_atoms: None,
            warnings: Vec::new(),
        };
        return Ok(Loaded {
            system,
            iota: q.init,
            property: q.property,
            summary,
        });
    }
    let limits = GroundLimits {
        max_actions: cfg.max_actions,
        ..GroundLimits::default()
    };
    let policy = load_policy(&psrc, limits).map_err(input_err(&cfg.policy))?;
    let q = parse_query(&qsrc, &policy).map_err(input_err(&cfg.query))?;
    let opts = BuildOptions {
        local_init: match cfg.local_init {
            InitLocals::Free => LocalInit::Free,
            InitLocals::Cleared => LocalInit::Cleared,
        },
        max_actions: cfg.max_actions,
        ..BuildOptions::default()
    };
    let (system, rep) = build_is(&policy, &q.init, opts)?;
    let summary = BuildSummary {
        propositions: system.width(),
        actions: system.actions.len(),
        initial_states: system.init.len(),
        ground_actions: Some(rep.ground_actions),
        static_atoms: Some(rep.static_atoms),
        warnings: rep.warnings,
    };
    Ok(Loaded {
        system,
        iota: q.init,
        property: q.property,
        summary,
    })
}

/// Runs the configured pipeline. `stdin_selector` answers interactive
/// prompts when no script file is given.
pub fn run(cfg: &RunConfig, stdin_selector: Option<&mut dyn PropSelector>) -> Result<Report, RunError> {
    let l = load(cfg)?;
    let sys = &l.system;
    let names = sys.prop_names();
    let query = format!(
        "{} : {}",
        l.iota.display(&names),
        l.property.display(&names, &|a| sys.agents[a].clone())
    );
    if let Some(path) = &cfg.dump_system {
        let reach = mc::reachable(sys, cfg.max_states)?;
        std::fs::write(path, its::dump_reachable(sys, &reach)).map_err(|source| RunError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    let mut rep = Report {
        verdict: "holds",
        conclusive: true,
        query,
        system: l.summary.clone(),
        concrete_states: None,
        abstraction: None,
        iterations: None,
        counterexample: None,
        counterexample_text: None,
        trace: None,
    };
    let ce: Option<CexTree>;
    match cfg.mode {
        RunMode::Direct => {
            let (reach, holds, tree) = mc::verify(sys, &l.property, cfg.max_states)?;
            rep.concrete_states = Some(reach.len());
            rep.verdict = if holds { "holds" } else { "fails" };
            ce = tree;
        }
        RunMode::CegarAuto | RunMode::CegarInteractive => {
            let opts = CegarOptions {
                mode: if cfg.mode == RunMode::CegarAuto { Mode::Automatic } else { Mode::Interactive },
                witness: match cfg.witness {
                    Witnesses::Single => WitnessMode::Single,
                    Witnesses::AllPaths => WitnessMode::AllPaths,
                },
                max_states: cfg.max_states,
            };
            let mut scripted;
            let mut fallback = ScriptedSelector::default();
            let selector: &mut dyn PropSelector = match (&cfg.select_from, stdin_selector) {
                (Some(p), _) => {
                    scripted = ScriptedSelector::new(&read(p)?);
                    &mut scripted
                }
                (None, Some(s)) => s,
                (None, None) => &mut fallback,
            };
            let res = cegar_loop(sys, &l.property, Some(&l.iota), opts, selector)?;
            let abs = abstract_is(sys, &res.map)?;
            let abs_reach = mc::reachable(&abs.system, cfg.max_states)?;
            rep.abstraction = Some(AbstractionReport::new(sys, &abs, &abs_reach));
            rep.iterations = Some(res.refinements());
            rep.verdict = if res.holds { "holds" } else { "fails" };
            rep.conclusive = res.conclusive;
            if cfg.trace || cfg.format == Format::Json {
                rep.trace = Some(res.trace.clone());
            }
            ce = res.counterexample;
        }
    }
    if let Some(t) = &ce {
        rep.counterexample = Some(report(t, sys));
        rep.counterexample_text = Some(render_text(t, sys));
    }
    Ok(rep)
}
