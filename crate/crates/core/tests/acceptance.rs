//! Acceptance suite: one PASS/FAIL line per primary criterion.

mod common;

use aclk::abstraction::{abstract_is, initial_abstraction, simulation_check, AbstractionMap};
use aclk::cegar::{
    cegar_loop, check_ce, find_failure, refine, CegarOptions, Concrete, Mode, ScriptedSelector, SelectAll,
    WitnessMode,
};
use aclk::ctlk::{Ctlk, Vocabulary};
use aclk::expr::Expr;
use aclk::kernel::{build_is, BuildOptions, LocalInit};
use aclk::mc::{counterexample, reachable, CexTree, Checker, Edge};
use aclk::policy::{load_policy, parse_query, parse_query_with, GroundLimits};
use aclk::system::System;
use aclk::State;
use common::Graph;
use rand::Rng;
use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn names(sys: &System, s: &State) -> BTreeSet<String> {
    s.ones().map(|v| sys.prop_name(v).to_string()).collect()
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

// ---------------------------------------------------------------------------

fn six_state() -> Outcome {
    let t0 = Instant::now();
    let raw = aclk::its::encode_raw_system(&corpus("six_state.its")).map_err(err)?;
    let props: HashMap<String, usize> = raw.props.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
    let vocab = Vocabulary {
        props: &props,
        agents: &raw.agents,
        objects: &[],
        macros: &[],
    };
    let q = parse_query_with(&corpus("six_state.q"), &vocab).map_err(err)?;
    let init: Vec<State> = raw.init.iter().filter(|s| q.init.eval_state(s)).cloned().collect();
    let sys = System::new(raw.agents.clone(), raw.props.clone(), raw.actions.clone(), init).map_err(err)?;
    let g = Graph::new(&sys, 64).unwrap();
    ensure!(g.len() == 6, "expected 6 reachable states, got {}", g.len());
    ensure!(common::holds(&sys, &g, &q.property), "property fails on the concrete model");

    let visible: Vec<usize> = ["p", "q", "t"].iter().map(|n| sys.prop(n).unwrap()).collect();
    let map = AbstractionMap::new(sys.width(), visible);
    ensure!(
        initial_abstraction(&sys, &q.property, Some(&q.init)) == map,
        "initial abstraction does not hide exactly l and r"
    );
    let abs = abstract_is(&sys, &map).map_err(err)?;
    let ar = reachable(&abs.system, 64).map_err(err)?;
    let aphi = map.abstract_formula(&q.property).unwrap();
    ensure!(!Checker::new(&ar).holds(&aphi), "property holds on the abstract model");
    let ce = counterexample(&abs.system, &ar, &aphi).map_err(err)?.ok_or("no counterexample")?;

    let a = &abs.system;
    let lbl = |n: usize| names(a, &ce.nodes[n].state);
    let members = |n: usize| match &ce.nodes[n].parent {
        Some((_, Edge::Temporal(Some(x)))) => abs.members(*x).iter().map(|&m| sys.actions[m].id.clone()).collect(),
        _ => Vec::new(),
    };
    ensure!(ce.nodes.len() == 4, "tree has {} nodes", ce.nodes.len());
    let paths = ce.paths();
    ensure!(paths.len() == 2 && paths.iter().all(|p| p.len() == 3 && p[..2] == [0, 1]), "paths {paths:?}");
    let (t_leaf, e_leaf) = (paths[0][2], paths[1][2]);
    ensure!(lbl(0) == set(&["q"]) && lbl(1) == set(&["p", "q", "t"]), "wrong first step");
    ensure!(lbl(t_leaf) == set(&["p", "t"]) && lbl(e_leaf) == set(&["q", "t"]), "wrong leaves");
    ensure!(members(1) == ["a11", "a12"] && members(t_leaf) == ["a2"], "wrong action labels");
    let Some((1, Edge::Epistemic { agent: 0, witness })) = &ce.nodes[e_leaf].parent else {
        return Err("second leaf is not an a-edge from the (pq,t) node".into());
    };
    ensure!(
        witness.states.iter().map(|s| names(a, s)).collect::<Vec<_>>() == vec![set(&[]), set(&["q", "t"])],
        "witness is not the a3 step from the second initial state"
    );

    let conc = Concrete {
        sys: &sys,
        reach: None,
        mode: WitnessMode::Single,
    };
    let check = check_ce(&ce, conc, &abs).map_err(err)?;
    ensure!(!check.is_valid(), "counterexample declared valid");
    let diag = find_failure(&ce, conc, &abs, &check).map_err(err)?;
    ensure!(names(a, &diag.failure_state) == set(&["p", "q", "t"]), "failure state {:?}", names(a, &diag.failure_state));

    let res = cegar_loop(&sys, &q.property, Some(&q.init), CegarOptions::default(), &mut SelectAll).map_err(err)?;
    ensure!(res.holds && res.conclusive, "refinement did not restore holds");
    ensure!(res.refinements() == 1, "{} refinements", res.refinements());
    let added = &res.trace[0].added;
    let took = t0.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!(
        "holds concretely; 4-node tree spurious at (pq,t); revealed {}; holds after 1 refinement; {:.1} ms",
        added.join(","),
        took.as_secs_f64() * 1e3
    ))
}

// ---------------------------------------------------------------------------

fn read_knowledge() -> Outcome {
    let t0 = Instant::now();
    let mut r = common::rng(0x1e3a1);
    let (mut policies, mut checks) = (0, 0usize);
    while policies < 150 {
        let src = common::random_policy(&mut r);
        let policy = load_policy(&src, GroundLimits::default()).map_err(|e| format!("{e}\n{src}"))?;
        let opts = BuildOptions {
            local_init: if r.gen_bool(0.5) { LocalInit::Free } else { LocalInit::Cleared },
            ..BuildOptions::default()
        };
        let (sys, _) = build_is(&policy, &Expr::Const(true), opts).map_err(err)?;
        let Some(g) = Graph::new(&sys, 1 << 14) else { continue };
        policies += 1;
        for (i, ag) in sys.agents.iter().enumerate() {
            for atom in &policy.atom_names {
                let p = sys.prop(atom).unwrap();
                let read = sys.prop(&format!("read[{ag}]({atom})")).unwrap();
                let know = Ctlk::or(
                    Ctlk::K(i, Box::new(Ctlk::Atom(p))),
                    Ctlk::K(i, Box::new(Ctlk::not(Ctlk::Atom(p)))),
                );
                let sat = common::sat(&sys, &g, &know);
                for (k, s) in g.states.iter().enumerate() {
                    if s.get(read) {
                        checks += 1;
                        ensure!(sat[k], "violation for {ag} on {atom} in\n{src}");
                    }
                }
            }
        }
    }
    let took = t0.elapsed();
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(format!("{policies} policies, {checks} readable (state, agent, atom) triples, 0 violations, {:.1} s", took.as_secs_f64()))
}

// ---------------------------------------------------------------------------

fn random_instance(r: &mut rand_chacha::ChaCha8Rng, k: usize) -> Result<Option<System>, String> {
    if k % 2 == 0 {
        let shape = common::random_shape(r, 7);
        return Ok(Some(common::random_system(r, &shape)));
    }
    let src = common::random_policy(r);
    let policy = load_policy(&src, GroundLimits::default()).map_err(err)?;
    let opts = BuildOptions {
        local_init: LocalInit::Cleared,
        ..BuildOptions::default()
    };
    let (sys, _) = build_is(&policy, &Expr::Const(true), opts).map_err(err)?;
    Ok(Some(sys))
}

fn simulation() -> Outcome {
    let mut r = common::rng(0x51a);
    let (mut systems, mut formulas, mut abstract_holds) = (0, 0, 0);
    let mut k = 0;
    while systems < 120 {
        k += 1;
        let Some(sys) = random_instance(&mut r, k)? else { continue };
        let Some(g) = Graph::new(&sys, 4096) else { continue };
        let reach = reachable(&sys, 4096).map_err(err)?;
        let visible: Vec<usize> = (0..sys.width()).filter(|_| r.gen_bool(0.5)).collect();
        if visible.is_empty() {
            continue;
        }
        let map = AbstractionMap::new(sys.width(), visible.clone());
        let abs = abstract_is(&sys, &map).map_err(err)?;
        let ar = reachable(&abs.system, 1 << 16).map_err(err)?;
        simulation_check(&sys, &reach, &abs, &ar).map_err(|f| format!("system {k}: {f}"))?;
        systems += 1;
        for _ in 0..5 {
            let phi = common::random_safety(&mut r, &visible, sys.agents.len(), 3);
            let aphi = map.abstract_formula(&phi).unwrap();
            formulas += 1;
            if Checker::new(&ar).holds(&aphi) {
                abstract_holds += 1;
                ensure!(common::holds(&sys, &g, &phi), "system {k}: abstract holds but concrete fails for {phi:?}");
            }
        }
    }
    ensure!(formulas >= 500, "only {formulas} formulas");
    Ok(format!(
        "{systems} systems simulate; {formulas} formulas, {abstract_holds} hold abstractly and all hold concretely"
    ))
}

// ---------------------------------------------------------------------------

fn check_ce_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut r = common::rng(0xce);
    let (mut instances, mut valid, mut spurious, mut single_checked) = (0, 0, 0, 0);
    let mut attempts = 0;
    while instances < 300 || spurious < 100 {
        attempts += 1;
        ensure!(attempts < 200_000, "could not generate enough instances");
        let shape = common::random_shape(&mut r, 9);
        let sys = common::random_system(&mut r, &shape);
        let Some(g) = Graph::new(&sys, 512) else { continue };
        let visible: Vec<usize> = (0..sys.width()).filter(|_| r.gen_bool(0.35)).collect();
        if visible.is_empty() {
            continue;
        }
        let phi = common::random_safety(&mut r, &visible, sys.agents.len(), 3);
        let map = AbstractionMap::new(sys.width(), visible);
        let abs = abstract_is(&sys, &map).map_err(err)?;
        let ar = reachable(&abs.system, 1 << 16).map_err(err)?;
        let aphi = map.abstract_formula(&phi).unwrap();
        let Some(ce) = counterexample(&abs.system, &ar, &aphi).map_err(err)? else { continue };
        let reach = reachable(&sys, 512).map_err(err)?;
        instances += 1;

        let all = Concrete {
            sys: &sys,
            reach: Some(&reach),
            mode: WitnessMode::AllPaths,
        };
        let verdict = check_ce(&ce, all, &abs).map_err(err)?;
        let oracle = common::tree_exists(&ce, &sys, &abs, &g, false);
        ensure!(verdict.is_valid() == oracle, "instance {instances}: check_ce {} vs oracle {oracle}", verdict.is_valid());
        match &verdict.verdict {
            aclk::cegar::Verdict::Valid(tree) => {
                valid += 1;
                common::concrete_tree_ok(tree, &sys, &g).map_err(|e| format!("instance {instances}: {e}"))?;
                concrete_tree_refutes(tree, &sys, &g, &phi)?;
            }
            aclk::cegar::Verdict::Spurious(_) => {
                spurious += 1;
                let diag = find_failure(&ce, all, &abs, &verdict).map_err(err)?;
                let step = refine(&map, &diag).map_err(err)?;
                ensure!(step.map.visible().len() > map.visible().len(), "refinement did not grow");
            }
        }

        let single = Concrete {
            sys: &sys,
            reach: None,
            mode: WitnessMode::Single,
        };
        let v1 = check_ce(&ce, single, &abs).map_err(err)?;
        let o1 = common::tree_exists(&ce, &sys, &abs, &g, true);
        ensure!(v1.is_valid() == o1, "instance {instances}: witness-following check {} vs oracle {o1}", v1.is_valid());
        single_checked += 1;
    }
    ensure!(valid > 0 && spurious > 0, "{valid} valid, {spurious} spurious");
    let took = t0.elapsed();
    ensure!(took < Duration::from_secs(300), "took {took:?}");
    Ok(format!(
        "{instances} counterexamples ({valid} valid, {spurious} spurious), 0 disagreements; {single_checked} also agree in witness-following mode; {:.1} s",
        took.as_secs_f64()
    ))
}

/// The root of a concretized tree violates the property it was built for.
fn concrete_tree_refutes(tree: &CexTree, sys: &System, g: &Graph, phi: &Ctlk) -> Result<(), String> {
    let sat = common::sat(sys, g, phi);
    let root = g.index[&tree.nodes[0].state];
    ensure!(!sat[root], "concretized root satisfies the property");
    Ok(())
}

// ---------------------------------------------------------------------------

fn ctlk_oracle() -> Outcome {
    let mut r = common::rng(0xc71c);
    let (mut pairs, mut systems) = (0, 0);
    while pairs < 1200 {
        let shape = common::random_shape(&mut r, 5);
        let sys = common::random_system(&mut r, &shape);
        let Some(g) = Graph::new(&sys, 10) else { continue };
        systems += 1;
        let reach = reachable(&sys, 10).map_err(err)?;
        ensure!(reach.len() == g.len(), "reachable sets differ in size");
        let atoms: Vec<usize> = (0..sys.width()).collect();
        for _ in 0..10 {
            let f = common::random_ctlk(&mut r, &atoms, sys.agents.len(), 4);
            let lib = Checker::new(&reach).sat(&f);
            let want = common::sat(&sys, &g, &f);
            for (i, s) in reach.states.iter().enumerate() {
                ensure!(lib[i] == want[g.index[s]], "disagreement on {f:?} at {s}");
            }
            pairs += 1;
        }
    }
    Ok(format!("{pairs} (system, formula) pairs over {systems} systems of at most 10 states, 0 disagreements"))
}

// ---------------------------------------------------------------------------

/// Verdicts fixed by exhaustive concrete checking of the bundled policy.
const CRS_VERDICTS: [bool; 4] = [true, true, false, true];

fn crs() -> Outcome {
    let t0 = Instant::now();
    let policy = load_policy(&corpus("crs.acp"), GroundLimits::default()).map_err(err)?;
    let mut lines = Vec::new();
    for (k, &expected) in CRS_VERDICTS.iter().enumerate() {
        let q = parse_query(&corpus(&format!("query{}.q", k + 1)), &policy).map_err(err)?;
        let opts = BuildOptions {
            local_init: LocalInit::Cleared,
            ..BuildOptions::default()
        };
        let (sys, _) = build_is(&policy, &q.init, opts).map_err(err)?;
        let g = Graph::new(&sys, 1 << 16).ok_or("concrete system too large")?;
        ensure!(common::holds(&sys, &g, &q.property) == expected, "query {}: brute force disagrees", k + 1);
        let (_, direct, _) = aclk::mc::verify(&sys, &q.property, 1 << 16).map_err(err)?;
        ensure!(direct == expected, "query {}: direct check disagrees", k + 1);

        let mode = if q.property.is_actlk_safety() { Mode::Automatic } else { Mode::Interactive };
        let script = if k == 2 { corpus("query3.select") } else { String::new() };
        let opts = CegarOptions {
            mode,
            ..CegarOptions::default()
        };
        let res = cegar_loop(&sys, &q.property, Some(&q.init), opts, &mut ScriptedSelector::new(&script))
            .map_err(|e| format!("query {}: {e}", k + 1))?;
        ensure!(res.holds == expected, "query {}: refinement verdict differs", k + 1);
        ensure!(res.conclusive, "query {}: inconclusive", k + 1);
        let touched = res.max_abstract_states();
        ensure!(touched < g.len(), "query {}: {touched} abstract states vs |G| = {}", k + 1, g.len());
        if !expected {
            let tree = res.counterexample.as_ref().ok_or("no concrete counterexample")?;
            common::concrete_tree_ok(tree, &sys, &g)?;
            leak(tree, &sys, &g)?;
        }
        lines.push(format!(
            "Q{} {} ({} rounds, <= {} abstract states, |G| = {})",
            k + 1,
            if expected { "holds" } else { "fails" },
            res.trace.len(),
            touched,
            g.len()
        ));
    }
    let took = t0.elapsed();
    ensure!(took < Duration::from_secs(120), "took {took:?}");
    Ok(format!("{}; {:.2} s", lines.join(", "), took.as_secs_f64()))
}

/// The tree ends in a state where a1 cannot read the assignment of p1 to a2
/// yet knows it, having seen a2's count and the other paper's reviewers.
fn leak(tree: &CexTree, sys: &System, g: &Graph) -> Result<(), String> {
    let p = |n: &str| sys.prop(n).ok_or(format!("no proposition {n}"));
    let target = p("reviewer(p1,a2)")?;
    let knows = common::sat(sys, g, &Ctlk::K(0, Box::new(Ctlk::Atom(target))));
    let leaf = tree.paths()[0].last().copied().unwrap();
    let s = &tree.nodes[leaf].state;
    ensure!(s.get(target) && knows[g.index[s]], "leaf does not show a1 knowing reviewer(p1,a2)");
    ensure!(!s.get(p("read[a1](reviewer(p1,a2))")?), "a1 reads the assignment directly");
    ensure!(s.get(p("read[a1](count1(a2))")?), "a1 does not see a2's count");
    let assigns = tree.paths()[0]
        .windows(2)
        .filter(|w| matches!(tree.nodes[w[1]].parent, Some((_, Edge::Temporal(Some(_))))))
        .count();
    ensure!(assigns >= 2, "both papers must be assigned along the path");
    Ok(())
}

// ---------------------------------------------------------------------------

fn progress() -> Outcome {
    let mut r = common::rng(0x9e);
    let (mut runs, mut rounds, mut max_rounds, mut refined) = (0, 0, 0, 0);
    let mut k = 0;
    while runs < 200 || refined < 60 {
        k += 1;
        let Some(sys) = random_instance(&mut r, k)? else { continue };
        let Some(g) = Graph::new(&sys, 4096) else { continue };
        let atoms: Vec<usize> = (0..sys.width()).filter(|_| r.gen_bool(0.3)).collect();
        if atoms.is_empty() {
            continue;
        }
        let phi = common::random_safety(&mut r, &atoms, sys.agents.len(), 3);
        let hidden = sys.width() - initial_abstraction(&sys, &phi, None).visible().len();
        let res = cegar_loop(&sys, &phi, None, CegarOptions::default(), &mut SelectAll).map_err(err)?;
        ensure!(res.holds == common::holds(&sys, &g, &phi), "run {k}: verdict differs from brute force");
        // a spurious round must grow the abstraction, and no tree may come back
        // over the same abstraction
        for w in res.trace.windows(2) {
            if w[0].valid == Some(false) {
                ensure!(
                    w[1].visible > w[0].visible,
                    "run {k}: round {} was spurious but the abstraction did not grow",
                    w[0].index
                );
            }
        }
        let mut seen = std::collections::HashSet::new();
        for it in &res.trace {
            if let Some(ce) = &it.counterexample {
                ensure!(seen.insert((it.visible, ce)), "run {k}: counterexample repeated in round {}", it.index);
            }
        }
        ensure!(res.refinements() <= hidden, "run {k}: {} refinements, {hidden} hidden", res.refinements());
        runs += 1;
        refined += usize::from(res.refinements() > 0);
        rounds += res.refinements();
        max_rounds = max_rounds.max(res.refinements());
    }
    Ok(format!(
        "{runs} runs ({refined} refined, {rounds} refinements, max {max_rounds} in one run), no repeats, verdicts match brute force"
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("six-state example end-to-end", six_state),
        ("read permissions yield knowledge", read_knowledge),
        ("simulation and preservation", simulation),
        ("check_ce matches tree oracle", check_ce_oracle),
        ("CTLK checker matches semantics", ctlk_oracle),
        ("CRS case study", crs),
        ("refinement progress", progress),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
