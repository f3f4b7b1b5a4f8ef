//! Stable text and structured renderings of counterexample trees.

use super::cex::{CexTree, Edge};
use crate::system::System;
use serde::Serialize;
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CexReport {
    pub nodes: Vec<NodeReport>,
    pub paths: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeReport {
    pub id: usize,
    pub bits: String,
    pub props: Vec<String>,
    pub parent: Option<usize>,
    pub edge: Option<EdgeReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EdgeReport {
    Temporal { action: String },
    Epistemic { agent: String, witness: Vec<WitnessStep> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessStep {
    pub props: Vec<String>,
    /// Action taken from this state, absent on the last step.
    pub action: Option<String>,
}

pub fn action_label(sys: &System, a: Option<usize>) -> String {
    match a {
        Some(a) => sys.actions[a].id.clone(),
        None => "Λ".to_string(),
    }
}

fn props(sys: &System, s: &crate::bits::State) -> Vec<String> {
    s.ones().map(|v| sys.prop_name(v).to_string()).collect()
}

pub fn report(tree: &CexTree, sys: &System) -> CexReport {
    let nodes = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| NodeReport {
            id,
            bits: n.state.to_string(),
            props: props(sys, &n.state),
            parent: n.parent.as_ref().map(|p| p.0),
            edge: n.parent.as_ref().map(|(_, e)| match e {
                Edge::Temporal(a) => EdgeReport::Temporal {
                    action: action_label(sys, *a),
                },
                Edge::Epistemic { agent, witness } => EdgeReport::Epistemic {
                    agent: sys.agents[*agent].clone(),
                    witness: witness
                        .states
                        .iter()
                        .enumerate()
                        .map(|(k, s)| WitnessStep {
                            props: props(sys, s),
                            action: witness.actions.get(k).map(|a| action_label(sys, *a)),
                        })
                        .collect(),
                },
            }),
        })
        .collect();
    CexReport {
        nodes,
        paths: tree.paths(),
    }
}

/// One line per node, then one line per root-to-leaf path.
pub fn render_text(tree: &CexTree, sys: &System) -> String {
    let mut out = String::new();
    for (id, n) in tree.nodes.iter().enumerate() {
        let st = sys.describe_state(&n.state);
        match &n.parent {
            None => {
                let _ = writeln!(out, "  n{id} {st} (initial)");
            }
            Some((p, Edge::Temporal(a))) => {
                let _ = writeln!(out, "  n{id} {st} <- n{p} by {}", action_label(sys, *a));
            }
            Some((p, Edge::Epistemic { agent, witness })) => {
                let _ = writeln!(out, "  n{id} {st} ~{} n{p}", sys.agents[*agent]);
                let steps: Vec<String> = witness.actions.iter().map(|a| action_label(sys, *a)).collect();
                let _ = writeln!(
                    out,
                    "      witness from {}: {}",
                    sys.describe_state(&witness.states[0]),
                    if steps.is_empty() { "(initial)".to_string() } else { steps.join(" -> ") }
                );
            }
        }
    }
    for p in tree.paths() {
        let ids: Vec<String> = p.iter().map(|i| format!("n{i}")).collect();
        let _ = writeln!(out, "  path {}", ids.join(" "));
    }
    out
}
