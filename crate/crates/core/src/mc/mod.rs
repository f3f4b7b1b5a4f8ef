//! Explicit-state CTLK model checking.

mod cex;
mod check;
mod export;
mod reach;

pub use cex::{counterexample, CexTree, Edge, Node, Witness};
pub use check::{Checker, SatSet};
pub use export::{action_label, render_text, report, CexReport, EdgeReport, NodeReport, WitnessStep};
pub use reach::{action_order, reachable, Reachability};

use crate::ctlk::Ctlk;
use crate::error::Result;
use crate::system::System;

/// Verdict and satisfaction set of `f` over the reachable states.
pub fn check(reach: &Reachability, f: &Ctlk) -> (bool, Vec<bool>) {
    let mut c = Checker::new(reach);
    let sat = c.sat(f);
    let holds = (0..reach.num_init).all(|i| sat[i]);
    (holds, sat.to_vec())
}

/// Reachability, verdict and (when the formula fails and lies in the
/// counterexample fragment) a counterexample.
pub fn verify(sys: &System, f: &Ctlk, max_states: usize) -> Result<(Reachability, bool, Option<CexTree>)> {
    let reach = reachable(sys, max_states)?;
    let (holds, _) = check(&reach, f);
    let cex = if !holds && f.is_cex_fragment() {
        counterexample(sys, &reach, f)?
    } else {
        None
    };
    Ok((reach, holds, cex))
}
