//! Fixpoint evaluation of CTLK over the reachable states.
//!
//! Every global state has a Λ self-loop (the joint action in which nobody
//! acts), so EX includes the current state and the successor relation is
//! total.

use super::reach::Reachability;
use crate::ctlk::Ctlk;
use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

pub type SatSet = Rc<Vec<bool>>;

pub struct Checker<'a> {
    reach: &'a Reachability,
    cache: HashMap<Ctlk, SatSet>,
}

impl<'a> Checker<'a> {
    pub fn new(reach: &'a Reachability) -> Self {
        Checker {
            reach,
            cache: HashMap::new(),
        }
    }

    pub fn reach(&self) -> &'a Reachability {
        self.reach
    }

    /// { s ∈ G : s ⊨ f }.
    pub fn sat(&mut self, f: &Ctlk) -> SatSet {
        let n = f.normalize();
        self.eval(&n)
    }

    /// I ⊨ f: every initial state satisfies `f`.
    pub fn holds(&mut self, f: &Ctlk) -> bool {
        self.first_failing_init(f).is_none()
    }

    pub fn first_failing_init(&mut self, f: &Ctlk) -> Option<usize> {
        let s = self.sat(f);
        (0..self.reach.num_init).find(|&i| !s[i])
    }

    fn eval(&mut self, f: &Ctlk) -> SatSet {
        if let Some(s) = self.cache.get(f) {
            return s.clone();
        }
        let r = self.reach;
        let n = r.len();
        let out: Vec<bool> = match f {
            Ctlk::True => vec![true; n],
            Ctlk::False => vec![false; n],
            Ctlk::Atom(v) => r.states.iter().map(|s| s.get(*v)).collect(),
            Ctlk::Not(x) => self.eval(x).iter().map(|b| !b).collect(),
            Ctlk::And(x, y) => {
                let (a, b) = (self.eval(x), self.eval(y));
                a.iter().zip(b.iter()).map(|(p, q)| *p && *q).collect()
            }
            Ctlk::Or(x, y) => {
                let (a, b) = (self.eval(x), self.eval(y));
                a.iter().zip(b.iter()).map(|(p, q)| *p || *q).collect()
            }
            Ctlk::K(i, x) => {
                let a = self.eval(x);
                let mut out = vec![false; n];
                for class in &r.classes[*i] {
                    if class.iter().all(|&s| a[s]) {
                        for &s in class {
                            out[s] = true;
                        }
                    }
                }
                out
            }
            Ctlk::EX(x) => {
                let a = self.eval(x);
                (0..n).map(|s| a[s] || r.succ[s].iter().any(|&(_, t)| a[t])).collect()
            }
            Ctlk::EG(x) => {
                // Greatest fixpoint of Z = x ∩ EX Z.
                let a = self.eval(x);
                let mut z: Vec<bool> = a.to_vec();
                loop {
                    let next: Vec<bool> = (0..n)
                        .map(|s| a[s] && (z[s] || r.succ[s].iter().any(|&(_, t)| z[t])))
                        .collect();
                    if next == z {
                        break z;
                    }
                    z = next;
                }
            }
            Ctlk::EU(x, y) => {
                // Least fixpoint of Z = y ∪ (x ∩ EX Z), by backward search.
                let (a, b) = (self.eval(x), self.eval(y));
                let mut z: Vec<bool> = b.to_vec();
                let mut queue: VecDeque<usize> = (0..n).filter(|&s| z[s]).collect();
                while let Some(t) = queue.pop_front() {
                    for &(_, s) in &r.pred[t] {
                        if !z[s] && a[s] {
                            z[s] = true;
                            queue.push_back(s);
                        }
                    }
                }
                z
            }
            other => {
                let n = other.normalize();
                return self.eval(&n);
            }
        };
        let out = Rc::new(out);
        self.cache.insert(f.clone(), out.clone());
        out
    }
}
