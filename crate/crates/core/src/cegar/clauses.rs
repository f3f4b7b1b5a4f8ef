//! State-set formulas and conflict clauses.

use super::StateSet;
use crate::expr::{minimize_clauses, Clause, CnfOverflow, Expr};

/// Clause budget for CNF conversion of conflict formulas.
pub const CNF_CAP: usize = 4096;

/// Sets larger than this are turned into formulas without cube merging.
const MERGE_LIMIT: usize = 512;

/// Positions among `among` on which the states of `sets` do not all agree.
pub fn varying(sets: &[&StateSet], among: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut all = sets.iter().flat_map(|s| s.iter());
    let Some(first) = all.next() else {
        return Vec::new();
    };
    let rest: Vec<_> = all.collect();
    among
        .into_iter()
        .filter(|&v| rest.iter().any(|s| s.get(v) != first.get(v)))
        .collect()
}

type Cube = Vec<Option<bool>>;

/// The disjunction of the minterms of `st` restricted to `vars`, with
/// adjacent cubes merged until no two differ in exactly one literal.
pub fn set_formula(st: &StateSet, vars: &[usize]) -> Expr {
    let mut cubes: Vec<Cube> = st
        .iter()
        .map(|s| vars.iter().map(|&v| Some(s.get(v))).collect())
        .collect();
    cubes.sort();
    cubes.dedup();
    if cubes.len() <= MERGE_LIMIT {
        cubes = merge_cubes(cubes);
    }
    Expr::or_all(cubes.into_iter().map(|c| {
        Expr::cube(
            c.iter()
                .zip(vars)
                .filter_map(|(b, &v)| b.map(|b| (v, b))),
        )
    }))
}

fn merge_cubes(mut cubes: Vec<Cube>) -> Vec<Cube> {
    loop {
        let mut used = vec![false; cubes.len()];
        let mut next: Vec<Cube> = Vec::new();
        for i in 0..cubes.len() {
            for j in i + 1..cubes.len() {
                if let Some(m) = merge(&cubes[i], &cubes[j]) {
                    used[i] = true;
                    used[j] = true;
                    next.push(m);
                }
            }
        }
        if next.is_empty() {
            return cubes;
        }
        next.extend(cubes.iter().zip(&used).filter(|(_, u)| !**u).map(|(c, _)| c.clone()));
        next.sort();
        next.dedup();
        cubes = next;
    }
}

fn merge(a: &Cube, b: &Cube) -> Option<Cube> {
    let mut diff = None;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            if diff.is_some() || x.is_none() || y.is_none() {
                return None;
            }
            diff = Some(k);
        }
    }
    let mut m = a.clone();
    m[diff?] = None;
    Some(m)
}

/// The conjuncts c of cnf(`conflict`) with c ∧ `base` ≡ ⊥, fewest literals
/// first.
pub fn conflict_clauses(base: &Expr, conflict: &Expr) -> Result<Vec<Clause>, CnfOverflow> {
    let cnf = minimize_clauses(conflict.to_cnf(CNF_CAP)?);
    Ok(cnf
        .into_iter()
        .filter(|c| !Expr::and(Expr::clause(c), base.clone()).is_satisfiable())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::State;

    fn lit(v: usize, b: bool) -> Expr {
        Expr::lit(v, b)
    }

    #[test]
    fn single_literal_conflict() {
        let c = conflict_clauses(&lit(0, true), &Expr::and(lit(0, false), lit(1, true))).unwrap();
        assert_eq!(c, vec![Clause::from([(0, false)])]);
    }

    #[test]
    fn two_literal_conflict() {
        let base = Expr::and(lit(0, true), lit(1, true));
        let conflict = Expr::and(Expr::or(lit(0, false), lit(1, false)), lit(2, true));
        let c = conflict_clauses(&base, &conflict).unwrap();
        assert_eq!(c, vec![Clause::from([(0, false), (1, false)])]);
    }

    #[test]
    fn falsity_gives_the_empty_clause() {
        let c = conflict_clauses(&lit(0, true), &Expr::Const(false)).unwrap();
        assert_eq!(c, vec![Clause::new()]);
    }

    #[test]
    fn merged_formula_denotes_the_set() {
        let st: StateSet = [0b000u64, 0b001, 0b011, 0b111].iter().map(|&v| State::from_u64(3, v)).collect();
        let f = set_formula(&st, &[0, 1, 2]);
        for v in 0..8u64 {
            let s = State::from_u64(3, v);
            assert_eq!(f.eval_state(&s), st.contains(&s), "{v:03b}");
        }
        assert!(matches!(f, Expr::Or(ref xs) if xs.len() == 3));
    }
}
