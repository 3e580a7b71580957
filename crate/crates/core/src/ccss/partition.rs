use std::collections::BTreeSet;

use crate::model::{AtomId, CnfFormula, IntVarId, Literal};

/// Disjoint split of the integer variables driving initialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemPartition {
    pub eq_vars: BTreeSet<IntVarId>,
    pub hf_vars: BTreeSet<IntVarId>,
    pub general_vars: BTreeSet<IntVarId>,
    pub lambda: usize,
}

impl SubsystemPartition {
    pub fn new(f: &CnfFormula, lambda: usize) -> Self {
        let eq_vars = build_equality_system(f);
        let hf_vars = build_high_frequency_system(f, lambda, &eq_vars);
        let general_vars = (0..f.num_int_vars() as u32)
            .map(IntVarId)
            .filter(|v| !eq_vars.contains(v) && !hf_vars.contains(v))
            .collect();
        SubsystemPartition { eq_vars, hf_vars, general_vars, lambda }
    }
}

fn occurring_atoms(f: &CnfFormula) -> Vec<AtomId> {
    let mut seen = vec![false; f.atoms().len()];
    for lit in f.clauses().iter().flat_map(|c| c.literals()) {
        if let Literal::Arith { atom, .. } = *lit {
            seen[atom.index()] = true;
        }
    }
    (0..seen.len() as u32).filter(|&i| seen[i as usize]).map(AtomId).collect()
}

/// Grows `set` until every non-equality atom sharing a variable with it is
/// entirely contained in it.
fn close_over_inequalities(f: &CnfFormula, atoms: &[AtomId], set: &mut BTreeSet<IntVarId>) {
    let inequalities: Vec<AtomId> = atoms.iter().copied().filter(|&a| !f.atom(a).is_equality()).collect();
    let mut by_var: Vec<Vec<AtomId>> = vec![Vec::new(); f.num_int_vars()];
    for &a in &inequalities {
        for v in f.atom(a).vars() {
            by_var[v.index()].push(a);
        }
    }
    let mut absorbed = vec![false; f.atoms().len()];
    let mut queue: Vec<IntVarId> = set.iter().copied().collect();
    while let Some(v) = queue.pop() {
        for &a in &by_var[v.index()] {
            if std::mem::replace(&mut absorbed[a.index()], true) {
                continue;
            }
            for w in f.atom(a).vars() {
                if set.insert(w) {
                    queue.push(w);
                }
            }
        }
    }
}

/// Variables of every equality atom, closed under inequality atoms that
/// share a variable with the set.
pub fn build_equality_system(f: &CnfFormula) -> BTreeSet<IntVarId> {
    let atoms = occurring_atoms(f);
    let mut set: BTreeSet<IntVarId> = atoms
        .iter()
        .filter(|&&a| f.atom(a).is_equality())
        .flat_map(|&a| f.atom(a).vars())
        .collect();
    close_over_inequalities(f, &atoms, &mut set);
    set
}

/// Number of literal occurrences containing each integer variable.
pub fn variable_frequencies(f: &CnfFormula) -> Vec<usize> {
    let mut freq = vec![0; f.num_int_vars()];
    for lit in f.clauses().iter().flat_map(|c| c.literals()) {
        if let Literal::Arith { atom, .. } = *lit {
            for v in f.atom(atom).vars() {
                freq[v.index()] += 1;
            }
        }
    }
    freq
}

/// Variables occurring in more than `lambda` literals, closed like the
/// equality system, minus `eq_vars`.
pub fn build_high_frequency_system(f: &CnfFormula, lambda: usize, eq_vars: &BTreeSet<IntVarId>) -> BTreeSet<IntVarId> {
    let atoms = occurring_atoms(f);
    let freq = variable_frequencies(f);
    let mut set: BTreeSet<IntVarId> = (0..f.num_int_vars() as u32)
        .map(IntVarId)
        .filter(|v| freq[v.index()] > lambda)
        .collect();
    close_over_inequalities(f, &atoms, &mut set);
    set.retain(|v| !eq_vars.contains(v));
    set
}
