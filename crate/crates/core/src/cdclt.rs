//! Stochastic CDCL(T) over the Boolean skeleton: uniformly random branching
//! variable and phase, first-UIP learning, Luby restarts, and full theory
//! checks at complete assignments.

use std::collections::BTreeMap;

use rand::Rng;

use crate::model::{Assignment, CnfFormula, IntVarId, Literal, Model, ModelError, Relation};
use crate::theory::{solve_integer, Constraint, IntegerOutcome, TheoryAssertion, TheoryError, DEFAULT_NODE_BUDGET};

/// Skeleton literal: variable `v` with sign bit in the lowest position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: usize, positive: bool) -> Lit {
        Lit((var as u32) << 1 | u32::from(!positive))
    }

    pub fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn negated(self) -> Lit {
        Lit(self.0 ^ 1)
    }

    fn code(self) -> usize {
        self.0 as usize
    }
}

const RESTART_UNIT: u64 = 64;

/// Trail, watches and clause database of the propositional search.
#[derive(Debug, Clone)]
pub struct SkeletonState {
    value: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    clauses: Vec<Vec<Lit>>,
    num_original: usize,
    watches: Vec<Vec<usize>>,
    /// Variables taking part in the search that are currently unassigned.
    unassigned: Vec<usize>,
    position: Vec<Option<usize>>,
    seen: Vec<bool>,
    inconsistent: bool,
}

impl SkeletonState {
    /// A state over `num_vars` variables of which only those listed in
    /// `active` are ever decided.
    pub fn new(num_vars: usize, active: impl IntoIterator<Item = usize>) -> Self {
        let mut s = SkeletonState {
            value: vec![None; num_vars],
            level: vec![0; num_vars],
            reason: vec![None; num_vars],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            clauses: Vec::new(),
            num_original: 0,
            watches: vec![Vec::new(); 2 * num_vars],
            unassigned: Vec::new(),
            position: vec![None; num_vars],
            seen: vec![false; num_vars],
            inconsistent: false,
        };
        for v in active {
            if s.position[v].is_none() {
                s.position[v] = Some(s.unassigned.len());
                s.unassigned.push(v);
            }
        }
        s
    }

    pub fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value[l.var()].map(|b| b == l.is_positive())
    }

    pub fn var_value(&self, v: usize) -> Option<bool> {
        self.value[v]
    }

    pub fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    pub fn level_of(&self, v: usize) -> u32 {
        self.level[v]
    }

    pub fn trail(&self) -> &[Lit] {
        &self.trail
    }

    pub fn is_inconsistent(&self) -> bool {
        self.inconsistent
    }

    pub fn learnt_clauses(&self) -> &[Vec<Lit>] {
        &self.clauses[self.num_original..]
    }

    pub fn clause(&self, c: usize) -> &[Lit] {
        &self.clauses[c]
    }

    /// Adds a problem clause at decision level 0.
    pub fn add_clause(&mut self, lits: &[Lit]) {
        debug_assert_eq!(self.decision_level(), 0);
        let mut lits = lits.to_vec();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            return;
        }
        let c = self.clauses.len();
        match lits.len() {
            0 => self.inconsistent = true,
            1 => match self.lit_value(lits[0]) {
                None => self.enqueue(lits[0], Some(c)),
                Some(false) => self.inconsistent = true,
                Some(true) => {}
            },
            _ => {
                self.watches[lits[0].code()].push(c);
                self.watches[lits[1].code()].push(c);
            }
        }
        self.clauses.push(lits);
        self.num_original = self.clauses.len();
    }

    fn enqueue(&mut self, l: Lit, reason: Option<usize>) {
        let v = l.var();
        self.value[v] = Some(l.is_positive());
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
        if let Some(p) = self.position[v] {
            let last = *self.unassigned.last().expect("assigned variable was listed");
            self.unassigned.swap_remove(p);
            if last != v {
                self.position[last] = Some(p);
            }
            self.position[v] = Some(usize::MAX);
        }
    }

    /// Picks an unassigned variable uniformly at random, gives it a random
    /// phase at a new decision level and returns the decision.
    pub fn decide<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Lit> {
        if self.unassigned.is_empty() {
            return None;
        }
        let v = self.unassigned[rng.gen_range(0..self.unassigned.len())];
        let l = Lit::new(v, rng.gen_bool(0.5));
        self.trail_lim.push(self.trail.len());
        self.enqueue(l, None);
        Some(l)
    }

    /// Unit propagation to fixpoint; returns the first falsified clause.
    pub fn propagate(&mut self) -> Option<usize> {
        if self.inconsistent {
            return Some(usize::MAX);
        }
        while self.qhead < self.trail.len() {
            let false_lit = self.trail[self.qhead].negated();
            self.qhead += 1;
            let watching = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut keep = Vec::with_capacity(watching.len());
            let mut conflict = None;
            for (i, &c) in watching.iter().enumerate() {
                if conflict.is_some() {
                    keep.extend_from_slice(&watching[i..]);
                    break;
                }
                let clause = &mut self.clauses[c];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                if self.value[first.var()].map(|b| b == first.is_positive()) == Some(true) {
                    keep.push(c);
                    continue;
                }
                let replacement = (2..clause.len()).find(|&k| {
                    let l = clause[k];
                    self.value[l.var()].map(|b| b == l.is_positive()) != Some(false)
                });
                if let Some(k) = replacement {
                    clause.swap(1, k);
                    let w = clause[1];
                    self.watches[w.code()].push(c);
                    continue;
                }
                keep.push(c);
                match self.lit_value(first) {
                    Some(false) => conflict = Some(c),
                    _ => self.enqueue(first, Some(c)),
                }
            }
            self.watches[false_lit.code()] = keep;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    pub fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.trail_lim[level as usize];
        for i in (start..self.trail.len()).rev() {
            let v = self.trail[i].var();
            self.value[v] = None;
            self.reason[v] = None;
            if self.position[v].is_some() {
                self.position[v] = Some(self.unassigned.len());
                self.unassigned.push(v);
            }
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(level as usize);
        self.qhead = start;
    }

    /// First-UIP analysis of a falsified clause. The learnt clause is added,
    /// the search jumps back and the asserting literal is enqueued. Returns
    /// the backjump level, or −1 when the conflict does not depend on any
    /// decision.
    pub fn resolve_conflict(&mut self, conflict: usize) -> i64 {
        if conflict == usize::MAX {
            return -1;
        }
        let max_level = self.clauses[conflict].iter().map(|l| self.level[l.var()]).max().unwrap_or(0);
        if max_level == 0 {
            self.inconsistent = true;
            return -1;
        }
        self.backtrack(max_level);
        let current = self.decision_level();

        let mut learnt = vec![Lit(0)];
        let mut pending = 0usize;
        let mut p: Option<Lit> = None;
        let mut clause = conflict;
        let mut idx = self.trail.len();
        loop {
            let skip = usize::from(p.is_some());
            for k in skip..self.clauses[clause].len() {
                let q = self.clauses[clause][k];
                let v = q.var();
                if self.seen[v] || self.level[v] == 0 {
                    continue;
                }
                self.seen[v] = true;
                if self.level[v] == current {
                    pending += 1;
                } else {
                    learnt.push(q);
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var()] {
                    break;
                }
            }
            let lit = self.trail[idx];
            self.seen[lit.var()] = false;
            pending -= 1;
            p = Some(lit);
            if pending == 0 {
                break;
            }
            clause = self.reason[lit.var()].expect("implied literal has a reason");
        }
        learnt[0] = p.expect("conflict has a current-level literal").negated();
        for l in &learnt[1..] {
            self.seen[l.var()] = false;
        }

        let mut bt = 0;
        if learnt.len() > 1 {
            let (k, _) = learnt
                .iter()
                .enumerate()
                .skip(1)
                .max_by_key(|(_, l)| self.level[l.var()])
                .expect("non-unit learnt clause");
            learnt.swap(1, k);
            bt = self.level[learnt[1].var()];
        }
        let c = self.clauses.len();
        if learnt.len() > 1 {
            self.watches[learnt[0].code()].push(c);
            self.watches[learnt[1].code()].push(c);
        }
        let asserting = learnt[0];
        self.clauses.push(learnt);
        self.backtrack(bt);
        self.enqueue(asserting, Some(c));
        bt as i64
    }

    /// Records a clause that is falsified by the current trail (a theory
    /// lemma) and returns its index for conflict analysis.
    fn add_falsified_clause(&mut self, mut lits: Vec<Lit>) -> usize {
        lits.sort_by_key(|l| std::cmp::Reverse(self.level[l.var()]));
        let c = self.clauses.len();
        if lits.len() > 1 {
            self.watches[lits[0].code()].push(c);
            self.watches[lits[1].code()].push(c);
        }
        self.clauses.push(lits);
        c
    }
}

fn luby(mut i: u64) -> u64 {
    // i-th element (0-based) of 1 1 2 1 1 2 4 ...
    let (mut size, mut seq) = (1u64, 0u32);
    while size < i + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != i {
        size = (size - 1) >> 1;
        seq -= 1;
        i %= size;
    }
    1 << seq
}

/// The preprocessed formula with some integer variables pinned.
#[derive(Debug, Clone)]
pub struct UnderApproximation<'a> {
    pub base: &'a CnfFormula,
    pub fixed_values: BTreeMap<IntVarId, i64>,
}

impl<'a> UnderApproximation<'a> {
    pub fn exact(base: &'a CnfFormula) -> Self {
        UnderApproximation { base, fixed_values: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CdclLimits {
    pub max_conflicts: u64,
    pub theory_budget: usize,
}

impl Default for CdclLimits {
    fn default() -> Self {
        CdclLimits { max_conflicts: 100_000, theory_budget: DEFAULT_NODE_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Model),
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CdclError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("theory witness overflows 64 bits")]
    Overflow,
    #[error("assignment built from a complete trail falsifies the formula")]
    Verification,
}

fn skeleton_lit(f: &CnfFormula, lit: Literal) -> Lit {
    match lit {
        Literal::Bool { var, positive } => Lit::new(var.index(), positive),
        Literal::Arith { atom, positive } => Lit::new(f.skeleton_encoder(atom), positive),
    }
}

/// Runs the stochastic CDCL(T) search on `f_under`.
///
/// Returned models assign every variable of the base formula, agree with
/// the fixed values and satisfy the base formula.
pub fn solve<R: Rng + ?Sized>(
    f_under: &UnderApproximation<'_>,
    rng: &mut R,
    limits: CdclLimits,
) -> Result<SolveOutcome, CdclError> {
    let base = f_under.base;
    let f = base.split_negative_equalities()?;
    let nb = f.num_bool_vars();
    let mut active = vec![false; f.num_skeleton_vars()];
    let clauses: Vec<Vec<Lit>> = f
        .clauses()
        .iter()
        .map(|c| c.literals().iter().map(|&l| skeleton_lit(&f, l)).collect())
        .collect();
    for l in clauses.iter().flatten() {
        active[l.var()] = true;
    }
    let mut state = SkeletonState::new(f.num_skeleton_vars(), (0..active.len()).filter(|&v| active[v]));
    for c in &clauses {
        state.add_clause(c);
    }
    let fixed: Vec<Constraint> = f_under.fixed_values.iter().map(|(&v, &x)| Constraint::fixed(v, x)).collect();

    let mut conflicts = 0u64;
    let mut restarts = 0u64;
    let mut since_restart = 0u64;
    loop {
        if let Some(c) = state.propagate() {
            conflicts += 1;
            since_restart += 1;
            if state.resolve_conflict(c) < 0 {
                return Ok(SolveOutcome::Unsat);
            }
            if conflicts >= limits.max_conflicts {
                return Ok(SolveOutcome::Unknown);
            }
            if since_restart >= RESTART_UNIT * luby(restarts) {
                restarts += 1;
                since_restart = 0;
                state.backtrack(0);
            }
            continue;
        }
        if state.decide(rng).is_some() {
            continue;
        }

        // complete Boolean assignment: consult the theory
        let mut asserted: Vec<(TheoryAssertion, Lit)> = Vec::new();
        for (i, atom) in f.atoms().iter().enumerate() {
            let enc = nb + i;
            let Some(value) = state.var_value(enc).filter(|_| active[enc]) else {
                continue;
            };
            if !value && atom.relation() == Relation::Eq {
                // equalities occur only positively after splitting
                continue;
            }
            let a = TheoryAssertion { atom: crate::model::AtomId(i as u32), positive: value };
            asserted.push((a, Lit::new(enc, value)));
        }
        let mut constraints = asserted
            .iter()
            .map(|&(a, _)| crate::theory::assertion_constraint(a, &f))
            .collect::<Result<Vec<_>, _>>()
            .map_err(theory_error)?;
        constraints.extend(fixed.iter().cloned());
        let outcome = match solve_integer(&constraints, f.num_int_vars(), limits.theory_budget) {
            Ok(o) => o,
            Err(TheoryError::BudgetExhausted(_)) => return Ok(SolveOutcome::Unknown),
            Err(e) => return Err(theory_error(e)),
        };
        match outcome {
            IntegerOutcome::Sat(values) => {
                let mut m = Assignment::new(values, vec![false; nb]);
                for v in 0..nb {
                    let b = match state.var_value(v) {
                        Some(b) if active[v] => b,
                        _ => rng.gen_bool(0.5),
                    };
                    m.bool_values[v] = b;
                }
                if !base.evaluate(&m)? {
                    return Err(CdclError::Verification);
                }
                return Ok(SolveOutcome::Sat(m));
            }
            IntegerOutcome::Unsat(core) => {
                let blocking: Vec<Lit> = core
                    .into_iter()
                    .filter(|&i| i < asserted.len())
                    .map(|i| asserted[i].1.negated())
                    .collect();
                if blocking.is_empty() {
                    return Ok(SolveOutcome::Unsat);
                }
                let c = state.add_falsified_clause(blocking);
                conflicts += 1;
                since_restart += 1;
                if state.resolve_conflict(c) < 0 {
                    return Ok(SolveOutcome::Unsat);
                }
                if conflicts >= limits.max_conflicts {
                    return Ok(SolveOutcome::Unknown);
                }
            }
        }
    }
}

fn theory_error(e: TheoryError) -> CdclError {
    match e {
        TheoryError::Overflow => CdclError::Overflow,
        // splitting guarantees neither of these reaches here
        other => panic!("unexpected theory failure: {other}"),
    }
}

/// Pins each integer variable occurring in `f_hat` to its value in `m_ls`
/// independently with probability `p`.
pub fn fix_partial_assignment<'a, R: Rng + ?Sized>(
    f_hat: &'a CnfFormula,
    m_ls: &Model,
    p: f64,
    rng: &mut R,
) -> UnderApproximation<'a> {
    let fixed_values = f_hat
        .occurring_int_vars()
        .into_iter()
        .filter(|_| rng.gen_bool(p))
        .map(|v| (v, m_ls.int(v)))
        .collect();
    UnderApproximation { base: f_hat, fixed_values }
}
