//! Context-constrained stochastic local search over the clausal form.
//!
//! Integer variables are initialized per subsystem from a CDCL(T) model,
//! then an integer mode (boundary-aware moves) and a Boolean mode (flips)
//! alternate under clause weighting until every clause is satisfied or the
//! step limit is reached.

mod moves;
mod partition;

use std::collections::HashSet;

use rand::Rng;

pub use moves::{
    bam, context_probability, feasible_interval, literal_delta, literal_interval, score, update_clause_weights,
    CcssError, LiteralStats, MoveKind, MoveOperation, MoveOperator, DEFAULT_SMOOTH_PROBABILITY,
};
pub use partition::{build_equality_system, build_high_frequency_system, variable_frequencies, SubsystemPartition};

use crate::model::{Assignment, AtomId, BoolVarId, CnfFormula, IntVarId, IntervalSet, Literal, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Frequency above which a variable belongs to the high-frequency system.
    pub lambda: usize,
    /// Base of the non-improving step limits that trigger a mode switch.
    pub mode_switch_base: usize,
    pub max_steps: u64,
    /// Width used to cap infinite rays before sampling.
    pub window: u64,
    pub smooth_probability: f64,
    pub operator: MoveOperator,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            lambda: 50,
            mode_switch_base: 20,
            max_steps: 100_000,
            window: 1000,
            smooth_probability: DEFAULT_SMOOTH_PROBABILITY,
            operator: MoveOperator::BoundaryAware,
        }
    }
}

/// Initial assignment: equality-system variables at zero, high-frequency
/// variables inside their feasible interval under `m_cdclt`, the rest in its
/// complement, Booleans at random.
pub fn isolation_based_initialize<R: Rng + ?Sized>(
    f: &CnfFormula,
    m_cdclt: Option<&Model>,
    partition: &SubsystemPartition,
    window: u64,
    rng: &mut R,
) -> Result<Assignment, CcssError> {
    let box_w = IntervalSet::full().cap(window);
    let mut a = Assignment::zeros(f);
    for v in 0..f.num_int_vars() as u32 {
        let x = IntVarId(v);
        if partition.eq_vars.contains(&x) {
            continue;
        }
        let range = match m_cdclt {
            None => box_w.clone(),
            Some(m) => {
                let feasible = feasible_interval(x, f, m)?;
                let chosen = if partition.hf_vars.contains(&x) { feasible } else { feasible.complement() };
                if chosen.is_empty() {
                    box_w.clone()
                } else {
                    chosen.cap(window)
                }
            }
        };
        a.set_int(x, range.sample_uniform(rng).expect("capped range is non-empty"));
    }
    for b in 0..f.num_bool_vars() {
        a.bool_values[b] = rng.gen_bool(0.5);
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Integer,
    Boolean,
}

/// Occurrence tables of a formula, shared by every search on it.
#[derive(Debug, Clone)]
pub struct Ccss<'a> {
    f: &'a CnfFormula,
    params: SearchParams,
    partition: SubsystemPartition,
    /// Atoms containing each integer variable, with its coefficient.
    var_atoms: Vec<Vec<(AtomId, i64)>>,
    /// Clauses (with literal polarity) each atom occurs in.
    atom_occ: Vec<Vec<(usize, bool)>>,
    bool_occ: Vec<Vec<(usize, bool)>>,
    /// Distinct arithmetic literals containing each integer variable.
    var_lits: Vec<Vec<Literal>>,
    has_int: Vec<bool>,
    has_bool: Vec<bool>,
}

impl<'a> Ccss<'a> {
    pub fn new(f: &'a CnfFormula, params: SearchParams) -> Self {
        let mut var_atoms = vec![Vec::new(); f.num_int_vars()];
        for (i, atom) in f.atoms().iter().enumerate() {
            for &(v, c) in atom.terms() {
                var_atoms[v.index()].push((AtomId(i as u32), c));
            }
        }
        let mut atom_occ = vec![Vec::new(); f.atoms().len()];
        let mut bool_occ = vec![Vec::new(); f.num_bool_vars()];
        let mut lits: HashSet<Literal> = HashSet::new();
        let mut has_int = vec![false; f.clauses().len()];
        let mut has_bool = vec![false; f.clauses().len()];
        for (c, clause) in f.clauses().iter().enumerate() {
            for &lit in clause.literals() {
                match lit {
                    Literal::Arith { atom, positive } => {
                        atom_occ[atom.index()].push((c, positive));
                        lits.insert(lit);
                        has_int[c] = true;
                    }
                    Literal::Bool { var, positive } => {
                        bool_occ[var.index()].push((c, positive));
                        has_bool[c] = true;
                    }
                }
            }
        }
        let mut var_lits = vec![Vec::new(); f.num_int_vars()];
        let mut sorted: Vec<Literal> = lits.into_iter().collect();
        sorted.sort_by_key(|l| match *l {
            Literal::Arith { atom, positive } => (atom, positive),
            Literal::Bool { .. } => unreachable!(),
        });
        for lit in sorted {
            let Literal::Arith { atom, .. } = lit else { unreachable!() };
            for v in f.atom(atom).vars() {
                var_lits[v.index()].push(lit);
            }
        }
        Ccss {
            f,
            params,
            partition: SubsystemPartition::new(f, params.lambda),
            var_atoms,
            atom_occ,
            bool_occ,
            var_lits,
            has_int,
            has_bool,
        }
    }

    pub fn partition(&self) -> &SubsystemPartition {
        &self.partition
    }

    /// One search from an isolation-based initialization; `None` when the
    /// step limit is reached first.
    pub fn search<R: Rng + ?Sized>(&self, m_cdclt: Option<&Model>, rng: &mut R) -> Result<Option<Model>, CcssError> {
        let init = isolation_based_initialize(self.f, m_cdclt, &self.partition, self.params.window, rng)?;
        self.search_from(init, rng)
    }

    /// Runs the search from a given assignment.
    pub fn search_from<R: Rng + ?Sized>(&self, init: Assignment, rng: &mut R) -> Result<Option<Model>, CcssError> {
        let mut st = State::new(self, init)?;
        let mut mode = Mode::Integer;
        // steps since the fewest falsified clauses seen in the current mode
        let mut non_improving = 0u64;
        let mut best = usize::MAX;
        while st.stats.step_total() < self.params.max_steps {
            if st.falsified.is_empty() {
                let m = st.alpha;
                debug_assert!(self.f.evaluate(&m)?);
                return Ok(self.f.evaluate(&m)?.then_some(m));
            }
            st.stats.observe();
            #[cfg(debug_assertions)]
            if st.stats.step_total() % 1000 == 0 {
                st.check_bookkeeping();
            }

            let (int_lits, bool_lits) = st.falsified_literal_counts();
            let any_int = st.falsified.iter().any(|&c| self.has_int[c]);
            let any_bool = st.falsified.iter().any(|&c| self.has_bool[c]);
            let forced = match mode {
                Mode::Integer if !any_int => Some(Mode::Boolean),
                Mode::Boolean if !any_bool => Some(Mode::Integer),
                _ => None,
            };
            if let Some(m) = forced {
                mode = m;
                non_improving = 0;
                best = usize::MAX;
            }
            match mode {
                Mode::Integer => st.integer_step(rng)?,
                Mode::Boolean => st.boolean_step(rng),
            }
            if st.falsified.len() < best {
                best = st.falsified.len();
                non_improving = 0;
                continue;
            }
            non_improving += 1;
            let share = match mode {
                Mode::Integer => int_lits,
                Mode::Boolean => bool_lits,
            } as f64
                / (int_lits + bool_lits).max(1) as f64;
            if non_improving as f64 > self.params.mode_switch_base as f64 * share {
                // postponed while the other mode has nothing to repair
                let other = match mode {
                    Mode::Integer => Mode::Boolean,
                    Mode::Boolean => Mode::Integer,
                };
                let usable = st.falsified.iter().any(|&c| match other {
                    Mode::Integer => self.has_int[c],
                    Mode::Boolean => self.has_bool[c],
                });
                if usable {
                    mode = other;
                    non_improving = 0;
                    best = usize::MAX;
                }
            }
        }
        if st.falsified.is_empty() && self.f.evaluate(&st.alpha)? {
            return Ok(Some(st.alpha));
        }
        Ok(None)
    }
}

/// Runs one CCSS search on `f_hat`, guided by a CDCL(T) model when present.
pub fn ccss_search<R: Rng + ?Sized>(
    f_hat: &CnfFormula,
    m_cdclt: Option<&Model>,
    params: SearchParams,
    rng: &mut R,
) -> Result<Option<Model>, CcssError> {
    Ccss::new(f_hat, params).search(m_cdclt, rng)
}

struct State<'s, 'a> {
    ctx: &'s Ccss<'a>,
    alpha: Assignment,
    lhs: Vec<i128>,
    atom_true: Vec<bool>,
    sat_count: Vec<u32>,
    weights: Vec<u64>,
    falsified: Vec<usize>,
    fpos: Vec<Option<usize>>,
    stats: LiteralStats,
    delta: Vec<i32>,
    touched: Vec<usize>,
}

impl<'s, 'a> State<'s, 'a> {
    fn new(ctx: &'s Ccss<'a>, alpha: Assignment) -> Result<Self, CcssError> {
        let f = ctx.f;
        let lhs = f.atoms().iter().map(|a| a.lhs(&alpha)).collect::<Result<Vec<_>, _>>()?;
        let atom_true: Vec<bool> = f.atoms().iter().zip(&lhs).map(|(a, &l)| a.holds_for(l)).collect();
        let n = f.clauses().len();
        let mut st = State {
            ctx,
            alpha,
            lhs,
            atom_true,
            sat_count: vec![0; n],
            weights: f.clauses().iter().map(|c| c.penalty_weight.max(1)).collect(),
            falsified: Vec::new(),
            fpos: vec![None; n],
            stats: LiteralStats::new(f.atoms().len()),
            delta: vec![0; n],
            touched: Vec::new(),
        };
        for (c, clause) in f.clauses().iter().enumerate() {
            st.sat_count[c] = clause.literals().iter().filter(|&&l| st.lit_true(l)).count() as u32;
            if st.sat_count[c] == 0 {
                st.mark_falsified(c);
            }
        }
        st.stats.start(&st.atom_true);
        Ok(st)
    }

    fn lit_true(&self, l: Literal) -> bool {
        match l {
            Literal::Arith { atom, positive } => self.atom_true[atom.index()] == positive,
            Literal::Bool { var, positive } => self.alpha.bool(var) == positive,
        }
    }

    fn mark_falsified(&mut self, c: usize) {
        self.fpos[c] = Some(self.falsified.len());
        self.falsified.push(c);
    }

    fn unmark_falsified(&mut self, c: usize) {
        let p = self.fpos[c].take().expect("clause was falsified");
        let last = self.falsified.pop().expect("non-empty");
        if last != c {
            self.falsified[p] = last;
            self.fpos[last] = Some(p);
        }
    }

    fn falsified_literal_counts(&self) -> (usize, usize) {
        let mut ints = 0;
        let mut bools = 0;
        for &c in &self.falsified {
            for l in self.ctx.f.clauses()[c].literals() {
                if l.is_arith() {
                    ints += 1;
                } else {
                    bools += 1;
                }
            }
        }
        (ints, bools)
    }

    /// Accumulates per-clause changes in the number of true literals caused
    /// by changing `x` to `value` into `self.delta`.
    fn collect_int_change(&mut self, x: IntVarId, value: i64) {
        let d = value as i128 - self.alpha.int(x) as i128;
        for &(a, c) in &self.ctx.var_atoms[x.index()] {
            let new_true = self.ctx.f.atom(a).holds_for(self.lhs[a.index()] + c as i128 * d);
            if new_true == self.atom_true[a.index()] {
                continue;
            }
            for &(cl, pol) in &self.ctx.atom_occ[a.index()] {
                if self.delta[cl] == 0 {
                    self.touched.push(cl);
                }
                self.delta[cl] += if new_true == pol { 1 } else { -1 };
            }
        }
    }

    fn collect_flip(&mut self, v: BoolVarId) {
        let new_value = !self.alpha.bool(v);
        for &(cl, pol) in &self.ctx.bool_occ[v.index()] {
            if self.delta[cl] == 0 {
                self.touched.push(cl);
            }
            self.delta[cl] += if new_value == pol { 1 } else { -1 };
        }
    }

    fn drain_score(&mut self) -> i64 {
        let mut s = 0i64;
        for &cl in &self.touched {
            let before = self.sat_count[cl] as i64;
            let after = before + self.delta[cl] as i64;
            if before == 0 && after > 0 {
                s += self.weights[cl] as i64;
            } else if before > 0 && after == 0 {
                s -= self.weights[cl] as i64;
            }
            self.delta[cl] = 0;
        }
        self.touched.clear();
        s
    }

    fn incremental_score(&mut self, kind: &MoveKind) -> i64 {
        match *kind {
            MoveKind::Assign { var, value, .. } => self.collect_int_change(var, value),
            MoveKind::Flip(v) => self.collect_flip(v),
        }
        self.drain_score()
    }

    fn apply(&mut self, kind: &MoveKind) {
        match *kind {
            MoveKind::Assign { var, value, .. } => {
                let d = value as i128 - self.alpha.int(var) as i128;
                self.alpha.set_int(var, value);
                for &(a, c) in &self.ctx.var_atoms[var.index()] {
                    let i = a.index();
                    self.lhs[i] += c as i128 * d;
                    let now = self.ctx.f.atom(a).holds_for(self.lhs[i]);
                    if now == self.atom_true[i] {
                        continue;
                    }
                    self.atom_true[i] = now;
                    self.stats.flip(a, now);
                    for &(cl, pol) in &self.ctx.atom_occ[i] {
                        self.bump(cl, now == pol);
                    }
                }
            }
            MoveKind::Flip(v) => {
                let now = !self.alpha.bool(v);
                self.alpha.set_bool(v, now);
                for &(cl, pol) in &self.ctx.bool_occ[v.index()] {
                    self.bump(cl, now == pol);
                }
            }
        }
    }

    fn bump(&mut self, cl: usize, up: bool) {
        if up {
            self.sat_count[cl] += 1;
            if self.sat_count[cl] == 1 {
                self.unmark_falsified(cl);
            }
        } else {
            self.sat_count[cl] -= 1;
            if self.sat_count[cl] == 0 {
                self.mark_falsified(cl);
            }
        }
    }

    fn context_of(&self, x: IntVarId) -> Vec<Literal> {
        self.ctx.var_lits[x.index()].iter().copied().filter(|&l| self.lit_true(l)).collect()
    }

    /// Integer-variable moves for every falsified arithmetic literal of the
    /// given clauses, one per (variable, literal) pair.
    fn int_candidates<R: Rng + ?Sized>(&mut self, clauses: &[usize], rng: &mut R) -> Result<Vec<MoveOperation>, CcssError> {
        let f = self.ctx.f;
        let mut seen: HashSet<(IntVarId, Literal)> = HashSet::new();
        let mut out = Vec::new();
        for &c in clauses {
            for &lit in f.clauses()[c].literals() {
                let Literal::Arith { atom, .. } = lit else { continue };
                for x in f.atom(atom).vars() {
                    if !seen.insert((x, lit)) {
                        continue;
                    }
                    let ctx = self.context_of(x);
                    let kind = match bam(
                        x,
                        lit,
                        &ctx,
                        f,
                        &self.alpha,
                        &self.stats,
                        self.ctx.params.window,
                        self.ctx.params.operator,
                        rng,
                    ) {
                        Ok(k) => k,
                        Err(CcssError::NoMove { .. }) => continue,
                        Err(e) => return Err(e),
                    };
                    let score = self.incremental_score(&kind);
                    out.push(MoveOperation { kind, score });
                }
            }
        }
        Ok(out)
    }

    fn flip_candidates(&mut self, clauses: &[usize]) -> Vec<MoveOperation> {
        let f = self.ctx.f;
        let mut seen: HashSet<BoolVarId> = HashSet::new();
        let mut out = Vec::new();
        for &c in clauses {
            for &lit in f.clauses()[c].literals() {
                let Literal::Bool { var, .. } = lit else { continue };
                if seen.insert(var) {
                    let kind = MoveKind::Flip(var);
                    let score = self.incremental_score(&kind);
                    out.push(MoveOperation { kind, score });
                }
            }
        }
        out
    }

    fn pick_best<R: Rng + ?Sized>(candidates: Vec<MoveOperation>, positive_only: bool, rng: &mut R) -> Option<MoveOperation> {
        let mut best: Option<MoveOperation> = None;
        let mut ties = 0u32;
        for m in candidates {
            if positive_only && m.score <= 0 {
                continue;
            }
            match &best {
                Some(b) if m.score < b.score => {}
                Some(b) if m.score == b.score => {
                    ties += 1;
                    if rng.gen_range(0..ties + 1) == 0 {
                        best = Some(m);
                    }
                }
                _ => {
                    best = Some(m);
                    ties = 0;
                }
            }
        }
        best
    }

    fn integer_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), CcssError> {
        let falsified = self.falsified.clone();
        let candidates = self.int_candidates(&falsified, rng)?;
        if let Some(m) = Self::pick_best(candidates, true, rng) {
            self.apply(&m.kind);
            return Ok(());
        }
        update_clause_weights(&mut self.weights, &falsified, self.ctx.params.smooth_probability, rng);
        let with_int: Vec<usize> = falsified.iter().copied().filter(|&c| self.ctx.has_int[c]).collect();
        if with_int.is_empty() {
            return Ok(());
        }
        let c = with_int[rng.gen_range(0..with_int.len())];
        let candidates = self.int_candidates(&[c], rng)?;
        if let Some(m) = Self::pick_best(candidates, false, rng) {
            self.apply(&m.kind);
        }
        Ok(())
    }

    fn boolean_step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let falsified = self.falsified.clone();
        let candidates = self.flip_candidates(&falsified);
        if let Some(m) = Self::pick_best(candidates, true, rng) {
            self.apply(&m.kind);
            return;
        }
        update_clause_weights(&mut self.weights, &falsified, self.ctx.params.smooth_probability, rng);
        let with_bool: Vec<usize> = falsified.iter().copied().filter(|&c| self.ctx.has_bool[c]).collect();
        if with_bool.is_empty() {
            return;
        }
        let c = with_bool[rng.gen_range(0..with_bool.len())];
        let candidates = self.flip_candidates(&[c]);
        if let Some(m) = Self::pick_best(candidates, false, rng) {
            self.apply(&m.kind);
        }
    }

    #[cfg(debug_assertions)]
    fn check_bookkeeping(&self) {
        let f = self.ctx.f;
        for (c, clause) in f.clauses().iter().enumerate() {
            let sat = f.evaluate_clause(clause, &self.alpha).expect("bounded values");
            assert_eq!(sat, self.sat_count[c] > 0, "clause {c} bookkeeping drifted");
            assert_eq!(!sat, self.fpos[c].is_some());
        }
    }
}
