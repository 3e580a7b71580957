use rand::Rng;

use crate::model::{
    Assignment, AtomId, BoolVarId, CnfFormula, IntVarId, IntervalSet, LinearAtom, Literal, ModelError, Relation,
    NEG_INF, POS_INF,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CcssError {
    #[error("no value of {var} satisfies the literal")]
    NoMove { var: IntVarId },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which integer move the search uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MoveOperator {
    /// Boundary-aware move: a random value between the target literal's
    /// threshold and the retained contextual bounds.
    #[default]
    BoundaryAware,
    /// Critical move: exactly the threshold value.
    Critical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveKind {
    Assign {
        var: IntVarId,
        literal: Literal,
        value: i64,
        /// Interval the value was drawn from.
        interval: IntervalSet,
    },
    Flip(BoolVarId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveOperation {
    pub kind: MoveKind,
    pub score: i64,
}

fn clamp_upper(u: i128) -> IntervalSet {
    if u >= POS_INF as i128 {
        IntervalSet::full()
    } else if u <= NEG_INF as i128 {
        IntervalSet::empty()
    } else {
        IntervalSet::at_most(u as i64)
    }
}

fn clamp_lower(l: i128) -> IntervalSet {
    if l <= NEG_INF as i128 {
        IntervalSet::full()
    } else if l >= POS_INF as i128 {
        IntervalSet::empty()
    } else {
        IntervalSet::at_least(l as i64)
    }
}

/// Values of a variable with coefficient `coef` that make the literal
/// `(atom ⋈ k) == positive` true when the other terms contribute `rest`.
pub(crate) fn solution_set(atom: &LinearAtom, positive: bool, coef: i64, rest: i128) -> IntervalSet {
    let r = atom.constant() as i128 - rest;
    let a = coef as i128;
    match (atom.relation(), positive) {
        // a·x ≤ r
        (Relation::Le, true) => {
            if a > 0 {
                clamp_upper(r.div_euclid(a))
            } else {
                clamp_lower(ceil_div(r, a))
            }
        }
        // a·x ≥ r + 1
        (Relation::Le, false) => {
            if a > 0 {
                clamp_lower(ceil_div(r + 1, a))
            } else {
                clamp_upper(floor_div(r + 1, a))
            }
        }
        (Relation::Eq, positive) => {
            let point = (r % a == 0)
                .then(|| r / a)
                .filter(|&p| p > NEG_INF as i128 && p < POS_INF as i128)
                .map(|p| p as i64);
            match (point, positive) {
                (Some(p), true) => IntervalSet::point(p),
                (None, true) => IntervalSet::empty(),
                (Some(p), false) => IntervalSet::point(p).complement(),
                (None, false) => IntervalSet::full(),
            }
        }
    }
}

fn floor_div(n: i128, d: i128) -> i128 {
    let q = n / d;
    if (n % d != 0) && ((n < 0) != (d < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(n: i128, d: i128) -> i128 {
    let q = n / d;
    if (n % d != 0) && ((n < 0) == (d < 0)) {
        q + 1
    } else {
        q
    }
}

/// Solution set in `x` of an arithmetic literal with every other variable
/// fixed to its value in `alpha`.
pub fn literal_interval(
    f: &CnfFormula,
    lit: Literal,
    x: IntVarId,
    alpha: &Assignment,
) -> Result<IntervalSet, ModelError> {
    let Literal::Arith { atom, positive } = lit else {
        panic!("literal_interval needs an arithmetic literal");
    };
    let a = f.atom(atom);
    let coef = a.coefficient(x);
    let lhs = a.lhs(alpha)?;
    if coef == 0 {
        return Ok(if a.holds_for(lhs) == positive { IntervalSet::full() } else { IntervalSet::empty() });
    }
    let rest = lhs - coef as i128 * alpha.int(x) as i128;
    Ok(solution_set(a, positive, coef, rest))
}

/// Range of values `x` can take without falsifying any clause that `m`
/// satisfies through a literal containing `x`.
///
/// Per clause the true literals containing `x` are united; across clauses
/// the results are intersected. Clauses without such a literal are skipped.
pub fn feasible_interval(x: IntVarId, f: &CnfFormula, m: &Assignment) -> Result<IntervalSet, ModelError> {
    let mut out = IntervalSet::full();
    for clause in f.clauses() {
        let mut union: Option<IntervalSet> = None;
        for &lit in clause.literals() {
            let Literal::Arith { atom, .. } = lit else { continue };
            if !f.atom(atom).contains(x) || !f.evaluate_literal(lit, m)? {
                continue;
            }
            let s = literal_interval(f, lit, x, m)?;
            union = Some(match union {
                None => s,
                Some(u) => u.union(&s),
            });
        }
        if let Some(u) = union {
            out = out.intersect(&u);
        }
    }
    Ok(out)
}

/// Nearest member of `s` to `v` other than `v`; ties go upward.
fn nearest_other(s: &IntervalSet, v: i64) -> Option<i64> {
    let mut below: Option<i64> = None;
    let mut above: Option<i64> = None;
    for &(lo, hi) in s.intervals() {
        if hi < v {
            below = Some(hi);
        } else if lo > v {
            above = Some(lo);
            break;
        } else {
            // v ∈ [lo, hi]
            if v > lo {
                below = Some(v - 1);
            }
            if v < hi {
                above = Some(v + 1);
            }
            break;
        }
    }
    match (below, above) {
        (Some(b), Some(a)) => Some(if (v as i128 - b as i128) < (a as i128 - v as i128) { b } else { a }),
        (b, a) => a.or(b),
    }
}

/// Smallest-magnitude nonzero change to `x` that makes `ell` true, with
/// upward changes preferred on ties.
pub fn literal_delta(x: IntVarId, ell: Literal, f: &CnfFormula, alpha: &Assignment) -> Result<i64, CcssError> {
    let s = literal_interval(f, ell, x, alpha)?;
    let cur = alpha.int(x);
    let target = nearest_other(&s, cur).ok_or(CcssError::NoMove { var: x })?;
    let delta = target as i128 - cur as i128;
    i64::try_from(delta).map_err(|_| CcssError::NoMove { var: x })
}

/// How often each arithmetic literal has been true so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralStats {
    step_total: u64,
    true_steps: Vec<u64>,
    /// Step from which the atom has been continuously true, if it is true.
    true_since: Vec<Option<u64>>,
}

impl LiteralStats {
    pub fn new(num_atoms: usize) -> Self {
        LiteralStats { step_total: 0, true_steps: vec![0; num_atoms], true_since: vec![None; num_atoms] }
    }

    /// Stats with explicit counts for the positive literals of each atom.
    pub fn from_counts(step_total: u64, positive_counts: &[u64]) -> Self {
        assert!(positive_counts.iter().all(|&c| c <= step_total));
        LiteralStats {
            step_total,
            true_steps: positive_counts.to_vec(),
            true_since: vec![None; positive_counts.len()],
        }
    }

    pub fn step_total(&self) -> u64 {
        self.step_total
    }

    fn atom_true_steps(&self, atom: AtomId) -> u64 {
        let open = self.true_since[atom.index()].map_or(0, |s| (self.step_total + 1).saturating_sub(s));
        self.true_steps[atom.index()] + open
    }

    pub fn step_sat(&self, lit: Literal) -> u64 {
        match lit {
            Literal::Arith { atom, positive: true } => self.atom_true_steps(atom),
            Literal::Arith { atom, positive: false } => self.step_total - self.atom_true_steps(atom),
            Literal::Bool { .. } => panic!("only arithmetic literals are tracked"),
        }
    }

    /// Starts tracking with the initial truth value of every atom.
    pub(crate) fn start(&mut self, atom_true: &[bool]) {
        for (i, &t) in atom_true.iter().enumerate() {
            self.true_since[i] = t.then_some(1);
        }
    }

    /// Counts one more iteration in which every literal's current value is
    /// observed.
    pub(crate) fn observe(&mut self) {
        self.step_total += 1;
    }

    /// Notes that an atom changed value during the current iteration's move.
    pub(crate) fn flip(&mut self, atom: AtomId, now_true: bool) {
        let i = atom.index();
        if now_true {
            self.true_since[i] = Some(self.step_total + 1);
        } else if let Some(since) = self.true_since[i].take() {
            self.true_steps[i] += (self.step_total + 1).saturating_sub(since);
        }
    }
}

/// `1 − step_sat(ℓ)/step_total`, or 1 before any step has been taken.
pub fn context_probability(ell: Literal, stats: &LiteralStats) -> f64 {
    if stats.step_total == 0 {
        return 1.0;
    }
    1.0 - stats.step_sat(ell) as f64 / stats.step_total as f64
}

/// Boundary-aware move of `x` towards satisfying the falsified literal
/// `ell`.
///
/// The side facing the move is fixed at `alpha(x) + δ`; the far side is the
/// end of the target literal's own solution component, tightened by those
/// contextual literals retained by a coin with probability `P(ℓᵢ)`. Bounds
/// that would cut off the fixed side are discarded. Rays are capped to
/// `window`. With [`MoveOperator::Critical`] the value is the threshold itself.
#[allow(clippy::too_many_arguments)]
pub fn bam<R: Rng + ?Sized>(
    x: IntVarId,
    ell: Literal,
    ctx: &[Literal],
    f: &CnfFormula,
    alpha: &Assignment,
    stats: &LiteralStats,
    window: u64,
    operator: MoveOperator,
    rng: &mut R,
) -> Result<MoveKind, CcssError> {
    let cur = alpha.int(x);
    let delta = literal_delta(x, ell, f, alpha)?;
    let threshold = cur + delta;
    if operator == MoveOperator::Critical {
        return Ok(MoveKind::Assign { var: x, literal: ell, value: threshold, interval: IntervalSet::point(threshold) });
    }
    let target = literal_interval(f, ell, x, alpha)?;
    let (lo, hi) = target.component_of(threshold).expect("threshold lies in the target set");
    let upward = delta > 0;
    let mut far = if upward { hi } else { lo };
    for &c in ctx {
        if c == ell || !rng.gen_bool(context_probability(c, stats).clamp(0.0, 1.0)) {
            continue;
        }
        let s = literal_interval(f, c, x, alpha)?;
        let Some((clo, chi)) = s.component_of(cur) else { continue };
        if upward {
            if chi >= threshold && chi < far {
                far = chi;
            }
        } else if clo <= threshold && clo > far {
            far = clo;
        }
    }
    let interval = if upward {
        IntervalSet::range(threshold, far)
    } else {
        IntervalSet::range(far, threshold)
    }
    .cap(window);
    let value = interval.sample_uniform(rng).expect("interval contains the threshold");
    Ok(MoveKind::Assign { var: x, literal: ell, value, interval })
}

fn falsified_weight(f: &CnfFormula, a: &Assignment, weights: &[u64]) -> Result<u64, ModelError> {
    let mut total = 0;
    for (c, clause) in f.clauses().iter().enumerate() {
        if !f.evaluate_clause(clause, a)? {
            total += weights[c];
        }
    }
    Ok(total)
}

pub(crate) fn apply_to(kind: &MoveKind, a: &mut Assignment) {
    match *kind {
        MoveKind::Assign { var, value, .. } => a.set_int(var, value),
        MoveKind::Flip(v) => {
            let b = a.bool(v);
            a.set_bool(v, !b);
        }
    }
}

/// Decrease of the total weight of falsified clauses caused by the move,
/// computed from scratch.
pub fn score(kind: &MoveKind, f: &CnfFormula, alpha: &Assignment, weights: &[u64]) -> Result<i64, ModelError> {
    let before = falsified_weight(f, alpha, weights)?;
    let mut after_alpha = alpha.clone();
    apply_to(kind, &mut after_alpha);
    let after = falsified_weight(f, &after_alpha, weights)?;
    Ok(before as i64 - after as i64)
}

pub const DEFAULT_SMOOTH_PROBABILITY: f64 = 0.05;

/// PAWS-style update: usually bump every falsified clause, occasionally
/// decay every clause heavier than 1.
pub fn update_clause_weights<R: Rng + ?Sized>(weights: &mut [u64], falsified: &[usize], sp: f64, rng: &mut R) {
    if rng.gen_bool(sp) {
        for w in weights.iter_mut() {
            if *w > 1 {
                *w -= 1;
            }
        }
    } else {
        for &c in falsified {
            weights[c] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::three_var_example;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(i: u32) -> IntVarId {
        IntVarId(i)
    }

    fn pos(a: u32) -> Literal {
        Literal::arith(AtomId(a), true)
    }

    fn single_atom(atom: LinearAtom, vars: usize) -> CnfFormula {
        let mut f = CnfFormula::new();
        for i in 0..vars {
            f.add_int_var(format!("x{i}"), false);
        }
        let id = f.intern_atom(atom);
        f.add_clause([Literal::arith(id, true)]).unwrap();
        f
    }

    #[test]
    fn feasible_interval_of_worked_example() {
        let f = three_var_example();
        let m = Assignment::from_ints(vec![10, 7, 7]);
        let s = feasible_interval(v(0), &f, &m).unwrap();
        assert_eq!(s, IntervalSet::range(8, 10));
        assert_eq!(
            s.complement(),
            IntervalSet::from_intervals([(NEG_INF, 7), (11, POS_INF)])
        );
    }

    #[test]
    fn variable_outside_true_literals_is_unconstrained() {
        let mut f = three_var_example();
        let w = f.add_int_var("w", false);
        let m = Assignment::from_ints(vec![10, 7, 7, 3]);
        assert!(feasible_interval(w, &f, &m).unwrap().is_full());
    }

    #[test]
    fn deltas_of_the_critical_move_example() {
        // x1 − 5x2 ≤ −5 at the origin
        let f = single_atom(LinearAtom::le(&[(v(0), 1), (v(1), -5)], -5), 2);
        let alpha = Assignment::from_ints(vec![0, 0]);
        assert!(!f.evaluate(&alpha).unwrap());
        assert_eq!(literal_delta(v(0), pos(0), &f, &alpha).unwrap(), -5);
        assert_eq!(literal_delta(v(1), pos(0), &f, &alpha).unwrap(), 1);
        let after = Assignment::from_ints(vec![-5, 0]);
        assert!(f.evaluate(&after).unwrap());
    }

    #[test]
    fn parity_blocks_the_move() {
        let f = single_atom(LinearAtom::eq(&[(v(0), 2)], 3), 1);
        let alpha = Assignment::from_ints(vec![0]);
        assert_eq!(literal_delta(v(0), pos(0), &f, &alpha), Err(CcssError::NoMove { var: v(0) }));
    }

    #[test]
    fn disequality_moves_upward_on_ties() {
        let f = single_atom(LinearAtom::eq(&[(v(0), 1)], 4), 1);
        let alpha = Assignment::from_ints(vec![4]);
        let neq = Literal::arith(AtomId(0), false);
        assert_eq!(literal_delta(v(0), neq, &f, &alpha).unwrap(), 1);
    }

    #[test]
    fn probabilities_follow_the_counts() {
        let stats = LiteralStats::from_counts(100, &[0, 100, 25]);
        assert_eq!(context_probability(pos(0), &stats), 1.0);
        assert_eq!(context_probability(pos(1), &stats), 0.0);
        assert_eq!(context_probability(pos(2), &stats), 0.75);
        assert_eq!(context_probability(Literal::arith(AtomId(2), false), &stats), 0.25);
        assert_eq!(context_probability(pos(0), &LiteralStats::new(1)), 1.0);
    }

    #[test]
    fn lazy_counting_matches_observations() {
        let mut s = LiteralStats::new(1);
        s.start(&[true]);
        s.observe(); // step 1: true
        s.flip(AtomId(0), false);
        s.observe(); // step 2: false
        s.observe(); // step 3: false
        s.flip(AtomId(0), true);
        s.observe(); // step 4: true
        assert_eq!(s.step_sat(pos(0)), 2);
        assert_eq!(s.step_sat(Literal::arith(AtomId(0), false)), 2);
    }

    #[test]
    fn boundary_aware_move_of_worked_example() {
        let f = three_var_example();
        let alpha = Assignment::from_ints(vec![0, 0, 0]);
        let l1 = pos(0);
        let l4 = pos(3);
        let always = LiteralStats::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [false; 3];
        for _ in 0..200 {
            let MoveKind::Assign { value, interval, .. } =
                bam(v(0), l1, &[l4], &f, &alpha, &always, 1000, MoveOperator::BoundaryAware, &mut rng).unwrap()
            else {
                unreachable!()
            };
            assert_eq!(interval, IntervalSet::range(1, 3));
            seen[(value - 1) as usize] = true;
        }
        assert_eq!(seen, [true; 3]);
        // the context literal is never retained once it has always held
        let never = LiteralStats::from_counts(10, &[0, 0, 0, 10]);
        let MoveKind::Assign { interval, .. } =
            bam(v(0), l1, &[l4], &f, &alpha, &never, 1000, MoveOperator::BoundaryAware, &mut rng).unwrap()
        else {
            unreachable!()
        };
        assert_eq!(interval, IntervalSet::range(1, 1001));
    }

    #[test]
    fn equality_target_forces_its_value() {
        let f = single_atom(LinearAtom::eq(&[(v(0), 1)], 7), 1);
        let alpha = Assignment::from_ints(vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = bam(v(0), pos(0), &[], &f, &alpha, &LiteralStats::new(1), 1000, MoveOperator::BoundaryAware, &mut rng)
            .unwrap();
        assert!(matches!(m, MoveKind::Assign { value: 7, .. }));
    }

    #[test]
    fn critical_move_uses_the_threshold() {
        let f = three_var_example();
        let alpha = Assignment::from_ints(vec![0, 0, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = bam(v(0), pos(0), &[pos(3)], &f, &alpha, &LiteralStats::new(4), 1000, MoveOperator::Critical, &mut rng)
            .unwrap();
        assert!(matches!(m, MoveKind::Assign { value: 1, .. }));
    }

    #[test]
    fn downward_move_respects_lower_context() {
        // target x ≤ −3 from x = 0, context −x ≤ 10 keeps x ≥ −10
        let mut f = CnfFormula::new();
        let x = f.add_int_var("x", false);
        let t = f.intern_atom(LinearAtom::le(&[(x, 1)], -3));
        let c = f.intern_atom(LinearAtom::le(&[(x, -1)], 10));
        f.add_clause([Literal::arith(t, true)]).unwrap();
        f.add_clause([Literal::arith(c, true)]).unwrap();
        let alpha = Assignment::from_ints(vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = bam(x, Literal::arith(t, true), &[Literal::arith(c, true)], &f, &alpha, &LiteralStats::new(2), 1000,
            MoveOperator::BoundaryAware, &mut rng)
        .unwrap();
        let MoveKind::Assign { interval, value, .. } = m else { unreachable!() };
        assert_eq!(interval, IntervalSet::range(-10, -3));
        assert!((-10..=-3).contains(&value));
    }

    #[test]
    fn scores_by_hand() {
        let mut f = CnfFormula::new();
        let p = f.add_bool_var("p", false);
        let q = f.add_bool_var("q", false);
        f.add_clause([Literal::bool(p, true)]).unwrap();
        f.add_clause([Literal::bool(p, false), Literal::bool(q, true)]).unwrap();
        let a = Assignment::new(vec![], vec![false, false]);
        // flipping p fixes clause 0 (weight 1) and breaks clause 1 (weight 2)
        assert_eq!(score(&MoveKind::Flip(p), &f, &a, &[1, 1]).unwrap(), 0);
        assert_eq!(score(&MoveKind::Flip(p), &f, &a, &[1, 2]).unwrap(), -1);
        assert_eq!(score(&MoveKind::Flip(p), &f, &a, &[2, 1]).unwrap(), 1);
        assert_eq!(score(&MoveKind::Flip(q), &f, &a, &[1, 1]).unwrap(), 0);
    }

    #[test]
    fn weight_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = vec![1, 3];
        update_clause_weights(&mut w, &[0], 0.0, &mut rng);
        assert_eq!(w, vec![2, 3]);
        let mut w = vec![3, 1];
        update_clause_weights(&mut w, &[1], 1.0, &mut rng);
        assert_eq!(w, vec![2, 1]);
    }
}
