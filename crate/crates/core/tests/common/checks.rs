//! Randomized oracle checks. Each returns a short summary on success and a
//! description of the first disagreement otherwise.

use std::collections::BTreeSet;

use highdiv::ccss::{bam, feasible_interval, CcssError, LiteralStats, MoveKind, MoveOperator, SubsystemPartition};
use highdiv::cdclt::{self, CdclLimits, SolveOutcome, UnderApproximation};
use highdiv::coverage::CoverageAccumulator;
use highdiv::model::{Assignment, CnfFormula, IntVarId, IntervalSet, LinearAtom, Literal};
use highdiv::preprocess::{equation_solving, model_convert, PreprocessError};
use highdiv::smtlib::{parse_script, Problem};
use highdiv::theory::{check_conjunction, TheoryAssertion, TheoryVerdict, DEFAULT_NODE_BUDGET};
use rand::seq::SliceRandom;
use rand::Rng;

use super::*;

pub type Check = Result<String, String>;

pub fn theory_oracle(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let (mut sat, mut unsat) = (0, 0);
    for i in 0..n {
        let ints = rng.gen_range(1..=4);
        let mut f = CnfFormula::new();
        for v in 0..ints {
            f.add_int_var(format!("x{v}"), false);
        }
        let mut lits = Vec::new();
        for _ in 0..rng.gen_range(1..=6) {
            let atom = random_atom(&mut rng, ints, 8, 0.3);
            let positive = atom.is_equality() || rng.gen_bool(0.7);
            lits.push(Literal::arith(f.intern_atom(atom), positive));
        }
        for v in 0..ints as u32 {
            for c in [1, -1] {
                lits.push(Literal::arith(f.intern_atom(LinearAtom::le(&[(IntVarId(v), c)], 20)), true));
            }
        }
        let assertions: Vec<TheoryAssertion> = lits
            .iter()
            .map(|&l| match l {
                Literal::Arith { atom, positive } => TheoryAssertion { atom, positive },
                Literal::Bool { .. } => unreachable!(),
            })
            .collect();
        let expected = brute_force(&conjunction(&f, &lits), -20, 20);
        match check_conjunction(&assertions, &f, DEFAULT_NODE_BUDGET) {
            Ok(TheoryVerdict::Sat(m)) => {
                if expected.is_none() || !satisfies(&conjunction(&f, &lits), &m) {
                    return Err(format!("instance {i}: bad Sat verdict {m:?}"));
                }
                sat += 1;
            }
            Ok(TheoryVerdict::Unsat(core)) => {
                if expected.is_some() {
                    return Err(format!("instance {i}: Unsat but brute force found {expected:?}"));
                }
                if core.iter().any(|a| !assertions.contains(a)) {
                    return Err(format!("instance {i}: core is not a subset of the input"));
                }
                let core_lits: Vec<Literal> = core.iter().map(|a| Literal::arith(a.atom, a.positive)).collect();
                if brute_force(&conjunction(&f, &core_lits), -20, 20).is_some() {
                    return Err(format!("instance {i}: core {core:?} is satisfiable"));
                }
                unsat += 1;
            }
            Err(e) => return Err(format!("instance {i}: {e}")),
        }
    }
    Ok(format!("{n} conjunctions ({sat} sat, {unsat} unsat) agree with enumeration"))
}

pub fn cdclt_oracle(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let (mut sat, mut unsat) = (0, 0);
    for i in 0..n {
        let f = random_formula(&mut rng, Shape::SMALL);
        let expected = brute_force(&f, -20, 20);
        match cdclt::solve(&UnderApproximation::exact(&f), &mut rng, CdclLimits::default()) {
            Ok(SolveOutcome::Sat(m)) if expected.is_some() && satisfies(&f, &m) => sat += 1,
            Ok(SolveOutcome::Unsat) if expected.is_none() => unsat += 1,
            other => return Err(format!("instance {i}: got {other:?}, enumeration found {expected:?}")),
        }
    }
    Ok(format!("{n} instances ({sat} sat, {unsat} unsat) agree with enumeration"))
}

fn random_assignment(rng: &mut TestRng, f: &CnfFormula, r: i64) -> Assignment {
    Assignment::new(
        (0..f.num_int_vars()).map(|_| rng.gen_range(-r..=r)).collect(),
        (0..f.num_bool_vars()).map(|_| rng.gen()).collect(),
    )
}

fn with_value(m: &Assignment, x: IntVarId, v: i64) -> Assignment {
    let mut m = m.clone();
    m.int_values[x.index()] = v;
    m
}

const LOCAL: Shape = Shape {
    max_ints: 3,
    max_bools: 1,
    max_clauses: 6,
    max_literals: 3,
    coef: 8,
    eq_probability: 0.25,
    box_bound: None,
};

pub fn feasible_interval_oracle(n: usize, seed: u64) -> Check {
    let f = three_var_example();
    let got = feasible_interval(IntVarId(0), &f, &Assignment::from_ints(vec![10, 7, 7])).map_err(|e| e.to_string())?;
    if got != IntervalSet::range(8, 10) {
        return Err(format!("worked example gives {got:?}, expected [8, 10]"));
    }
    let mut rng = rng(seed);
    for i in 0..n {
        let f = random_formula(&mut rng, LOCAL);
        let m = random_assignment(&mut rng, &f, 30);
        let x = IntVarId(rng.gen_range(0..f.num_int_vars() as u32));
        let fi = feasible_interval(x, &f, &m).map_err(|e| e.to_string())?;
        let guards: Vec<Vec<Literal>> = f
            .clauses()
            .iter()
            .map(|c| {
                c.literals()
                    .iter()
                    .copied()
                    .filter(|&l| matches!(l, Literal::Arith { atom, .. } if f.atom(atom).contains(x)))
                    .filter(|&l| literal_true(&f, l, &m))
                    .collect::<Vec<_>>()
            })
            .filter(|g| !g.is_empty())
            .collect();
        for v in -100..=100 {
            let mv = with_value(&m, x, v);
            let expected = guards.iter().all(|g| g.iter().any(|&l| literal_true(&f, l, &mv)));
            if fi.contains(v) != expected {
                return Err(format!("instance {i}: value {v} of {x:?}: interval {fi:?}, expected {expected}"));
            }
        }
    }
    Ok(format!("[8, 10] on the worked example; {n} random triples match over [-100, 100]"))
}

/// Smallest nonzero change making `ell` true, ties upward, by search.
fn oracle_delta(f: &CnfFormula, ell: Literal, m: &Assignment, x: IntVarId, reach: i64) -> Option<i64> {
    let cur = m.int(x);
    (1..=reach).find_map(|d| {
        if literal_true(f, ell, &with_value(m, x, cur + d)) {
            Some(d)
        } else if literal_true(f, ell, &with_value(m, x, cur - d)) {
            Some(-d)
        } else {
            None
        }
    })
}

pub fn bam_postcondition(n: usize, seed: u64) -> Check {
    let window = 1000u64;
    let f = three_var_example();
    let stats = LiteralStats::new(f.atoms().len());
    let mut r = rng(seed ^ 0x5eed);
    for _ in 0..50 {
        let mv = bam(
            IntVarId(0),
            atom_lit(0, true),
            &[atom_lit(3, true)],
            &f,
            &Assignment::from_ints(vec![0, 0, 0]),
            &stats,
            window,
            MoveOperator::BoundaryAware,
            &mut r,
        )
        .map_err(|e| e.to_string())?;
        match mv {
            MoveKind::Assign { interval, .. } if interval == IntervalSet::range(1, 3) => {}
            other => return Err(format!("worked example gives {other:?}, expected interval [1, 3]")),
        }
    }

    let mut rng = rng(seed);
    let (mut applied, mut blocked) = (0usize, 0usize);
    let mut i = 0;
    while applied < n {
        i += 1;
        let f = random_formula(&mut rng, LOCAL);
        let alpha = random_assignment(&mut rng, &f, 30);
        let targets: Vec<(Literal, IntVarId)> = f
            .clauses()
            .iter()
            .flat_map(|c| c.literals().iter().copied())
            .filter(|&l| l.is_arith() && !literal_true(&f, l, &alpha))
            .flat_map(|l| match l {
                Literal::Arith { atom, .. } => f.atom(atom).vars().map(move |v| (l, v)).collect::<Vec<_>>(),
                Literal::Bool { .. } => Vec::new(),
            })
            .collect();
        let Some(&(ell, x)) = targets.choose(&mut rng) else { continue };
        let ctx: Vec<Literal> = literals_with(&f, x).into_iter().filter(|&l| literal_true(&f, l, &alpha)).collect();
        let total = rng.gen_range(0..50u64);
        let counts: Vec<u64> = (0..f.atoms().len()).map(|_| rng.gen_range(0..=total)).collect();
        let stats = LiteralStats::from_counts(total, &counts);
        let cur = alpha.int(x);
        let expected_delta = oracle_delta(&f, ell, &alpha, x, 3000);
        match bam(x, ell, &ctx, &f, &alpha, &stats, window, MoveOperator::BoundaryAware, &mut rng) {
            Err(CcssError::NoMove { .. }) => {
                if expected_delta.is_some() {
                    return Err(format!("application {i}: NoMove but {ell:?} is reachable"));
                }
                blocked += 1;
            }
            Err(e) => return Err(format!("application {i}: {e}")),
            Ok(MoveKind::Assign { var, value, interval, .. }) => {
                let Some(delta) = expected_delta else {
                    return Err(format!("application {i}: move found for an unreachable literal"));
                };
                let threshold = cur + delta;
                let one_sided = if delta > 0 {
                    interval.min() == Some(threshold)
                } else {
                    interval.max() == Some(threshold)
                };
                if var != x || !interval.contains(value) || !one_sided {
                    return Err(format!("application {i}: value {value} / interval {interval:?} / threshold {threshold}"));
                }
                if interval.cardinality() > window as u128 + 1 {
                    return Err(format!("application {i}: interval {interval:?} wider than the window"));
                }
                for &(lo, hi) in interval.intervals() {
                    if let Some(v) = (lo..=hi).find(|&v| !literal_true(&f, ell, &with_value(&alpha, x, v))) {
                        return Err(format!("application {i}: {v} in {interval:?} falsifies the target"));
                    }
                }
                applied += 1;
            }
            Ok(other) => return Err(format!("application {i}: unexpected {other:?}")),
        }
    }
    Ok(format!("[1, 3] on the worked example; {applied} moves satisfy their target, {blocked} correctly refused"))
}

fn oracle_closure(f: &CnfFormula, seed: BTreeSet<IntVarId>) -> BTreeSet<IntVarId> {
    let atoms: BTreeSet<_> = f
        .clauses()
        .iter()
        .flat_map(|c| c.literals())
        .filter_map(|l| match *l {
            Literal::Arith { atom, .. } if !f.atom(atom).is_equality() => Some(atom),
            _ => None,
        })
        .collect();
    let mut s = seed;
    loop {
        let before = s.len();
        for &a in &atoms {
            let vars: Vec<IntVarId> = f.atom(a).vars().collect();
            if vars.iter().any(|v| s.contains(v)) {
                s.extend(vars);
            }
        }
        if s.len() == before {
            return s;
        }
    }
}

pub fn subsystem_closures(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let shape = Shape {
        max_ints: 8,
        max_bools: 1,
        max_clauses: 12,
        max_literals: 3,
        coef: 5,
        eq_probability: 0.15,
        box_bound: None,
    };
    for i in 0..n {
        let f = random_formula(&mut rng, shape);
        let lambda = rng.gen_range(0..5);
        let lits: Vec<Literal> = f.clauses().iter().flat_map(|c| c.literals().iter().copied()).collect();
        let eq_seed: BTreeSet<IntVarId> = lits
            .iter()
            .filter_map(|l| match *l {
                Literal::Arith { atom, .. } if f.atom(atom).is_equality() => Some(f.atom(atom).vars().collect::<Vec<_>>()),
                _ => None,
            })
            .flatten()
            .collect();
        let eq = oracle_closure(&f, eq_seed);
        let hf_seed: BTreeSet<IntVarId> = (0..f.num_int_vars() as u32)
            .map(IntVarId)
            .filter(|&v| {
                lits.iter()
                    .filter(|l| matches!(**l, Literal::Arith { atom, .. } if f.atom(atom).contains(v)))
                    .count()
                    > lambda
            })
            .collect();
        let hf: BTreeSet<IntVarId> = oracle_closure(&f, hf_seed).difference(&eq).copied().collect();
        let p = SubsystemPartition::new(&f, lambda);
        if p.eq_vars != eq || p.hf_vars != hf {
            return Err(format!("instance {i}: got {:?} / {:?}, expected {eq:?} / {hf:?}", p.eq_vars, p.hf_vars));
        }
        let all: BTreeSet<IntVarId> = p.eq_vars.iter().chain(&p.hf_vars).chain(&p.general_vars).copied().collect();
        let sizes = p.eq_vars.len() + p.hf_vars.len() + p.general_vars.len();
        if all.len() != f.num_int_vars() || sizes != all.len() {
            return Err(format!("instance {i}: subsystems do not partition the variables"));
        }
        for l in &lits {
            let Literal::Arith { atom, .. } = *l else { continue };
            let a = f.atom(atom);
            if !a.is_equality() && a.vars().any(|v| p.eq_vars.contains(&v)) && !a.vars().all(|v| p.eq_vars.contains(&v)) {
                return Err(format!("instance {i}: equality system not closed under {a:?}"));
            }
        }
    }
    Ok(format!("{n} constraint sets match the fixpoint oracle"))
}

pub fn coverage_metric(n: usize, seed: u64) -> Check {
    // analytic cases
    let mut single = Ast::new();
    let x = single.declare_int("x");
    let node = single.int_var(x);
    single.assert_root(node);
    if CoverageAccumulator::new(&single).coverage() != 0.0 {
        return Err("empty sample set is not 0".into());
    }
    let mut acc = CoverageAccumulator::new(&single);
    for v in [0, -1] {
        acc.accumulate(&single, &Assignment::from_ints(vec![v])).map_err(|e| e.to_string())?;
    }
    if acc.coverage() != 1.0 {
        return Err(format!("{{0, -1}} gives {}", acc.coverage()));
    }
    let mut flip = Ast::new();
    let p = flip.declare_bool("p");
    let node = flip.bool_var(p);
    flip.assert_root(node);
    let mut acc = CoverageAccumulator::new(&flip);
    for b in [true, false] {
        acc.accumulate(&flip, &Assignment::new(vec![], vec![b])).map_err(|e| e.to_string())?;
    }
    if acc.covered_bits() != 1 {
        return Err(format!("Bool flip covers {} bits", acc.covered_bits()));
    }

    let mut rng = rng(seed);
    for i in 0..n {
        let roots = rng.gen_range(1..=2);
        let ast = random_ast(&mut rng, 2, 1, roots, 3);
        let samples: Vec<Assignment> = (0..rng.gen_range(0..8))
            .map(|_| {
                let r = if rng.gen_bool(0.2) { 1 << 40 } else { 50 };
                Assignment::new((0..2).map(|_| rng.gen_range(-r..=r)).collect(), vec![rng.gen()])
            })
            .collect();
        let mut acc = CoverageAccumulator::new(&ast);
        let mut last = 0.0;
        for m in &samples {
            acc.accumulate(&ast, m).map_err(|e| e.to_string())?;
            if acc.coverage() < last {
                return Err(format!("set {i}: coverage decreased"));
            }
            last = acc.coverage();
        }
        let mut shuffled = samples.clone();
        shuffled.shuffle(&mut rng);
        let mut other = CoverageAccumulator::new(&ast);
        for m in &shuffled {
            other.accumulate(&ast, m).map_err(|e| e.to_string())?;
        }
        if other.covered_bits() != acc.covered_bits() {
            return Err(format!("set {i}: order changes coverage"));
        }
        let (covered, total) = oracle_covered_bits(&ast, &samples);
        if (covered, total) != (acc.covered_bits(), acc.total_bits()) {
            return Err(format!(
                "set {i}: {}/{} bits, re-evaluation gives {covered}/{total}",
                acc.covered_bits(),
                acc.total_bits()
            ));
        }
    }
    Ok(format!("analytic cases exact; {n} sets monotone, order-free and equal to re-evaluation"))
}

pub fn frontend_round_trip(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let (mut sat, mut unsat) = (0, 0);
    for i in 0..n {
        let roots = rng.gen_range(1..=3);
        let mut ast = random_ast(&mut rng, 2, 1, roots, 3);
        assert_box(&mut ast, -3, 3);
        let points = ast_box_points(&ast, -3, 3);
        let truth: Vec<bool> = points.iter().map(|m| ast_holds(&ast, m)).collect();
        if points.iter().zip(&truth).any(|(m, &t)| ast.satisfied_by(m) != t) {
            return Err(format!("script {i}: evaluator disagrees with the definition"));
        }
        let text = ast.to_smtlib();
        let reparsed = parse_script(&text).map_err(|e| format!("script {i}: {e}\n{text}"))?;
        if points.iter().zip(&truth).any(|(m, &t)| reparsed.satisfied_by(m) != t) {
            return Err(format!("script {i}: printing changes the meaning\n{text}"));
        }
        let problem = Problem::from_ast(ast.clone()).map_err(|e| format!("script {i}: {e}"))?;
        let (ni, nb) = (problem.num_declared_ints(), problem.num_declared_bools());
        let expected = truth.iter().any(|&t| t);
        match cdclt::solve(&UnderApproximation::exact(&problem.cnf), &mut rng, CdclLimits::default()) {
            Ok(SolveOutcome::Sat(m)) if expected && ast_holds(&ast, &m.project(ni, nb)) => sat += 1,
            Ok(SolveOutcome::Unsat) if !expected => unsat += 1,
            other => return Err(format!("script {i}: got {other:?}, expected sat = {expected}\n{text}")),
        }
    }
    Ok(format!("{n} scripts ({sat} sat, {unsat} unsat) round-trip and clausify faithfully"))
}

pub fn preprocess_round_trip(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let (mut eliminated, mut inconsistent) = (0, 0);
    for i in 0..n {
        let mut f = random_formula(&mut rng, Shape { max_clauses: 5, ..Shape::SMALL });
        let ints = f.num_int_vars();
        for _ in 0..rng.gen_range(1..=2) {
            let mut atom = random_atom(&mut rng, ints, 4, 1.0);
            if rng.gen_bool(0.6) {
                // a unit coefficient makes the equality solvable
                let mut terms = atom.terms().to_vec();
                terms[0].1 = if rng.gen() { 1 } else { -1 };
                atom = match LinearAtom::new(terms, atom.relation(), atom.constant()).unwrap() {
                    highdiv::model::Normalized::Atom(a) => a,
                    highdiv::model::Normalized::Constant(_) => unreachable!(),
                };
            }
            let id = f.intern_atom(atom);
            f.add_clause([Literal::arith(id, true)]).unwrap();
        }
        let expected = brute_force(&f, -20, 20);
        match equation_solving(&f) {
            Err(PreprocessError::InconsistentEquality(_)) => {
                if expected.is_some() {
                    return Err(format!("formula {i}: reported inconsistent but {expected:?} satisfies it"));
                }
                inconsistent += 1;
            }
            Err(e) => return Err(format!("formula {i}: {e}")),
            Ok((f_hat, subst)) => {
                eliminated += subst.eliminated().count();
                if let Some(m) = &expected {
                    if !satisfies(&f_hat, m) {
                        return Err(format!("formula {i}: model {m:?} of the input falsifies the simplified formula"));
                    }
                }
                match brute_force(&f_hat, -20, 20) {
                    None if expected.is_some() => {
                        return Err(format!("formula {i}: simplified formula lost every model"));
                    }
                    None => {}
                    Some(m_hat) => {
                        let m = model_convert(&m_hat, &subst, &f).map_err(|e| format!("formula {i}: {e}"))?;
                        if !satisfies(&f, &m) {
                            return Err(format!("formula {i}: converted model {m:?} falsifies the input"));
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{n} formulas ({eliminated} variables eliminated, {inconsistent} inconsistent) convert back exactly"))
}
