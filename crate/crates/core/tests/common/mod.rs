//! Random instance generators and brute-force oracles shared by the
//! integration tests and the acceptance runner. Nothing here calls into the
//! solving code it is used to check.

#![allow(dead_code)]

pub mod checks;

use std::collections::BTreeSet;

use highdiv::model::{Assignment, AtomId, BoolVarId, CnfFormula, IntVarId, LinearAtom, Literal, Normalized, Relation};
use highdiv::smtlib::{Ast, NodeId, NodeKind, Sort};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_ints: usize,
    pub max_bools: usize,
    pub max_clauses: usize,
    pub max_literals: usize,
    /// Coefficients and constants are drawn from `[-coef, coef]`.
    pub coef: i64,
    pub eq_probability: f64,
    /// Adds `-b ≤ x ≤ b` for every integer variable when set.
    pub box_bound: Option<i64>,
}

impl Shape {
    pub const SMALL: Shape = Shape {
        max_ints: 4,
        max_bools: 2,
        max_clauses: 8,
        max_literals: 3,
        coef: 8,
        eq_probability: 0.25,
        box_bound: Some(20),
    };
}

pub fn random_atom(rng: &mut TestRng, ints: usize, coef: i64, eq_probability: f64) -> LinearAtom {
    let width = rng.gen_range(1..=ints.min(3));
    let mut vars: Vec<u32> = (0..ints as u32).collect();
    vars.shuffle(rng);
    let terms: Vec<(IntVarId, i64)> = vars[..width]
        .iter()
        .map(|&v| {
            let mut c = 0;
            while c == 0 {
                c = rng.gen_range(-coef..=coef);
            }
            (IntVarId(v), c)
        })
        .collect();
    let relation = if rng.gen_bool(eq_probability) { Relation::Eq } else { Relation::Le };
    match LinearAtom::new(terms, relation, rng.gen_range(-coef..=coef)).unwrap() {
        Normalized::Atom(a) => a,
        Normalized::Constant(_) => unreachable!("distinct variables with nonzero coefficients"),
    }
}

fn box_atoms(f: &mut CnfFormula, b: i64) {
    for v in 0..f.num_int_vars() as u32 {
        let up = f.intern_atom(LinearAtom::le(&[(IntVarId(v), 1)], b));
        let down = f.intern_atom(LinearAtom::le(&[(IntVarId(v), -1)], b));
        f.add_clause([Literal::arith(up, true)]).unwrap();
        f.add_clause([Literal::arith(down, true)]).unwrap();
    }
}

pub fn random_formula(rng: &mut TestRng, shape: Shape) -> CnfFormula {
    let ints = rng.gen_range(1..=shape.max_ints);
    let bools = rng.gen_range(0..=shape.max_bools);
    let mut f = CnfFormula::new();
    for i in 0..ints {
        f.add_int_var(format!("x{i}"), false);
    }
    for i in 0..bools {
        f.add_bool_var(format!("b{i}"), false);
    }
    for _ in 0..rng.gen_range(1..=shape.max_clauses) {
        let lits: Vec<Literal> = (0..rng.gen_range(1..=shape.max_literals))
            .map(|_| {
                if bools > 0 && rng.gen_bool(0.2) {
                    Literal::bool(BoolVarId(rng.gen_range(0..bools as u32)), rng.gen())
                } else {
                    let atom = random_atom(rng, ints, shape.coef, shape.eq_probability);
                    Literal::arith(f.intern_atom(atom), rng.gen_bool(0.7))
                }
            })
            .collect();
        f.add_clause(lits).unwrap();
    }
    if let Some(b) = shape.box_bound {
        box_atoms(&mut f, b);
    }
    f
}

/// A formula whose clauses are the given literals, one unit clause each.
pub fn conjunction(f: &CnfFormula, lits: &[Literal]) -> CnfFormula {
    let mut g = CnfFormula::with_vars_of(f);
    for &l in lits {
        let l = match l {
            Literal::Arith { atom, positive } => Literal::arith(g.intern_atom(f.atom(atom).clone()), positive),
            b => b,
        };
        g.add_clause([l]).unwrap();
    }
    g
}

fn clause_true(f: &CnfFormula, lits: &[Literal], a: &Assignment) -> bool {
    lits.iter().any(|&l| match l {
        Literal::Bool { var, positive } => a.bool(var) == positive,
        Literal::Arith { atom, positive } => {
            let at = f.atom(atom);
            let lhs: i128 = at.terms().iter().map(|&(v, c)| c as i128 * a.int(v) as i128).sum();
            let holds = match at.relation() {
                Relation::Le => lhs <= at.constant() as i128,
                Relation::Eq => lhs == at.constant() as i128,
            };
            holds == positive
        }
    })
}

/// First model of `f` with every integer in `[lo, hi]`, by depth-first
/// enumeration that checks each clause as soon as its variables are set.
pub fn brute_force(f: &CnfFormula, lo: i64, hi: i64) -> Option<Assignment> {
    let ni = f.num_int_vars();
    let nb = f.num_bool_vars();
    let mut by_depth: Vec<Vec<usize>> = vec![Vec::new(); ni + 1];
    for (c, clause) in f.clauses().iter().enumerate() {
        let depth = clause
            .literals()
            .iter()
            .filter_map(|l| match *l {
                Literal::Arith { atom, .. } => f.atom(atom).terms().iter().map(|t| t.0.index() + 1).max(),
                Literal::Bool { .. } => None,
            })
            .max()
            .unwrap_or(0);
        by_depth[depth].push(c);
    }
    fn dfs(f: &CnfFormula, by_depth: &[Vec<usize>], a: &mut Assignment, d: usize, lo: i64, hi: i64) -> bool {
        if d == a.int_values.len() {
            return true;
        }
        for v in lo..=hi {
            a.int_values[d] = v;
            if by_depth[d + 1].iter().all(|&c| clause_true(f, f.clauses()[c].literals(), a))
                && dfs(f, by_depth, a, d + 1, lo, hi)
            {
                return true;
            }
        }
        false
    }
    for bits in 0u64..(1 << nb) {
        let mut a = Assignment::new(vec![lo; ni], (0..nb).map(|i| bits >> i & 1 == 1).collect());
        if by_depth[0].iter().all(|&c| clause_true(f, f.clauses()[c].literals(), &a))
            && dfs(f, &by_depth, &mut a, 0, lo, hi)
        {
            return Some(a);
        }
    }
    None
}

pub fn satisfies(f: &CnfFormula, a: &Assignment) -> bool {
    f.clauses().iter().all(|c| clause_true(f, c.literals(), a))
}

pub fn literal_true(f: &CnfFormula, l: Literal, a: &Assignment) -> bool {
    clause_true(f, &[l], a)
}

/// Arithmetic literals containing `x`, as they occur in the clauses.
pub fn literals_with(f: &CnfFormula, x: IntVarId) -> Vec<Literal> {
    let set: BTreeSet<Literal> = f
        .clauses()
        .iter()
        .flat_map(|c| c.literals().iter().copied())
        .filter(|l| matches!(*l, Literal::Arith { atom, .. } if f.atom(atom).contains(x)))
        .collect();
    set.into_iter().collect()
}

/// `(x2 − x1 ≤ −1 ∨ −x1 ≤ −10) ∧ (x2 − x3 ≤ 0) ∧ (x1 − x3 ≤ 3)`; atoms
/// 0..4 are ℓ1..ℓ4.
pub fn three_var_example() -> CnfFormula {
    let mut f = CnfFormula::new();
    let x1 = f.add_int_var("x1", false);
    let x2 = f.add_int_var("x2", false);
    let x3 = f.add_int_var("x3", false);
    let l1 = f.intern_atom(LinearAtom::le(&[(x2, 1), (x1, -1)], -1));
    let l2 = f.intern_atom(LinearAtom::le(&[(x1, -1)], -10));
    let l3 = f.intern_atom(LinearAtom::le(&[(x2, 1), (x3, -1)], 0));
    let l4 = f.intern_atom(LinearAtom::le(&[(x1, 1), (x3, -1)], 3));
    f.add_clause([Literal::arith(l1, true), Literal::arith(l2, true)]).unwrap();
    f.add_clause([Literal::arith(l3, true)]).unwrap();
    f.add_clause([Literal::arith(l4, true)]).unwrap();
    f
}

pub fn atom_lit(i: u32, positive: bool) -> Literal {
    Literal::arith(AtomId(i), positive)
}

/// Random script over `ints` integer and `bools` Boolean variables with
/// `roots` assertions of bounded depth.
pub fn random_ast(rng: &mut TestRng, ints: usize, bools: usize, roots: usize, depth: u32) -> Ast {
    let mut ast = Ast::new();
    for i in 0..ints {
        ast.declare_int(format!("x{i}"));
    }
    for i in 0..bools {
        ast.declare_bool(format!("p{i}"));
    }
    for _ in 0..roots {
        let r = bool_term(rng, &mut ast, ints, bools, depth);
        ast.assert_root(r);
    }
    ast
}

fn int_term(rng: &mut TestRng, ast: &mut Ast, ints: usize, bools: usize, depth: u32) -> NodeId {
    if depth == 0 || rng.gen_bool(0.35) {
        return if ints > 0 && rng.gen_bool(0.7) {
            ast.int_var(IntVarId(rng.gen_range(0..ints as u32)))
        } else {
            ast.int_const(rng.gen_range(-5..=5))
        };
    }
    match rng.gen_range(0..4) {
        0 => {
            let a = int_term(rng, ast, ints, bools, depth - 1);
            let b = int_term(rng, ast, ints, bools, depth - 1);
            ast.mk(NodeKind::Plus, vec![a, b], Sort::Int)
        }
        1 => {
            let a = int_term(rng, ast, ints, bools, depth - 1);
            if rng.gen() {
                ast.mk(NodeKind::Minus, vec![a], Sort::Int)
            } else {
                let b = int_term(rng, ast, ints, bools, depth - 1);
                ast.mk(NodeKind::Minus, vec![a, b], Sort::Int)
            }
        }
        2 => {
            let c = ast.int_const(rng.gen_range(-4..=4));
            let a = int_term(rng, ast, ints, bools, depth - 1);
            ast.mk(NodeKind::Times, vec![c, a], Sort::Int)
        }
        _ => {
            let c = bool_term(rng, ast, ints, bools, depth - 1);
            let a = int_term(rng, ast, ints, bools, depth - 1);
            let b = int_term(rng, ast, ints, bools, depth - 1);
            ast.mk(NodeKind::Ite, vec![c, a, b], Sort::Int)
        }
    }
}

fn bool_term(rng: &mut TestRng, ast: &mut Ast, ints: usize, bools: usize, depth: u32) -> NodeId {
    if depth == 0 || rng.gen_bool(0.25) {
        if bools > 0 && rng.gen_bool(0.3) {
            return ast.bool_var(BoolVarId(rng.gen_range(0..bools as u32)));
        }
        let kind = [NodeKind::Le, NodeKind::Ge, NodeKind::Lt, NodeKind::Gt, NodeKind::Eq][rng.gen_range(0..5)];
        let d = depth.min(2);
        let a = int_term(rng, ast, ints, bools, d);
        let b = int_term(rng, ast, ints, bools, d);
        return ast.mk(kind, vec![a, b], Sort::Bool);
    }
    let d = depth - 1;
    match rng.gen_range(0..6) {
        0 | 1 => {
            let n = rng.gen_range(2..=3);
            let kids = (0..n).map(|_| bool_term(rng, ast, ints, bools, d)).collect();
            let kind = if rng.gen() { NodeKind::And } else { NodeKind::Or };
            ast.mk(kind, kids, Sort::Bool)
        }
        2 => {
            let a = bool_term(rng, ast, ints, bools, d);
            ast.mk(NodeKind::Not, vec![a], Sort::Bool)
        }
        3 => {
            let a = bool_term(rng, ast, ints, bools, d);
            let b = bool_term(rng, ast, ints, bools, d);
            ast.mk(NodeKind::Implies, vec![a, b], Sort::Bool)
        }
        4 => {
            let a = bool_term(rng, ast, ints, bools, d);
            let b = bool_term(rng, ast, ints, bools, d);
            ast.mk(NodeKind::Eq, vec![a, b], Sort::Bool)
        }
        _ => {
            let c = bool_term(rng, ast, ints, bools, d);
            let a = bool_term(rng, ast, ints, bools, d);
            let b = bool_term(rng, ast, ints, bools, d);
            ast.mk(NodeKind::Ite, vec![c, a, b], Sort::Bool)
        }
    }
}

/// Adds `lo ≤ x ≤ hi` assertions for every declared integer variable.
pub fn assert_box(ast: &mut Ast, lo: i64, hi: i64) {
    for v in 0..ast.int_vars().len() as u32 {
        let x = ast.int_var(IntVarId(v));
        let l = ast.int_const(lo);
        let h = ast.int_const(hi);
        let a = ast.mk(NodeKind::Le, vec![l, x], Sort::Bool);
        let b = ast.mk(NodeKind::Le, vec![x, h], Sort::Bool);
        ast.assert_root(a);
        ast.assert_root(b);
    }
}

/// Value of a node computed recursively from the definition of each
/// operator, independent of the library's evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Val {
    B(bool),
    I(i128),
}

pub fn eval_node(ast: &Ast, id: NodeId, a: &Assignment) -> Val {
    let node = ast.node(id);
    let kid = |k: usize| eval_node(ast, node.children[k], a);
    let b = |k: usize| match kid(k) {
        Val::B(v) => v,
        Val::I(_) => panic!("sort error"),
    };
    let n = |k: usize| match kid(k) {
        Val::I(v) => v,
        Val::B(_) => panic!("sort error"),
    };
    match node.kind {
        NodeKind::IntConst(c) => Val::I(c as i128),
        NodeKind::BoolConst(c) => Val::B(c),
        NodeKind::IntVar(v) => Val::I(a.int_values[v.index()] as i128),
        NodeKind::BoolVar(v) => Val::B(a.bool_values[v.index()]),
        NodeKind::And => Val::B((0..node.children.len()).all(b)),
        NodeKind::Or => Val::B((0..node.children.len()).any(b)),
        NodeKind::Not => Val::B(!b(0)),
        NodeKind::Implies => Val::B(!b(0) || b(1)),
        NodeKind::Ite => {
            if b(0) {
                kid(1)
            } else {
                kid(2)
            }
        }
        NodeKind::Eq => Val::B(kid(0) == kid(1)),
        NodeKind::Le => Val::B(n(0) <= n(1)),
        NodeKind::Ge => Val::B(n(0) >= n(1)),
        NodeKind::Lt => Val::B(n(0) < n(1)),
        NodeKind::Gt => Val::B(n(0) > n(1)),
        NodeKind::Plus => Val::I((0..node.children.len()).map(n).sum()),
        NodeKind::Minus if node.children.len() == 1 => Val::I(-n(0)),
        NodeKind::Minus => Val::I(n(0) - (1..node.children.len()).map(n).sum::<i128>()),
        NodeKind::Times => Val::I(n(0) * n(1)),
    }
}

pub fn ast_holds(ast: &Ast, a: &Assignment) -> bool {
    ast.roots().iter().all(|&r| eval_node(ast, r, a) == Val::B(true))
}

/// Every assignment of the declared variables with integers in `[lo, hi]`.
pub fn ast_box_points(ast: &Ast, lo: i64, hi: i64) -> Vec<Assignment> {
    let ni = ast.int_vars().len();
    let nb = ast.bool_vars().len();
    let mut out = Vec::new();
    let width = (hi - lo + 1) as u64;
    let total = width.pow(ni as u32) << nb;
    for code in 0..total {
        let mut c = code;
        let bools = (0..nb).map(|_| {
            let b = c & 1 == 1;
            c >>= 1;
            b
        });
        let bools: Vec<bool> = bools.collect();
        let ints = (0..ni)
            .map(|_| {
                let v = lo + (c % width) as i64;
                c /= width;
                v
            })
            .collect();
        out.push(Assignment::new(ints, bools));
    }
    out
}

/// Covered bits of `samples` by direct re-evaluation: a tracked node is
/// every reachable operator node and every variable occurrence.
pub fn oracle_covered_bits(ast: &Ast, samples: &[Assignment]) -> (u64, u64) {
    let mut reachable = BTreeSet::new();
    let mut stack: Vec<NodeId> = ast.roots().to_vec();
    while let Some(id) = stack.pop() {
        if reachable.insert(id) {
            stack.extend(ast.node(id).children.iter().copied());
        }
    }
    let (mut covered, mut total) = (0u64, 0u64);
    for &id in &reachable {
        let kind = ast.node(id).kind;
        if matches!(kind, NodeKind::IntConst(_) | NodeKind::BoolConst(_)) {
            continue;
        }
        match ast.node(id).sort {
            Sort::Bool => {
                total += 1;
                let vals: BTreeSet<bool> = samples
                    .iter()
                    .map(|a| match eval_node(ast, id, a) {
                        Val::B(b) => b,
                        Val::I(_) => unreachable!(),
                    })
                    .collect();
                covered += u64::from(vals.len() == 2);
            }
            Sort::Int => {
                total += 64;
                for bit in 0..64 {
                    let vals: BTreeSet<bool> = samples
                        .iter()
                        .map(|a| match eval_node(ast, id, a) {
                            Val::I(v) => (v.rem_euclid(1i128 << 64) >> bit) & 1 == 1,
                            Val::B(_) => unreachable!(),
                        })
                        .collect();
                    covered += u64::from(vals.len() == 2);
                }
            }
        }
    }
    (covered, total)
}
