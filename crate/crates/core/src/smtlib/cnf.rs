//! Polarity-aware Tseitin clausification (Plaisted–Greenbaum).
//!
//! Formulas are first pushed into negation normal form; since every NNF
//! subformula then occurs positively, an auxiliary `t` only needs the
//! implication `t → φ`.

use std::collections::{BTreeMap, HashMap};

use super::ast::{Ast, NodeId, NodeKind, Sort};
use crate::model::{CnfFormula, IntVarId, LinearAtom, Literal, ModelError, Normalized, Relation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CnfError {
    #[error("node {0} is not a linear integer term")]
    Nonlinear(u32),
    #[error("node {0} is not an integer comparison")]
    NotAComparison(u32),
    #[error("integer ite inside node {0}; use to_cnf to introduce auxiliaries")]
    IteInTerm(u32),
    #[error("coefficient overflow while normalizing node {0}")]
    Overflow(u32),
}

#[derive(Debug, Default, Clone)]
struct LinExpr {
    terms: BTreeMap<IntVarId, i128>,
    constant: i128,
}

impl LinExpr {
    fn scaled(mut self, k: i128) -> Option<LinExpr> {
        for c in self.terms.values_mut() {
            *c = c.checked_mul(k)?;
        }
        self.constant = self.constant.checked_mul(k)?;
        Some(self)
    }

    fn add(&mut self, other: LinExpr, sign: i128) -> Option<()> {
        for (v, c) in other.terms {
            let e = self.terms.entry(v).or_insert(0);
            *e = e.checked_add(c.checked_mul(sign)?)?;
        }
        self.constant = self.constant.checked_add(other.constant.checked_mul(sign)?)?;
        Some(())
    }

    /// `self ⋈ 0` as a canonical atom.
    fn into_atom(self, relation: Relation, node: NodeId) -> Result<Normalized, CnfError> {
        let constant = self.constant.checked_neg().ok_or(CnfError::Overflow(node.0))?;
        LinearAtom::from_wide(self.terms.into_iter().collect(), relation, constant).map_err(|e| match e {
            ModelError::Overflow => CnfError::Overflow(node.0),
        })
    }
}

fn linearize(
    ast: &Ast,
    id: NodeId,
    ite: &mut dyn FnMut(NodeId) -> Result<IntVarId, CnfError>,
) -> Result<LinExpr, CnfError> {
    let node = ast.node(id);
    let overflow = || CnfError::Overflow(id.0);
    let mut out = LinExpr::default();
    match node.kind {
        NodeKind::IntConst(c) => out.constant = c as i128,
        NodeKind::IntVar(v) => {
            out.terms.insert(v, 1);
        }
        NodeKind::Plus => {
            for &c in &node.children {
                out.add(linearize(ast, c, ite)?, 1).ok_or_else(overflow)?;
            }
        }
        NodeKind::Minus => {
            let first = linearize(ast, node.children[0], ite)?;
            if node.children.len() == 1 {
                out.add(first, -1).ok_or_else(overflow)?;
            } else {
                out = first;
                for &c in &node.children[1..] {
                    out.add(linearize(ast, c, ite)?, -1).ok_or_else(overflow)?;
                }
            }
        }
        NodeKind::Times => {
            let NodeKind::IntConst(k) = ast.node(node.children[0]).kind else {
                return Err(CnfError::Nonlinear(id.0));
            };
            out = linearize(ast, node.children[1], ite)?.scaled(k as i128).ok_or_else(overflow)?;
        }
        NodeKind::Ite if node.sort == Sort::Int => {
            out.terms.insert(ite(id)?, 1);
        }
        _ => return Err(CnfError::Nonlinear(id.0)),
    }
    out.terms.retain(|_, c| *c != 0);
    Ok(out)
}

fn comparison_atom(
    ast: &Ast,
    id: NodeId,
    ite: &mut dyn FnMut(NodeId) -> Result<IntVarId, CnfError>,
) -> Result<(Normalized, bool), CnfError> {
    let node = ast.node(id);
    let is_int_eq = node.kind == NodeKind::Eq && ast.node(node.children[0]).sort == Sort::Int;
    if !(node.kind.is_comparison() || is_int_eq) {
        return Err(CnfError::NotAComparison(id.0));
    }
    let mut lhs = linearize(ast, node.children[0], ite)?;
    let rhs = linearize(ast, node.children[1], ite)?;
    let overflow = || CnfError::Overflow(id.0);
    // d = lhs − rhs; every comparison becomes a positive-polarity `… ≤ 0` or `= 0`
    lhs.add(rhs, -1).ok_or_else(overflow)?;
    let (expr, relation) = match node.kind {
        NodeKind::Le => (lhs, Relation::Le),
        NodeKind::Lt => {
            lhs.constant = lhs.constant.checked_add(1).ok_or_else(overflow)?;
            (lhs, Relation::Le)
        }
        NodeKind::Ge => (lhs.scaled(-1).ok_or_else(overflow)?, Relation::Le),
        NodeKind::Gt => {
            let mut e = lhs.scaled(-1).ok_or_else(overflow)?;
            e.constant = e.constant.checked_add(1).ok_or_else(overflow)?;
            (e, Relation::Le)
        }
        _ => (lhs, Relation::Eq),
    };
    Ok((expr.into_atom(relation, id)?, true))
}

/// Canonical standard-form atom and polarity equivalent to a comparison node.
///
/// Strict and `≥` comparisons are closed over the integers into a
/// positive `≤` with negated coefficients.
pub fn normalize_atom(ast: &Ast, node: NodeId) -> Result<(Normalized, bool), CnfError> {
    comparison_atom(ast, node, &mut |n| Err(CnfError::IteInTerm(n.0)))
}

#[derive(Debug, Clone)]
enum Nnf {
    Lit(Literal),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
    Const(bool),
}

impl Nnf {
    fn and(parts: Vec<Nnf>) -> Nnf {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Nnf::Const(true) => {}
                Nnf::Const(false) => return Nnf::Const(false),
                Nnf::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Nnf::Const(true),
            1 => out.pop().unwrap(),
            _ => Nnf::And(out),
        }
    }

    fn or(parts: Vec<Nnf>) -> Nnf {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Nnf::Const(false) => {}
                Nnf::Const(true) => return Nnf::Const(true),
                Nnf::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Nnf::Const(false),
            1 => out.pop().unwrap(),
            _ => Nnf::Or(out),
        }
    }
}

struct Clausifier<'a> {
    ast: &'a Ast,
    cnf: CnfFormula,
    ite_vars: HashMap<NodeId, IntVarId>,
    /// Definitions of integer `ite` auxiliaries still to be asserted.
    pending: Vec<Nnf>,
}

impl Clausifier<'_> {
    fn ite_var(&mut self, id: NodeId) -> Result<IntVarId, CnfError> {
        if let Some(&v) = self.ite_vars.get(&id) {
            return Ok(v);
        }
        let t = self.cnf.add_int_var(format!("ite!{}", id.0), true);
        self.ite_vars.insert(id, t);
        let node = self.ast.node(id).clone();
        let (c, then_, else_) = (node.children[0], node.children[1], node.children[2]);
        let then_eq = self.defining_equality(t, then_, id)?;
        let else_eq = self.defining_equality(t, else_, id)?;
        let guard_false = self.nnf(c, false)?;
        let guard_true = self.nnf(c, true)?;
        self.pending.push(Nnf::or(vec![guard_false, then_eq]));
        self.pending.push(Nnf::or(vec![guard_true, else_eq]));
        Ok(t)
    }

    fn defining_equality(&mut self, t: IntVarId, branch: NodeId, id: NodeId) -> Result<Nnf, CnfError> {
        let mut expr = self.linearize(branch)?;
        let e = expr.terms.entry(t).or_insert(0);
        *e -= 1;
        Ok(self.atom_nnf(expr.into_atom(Relation::Eq, id)?, true))
    }

    fn linearize(&mut self, id: NodeId) -> Result<LinExpr, CnfError> {
        let ast = self.ast;
        linearize(ast, id, &mut |n| self.ite_var(n))
    }

    fn atom_nnf(&mut self, atom: Normalized, positive: bool) -> Nnf {
        match atom {
            Normalized::Constant(b) => Nnf::Const(b == positive),
            Normalized::Atom(a) if a.is_equality() && !positive => {
                // ¬(t = k) ⇔ t ≤ k−1 ∨ −t ≤ −k−1
                let k = a.constant() as i128;
                let below = LinearAtom::from_wide(a.terms().iter().map(|&(v, c)| (v, c as i128)).collect(), Relation::Le, k - 1);
                let above = LinearAtom::from_wide(a.terms().iter().map(|&(v, c)| (v, -(c as i128))).collect(), Relation::Le, -k - 1);
                let sides = [below, above]
                    .into_iter()
                    .map(|s| self.atom_nnf(s.expect("negated in-range coefficients stay in range"), true))
                    .collect();
                Nnf::or(sides)
            }
            Normalized::Atom(a) => Nnf::Lit(Literal::arith(self.cnf.intern_atom(a), positive)),
        }
    }

    fn nnf(&mut self, id: NodeId, positive: bool) -> Result<Nnf, CnfError> {
        let node = self.ast.node(id).clone();
        let kids = &node.children;
        Ok(match node.kind {
            NodeKind::BoolConst(b) => Nnf::Const(b == positive),
            NodeKind::BoolVar(v) => Nnf::Lit(Literal::bool(v, positive)),
            NodeKind::Not => self.nnf(kids[0], !positive)?,
            NodeKind::And | NodeKind::Or => {
                let parts = kids.iter().map(|&k| self.nnf(k, positive)).collect::<Result<Vec<_>, _>>()?;
                if (node.kind == NodeKind::And) == positive {
                    Nnf::and(parts)
                } else {
                    Nnf::or(parts)
                }
            }
            NodeKind::Implies => {
                let a = self.nnf(kids[0], !positive)?;
                let b = self.nnf(kids[1], positive)?;
                if positive {
                    Nnf::or(vec![a, b])
                } else {
                    Nnf::and(vec![a, b])
                }
            }
            NodeKind::Ite => {
                let c_pos = self.nnf(kids[0], true)?;
                let c_neg = self.nnf(kids[0], false)?;
                let t = self.nnf(kids[1], positive)?;
                let e = self.nnf(kids[2], positive)?;
                Nnf::or(vec![Nnf::and(vec![c_pos, t]), Nnf::and(vec![c_neg, e])])
            }
            NodeKind::Eq if self.ast.node(kids[0]).sort == Sort::Bool => {
                let a_pos = self.nnf(kids[0], true)?;
                let a_neg = self.nnf(kids[0], false)?;
                let b_pos = self.nnf(kids[1], positive)?;
                let b_neg = self.nnf(kids[1], !positive)?;
                Nnf::or(vec![Nnf::and(vec![a_pos, b_pos]), Nnf::and(vec![a_neg, b_neg])])
            }
            _ => {
                let ast = self.ast;
                let (atom, pol) = comparison_atom(ast, id, &mut |n| self.ite_var(n))?;
                self.atom_nnf(atom, pol == positive)
            }
        })
    }

    fn contradiction(&mut self) {
        let z = self.cnf.add_bool_var("false!", true);
        self.cnf.add_clause([Literal::bool(z, true)]).expect("fresh variable");
        self.cnf.add_clause([Literal::bool(z, false)]).expect("fresh variable");
    }

    fn assert(&mut self, f: Nnf) {
        match f {
            Nnf::Const(true) => {}
            Nnf::Const(false) => self.contradiction(),
            Nnf::And(parts) => parts.into_iter().for_each(|p| self.assert(p)),
            Nnf::Or(parts) => {
                let lits: Vec<Literal> = parts.into_iter().map(|p| self.literal_for(p)).collect();
                self.cnf.add_clause(lits).expect("non-empty clause");
            }
            Nnf::Lit(l) => {
                self.cnf.add_clause([l]).expect("non-empty clause");
            }
        }
    }

    /// A literal that implies `f`, introducing an auxiliary when needed.
    fn literal_for(&mut self, f: Nnf) -> Literal {
        match f {
            Nnf::Lit(l) => l,
            Nnf::And(parts) => {
                let t = self.fresh_aux();
                for p in parts {
                    let mut lits = vec![t.negated()];
                    match p {
                        Nnf::Or(inner) => lits.extend(inner.into_iter().map(|q| self.literal_for(q))),
                        other => lits.push(self.literal_for(other)),
                    }
                    self.cnf.add_clause(lits).expect("non-empty clause");
                }
                t
            }
            Nnf::Or(parts) => {
                let t = self.fresh_aux();
                let mut lits = vec![t.negated()];
                lits.extend(parts.into_iter().map(|q| self.literal_for(q)));
                self.cnf.add_clause(lits).expect("non-empty clause");
                t
            }
            Nnf::Const(_) => unreachable!("constants are folded away below the top level"),
        }
    }

    fn fresh_aux(&mut self) -> Literal {
        let n = self.cnf.num_bool_vars();
        Literal::bool(self.cnf.add_bool_var(format!("tseitin!{n}"), true), true)
    }
}

/// Clausifies the asserted formulas.
///
/// The result is equisatisfiable with the AST, and any model of it,
/// restricted to the declared variables, satisfies the AST.
pub fn to_cnf(ast: &Ast) -> Result<CnfFormula, CnfError> {
    let mut cnf = CnfFormula::new();
    for name in ast.int_vars() {
        cnf.add_int_var(name.clone(), false);
    }
    for name in ast.bool_vars() {
        cnf.add_bool_var(name.clone(), false);
    }
    let mut c = Clausifier { ast, cnf, ite_vars: HashMap::new(), pending: Vec::new() };
    for &root in ast.roots() {
        let f = c.nnf(root, true)?;
        c.assert(f);
        while let Some(def) = c.pending.pop() {
            c.assert(def);
        }
    }
    Ok(c.cnf)
}
