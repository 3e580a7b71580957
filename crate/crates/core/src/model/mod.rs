//! Formula, assignment and interval types shared by every stage of the
//! sampler, together with their evaluation semantics.

mod atom;
mod interval;

use std::collections::HashMap;
use std::fmt;

pub use atom::{LinearAtom, Normalized, Relation};
pub use interval::{IntervalError, IntervalSet, NEG_INF, POS_INF};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("arithmetic overflow while evaluating a linear term")]
    Overflow,
}

/// Index of an integer variable in a formula's variable table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntVarId(pub u32);

/// Index of a Boolean variable in a formula's variable table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoolVarId(pub u32);

/// Index of an arithmetic atom in a formula's atom table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub u32);

impl IntVarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl BoolVarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for IntVarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

impl fmt::Display for BoolVarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Bool { var: BoolVarId, positive: bool },
    Arith { atom: AtomId, positive: bool },
}

impl Literal {
    pub fn bool(var: BoolVarId, positive: bool) -> Self {
        Literal::Bool { var, positive }
    }

    pub fn arith(atom: AtomId, positive: bool) -> Self {
        Literal::Arith { atom, positive }
    }

    pub fn negated(self) -> Self {
        match self {
            Literal::Bool { var, positive } => Literal::Bool { var, positive: !positive },
            Literal::Arith { atom, positive } => Literal::Arith { atom, positive: !positive },
        }
    }

    pub fn is_positive(self) -> bool {
        match self {
            Literal::Bool { positive, .. } | Literal::Arith { positive, .. } => positive,
        }
    }

    pub fn is_arith(self) -> bool {
        matches!(self, Literal::Arith { .. })
    }
}

/// A disjunction of literals carrying a local-search penalty weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    literals: Vec<Literal>,
    pub penalty_weight: u64,
}

impl Clause {
    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    /// Introduced by clausification rather than declared by the user.
    pub auxiliary: bool,
}

/// A clausal SMT(LIA) formula with interned arithmetic atoms.
///
/// The Boolean skeleton uses one propositional variable per Boolean variable
/// followed by one encoder per atom, see [`CnfFormula::skeleton_encoder`].
#[derive(Debug, Clone, Default)]
pub struct CnfFormula {
    clauses: Vec<Clause>,
    atoms: Vec<LinearAtom>,
    atom_index: HashMap<LinearAtom, AtomId>,
    int_vars: Vec<VarInfo>,
    bool_vars: Vec<VarInfo>,
}

/// Outcome of adding a clause after literal deduplication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseAdded {
    Added,
    /// The clause contained a complementary pair and was dropped.
    Tautology,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormulaError {
    #[error("clause has no literals")]
    EmptyClause,
    #[error("literal refers to unknown {0}")]
    Dangling(String),
}

impl CnfFormula {
    pub fn new() -> Self {
        Self::default()
    }

    /// A formula with the same variable tables and no clauses or atoms.
    pub fn with_vars_of(other: &CnfFormula) -> Self {
        CnfFormula {
            int_vars: other.int_vars.clone(),
            bool_vars: other.bool_vars.clone(),
            ..Self::default()
        }
    }

    pub fn add_int_var(&mut self, name: impl Into<String>, auxiliary: bool) -> IntVarId {
        self.int_vars.push(VarInfo { name: name.into(), auxiliary });
        IntVarId(self.int_vars.len() as u32 - 1)
    }

    pub fn add_bool_var(&mut self, name: impl Into<String>, auxiliary: bool) -> BoolVarId {
        self.bool_vars.push(VarInfo { name: name.into(), auxiliary });
        BoolVarId(self.bool_vars.len() as u32 - 1)
    }

    /// Returns the id of `atom`, adding it to the table if it is new.
    pub fn intern_atom(&mut self, atom: LinearAtom) -> AtomId {
        if let Some(&id) = self.atom_index.get(&atom) {
            return id;
        }
        let id = AtomId(self.atoms.len() as u32);
        self.atom_index.insert(atom.clone(), id);
        self.atoms.push(atom);
        id
    }

    pub fn lookup_atom(&self, atom: &LinearAtom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    pub fn add_clause(&mut self, literals: impl IntoIterator<Item = Literal>) -> Result<ClauseAdded, FormulaError> {
        self.add_weighted_clause(literals, 1)
    }

    pub fn add_weighted_clause(
        &mut self,
        literals: impl IntoIterator<Item = Literal>,
        penalty_weight: u64,
    ) -> Result<ClauseAdded, FormulaError> {
        let mut lits: Vec<Literal> = literals.into_iter().collect();
        if lits.is_empty() {
            return Err(FormulaError::EmptyClause);
        }
        for &l in &lits {
            self.check_literal(l)?;
        }
        lits.sort();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].negated() == w[1]) {
            return Ok(ClauseAdded::Tautology);
        }
        self.clauses.push(Clause {
            literals: lits,
            penalty_weight: penalty_weight.max(1),
        });
        Ok(ClauseAdded::Added)
    }

    fn check_literal(&self, l: Literal) -> Result<(), FormulaError> {
        match l {
            Literal::Bool { var, .. } if var.index() >= self.bool_vars.len() => {
                Err(FormulaError::Dangling(format!("Boolean variable {var}")))
            }
            Literal::Arith { atom, .. } if atom.index() >= self.atoms.len() => {
                Err(FormulaError::Dangling(format!("atom #{}", atom.0)))
            }
            _ => Ok(()),
        }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn atoms(&self) -> &[LinearAtom] {
        &self.atoms
    }

    pub fn atom(&self, id: AtomId) -> &LinearAtom {
        &self.atoms[id.index()]
    }

    pub fn int_vars(&self) -> &[VarInfo] {
        &self.int_vars
    }

    pub fn bool_vars(&self) -> &[VarInfo] {
        &self.bool_vars
    }

    pub fn num_int_vars(&self) -> usize {
        self.int_vars.len()
    }

    pub fn num_bool_vars(&self) -> usize {
        self.bool_vars.len()
    }

    /// Skeleton variable standing for `atom`: encoders follow the Boolean
    /// variables, so the map is injective by construction.
    pub fn skeleton_encoder(&self, atom: AtomId) -> usize {
        self.bool_vars.len() + atom.index()
    }

    pub fn num_skeleton_vars(&self) -> usize {
        self.bool_vars.len() + self.atoms.len()
    }

    /// Integer variables that occur in at least one clause, in id order.
    pub fn occurring_int_vars(&self) -> Vec<IntVarId> {
        let mut seen = vec![false; self.int_vars.len()];
        for clause in &self.clauses {
            for lit in clause.literals() {
                if let Literal::Arith { atom, .. } = *lit {
                    for v in self.atom(atom).vars() {
                        seen[v.index()] = true;
                    }
                }
            }
        }
        (0..self.int_vars.len() as u32)
            .filter(|&i| seen[i as usize])
            .map(IntVarId)
            .collect()
    }

    pub fn evaluate_literal(&self, lit: Literal, a: &Assignment) -> Result<bool, ModelError> {
        Ok(match lit {
            Literal::Bool { var, positive } => a.bool(var) == positive,
            Literal::Arith { atom, positive } => self.atom(atom).evaluate(a)? == positive,
        })
    }

    pub fn evaluate_clause(&self, clause: &Clause, a: &Assignment) -> Result<bool, ModelError> {
        for &lit in clause.literals() {
            if self.evaluate_literal(lit, a)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// True iff every clause has a true literal under `a`.
    pub fn evaluate(&self, a: &Assignment) -> Result<bool, ModelError> {
        for clause in &self.clauses {
            if !self.evaluate_clause(clause, a)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Rewrites every negative equality literal `¬(t = k)` into
    /// `(t ≤ k−1) ∨ (−t ≤ −k−1)` so that equalities only occur positively.
    pub fn split_negative_equalities(&self) -> Result<CnfFormula, ModelError> {
        let has_negative_eq = self.clauses.iter().flat_map(|c| c.literals()).any(
            |l| matches!(*l, Literal::Arith { atom, positive: false } if self.atom(atom).is_equality()),
        );
        if !has_negative_eq {
            return Ok(self.clone());
        }
        let mut out = CnfFormula::with_vars_of(self);
        for atom in &self.atoms {
            out.intern_atom(atom.clone());
        }
        for clause in &self.clauses {
            let mut lits = Vec::with_capacity(clause.len() + 1);
            let mut always_true = false;
            for &lit in clause.literals() {
                match lit {
                    Literal::Arith { atom, positive: false } if self.atom(atom).is_equality() => {
                        let eq = self.atom(atom);
                        let k = eq.constant() as i128;
                        let below = LinearAtom::from_wide(
                            eq.terms().iter().map(|&(v, c)| (v, c as i128)).collect(),
                            Relation::Le,
                            k - 1,
                        )?;
                        let above = LinearAtom::from_wide(
                            eq.terms().iter().map(|&(v, c)| (v, -(c as i128))).collect(),
                            Relation::Le,
                            -k - 1,
                        )?;
                        for side in [below, above] {
                            match side {
                                Normalized::Atom(a) => lits.push(Literal::arith(out.intern_atom(a), true)),
                                Normalized::Constant(true) => always_true = true,
                                Normalized::Constant(false) => {}
                            }
                        }
                    }
                    other => lits.push(other),
                }
            }
            if always_true {
                continue;
            }
            // a negated equality has a non-empty term list, so both sides are atoms
            out.add_weighted_clause(lits, clause.penalty_weight)
                .expect("split clause keeps at least one literal");
        }
        Ok(out)
    }
}

/// Values for every integer and Boolean variable of a formula.
///
/// A `Model` is an assignment that satisfies the formula it was built for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Assignment {
    pub int_values: Vec<i64>,
    pub bool_values: Vec<bool>,
}

pub type Model = Assignment;

impl Assignment {
    pub fn new(int_values: Vec<i64>, bool_values: Vec<bool>) -> Self {
        Assignment { int_values, bool_values }
    }

    pub fn from_ints(int_values: Vec<i64>) -> Self {
        Assignment { int_values, bool_values: Vec::new() }
    }

    pub fn zeros(formula: &CnfFormula) -> Self {
        Assignment {
            int_values: vec![0; formula.num_int_vars()],
            bool_values: vec![false; formula.num_bool_vars()],
        }
    }

    pub fn int(&self, v: IntVarId) -> i64 {
        self.int_values[v.index()]
    }

    pub fn bool(&self, v: BoolVarId) -> bool {
        self.bool_values[v.index()]
    }

    pub fn set_int(&mut self, v: IntVarId, value: i64) {
        self.int_values[v.index()] = value;
    }

    pub fn set_bool(&mut self, v: BoolVarId, value: bool) {
        self.bool_values[v.index()] = value;
    }

    /// Keeps only the first `ints` integer and `bools` Boolean values.
    pub fn project(&self, ints: usize, bools: usize) -> Assignment {
        Assignment {
            int_values: self.int_values[..ints].to_vec(),
            bool_values: self.bool_values[..bools].to_vec(),
        }
    }
}
