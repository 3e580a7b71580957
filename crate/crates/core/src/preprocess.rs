//! Gaussian elimination of top-level equalities and the inverse mapping of
//! models back to the original formula.

use crate::model::{
    Assignment, CnfFormula, IntVarId, LinearAtom, Literal, Model, ModelError, Normalized,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreprocessError {
    #[error("equalities are inconsistent: {0}")]
    InconsistentEquality(String),
    #[error("substitution for {var} is not integral ({numerator} / {divisor})")]
    Divisibility { var: IntVarId, numerator: i128, divisor: i64 },
    #[error("reconstructed assignment does not satisfy the original formula")]
    Verification,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `var = (Σ cᵢ·xᵢ + constant) / divisor`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Elimination {
    pub var: IntVarId,
    pub terms: Vec<(IntVarId, i64)>,
    pub constant: i64,
    pub divisor: i64,
}

/// Eliminations in the order they were performed. A later entry never
/// mentions a variable eliminated earlier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    pub eliminations: Vec<Elimination>,
}

impl Substitution {
    pub fn is_empty(&self) -> bool {
        self.eliminations.is_empty()
    }

    pub fn eliminated(&self) -> impl Iterator<Item = IntVarId> + '_ {
        self.eliminations.iter().map(|e| e.var)
    }

    /// Overwrites every eliminated variable in `a`, latest elimination first.
    pub fn apply(&self, a: &mut Assignment) -> Result<(), PreprocessError> {
        for e in self.eliminations.iter().rev() {
            let mut num = e.constant as i128;
            for &(v, c) in &e.terms {
                let t = (c as i128).checked_mul(a.int(v) as i128).ok_or(ModelError::Overflow)?;
                num = num.checked_add(t).ok_or(ModelError::Overflow)?;
            }
            let q = e.divisor as i128;
            if num % q != 0 {
                return Err(PreprocessError::Divisibility { var: e.var, numerator: num, divisor: e.divisor });
            }
            let value = i64::try_from(num / q).map_err(|_| ModelError::Overflow)?;
            a.set_int(e.var, value);
        }
        Ok(())
    }
}

/// Pivot for a unit equality: a unit coefficient with the lowest id, else the
/// lowest-id coefficient dividing every other coefficient and the constant.
fn pivot(atom: &LinearAtom) -> Option<(IntVarId, i64)> {
    if let Some(&(v, c)) = atom.terms().iter().find(|&&(_, c)| c.abs() == 1) {
        return Some((v, c));
    }
    atom.terms().iter().copied().find(|&(_, c)| {
        atom.terms().iter().all(|&(_, d)| d % c == 0) && atom.constant() % c == 0
    })
}

/// Substitutes `var := (Σ terms + constant)` into `atom`.
fn substitute(atom: &LinearAtom, e: &Elimination) -> Result<Normalized, ModelError> {
    let a = atom.coefficient(e.var) as i128;
    if a == 0 {
        return Ok(Normalized::Atom(atom.clone()));
    }
    debug_assert_eq!(e.divisor, 1);
    let mut terms: Vec<(IntVarId, i128)> = atom
        .terms()
        .iter()
        .filter(|&&(v, _)| v != e.var)
        .map(|&(v, c)| (v, c as i128))
        .collect();
    for &(v, c) in &e.terms {
        terms.push((v, a.checked_mul(c as i128).ok_or(ModelError::Overflow)?));
    }
    let constant = (atom.constant() as i128)
        .checked_sub(a.checked_mul(e.constant as i128).ok_or(ModelError::Overflow)?)
        .ok_or(ModelError::Overflow)?;
    LinearAtom::from_wide(terms, atom.relation(), constant)
}

fn unit_equality(f: &CnfFormula, clause_idx: usize) -> Option<&LinearAtom> {
    match f.clauses()[clause_idx].literals() {
        [Literal::Arith { atom, positive: true }] if f.atom(*atom).is_equality() => Some(f.atom(*atom)),
        _ => None,
    }
}

/// Rebuilds `f` with `e` substituted through every atom, dropping clauses
/// that become true and literals that become false.
fn eliminate(f: &CnfFormula, e: &Elimination) -> Result<CnfFormula, PreprocessError> {
    let mut out = CnfFormula::with_vars_of(f);
    for (ci, clause) in f.clauses().iter().enumerate() {
        let mut lits = Vec::with_capacity(clause.len());
        let mut satisfied = false;
        for &lit in clause.literals() {
            match lit {
                Literal::Arith { atom, positive } => match substitute(f.atom(atom), e)? {
                    Normalized::Atom(a) => lits.push(Literal::arith(out.intern_atom(a), positive)),
                    Normalized::Constant(b) if b == positive => satisfied = true,
                    Normalized::Constant(_) => {}
                },
                other => lits.push(other),
            }
        }
        if satisfied {
            continue;
        }
        if lits.is_empty() {
            let what = match unit_equality(f, ci) {
                Some(a) => format!("{a} reduces to a false constant"),
                None => format!("clause {ci} is falsified by substituting {}", e.var),
            };
            return Err(PreprocessError::InconsistentEquality(what));
        }
        out.add_weighted_clause(lits, clause.penalty_weight)
            .expect("literals come from the rebuilt tables");
    }
    Ok(out)
}

/// Eliminates variables using equalities asserted as unit clauses.
///
/// Equalities without an admissible pivot stay in the formula. The result
/// keeps the variable tables of `f`, so models of it are assignments of `f`
/// once [`model_convert`] fills in the eliminated variables.
pub fn equation_solving(f: &CnfFormula) -> Result<(CnfFormula, Substitution), PreprocessError> {
    let mut current = f.clone();
    let mut subst = Substitution::default();
    loop {
        let next = (0..current.clauses().len()).find_map(|ci| {
            let atom = unit_equality(&current, ci)?;
            let (var, c) = pivot(atom)?;
            // c·var + Σ others = k  ⇒  var = (k − Σ others) / c, exact by pivot choice
            let terms = atom
                .terms()
                .iter()
                .filter(|&&(v, _)| v != var)
                .map(|&(v, d)| (v, -d / c))
                .collect();
            Some(Elimination { var, terms, constant: atom.constant() / c, divisor: 1 })
        });
        let Some(e) = next else {
            break;
        };
        current = eliminate(&current, &e)?;
        subst.eliminations.push(e);
    }
    Ok((current, subst))
}

/// Extends a model of the simplified formula to a verified model of `f`.
pub fn model_convert(m_hat: &Model, s: &Substitution, f: &CnfFormula) -> Result<Model, PreprocessError> {
    let mut m = m_hat.clone();
    s.apply(&mut m)?;
    if !f.evaluate(&m)? {
        return Err(PreprocessError::Verification);
    }
    Ok(m)
}
