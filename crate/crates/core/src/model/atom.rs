use std::fmt;

use super::{Assignment, IntVarId, ModelError};

/// Comparison of a linear atom's left-hand side against its constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    /// `Σ aᵢxᵢ ≤ k`
    Le,
    /// `Σ aᵢxᵢ = k`
    Eq,
}

/// A linear integer constraint in standard form `Σ aᵢxᵢ ⋈ k`.
///
/// Terms are sorted by variable id with no zero coefficients, and an
/// equality always has a positive leading coefficient, so two atoms that
/// denote the same constraint compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearAtom {
    terms: Vec<(IntVarId, i64)>,
    relation: Relation,
    constant: i64,
}

/// Result of building an atom: either a genuine constraint or a constant
/// truth value when every variable cancelled out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Atom(LinearAtom),
    Constant(bool),
}

impl LinearAtom {
    /// Builds a canonical atom from possibly unsorted, repeated or zero terms.
    pub fn new<I>(terms: I, relation: Relation, constant: i64) -> Result<Normalized, ModelError>
    where
        I: IntoIterator<Item = (IntVarId, i64)>,
    {
        let mut wide: Vec<(IntVarId, i128)> = terms.into_iter().map(|(v, c)| (v, c as i128)).collect();
        wide.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(IntVarId, i128)> = Vec::with_capacity(wide.len());
        for (v, c) in wide {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0);
        Self::from_wide(merged, relation, constant as i128)
    }

    /// Like [`LinearAtom::new`] but over 128-bit coefficients, which must fit in
    /// 64 bits once merged.
    pub(crate) fn from_wide(
        mut terms: Vec<(IntVarId, i128)>,
        relation: Relation,
        mut constant: i128,
    ) -> Result<Normalized, ModelError> {
        terms.sort_by_key(|&(v, _)| v);
        terms.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        terms.retain(|&(_, c)| c != 0);
        if terms.is_empty() {
            let holds = match relation {
                Relation::Le => 0 <= constant,
                Relation::Eq => constant == 0,
            };
            return Ok(Normalized::Constant(holds));
        }
        if relation == Relation::Eq && terms[0].1 < 0 {
            for t in &mut terms {
                t.1 = -t.1;
            }
            constant = -constant;
        }
        let narrow = |x: i128| i64::try_from(x).map_err(|_| ModelError::Overflow);
        let terms = terms
            .into_iter()
            .map(|(v, c)| Ok((v, narrow(c)?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Normalized::Atom(LinearAtom {
            terms,
            relation,
            constant: narrow(constant)?,
        }))
    }

    /// Convenience for tests and hand-built formulas; panics on a constant atom.
    pub fn le(terms: &[(IntVarId, i64)], constant: i64) -> LinearAtom {
        Self::expect_atom(Self::new(terms.iter().copied(), Relation::Le, constant))
    }

    /// Convenience for tests and hand-built formulas; panics on a constant atom.
    pub fn eq(terms: &[(IntVarId, i64)], constant: i64) -> LinearAtom {
        Self::expect_atom(Self::new(terms.iter().copied(), Relation::Eq, constant))
    }

    fn expect_atom(n: Result<Normalized, ModelError>) -> LinearAtom {
        match n {
            Ok(Normalized::Atom(a)) => a,
            other => panic!("expected a non-constant atom, got {other:?}"),
        }
    }

    pub fn terms(&self) -> &[(IntVarId, i64)] {
        &self.terms
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    pub fn constant(&self) -> i64 {
        self.constant
    }

    pub fn is_equality(&self) -> bool {
        self.relation == Relation::Eq
    }

    pub fn vars(&self) -> impl Iterator<Item = IntVarId> + '_ {
        self.terms.iter().map(|&(v, _)| v)
    }

    pub fn coefficient(&self, var: IntVarId) -> i64 {
        self.terms
            .binary_search_by_key(&var, |&(v, _)| v)
            .map(|i| self.terms[i].1)
            .unwrap_or(0)
    }

    pub fn contains(&self, var: IntVarId) -> bool {
        self.coefficient(var) != 0
    }

    /// `Σ aᵢ·α(xᵢ)` with 128-bit intermediates.
    pub fn lhs(&self, a: &Assignment) -> Result<i128, ModelError> {
        self.terms.iter().try_fold(0i128, |acc, &(v, c)| {
            let term = (c as i128)
                .checked_mul(a.int(v) as i128)
                .ok_or(ModelError::Overflow)?;
            acc.checked_add(term).ok_or(ModelError::Overflow)
        })
    }

    /// Whether a left-hand-side value satisfies the atom.
    pub fn holds_for(&self, lhs: i128) -> bool {
        match self.relation {
            Relation::Le => lhs <= self.constant as i128,
            Relation::Eq => lhs == self.constant as i128,
        }
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<bool, ModelError> {
        Ok(self.holds_for(self.lhs(a)?))
    }
}

impl fmt::Display for LinearAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(v, c)) in self.terms.iter().enumerate() {
            match (i, c) {
                (0, 1) => write!(f, "{v}")?,
                (0, -1) => write!(f, "-{v}")?,
                (0, _) => write!(f, "{c}{v}")?,
                (_, 1) => write!(f, " + {v}")?,
                (_, -1) => write!(f, " - {v}")?,
                (_, c) if c < 0 => write!(f, " - {}{v}", c.unsigned_abs())?,
                (_, c) => write!(f, " + {c}{v}")?,
            }
        }
        let op = match self.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
        };
        write!(f, " {op} {}", self.constant)
    }
}
