//! Consistency checking of conjunctions of linear integer constraints:
//! rational simplex followed by branch-and-bound.

pub mod simplex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::model::{Assignment, AtomId, CnfFormula, IntVarId, Relation};
use simplex::{Simplex, Tag};

pub const DEFAULT_NODE_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TheoryError {
    #[error("branch-and-bound exceeded its budget of {0} nodes")]
    BudgetExhausted(usize),
    #[error("integer witness does not fit in 64 bits")]
    Overflow,
    #[error("negated equality on atom {0:?} must be split before reaching the theory")]
    NegatedEquality(AtomId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TheoryAssertion {
    pub atom: AtomId,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TheoryVerdict {
    /// Integer witness over all of the formula's integer variables.
    Sat(Assignment),
    Unsat(Vec<TheoryAssertion>),
}

/// `Σ aⱼxⱼ ⋈ k` with a wide constant so negations never overflow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub terms: Vec<(IntVarId, i64)>,
    pub relation: Relation,
    pub constant: i128,
}

impl Constraint {
    pub fn fixed(var: IntVarId, value: i64) -> Constraint {
        Constraint { terms: vec![(var, 1)], relation: Relation::Eq, constant: value as i128 }
    }

    pub fn holds(&self, values: &[i64]) -> bool {
        let lhs: i128 = self.terms.iter().map(|&(v, c)| c as i128 * values[v.index()] as i128).sum();
        match self.relation {
            Relation::Le => lhs <= self.constant,
            Relation::Eq => lhs == self.constant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntegerOutcome {
    Sat(Vec<i64>),
    /// Indices of an infeasible subset of the input constraints.
    Unsat(Vec<usize>),
}

enum Node {
    Sat(Vec<i64>),
    Unsat(Vec<Tag>),
    Branch(Frame),
}

struct Frame {
    base: Simplex,
    column: usize,
    floor: BigInt,
    marker: Tag,
    down_core: Option<Vec<Tag>>,
}

/// Decides integer feasibility of `constraints` over `num_vars` variables.
///
/// Explored nodes are bounded by `budget`; running out is reported as an
/// error rather than a verdict.
pub fn solve_integer(constraints: &[Constraint], num_vars: usize, budget: usize) -> Result<IntegerOutcome, TheoryError> {
    let mut root = Simplex::new(num_vars);
    for (i, c) in constraints.iter().enumerate() {
        let g = c.terms.iter().fold(0i64, |g, &(_, a)| g.gcd(&a));
        if g == 0 {
            let holds = match c.relation {
                Relation::Le => 0 <= c.constant,
                Relation::Eq => c.constant == 0,
            };
            if !holds {
                return Ok(IntegerOutcome::Unsat(vec![i]));
            }
            continue;
        }
        let g128 = g as i128;
        if c.relation == Relation::Eq && c.constant % g128 != 0 {
            return Ok(IntegerOutcome::Unsat(vec![i]));
        }
        // the slack is integral, so dividing by the gcd and flooring is exact
        let terms: Vec<(usize, i64)> = c.terms.iter().map(|&(v, a)| (v.index(), a / g)).collect();
        let k = BigRational::from_integer(BigInt::from(Integer::div_floor(&c.constant, &g128)));
        let s = root.add_row(&terms);
        let asserted = match c.relation {
            Relation::Le => root.assert_upper(s, k, i),
            Relation::Eq => root.assert_upper(s, k.clone(), i).and_then(|_| root.assert_lower(s, k, i)),
        };
        if let Err(core) = asserted {
            return Ok(IntegerOutcome::Unsat(core));
        }
    }

    let mut explored = 0usize;
    let mut next_marker = constraints.len();
    let visit = |mut s: Simplex, explored: &mut usize, next_marker: &mut Tag| -> Result<Node, TheoryError> {
        *explored += 1;
        if *explored > budget {
            return Err(TheoryError::BudgetExhausted(budget));
        }
        if let Err(core) = s.check() {
            return Ok(Node::Unsat(core));
        }
        let fractional = (0..num_vars).find(|&j| !s.value(j).is_integer());
        match fractional {
            None => {
                let values = (0..num_vars)
                    .map(|j| s.value(j).to_integer().to_i64().ok_or(TheoryError::Overflow))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Node::Sat(values))
            }
            Some(column) => {
                let floor = s.value(column).floor().to_integer();
                let marker = *next_marker;
                *next_marker += 1;
                Ok(Node::Branch(Frame { base: s, column, floor, marker, down_core: None }))
            }
        }
    };

    let mut stack: Vec<Frame> = Vec::new();
    let mut pending = visit(root, &mut explored, &mut next_marker)?;
    loop {
        match pending {
            Node::Sat(values) => return Ok(IntegerOutcome::Sat(values)),
            Node::Branch(frame) => {
                let mut child = frame.base.clone();
                let bound = BigRational::from_integer(frame.floor.clone());
                let column = frame.column;
                let marker = frame.marker;
                stack.push(frame);
                pending = match child.assert_upper(column, bound, marker) {
                    Err(core) => Node::Unsat(core),
                    Ok(()) => visit(child, &mut explored, &mut next_marker)?,
                };
            }
            Node::Unsat(core) => {
                let Some(top) = stack.last_mut() else {
                    let core = core.into_iter().filter(|&t| t < constraints.len()).collect();
                    return Ok(IntegerOutcome::Unsat(core));
                };
                if core.binary_search(&top.marker).is_err() {
                    // infeasible regardless of this branch
                    stack.pop();
                    pending = Node::Unsat(core);
                    continue;
                }
                match top.down_core.take() {
                    None => {
                        top.down_core = Some(core);
                        let mut child = top.base.clone();
                        let bound = BigRational::from_integer(&top.floor + 1);
                        pending = match child.assert_lower(top.column, bound, top.marker) {
                            Err(core) => Node::Unsat(core),
                            Ok(()) => visit(child, &mut explored, &mut next_marker)?,
                        };
                    }
                    Some(down) => {
                        let marker = top.marker;
                        let mut merged: Vec<Tag> = down.into_iter().chain(core).filter(|&t| t != marker).collect();
                        merged.sort_unstable();
                        merged.dedup();
                        stack.pop();
                        pending = Node::Unsat(merged);
                    }
                }
            }
        }
    }
}

/// The constraint asserted by an atom literal: a false `t ≤ k` asserts
/// `−t ≤ −k−1`.
pub fn assertion_constraint(a: TheoryAssertion, f: &CnfFormula) -> Result<Constraint, TheoryError> {
    let atom = f.atom(a.atom);
    let k = atom.constant() as i128;
    match (atom.relation(), a.positive) {
        (relation, true) => Ok(Constraint { terms: atom.terms().to_vec(), relation, constant: k }),
        (Relation::Le, false) => Ok(Constraint {
            terms: atom.terms().iter().map(|&(v, c)| (v, -c)).collect(),
            relation: Relation::Le,
            constant: -k - 1,
        }),
        (Relation::Eq, false) => Err(TheoryError::NegatedEquality(a.atom)),
    }
}

/// Checks whether the asserted atom literals have a common integer solution.
pub fn check_conjunction(
    assertions: &[TheoryAssertion],
    f: &CnfFormula,
    budget: usize,
) -> Result<TheoryVerdict, TheoryError> {
    let constraints = assertions
        .iter()
        .map(|&a| assertion_constraint(a, f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match solve_integer(&constraints, f.num_int_vars(), budget)? {
        IntegerOutcome::Sat(values) => TheoryVerdict::Sat(Assignment::from_ints(values)),
        IntegerOutcome::Unsat(core) => TheoryVerdict::Unsat(core.into_iter().map(|i| assertions[i]).collect()),
    })
}
