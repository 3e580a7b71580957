//! Bit coverage of a sample set over the syntax tree.
//!
//! Every reachable non-leaf node and every variable leaf is tracked. A Bool
//! node contributes one bit, an Int node the low 64 bits of its value in
//! two's complement. A bit is covered once it has been seen as both 0 and 1.

use serde::Serialize;

use crate::model::Model;
use crate::smtlib::ast::EvalError;
use crate::smtlib::{Ast, NodeId, NodeKind, Sort, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seen {
    Bool { seen0: bool, seen1: bool },
    Int { zeros: u64, ones: u64 },
}

impl Seen {
    fn covered(self) -> u32 {
        match self {
            Seen::Bool { seen0, seen1 } => u32::from(seen0 && seen1),
            Seen::Int { zeros, ones } => (zeros & ones).count_ones(),
        }
    }

    fn width(self) -> u32 {
        match self {
            Seen::Bool { .. } => 1,
            Seen::Int { .. } => 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoverageError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("accumulators track different node sets")]
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageAccumulator {
    nodes: Vec<NodeId>,
    seen: Vec<Seen>,
    total_bits: u64,
    samples: u64,
}

/// Nodes whose bits count towards coverage, in increasing id order.
pub fn tracked_nodes(ast: &Ast) -> Vec<NodeId> {
    ast.reachable()
        .into_iter()
        .filter(|&id| {
            let kind = ast.node(id).kind;
            !kind.is_leaf() || matches!(kind, NodeKind::IntVar(_) | NodeKind::BoolVar(_))
        })
        .collect()
}

impl CoverageAccumulator {
    pub fn new(ast: &Ast) -> Self {
        let nodes = tracked_nodes(ast);
        let seen: Vec<Seen> = nodes
            .iter()
            .map(|&id| match ast.node(id).sort {
                Sort::Bool => Seen::Bool { seen0: false, seen1: false },
                Sort::Int => Seen::Int { zeros: 0, ones: 0 },
            })
            .collect();
        let total_bits = seen.iter().map(|s| u64::from(s.width())).sum();
        CoverageAccumulator { nodes, seen, total_bits, samples: 0 }
    }

    pub fn accumulate(&mut self, ast: &Ast, m: &Model) -> Result<(), CoverageError> {
        let vals = ast.evaluate_all(m)?;
        for (&id, seen) in self.nodes.iter().zip(&mut self.seen) {
            match (seen, vals[id.index()]) {
                (Seen::Bool { seen0, seen1 }, Value::Bool(b)) => {
                    if b {
                        *seen1 = true;
                    } else {
                        *seen0 = true;
                    }
                }
                (Seen::Int { zeros, ones }, Value::Int(v)) => {
                    let bits = v as u64;
                    *ones |= bits;
                    *zeros |= !bits;
                }
                _ => unreachable!("node sort disagrees with its value"),
            }
        }
        self.samples += 1;
        Ok(())
    }

    /// Bitwise union of what both accumulators have seen.
    pub fn merge(&mut self, other: &CoverageAccumulator) -> Result<(), CoverageError> {
        if self.nodes != other.nodes {
            return Err(CoverageError::Mismatch);
        }
        for (a, b) in self.seen.iter_mut().zip(&other.seen) {
            *a = match (*a, *b) {
                (Seen::Bool { seen0: a0, seen1: a1 }, Seen::Bool { seen0: b0, seen1: b1 }) => {
                    Seen::Bool { seen0: a0 || b0, seen1: a1 || b1 }
                }
                (Seen::Int { zeros: az, ones: ao }, Seen::Int { zeros: bz, ones: bo }) => {
                    Seen::Int { zeros: az | bz, ones: ao | bo }
                }
                _ => return Err(CoverageError::Mismatch),
            };
        }
        self.samples += other.samples;
        Ok(())
    }

    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    pub fn covered_bits(&self) -> u64 {
        self.seen.iter().map(|s| u64::from(s.covered())).sum()
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn tracked(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Covered over total bits, 0 when nothing is tracked.
    pub fn coverage(&self) -> f64 {
        if self.total_bits == 0 {
            0.0
        } else {
            self.covered_bits() as f64 / self.total_bits as f64
        }
    }

    pub fn report(&self, ast: &Ast, per_node: bool) -> CoverageReport {
        let nodes = per_node.then(|| {
            self.nodes
                .iter()
                .zip(&self.seen)
                .map(|(&id, s)| NodeCoverage {
                    node: id.0,
                    term: ast.term_to_string(id),
                    sort: match s {
                        Seen::Bool { .. } => "Bool",
                        Seen::Int { .. } => "Int",
                    },
                    total_bits: s.width(),
                    covered_bits: s.covered(),
                })
                .collect()
        });
        CoverageReport {
            total_bits: self.total_bits,
            covered_bits: self.covered_bits(),
            coverage: self.coverage(),
            tracked_nodes: self.nodes.len(),
            samples: self.samples,
            per_node: nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCoverage {
    pub node: u32,
    pub term: String,
    pub sort: &'static str,
    pub total_bits: u32,
    pub covered_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub total_bits: u64,
    pub covered_bits: u64,
    pub coverage: f64,
    pub tracked_nodes: usize,
    pub samples: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_node: Option<Vec<NodeCoverage>>,
}

/// Coverage of `samples` from a fresh accumulator.
pub fn coverage_of<'m>(ast: &Ast, samples: impl IntoIterator<Item = &'m Model>) -> Result<f64, CoverageError> {
    let mut acc = CoverageAccumulator::new(ast);
    for m in samples {
        acc.accumulate(ast, m)?;
    }
    Ok(acc.coverage())
}
