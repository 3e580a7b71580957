use std::collections::HashMap;
use std::fmt::Write as _;

use crate::model::{Assignment, BoolVarId, IntVarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    Int,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    And,
    Or,
    Not,
    Implies,
    /// `ite` of either sort; the node's sort tells which.
    Ite,
    /// Equality between two Int terms, or equivalence between two Bool terms.
    Eq,
    Le,
    Ge,
    Lt,
    Gt,
    Plus,
    /// Unary negation or left-associative subtraction.
    Minus,
    /// Product of a constant (first child) and an Int term.
    Times,
    IntConst(i64),
    IntVar(IntVarId),
    BoolVar(BoolVarId),
    BoolConst(bool),
}

impl NodeKind {
    pub fn is_leaf(self) -> bool {
        matches!(
            self,
            NodeKind::IntConst(_) | NodeKind::IntVar(_) | NodeKind::BoolVar(_) | NodeKind::BoolConst(_)
        )
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, NodeKind::Le | NodeKind::Ge | NodeKind::Lt | NodeKind::Gt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub sort: Sort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Int(i128),
}

impl Value {
    pub fn as_bool(self) -> bool {
        match self {
            Value::Bool(b) => b,
            Value::Int(_) => panic!("expected a Bool value"),
        }
    }

    pub fn as_int(self) -> i128 {
        match self {
            Value::Int(v) => v,
            Value::Bool(_) => panic!("expected an Int value"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("integer overflow while evaluating node {0}")]
    Overflow(u32),
}

/// Hash-consed syntax DAG of the asserted formulas.
///
/// Children always have smaller ids than their parents, so evaluating nodes
/// in id order is a valid bottom-up schedule.
#[derive(Debug, Clone, Default)]
pub struct Ast {
    nodes: Vec<Node>,
    dedup: HashMap<Node, NodeId>,
    roots: Vec<NodeId>,
    int_vars: Vec<String>,
    bool_vars: Vec<String>,
}

impl Ast {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_int(&mut self, name: impl Into<String>) -> IntVarId {
        self.int_vars.push(name.into());
        IntVarId(self.int_vars.len() as u32 - 1)
    }

    pub fn declare_bool(&mut self, name: impl Into<String>) -> BoolVarId {
        self.bool_vars.push(name.into());
        BoolVarId(self.bool_vars.len() as u32 - 1)
    }

    /// Adds (or reuses) a node. Sort-correctness is the caller's job.
    pub fn mk(&mut self, kind: NodeKind, children: Vec<NodeId>, sort: Sort) -> NodeId {
        let node = Node { kind, children, sort };
        if let Some(&id) = self.dedup.get(&node) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.dedup.insert(node.clone(), id);
        self.nodes.push(node);
        id
    }

    pub fn int_const(&mut self, v: i64) -> NodeId {
        self.mk(NodeKind::IntConst(v), vec![], Sort::Int)
    }

    pub fn bool_const(&mut self, v: bool) -> NodeId {
        self.mk(NodeKind::BoolConst(v), vec![], Sort::Bool)
    }

    pub fn int_var(&mut self, v: IntVarId) -> NodeId {
        self.mk(NodeKind::IntVar(v), vec![], Sort::Int)
    }

    pub fn bool_var(&mut self, v: BoolVarId) -> NodeId {
        self.mk(NodeKind::BoolVar(v), vec![], Sort::Bool)
    }

    pub fn assert_root(&mut self, node: NodeId) {
        self.roots.push(node);
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn int_vars(&self) -> &[String] {
        &self.int_vars
    }

    pub fn bool_vars(&self) -> &[String] {
        &self.bool_vars
    }

    /// Nodes reachable from the asserted roots, in increasing id order.
    pub fn reachable(&self) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = self.roots.clone();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id.index()], true) {
                continue;
            }
            stack.extend(self.node(id).children.iter().copied());
        }
        (0..self.nodes.len() as u32).filter(|&i| seen[i as usize]).map(NodeId).collect()
    }

    /// Evaluates every node under `m` (entries for unreachable nodes are
    /// still computed). Arithmetic is exact in 128 bits.
    pub fn evaluate_all(&self, m: &Assignment) -> Result<Vec<Value>, EvalError> {
        let mut vals: Vec<Value> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let overflow = || EvalError::Overflow(i as u32);
            let b = |k: usize| vals[node.children[k].index()].as_bool();
            let n = |k: usize| vals[node.children[k].index()].as_int();
            let v = match node.kind {
                NodeKind::IntConst(c) => Value::Int(c as i128),
                NodeKind::BoolConst(c) => Value::Bool(c),
                NodeKind::IntVar(v) => Value::Int(m.int(v) as i128),
                NodeKind::BoolVar(v) => Value::Bool(m.bool(v)),
                NodeKind::And => Value::Bool((0..node.children.len()).all(b)),
                NodeKind::Or => Value::Bool((0..node.children.len()).any(b)),
                NodeKind::Not => Value::Bool(!b(0)),
                NodeKind::Implies => Value::Bool(!b(0) || b(1)),
                NodeKind::Ite => {
                    if b(0) {
                        vals[node.children[1].index()]
                    } else {
                        vals[node.children[2].index()]
                    }
                }
                NodeKind::Eq => Value::Bool(vals[node.children[0].index()] == vals[node.children[1].index()]),
                NodeKind::Le => Value::Bool(n(0) <= n(1)),
                NodeKind::Ge => Value::Bool(n(0) >= n(1)),
                NodeKind::Lt => Value::Bool(n(0) < n(1)),
                NodeKind::Gt => Value::Bool(n(0) > n(1)),
                NodeKind::Plus => Value::Int(
                    (0..node.children.len()).try_fold(0i128, |acc, k| acc.checked_add(n(k))).ok_or_else(overflow)?,
                ),
                NodeKind::Minus => {
                    if node.children.len() == 1 {
                        Value::Int(n(0).checked_neg().ok_or_else(overflow)?)
                    } else {
                        Value::Int(
                            (1..node.children.len())
                                .try_fold(n(0), |acc, k| acc.checked_sub(n(k)))
                                .ok_or_else(overflow)?,
                        )
                    }
                }
                NodeKind::Times => Value::Int(n(0).checked_mul(n(1)).ok_or_else(overflow)?),
            };
            vals.push(v);
        }
        Ok(vals)
    }

    /// Whether `m` satisfies every asserted formula.
    pub fn satisfied_by(&self, m: &Assignment) -> bool {
        match self.evaluate_all(m) {
            Ok(vals) => self.roots.iter().all(|r| vals[r.index()].as_bool()),
            Err(_) => false,
        }
    }

    pub fn write_term(&self, id: NodeId, out: &mut String) {
        let node = self.node(id);
        let op = match node.kind {
            NodeKind::IntConst(c) if c < 0 => {
                let _ = write!(out, "(- {})", c.unsigned_abs());
                return;
            }
            NodeKind::IntConst(c) => {
                let _ = write!(out, "{c}");
                return;
            }
            NodeKind::BoolConst(c) => {
                let _ = write!(out, "{c}");
                return;
            }
            NodeKind::IntVar(v) => {
                out.push_str(&quote_symbol(&self.int_vars[v.index()]));
                return;
            }
            NodeKind::BoolVar(v) => {
                out.push_str(&quote_symbol(&self.bool_vars[v.index()]));
                return;
            }
            NodeKind::And => "and",
            NodeKind::Or => "or",
            NodeKind::Not => "not",
            NodeKind::Implies => "=>",
            NodeKind::Ite => "ite",
            NodeKind::Eq => "=",
            NodeKind::Le => "<=",
            NodeKind::Ge => ">=",
            NodeKind::Lt => "<",
            NodeKind::Gt => ">",
            NodeKind::Plus => "+",
            NodeKind::Minus => "-",
            NodeKind::Times => "*",
        };
        out.push('(');
        out.push_str(op);
        for &c in &node.children {
            out.push(' ');
            self.write_term(c, out);
        }
        out.push(')');
    }

    pub fn term_to_string(&self, id: NodeId) -> String {
        let mut s = String::new();
        self.write_term(id, &mut s);
        s
    }

    /// Prints the declarations and assertions back as an SMT-LIB script.
    pub fn to_smtlib(&self) -> String {
        let mut out = String::from("(set-logic QF_LIA)\n");
        for name in &self.int_vars {
            let _ = writeln!(out, "(declare-fun {} () Int)", quote_symbol(name));
        }
        for name in &self.bool_vars {
            let _ = writeln!(out, "(declare-fun {} () Bool)", quote_symbol(name));
        }
        for &r in &self.roots {
            out.push_str("(assert ");
            self.write_term(r, &mut out);
            out.push_str(")\n");
        }
        out.push_str("(check-sat)\n");
        out
    }
}

/// Wraps a symbol in `|…|` unless it is a plain simple symbol.
pub fn quote_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}
