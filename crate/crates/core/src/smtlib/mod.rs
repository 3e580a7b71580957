//! SMT-LIB2 front end for the QF_LIA subset: reader, syntax DAG and
//! clausification into [`CnfFormula`](crate::model::CnfFormula).

pub mod ast;
mod cnf;
mod parser;
pub mod sexpr;

use std::fmt;

pub use ast::{Ast, Node, NodeId, NodeKind, Sort, Value};
pub use cnf::{normalize_atom, to_cnf, CnfError};
pub use parser::parse_script;

use crate::model::CnfFormula;

/// 1-based source location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostics {
    pub position: Position,
    pub message: String,
    pub severity: Severity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    /// Well-formed input outside the supported fragment.
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}: {kind_name} error: {}", diagnostics.position, diagnostics.message, kind_name = match kind {
    ErrorKind::Syntax => "syntax",
    ErrorKind::Unsupported => "unsupported feature",
})]
pub struct ParseError {
    pub kind: ErrorKind,
    pub diagnostics: ParseDiagnostics,
}

impl ParseError {
    pub(crate) fn syntax(position: Position, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Syntax, position, message)
    }

    pub(crate) fn unsupported(position: Position, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Unsupported, position, message)
    }

    fn new(kind: ErrorKind, position: Position, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            diagnostics: ParseDiagnostics { position, message: message.into(), severity: Severity::Error },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Cnf(#[from] CnfError),
}

/// A parsed script together with its clausal form.
///
/// The first `ast.int_vars().len()` integer and `ast.bool_vars().len()`
/// Boolean variables of `cnf` are the declared ones, in declaration order;
/// everything after them is auxiliary.
#[derive(Debug, Clone)]
pub struct Problem {
    pub ast: Ast,
    pub cnf: CnfFormula,
}

impl Problem {
    pub fn from_smtlib(text: &str) -> Result<Problem, FrontendError> {
        let ast = parse_script(text)?;
        let cnf = to_cnf(&ast)?;
        Ok(Problem { ast, cnf })
    }

    pub fn from_ast(ast: Ast) -> Result<Problem, CnfError> {
        let cnf = to_cnf(&ast)?;
        Ok(Problem { ast, cnf })
    }

    pub fn num_declared_ints(&self) -> usize {
        self.ast.int_vars().len()
    }

    pub fn num_declared_bools(&self) -> usize {
        self.ast.bool_vars().len()
    }
}
