use std::collections::HashMap;

use super::ast::{Ast, NodeId, NodeKind, Sort};
use super::sexpr::{read_all, SExpr};
use super::{ParseError, Position};

struct Parser {
    ast: Ast,
    globals: HashMap<String, NodeId>,
    scopes: Vec<HashMap<String, NodeId>>,
}

/// Parses an SMT-LIB2 script in the QF_LIA subset into a syntax DAG.
pub fn parse_script(text: &str) -> Result<Ast, ParseError> {
    let mut p = Parser { ast: Ast::new(), globals: HashMap::new(), scopes: Vec::new() };
    for cmd in read_all(text)? {
        p.command(&cmd)?;
    }
    Ok(p.ast)
}

fn symbol_name(raw: &str) -> String {
    raw.strip_prefix('|')
        .and_then(|s| s.strip_suffix('|'))
        .unwrap_or(raw)
        .to_string()
}

impl Parser {
    fn command(&mut self, cmd: &SExpr) -> Result<(), ParseError> {
        let pos = cmd.position();
        let items = cmd
            .as_list()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| ParseError::syntax(pos, "expected a command"))?;
        let head = items[0]
            .as_atom()
            .ok_or_else(|| ParseError::syntax(pos, "expected a command name"))?;
        match head {
            "set-logic" => {
                let logic = items.get(1).and_then(SExpr::as_atom).unwrap_or("");
                if !matches!(logic, "QF_LIA" | "LIA" | "QF_IDL" | "ALL") {
                    return Err(ParseError::unsupported(pos, format!("logic {logic}")));
                }
            }
            "set-info" | "set-option" | "check-sat" | "exit" | "get-model" | "get-info" => {}
            "declare-fun" => {
                let [_, name, args, sort] = items else {
                    return Err(ParseError::syntax(pos, "malformed declare-fun"));
                };
                if args.as_list().is_none_or(|a| !a.is_empty()) {
                    return Err(ParseError::unsupported(args.position(), "uninterpreted functions"));
                }
                self.declare(name, sort)?;
            }
            "declare-const" => {
                let [_, name, sort] = items else {
                    return Err(ParseError::syntax(pos, "malformed declare-const"));
                };
                self.declare(name, sort)?;
            }
            "define-fun" => {
                let [_, name, args, sort, body] = items else {
                    return Err(ParseError::syntax(pos, "malformed define-fun"));
                };
                if args.as_list().is_none_or(|a| !a.is_empty()) {
                    return Err(ParseError::unsupported(args.position(), "define-fun with parameters"));
                }
                let sort = self.sort(sort)?;
                let node = self.term(body)?;
                self.expect_sort(body, node, sort)?;
                let name = self.fresh_name(name)?;
                self.globals.insert(name, node);
            }
            "assert" => {
                let [_, body] = items else {
                    return Err(ParseError::syntax(pos, "malformed assert"));
                };
                let node = self.term(body)?;
                self.expect_sort(body, node, Sort::Bool)?;
                self.ast.assert_root(node);
            }
            other => return Err(ParseError::unsupported(pos, format!("command {other}"))),
        }
        Ok(())
    }

    fn fresh_name(&self, name: &SExpr) -> Result<String, ParseError> {
        let raw = name
            .as_atom()
            .ok_or_else(|| ParseError::syntax(name.position(), "expected a symbol"))?;
        let name_s = symbol_name(raw);
        if self.globals.contains_key(&name_s) {
            return Err(ParseError::syntax(name.position(), format!("symbol {name_s} already declared")));
        }
        Ok(name_s)
    }

    fn declare(&mut self, name: &SExpr, sort: &SExpr) -> Result<(), ParseError> {
        let sort = self.sort(sort)?;
        let name = self.fresh_name(name)?;
        let node = match sort {
            Sort::Int => {
                let v = self.ast.declare_int(name.clone());
                self.ast.int_var(v)
            }
            Sort::Bool => {
                let v = self.ast.declare_bool(name.clone());
                self.ast.bool_var(v)
            }
        };
        self.globals.insert(name, node);
        Ok(())
    }

    fn sort(&self, s: &SExpr) -> Result<Sort, ParseError> {
        match s.as_atom() {
            Some("Int") => Ok(Sort::Int),
            Some("Bool") => Ok(Sort::Bool),
            _ => Err(ParseError::unsupported(s.position(), format!("sort {s}"))),
        }
    }

    fn expect_sort(&self, e: &SExpr, node: NodeId, sort: Sort) -> Result<(), ParseError> {
        let got = self.ast.node(node).sort;
        if got != sort {
            return Err(ParseError::syntax(
                e.position(),
                format!("expected a {sort:?} term, found {got:?}"),
            ));
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<NodeId> {
        for scope in self.scopes.iter().rev() {
            if let Some(&n) = scope.get(name) {
                return Some(n);
            }
        }
        self.globals.get(name).copied()
    }

    fn term(&mut self, e: &SExpr) -> Result<NodeId, ParseError> {
        let pos = e.position();
        match e {
            SExpr::Atom(s, _) => self.atom_term(s, pos),
            SExpr::List(items, _) => {
                let Some(head) = items.first() else {
                    return Err(ParseError::syntax(pos, "empty term"));
                };
                let Some(op) = head.as_atom() else {
                    return Err(ParseError::unsupported(pos, "higher-order application"));
                };
                let args = &items[1..];
                match op {
                    "let" => self.let_term(args, pos),
                    "!" => {
                        // annotations such as :named carry no semantics here
                        let body = args.first().ok_or_else(|| ParseError::syntax(pos, "empty annotation"))?;
                        self.term(body)
                    }
                    "forall" | "exists" => Err(ParseError::unsupported(pos, "quantifiers")),
                    _ => self.application(op, args, pos),
                }
            }
        }
    }

    fn atom_term(&mut self, s: &str, pos: Position) -> Result<NodeId, ParseError> {
        if s.starts_with(|c: char| c.is_ascii_digit()) {
            if s.contains('.') {
                return Err(ParseError::unsupported(pos, "real-valued constants"));
            }
            let v: i64 = s
                .parse()
                .map_err(|_| ParseError::unsupported(pos, format!("numeral {s} exceeds 64 bits")))?;
            return Ok(self.ast.int_const(v));
        }
        match s {
            "true" => Ok(self.ast.bool_const(true)),
            "false" => Ok(self.ast.bool_const(false)),
            _ => {
                let name = symbol_name(s);
                self.lookup(&name)
                    .ok_or_else(|| ParseError::syntax(pos, format!("unknown symbol {name}")))
            }
        }
    }

    fn let_term(&mut self, args: &[SExpr], pos: Position) -> Result<NodeId, ParseError> {
        let [bindings, body] = args else {
            return Err(ParseError::syntax(pos, "malformed let"));
        };
        let bindings = bindings
            .as_list()
            .ok_or_else(|| ParseError::syntax(bindings.position(), "expected let bindings"))?;
        let mut scope = HashMap::new();
        for b in bindings {
            let pair = b.as_list().unwrap_or(&[]);
            let [name, value] = pair else {
                return Err(ParseError::syntax(b.position(), "malformed let binding"));
            };
            let name = name
                .as_atom()
                .ok_or_else(|| ParseError::syntax(name.position(), "expected a symbol"))?;
            // bindings are parallel: evaluated in the enclosing scope
            let node = self.term(value)?;
            scope.insert(symbol_name(name), node);
        }
        self.scopes.push(scope);
        let out = self.term(body);
        self.scopes.pop();
        out
    }

    fn args_of_sort(&mut self, args: &[SExpr], sort: Sort) -> Result<Vec<NodeId>, ParseError> {
        args.iter()
            .map(|a| {
                let n = self.term(a)?;
                self.expect_sort(a, n, sort)?;
                Ok(n)
            })
            .collect()
    }

    fn arity(args: &[SExpr], pos: Position, op: &str, min: usize, max: Option<usize>) -> Result<(), ParseError> {
        if args.len() < min || max.is_some_and(|m| args.len() > m) {
            return Err(ParseError::syntax(pos, format!("wrong number of arguments to {op}")));
        }
        Ok(())
    }

    fn application(&mut self, op: &str, args: &[SExpr], pos: Position) -> Result<NodeId, ParseError> {
        use NodeKind as K;
        match op {
            "and" | "or" => {
                let kids = self.args_of_sort(args, Sort::Bool)?;
                Ok(match kids.len() {
                    0 => self.ast.bool_const(op == "and"),
                    1 => kids[0],
                    _ => self.ast.mk(if op == "and" { K::And } else { K::Or }, kids, Sort::Bool),
                })
            }
            "not" => {
                Self::arity(args, pos, op, 1, Some(1))?;
                let kids = self.args_of_sort(args, Sort::Bool)?;
                Ok(self.ast.mk(K::Not, kids, Sort::Bool))
            }
            "=>" => {
                Self::arity(args, pos, op, 2, None)?;
                let kids = self.args_of_sort(args, Sort::Bool)?;
                let mut acc = *kids.last().unwrap();
                for &k in kids[..kids.len() - 1].iter().rev() {
                    acc = self.ast.mk(K::Implies, vec![k, acc], Sort::Bool);
                }
                Ok(acc)
            }
            "xor" => {
                Self::arity(args, pos, op, 2, None)?;
                let kids = self.args_of_sort(args, Sort::Bool)?;
                let mut acc = kids[0];
                for &k in &kids[1..] {
                    let eq = self.ast.mk(K::Eq, vec![acc, k], Sort::Bool);
                    acc = self.ast.mk(K::Not, vec![eq], Sort::Bool);
                }
                Ok(acc)
            }
            "ite" => {
                Self::arity(args, pos, op, 3, Some(3))?;
                let c = self.term(&args[0])?;
                self.expect_sort(&args[0], c, Sort::Bool)?;
                let t = self.term(&args[1])?;
                let sort = self.ast.node(t).sort;
                let e = self.term(&args[2])?;
                self.expect_sort(&args[2], e, sort)?;
                Ok(self.ast.mk(K::Ite, vec![c, t, e], sort))
            }
            "=" | "distinct" => {
                Self::arity(args, pos, op, 2, None)?;
                let first = self.term(&args[0])?;
                let sort = self.ast.node(first).sort;
                let mut kids = vec![first];
                kids.extend(self.args_of_sort(&args[1..], sort)?);
                let mut conj = Vec::new();
                if op == "=" {
                    for w in kids.windows(2) {
                        conj.push(self.ast.mk(K::Eq, vec![w[0], w[1]], Sort::Bool));
                    }
                } else {
                    for i in 0..kids.len() {
                        for j in i + 1..kids.len() {
                            let eq = self.ast.mk(K::Eq, vec![kids[i], kids[j]], Sort::Bool);
                            conj.push(self.ast.mk(K::Not, vec![eq], Sort::Bool));
                        }
                    }
                }
                Ok(if conj.len() == 1 { conj[0] } else { self.ast.mk(K::And, conj, Sort::Bool) })
            }
            "<=" | ">=" | "<" | ">" => {
                Self::arity(args, pos, op, 2, None)?;
                let kind = match op {
                    "<=" => K::Le,
                    ">=" => K::Ge,
                    "<" => K::Lt,
                    _ => K::Gt,
                };
                let kids = self.args_of_sort(args, Sort::Int)?;
                let conj: Vec<NodeId> = kids
                    .windows(2)
                    .map(|w| self.ast.mk(kind, vec![w[0], w[1]], Sort::Bool))
                    .collect();
                Ok(if conj.len() == 1 { conj[0] } else { self.ast.mk(K::And, conj, Sort::Bool) })
            }
            "+" => {
                Self::arity(args, pos, op, 1, None)?;
                let kids = self.args_of_sort(args, Sort::Int)?;
                Ok(if kids.len() == 1 { kids[0] } else { self.ast.mk(K::Plus, kids, Sort::Int) })
            }
            "-" => {
                Self::arity(args, pos, op, 1, None)?;
                if let [SExpr::Atom(s, p)] = args {
                    if s.starts_with(|c: char| c.is_ascii_digit()) {
                        // negative numeral
                        let n = self.atom_term(s, *p)?;
                        let NodeKind::IntConst(v) = self.ast.node(n).kind else { unreachable!() };
                        return Ok(self.ast.int_const(-v));
                    }
                }
                let kids = self.args_of_sort(args, Sort::Int)?;
                Ok(self.ast.mk(K::Minus, kids, Sort::Int))
            }
            "*" => {
                Self::arity(args, pos, op, 2, None)?;
                let kids = self.args_of_sort(args, Sort::Int)?;
                let mut factor: i64 = 1;
                let mut term = None;
                for k in kids {
                    match self.ast.node(k).kind {
                        NodeKind::IntConst(c) => {
                            factor = factor
                                .checked_mul(c)
                                .ok_or_else(|| ParseError::unsupported(pos, "constant product exceeds 64 bits"))?;
                        }
                        _ if term.is_none() => term = Some(k),
                        _ => return Err(ParseError::unsupported(pos, "nonlinear multiplication")),
                    }
                }
                let c = self.ast.int_const(factor);
                Ok(match term {
                    None => c,
                    Some(t) => self.ast.mk(K::Times, vec![c, t], Sort::Int),
                })
            }
            "div" | "mod" | "abs" | "/" => Err(ParseError::unsupported(pos, format!("operator {op}"))),
            _ => {
                if self.lookup(&symbol_name(op)).is_some() {
                    Err(ParseError::unsupported(pos, format!("application of {op}")))
                } else {
                    Err(ParseError::syntax(pos, format!("unknown operator {op}")))
                }
            }
        }
    }
}
