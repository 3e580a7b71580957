use std::fmt;

use super::{ParseError, Position};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    /// Symbols, numerals, keywords and string literals, kept verbatim.
    Atom(String, Position),
    List(Vec<SExpr>, Position),
}

impl SExpr {
    pub fn position(&self) -> Position {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Atom(..) => None,
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Atom(s, _) => f.write_str(s),
            SExpr::List(items, _) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Reader<'_> {
    fn position(&self) -> Position {
        Position { line: self.line, column: self.column }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn delimited(&mut self, start: Position, close: char, what: &str) -> Result<String, ParseError> {
        let mut out = String::new();
        out.push(self.bump().expect("opening delimiter"));
        loop {
            match self.bump() {
                None => return Err(ParseError::syntax(start, format!("unterminated {what}"))),
                Some(c) if c == close => {
                    // "" escapes a quote inside string literals
                    if close == '"' && self.chars.peek() == Some(&'"') {
                        out.push(c);
                        out.push(self.bump().unwrap());
                        continue;
                    }
                    out.push(c);
                    return Ok(out);
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn expr(&mut self) -> Result<Option<SExpr>, ParseError> {
        self.skip_trivia();
        let start = self.position();
        let Some(&c) = self.chars.peek() else {
            return Ok(None);
        };
        match c {
            '(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek() {
                        None => return Err(ParseError::syntax(start, "unbalanced '('")),
                        Some(')') => {
                            self.bump();
                            return Ok(Some(SExpr::List(items, start)));
                        }
                        Some(_) => items.push(self.expr()?.expect("non-empty input")),
                    }
                }
            }
            ')' => Err(ParseError::syntax(start, "unexpected ')'")),
            '|' => Ok(Some(SExpr::Atom(self.delimited(start, '|', "quoted symbol")?, start))),
            '"' => Ok(Some(SExpr::Atom(self.delimited(start, '"', "string literal")?, start))),
            _ => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' || c == '|' || c == '"' {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Ok(Some(SExpr::Atom(s, start)))
            }
        }
    }
}

/// Reads every top-level s-expression of `text`.
pub fn read_all(text: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut reader = Reader { chars: text.chars().peekable(), line: 1, column: 1 };
    let mut out = Vec::new();
    while let Some(e) = reader.expr()? {
        out.push(e);
    }
    Ok(out)
}
