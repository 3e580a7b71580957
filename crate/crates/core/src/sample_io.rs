//! Sample files: one JSON object per line mapping each declared variable to
//! its value (integers as decimal strings, Booleans as JSON booleans), or
//! SMT-LIB `define-fun` model blocks.

use std::io::{self, BufRead, Write};

use serde_json::{Map, Value as Json};

use crate::model::Model;
use crate::smtlib::ast::quote_symbol;
use crate::smtlib::Ast;

#[derive(Debug, thiserror::Error)]
pub enum SampleIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    Jsonl,
    Smt2,
}

/// The JSON object for one sample: integer variables first, then Booleans,
/// each group in declaration order.
pub fn sample_to_json(ast: &Ast, m: &Model) -> Map<String, Json> {
    let mut obj = Map::new();
    for (name, v) in ast.int_vars().iter().zip(&m.int_values) {
        obj.insert(name.clone(), Json::String(v.to_string()));
    }
    for (name, b) in ast.bool_vars().iter().zip(&m.bool_values) {
        obj.insert(name.clone(), Json::Bool(*b));
    }
    obj
}

pub fn write_jsonl<'m, W: Write>(
    mut w: W,
    ast: &Ast,
    samples: impl IntoIterator<Item = &'m Model>,
) -> Result<(), SampleIoError> {
    for m in samples {
        serde_json::to_writer(&mut w, &sample_to_json(ast, m)).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn smt_int(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

pub fn write_smt2<'m, W: Write>(
    mut w: W,
    ast: &Ast,
    samples: impl IntoIterator<Item = &'m Model>,
) -> Result<(), SampleIoError> {
    for m in samples {
        writeln!(w, "(model")?;
        for (name, v) in ast.int_vars().iter().zip(&m.int_values) {
            writeln!(w, "  (define-fun {} () Int {})", quote_symbol(name), smt_int(*v))?;
        }
        for (name, b) in ast.bool_vars().iter().zip(&m.bool_values) {
            writeln!(w, "  (define-fun {} () Bool {})", quote_symbol(name), b)?;
        }
        writeln!(w, ")")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples<'m, W: Write>(
    w: W,
    ast: &Ast,
    samples: impl IntoIterator<Item = &'m Model>,
    format: SampleFormat,
) -> Result<(), SampleIoError> {
    match format {
        SampleFormat::Jsonl => write_jsonl(w, ast, samples),
        SampleFormat::Smt2 => write_smt2(w, ast, samples),
    }
}

/// Reads one sample object. Every declared variable must be present; keys
/// that name no declared variable are rejected.
pub fn sample_from_json(ast: &Ast, obj: &Map<String, Json>) -> Result<Model, String> {
    let mut m = Model::new(vec![0; ast.int_vars().len()], vec![false; ast.bool_vars().len()]);
    for (i, name) in ast.int_vars().iter().enumerate() {
        let v = obj.get(name).ok_or_else(|| format!("missing value for `{name}`"))?;
        m.int_values[i] = match v {
            Json::String(s) => s.parse::<i64>().map_err(|_| format!("`{name}`: `{s}` is not a 64-bit integer"))?,
            Json::Number(n) => n.as_i64().ok_or_else(|| format!("`{name}`: {n} is not a 64-bit integer"))?,
            _ => return Err(format!("`{name}`: expected an integer")),
        };
    }
    for (i, name) in ast.bool_vars().iter().enumerate() {
        m.bool_values[i] = obj
            .get(name)
            .ok_or_else(|| format!("missing value for `{name}`"))?
            .as_bool()
            .ok_or_else(|| format!("`{name}`: expected a Boolean"))?;
    }
    let known = ast.int_vars().len() + ast.bool_vars().len();
    if obj.len() != known {
        let extra = obj
            .keys()
            .find(|k| !ast.int_vars().contains(k) && !ast.bool_vars().contains(k))
            .cloned()
            .unwrap_or_default();
        return Err(format!("unknown variable `{extra}`"));
    }
    Ok(m)
}

/// Reads a JSON-lines sample file; blank lines are skipped.
pub fn read_jsonl<R: BufRead>(r: R, ast: &Ast) -> Result<Vec<Model>, SampleIoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| SampleIoError::Format { line: i + 1, message };
        let value: Json = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| err("expected a JSON object".into()))?;
        out.push(sample_from_json(ast, obj).map_err(err)?);
    }
    Ok(out)
}
