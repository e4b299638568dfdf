//! The closed workflow language: code extraction, parsing, validation and a
//! sandboxed tree-walking interpreter.
//!
//! The grammar is documented in `docs/workflow-grammar.ebnf`.

pub mod ast;
pub mod bindings;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod validate;
pub mod value;

use std::fmt;
use std::io::Write;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{BinOp, Expr, Span, Statement};
pub use bindings::{ApiBindings, NcenBindings, NCEN_API_NAMES};
pub use interp::{builtin_arity, execute, BUILTINS};
pub use validate::{validate, Diagnostic, DiagnosticKind};
pub use value::{format_number, round_half_away, Value};

use crate::lecture::ApiDescriptor;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("syntax error at line {line}, column {col}: {message}{}", expected_suffix(.expected))]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
    pub expected: Vec<String>,
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(", "))
    }
}

impl SyntaxError {
    pub fn new(span: Span, message: &str, expected: Vec<String>) -> Self {
        Self { line: span.line, col: span.col, message: message.to_string(), expected }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no workflow code found in the reply")]
pub struct ExtractError {
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowProgram {
    pub statements: Vec<Statement>,
    pub source: String,
}

impl WorkflowProgram {
    pub fn parse(source: &str) -> Result<Self, SyntaxError> {
        Ok(Self { statements: parser::parse_statements(source)?, source: source.to_string() })
    }

    pub fn validate(&self, registry: &[ApiDescriptor]) -> Vec<Diagnostic> {
        validate(&self.statements, registry)
    }

    /// Canonical text of the tree.
    pub fn print(&self) -> String {
        printer::print_program(&self.statements)
    }

    /// Names of every function the program calls, in first-use order.
    pub fn called_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        ast::walk_exprs(&self.statements, &mut |e| {
            if let Expr::Call { name, .. } = e {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecLimits {
    pub max_steps: u64,
    pub max_api_calls: u64,
    pub max_value_bytes: u64,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self { max_steps: 100_000, max_api_calls: 5_000, max_value_bytes: 16 * 1024 * 1024 }
    }
}

impl ExecLimits {
    pub fn new(max_steps: u64, max_api_calls: u64, max_value_bytes: u64) -> Result<Self, String> {
        if max_steps == 0 || max_api_calls == 0 || max_value_bytes == 0 {
            return Err("execution limits must all be positive".into());
        }
        Ok(Self { max_steps, max_api_calls, max_value_bytes })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub name: String,
    pub args: Vec<serde_json::Value>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub answer: Value,
    pub api_call_trace: Vec<TraceEntry>,
    pub steps_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Steps,
    ApiCalls,
    ValueBytes,
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Steps => "step",
            Self::ApiCalls => "API call",
            Self::ValueBytes => "value size",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("{kind} budget of {limit} exceeded")]
    Resource { kind: ResourceKind, limit: u64 },
    #[error("{span}: {name} failed: {message}")]
    Api { name: String, message: String, span: Span },
    #[error("{span}: {message}")]
    Arithmetic { message: String, span: Span },
    #[error("{span}: {message}")]
    Type { message: String, span: Span },
    #[error("{span}: {message}")]
    Index { message: String, span: Span },
    #[error("{span}: variable `{name}` is not defined")]
    UndefinedVariable { name: String, span: Span },
    #[error("{span}: unknown function `{name}`")]
    UnknownFunction { name: String, span: Span },
    #[error("{span}: wrong number of arguments ({found}) for `{name}`")]
    Arity { name: String, found: usize, span: Span },
    #[error("the program produced no answer: assign `answer` or end with an expression")]
    NoAnswer,
    #[error("the answer must be a string, a number or a list of those, not a {0}")]
    AnswerShape(String),
}

impl ExecError {
    pub fn is_resource(&self) -> bool {
        matches!(self, Self::Resource { .. })
    }
}

/// A failed run together with whatever it did before failing.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error} (after {} API call(s), {steps_used} step(s))", trace.len())]
pub struct ExecFailure {
    pub error: ExecError,
    pub trace: Vec<TraceEntry>,
    pub steps_used: u64,
}

/// JSONL with one `{step, name, args, digest}` object per API call.
pub fn write_trace<W: Write>(trace: &[TraceEntry], mut out: W) -> std::io::Result<()> {
    for (i, t) in trace.iter().enumerate() {
        let line = serde_json::json!({ "step": i + 1, "name": t.name, "args": t.args, "digest": t.digest });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_trace(text: &str) -> Result<Vec<TraceEntry>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```[^\n`]*\n(.*?)(?:```|\z)").unwrap());

/// First fenced block of a reply; without one, the longest suffix of lines
/// that parses as a program doing something (an assignment, loop, branch or
/// call).
pub fn extract_code(reply: &str) -> Result<String, ExtractError> {
    if let Some(c) = FENCE.captures(reply) {
        return Ok(c[1].trim_end().to_string() + "\n");
    }
    let lines: Vec<&str> = reply.lines().collect();
    for start in 0..lines.len() {
        let candidate = lines[start..].join("\n");
        if candidate.trim().is_empty() {
            break;
        }
        if let Ok(stmts) = parser::parse_statements(&candidate) {
            if stmts.iter().any(does_something) {
                return Ok(candidate.trim().to_string() + "\n");
            }
        }
    }
    Err(ExtractError { reply: reply.to_string() })
}

fn does_something(s: &Statement) -> bool {
    match s {
        Statement::Expr { expr, .. } => matches!(expr, Expr::Call { .. }),
        _ => true,
    }
}
