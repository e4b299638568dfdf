use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Expr, Span, Statement};
use super::interp::{builtin_arity, BUILTINS};
use crate::lecture::ApiDescriptor;
use crate::ncen_api::similarity::similarity;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticKind {
    UnknownFunction { name: String, suggestion: Option<String> },
    Arity { name: String, expected: String, found: usize },
    Unassigned { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    #[serde(flatten)]
    pub kind: DiagnosticKind,
    pub line: u32,
    pub col: u32,
}

impl Diagnostic {
    fn new(kind: DiagnosticKind, span: Span) -> Self {
        Self { kind, line: span.line, col: span.col }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.col)?;
        match &self.kind {
            DiagnosticKind::UnknownFunction { name, suggestion: Some(s) } => {
                write!(f, "unknown function `{name}`; did you mean `{s}`?")
            }
            DiagnosticKind::UnknownFunction { name, suggestion: None } => write!(f, "unknown function `{name}`"),
            DiagnosticKind::Arity { name, expected, found } => {
                write!(f, "`{name}` takes {expected} argument(s) but was given {found}")
            }
            DiagnosticKind::Unassigned { name } => {
                write!(f, "variable `{name}` is used before it is assigned")
            }
        }
    }
}

/// Closest known name, if any is near enough to be a plausible typo.
pub fn suggest<'a>(name: &str, known: impl IntoIterator<Item = &'a str>) -> Option<String> {
    known
        .into_iter()
        .map(|k| (similarity(name, k).score, k))
        .filter(|(s, _)| *s >= 60.0)
        .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(a.1)))
        .map(|(_, k)| k.to_string())
}

/// Every call must name a registered API or builtin with a matching argument
/// count, and every variable must be assigned somewhere earlier in the text.
pub fn validate(stmts: &[Statement], registry: &[ApiDescriptor]) -> Vec<Diagnostic> {
    let mut v = Validator { registry, assigned: HashSet::new(), out: Vec::new() };
    v.block(stmts);
    v.out
}

struct Validator<'a> {
    registry: &'a [ApiDescriptor],
    assigned: HashSet<String>,
    out: Vec<Diagnostic>,
}

impl Validator<'_> {
    fn block(&mut self, stmts: &[Statement]) {
        for s in stmts {
            match s {
                Statement::Assign { name, value, .. } => {
                    self.expr(value);
                    self.assigned.insert(name.clone());
                }
                Statement::Expr { expr, .. } => self.expr(expr),
                Statement::For { var, iterable, body, .. } => {
                    self.expr(iterable);
                    self.assigned.insert(var.clone());
                    self.block(body);
                }
                Statement::If { cond, then_body, else_body, .. } => {
                    self.expr(cond);
                    self.block(then_body);
                    self.block(else_body);
                }
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Var { name, span } => {
                if !self.assigned.contains(name) {
                    self.out.push(Diagnostic::new(DiagnosticKind::Unassigned { name: name.clone() }, *span));
                }
            }
            Expr::Call { name, args, span } => {
                for a in args {
                    self.expr(a);
                }
                let range = builtin_arity(name)
                    .or_else(|| self.registry.iter().find(|d| d.name == *name).map(|d| (d.arity(), d.arity())));
                match range {
                    None => {
                        let known = BUILTINS.iter().copied().chain(self.registry.iter().map(|d| d.name.as_str()));
                        let suggestion = suggest(name, known);
                        self.out.push(Diagnostic::new(
                            DiagnosticKind::UnknownFunction { name: name.clone(), suggestion },
                            *span,
                        ));
                    }
                    Some((lo, hi)) if args.len() < lo || args.len() > hi => {
                        let expected = if lo == hi { lo.to_string() } else { format!("{lo} to {hi}") };
                        self.out.push(Diagnostic::new(
                            DiagnosticKind::Arity { name: name.clone(), expected, found: args.len() },
                            *span,
                        ));
                    }
                    Some(_) => {}
                }
            }
            Expr::List { items, .. } => items.iter().for_each(|i| self.expr(i)),
            Expr::Index { target, index, .. } => {
                self.expr(target);
                self.expr(index);
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs);
                self.expr(rhs);
            }
            Expr::Str { .. } | Expr::Number { .. } => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_statements;
    use super::*;
    use crate::lecture::ncen_registry;

    fn check(src: &str) -> Vec<Diagnostic> {
        validate(&parse_statements(src).unwrap(), &ncen_registry())
    }

    #[test]
    fn clean_program_has_no_diagnostics() {
        let src = r#"
report = get_report("PRECIOUS METALS FUND")
block = fetch_block(report, "PRECIOUS METALS FUND")
names = extract_entity(block, "custodian")
blocks = segment_report(report)
all = get_all_reports()
gc = extract_value(block, "gross commission")
answer = round(gc, 2)
"#;
        assert_eq!(check(src), vec![]);
    }

    #[test]
    fn unknown_function_gets_a_suggestion() {
        let d = check(r#"r = get_reprot("X")"#);
        assert_eq!(d.len(), 1);
        assert_eq!(
            d[0].kind,
            DiagnosticKind::UnknownFunction { name: "get_reprot".into(), suggestion: Some("get_report".into()) }
        );
        assert_eq!(
            check("open(\"/etc/passwd\")")[0].kind,
            DiagnosticKind::UnknownFunction { name: "open".into(), suggestion: None }
        );
    }

    #[test]
    fn arity_mismatch() {
        let d = check("r = get_report()");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::Arity { name: "get_report".into(), expected: "1".into(), found: 0 });
        assert!(matches!(check("x = round(1, 2, 3)")[0].kind, DiagnosticKind::Arity { .. }));
        assert_eq!(check("x = round(1.5)"), vec![]);
    }

    #[test]
    fn use_before_assignment() {
        let d = check("total = total + 1");
        assert_eq!(d[0].kind, DiagnosticKind::Unassigned { name: "total".into() });
        assert_eq!((d[0].line, d[0].col), (1, 9));
        assert_eq!(check("for b in [1, 2] { t = b }\nanswer = t"), vec![]);
    }

    #[test]
    fn diagnostics_render() {
        let d = check(r#"r = get_reprot("X")"#);
        assert_eq!(d[0].to_string(), "line 1, column 5: unknown function `get_reprot`; did you mean `get_report`?");
    }
}
