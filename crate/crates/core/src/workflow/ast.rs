use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based source position.
///
/// Spans never take part in equality, so two trees compare equal when they
/// have the same shape regardless of where they were parsed from.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::Div => "/",
            Self::Eq => "==",
            Self::Ne => "!=",
            Self::Lt => "<",
            Self::Gt => ">",
            Self::Le => "<=",
            Self::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Call { name: String, args: Vec<Expr>, span: Span },
    Var { name: String, span: Span },
    Str { value: String, span: Span },
    Number { value: f64, span: Span },
    List { items: Vec<Expr>, span: Span },
    Index { target: Box<Expr>, index: Box<Expr>, span: Span },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, span: Span },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Self::Call { span, .. }
            | Self::Var { span, .. }
            | Self::Str { span, .. }
            | Self::Number { span, .. }
            | Self::List { span, .. }
            | Self::Index { span, .. }
            | Self::Binary { span, .. } => *span,
        }
    }

    pub fn call(name: &str, args: Vec<Expr>) -> Self {
        Self::Call { name: name.into(), args, span: Span::default() }
    }

    pub fn var(name: &str) -> Self {
        Self::Var { name: name.into(), span: Span::default() }
    }

    pub fn string(value: &str) -> Self {
        Self::Str { value: value.into(), span: Span::default() }
    }

    pub fn number(value: f64) -> Self {
        Self::Number { value, span: Span::default() }
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Self::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span: Span::default() }
    }

    pub fn index(target: Expr, index: Expr) -> Self {
        Self::Index { target: Box::new(target), index: Box::new(index), span: Span::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Statement {
    Assign { name: String, value: Expr, span: Span },
    Expr { expr: Expr, span: Span },
    For { var: String, iterable: Expr, body: Vec<Statement>, span: Span },
    If { cond: Expr, then_body: Vec<Statement>, else_body: Vec<Statement>, span: Span },
}

impl Statement {
    pub fn span(&self) -> Span {
        match self {
            Self::Assign { span, .. } | Self::Expr { span, .. } | Self::For { span, .. } | Self::If { span, .. } => {
                *span
            }
        }
    }

    pub fn assign(name: &str, value: Expr) -> Self {
        Self::Assign { name: name.into(), value, span: Span::default() }
    }

    pub fn expr(expr: Expr) -> Self {
        Self::Expr { expr, span: Span::default() }
    }

    pub fn for_loop(var: &str, iterable: Expr, body: Vec<Statement>) -> Self {
        Self::For { var: var.into(), iterable, body, span: Span::default() }
    }
}

/// Calls a visitor on every expression in evaluation order, depth first.
pub fn walk_exprs<'a>(stmts: &'a [Statement], f: &mut dyn FnMut(&'a Expr)) {
    fn expr<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
        f(e);
        match e {
            Expr::Call { args, .. } => args.iter().for_each(|a| expr(a, f)),
            Expr::List { items, .. } => items.iter().for_each(|a| expr(a, f)),
            Expr::Index { target, index, .. } => {
                expr(target, f);
                expr(index, f);
            }
            Expr::Binary { lhs, rhs, .. } => {
                expr(lhs, f);
                expr(rhs, f);
            }
            Expr::Var { .. } | Expr::Str { .. } | Expr::Number { .. } => {}
        }
    }
    for s in stmts {
        match s {
            Statement::Assign { value, .. } => expr(value, f),
            Statement::Expr { expr: e, .. } => expr(e, f),
            Statement::For { iterable, body, .. } => {
                expr(iterable, f);
                walk_exprs(body, f);
            }
            Statement::If { cond, then_body, else_body, .. } => {
                expr(cond, f);
                walk_exprs(then_body, f);
                walk_exprs(else_body, f);
            }
        }
    }
}
