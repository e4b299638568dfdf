use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::ast::{BinOp, Expr, Span, Statement};
use super::value::{round_half_away, Value};
use super::{ApiBindings, ExecError, ExecFailure, ExecLimits, ExecResult, ResourceKind, TraceEntry, WorkflowProgram};

pub const BUILTINS: [&str; 10] = ["sum", "len", "round", "min", "max", "str", "num", "append", "unique", "sort"];

/// Accepted argument counts for a builtin.
pub fn builtin_arity(name: &str) -> Option<(usize, usize)> {
    Some(match name {
        "sum" | "len" | "str" | "num" | "unique" | "sort" => (1, 1),
        "round" | "min" | "max" => (1, 2),
        "append" => (2, 2),
        _ => return None,
    })
}

pub fn execute(
    program: &WorkflowProgram,
    bindings: &dyn ApiBindings,
    limits: ExecLimits,
) -> Result<ExecResult, ExecFailure> {
    let mut it = Interp { bindings, limits, vars: HashMap::new(), steps: 0, trace: Vec::new(), last: None };
    let outcome = it.block(&program.statements).and_then(|_| it.answer());
    match outcome {
        Ok(answer) => Ok(ExecResult { answer, api_call_trace: it.trace, steps_used: it.steps }),
        Err(error) => Err(ExecFailure { error, trace: it.trace, steps_used: it.steps }),
    }
}

struct Interp<'a> {
    bindings: &'a dyn ApiBindings,
    limits: ExecLimits,
    vars: HashMap<String, Value>,
    steps: u64,
    trace: Vec<TraceEntry>,
    last: Option<Value>,
}

type R<T> = Result<T, ExecError>;

fn type_err(span: Span, message: String) -> ExecError {
    ExecError::Type { message, span }
}

impl Interp<'_> {
    fn tick(&mut self, n: u64) -> R<()> {
        self.steps = self.steps.saturating_add(n);
        if self.steps > self.limits.max_steps {
            self.steps = self.limits.max_steps;
            return Err(ExecError::Resource { kind: ResourceKind::Steps, limit: self.limits.max_steps });
        }
        Ok(())
    }

    fn check_size(&self, v: Value) -> R<Value> {
        if v.approx_size() as u64 > self.limits.max_value_bytes {
            return Err(ExecError::Resource { kind: ResourceKind::ValueBytes, limit: self.limits.max_value_bytes });
        }
        Ok(v)
    }

    fn answer(&mut self) -> R<Value> {
        let v = self.vars.get("answer").cloned().or_else(|| self.last.take()).ok_or(ExecError::NoAnswer)?;
        if !v.is_answer_shape() {
            return Err(ExecError::AnswerShape(v.type_name().to_string()));
        }
        Ok(v)
    }

    fn block(&mut self, stmts: &[Statement]) -> R<()> {
        for s in stmts {
            self.statement(s)?;
        }
        Ok(())
    }

    fn statement(&mut self, s: &Statement) -> R<()> {
        self.tick(1)?;
        match s {
            Statement::Assign { name, value, .. } => {
                let v = self.eval(value)?;
                self.vars.insert(name.clone(), v);
            }
            Statement::Expr { expr, .. } => {
                let v = self.eval(expr)?;
                self.last = Some(v);
            }
            Statement::For { var, iterable, body, span } => {
                // A bare variable is re-read before every iteration, so a body
                // that rebinds it keeps the loop going; anything else is
                // evaluated once.
                let fixed = match iterable {
                    Expr::Var { .. } => None,
                    other => Some(self.eval(other)?),
                };
                let mut i = 0usize;
                loop {
                    self.tick(1)?;
                    let current = match &fixed {
                        Some(v) => v.clone(),
                        None => self.eval(iterable)?,
                    };
                    let Value::List(items) = current else {
                        return Err(type_err(*span, format!("cannot loop over a {}", current.type_name())));
                    };
                    let Some(item) = items.get(i).cloned() else {
                        break;
                    };
                    self.vars.insert(var.clone(), item);
                    self.block(body)?;
                    i += 1;
                }
            }
            Statement::If { cond, then_body, else_body, span } => match self.eval(cond)? {
                Value::Bool(true) => self.block(then_body)?,
                Value::Bool(false) => self.block(else_body)?,
                other => {
                    return Err(type_err(*span, format!("condition must be a comparison, got a {}", other.type_name())))
                }
            },
        }
        Ok(())
    }

    fn eval(&mut self, e: &Expr) -> R<Value> {
        self.tick(1)?;
        match e {
            Expr::Number { value, .. } => Ok(Value::Number(*value)),
            Expr::Str { value, .. } => self.check_size(Value::Str(value.clone())),
            Expr::Var { name, span } => self
                .vars
                .get(name)
                .cloned()
                .ok_or_else(|| ExecError::UndefinedVariable { name: name.clone(), span: *span }),
            Expr::List { items, .. } => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(item)?);
                }
                self.check_size(Value::list(out))
            }
            Expr::Index { target, index, span } => {
                let t = self.eval(target)?;
                let i = self.eval(index)?;
                index_value(&t, &i, *span)
            }
            Expr::Binary { op, lhs, rhs, span } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                self.binary(*op, l, r, *span)
            }
            Expr::Call { name, args, span } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                self.call(name, vals, *span)
            }
        }
    }

    fn binary(&mut self, op: BinOp, l: Value, r: Value, span: Span) -> R<Value> {
        use Value::*;
        let arith = |x: f64| -> R<Value> {
            if x.is_finite() {
                Ok(Number(x))
            } else {
                Err(ExecError::Arithmetic { message: "result is not a finite number".into(), span })
            }
        };
        match (op, &l, &r) {
            (BinOp::Eq, _, _) => Ok(Bool(l == r)),
            (BinOp::Ne, _, _) => Ok(Bool(l != r)),
            (BinOp::Add, Number(a), Number(b)) => arith(a + b),
            (BinOp::Sub, Number(a), Number(b)) => arith(a - b),
            (BinOp::Mul, Number(a), Number(b)) => arith(a * b),
            (BinOp::Div, Number(_), Number(b)) if *b == 0.0 => {
                Err(ExecError::Arithmetic { message: "division by zero".into(), span })
            }
            (BinOp::Div, Number(a), Number(b)) => arith(a / b),
            (BinOp::Add, Str(a), Str(b)) => {
                self.tick((a.len() + b.len()) as u64 / 64)?;
                self.check_size(Str(format!("{a}{b}")))
            }
            (BinOp::Add, List(a), List(b)) => {
                self.tick((a.len() + b.len()) as u64)?;
                let mut v = Vec::with_capacity(a.len() + b.len());
                v.extend(a.iter().cloned());
                v.extend(b.iter().cloned());
                self.check_size(Value::list(v))
            }
            (BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge, Number(a), Number(b)) => Ok(Bool(compare(op, a, b))),
            (BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge, Str(a), Str(b)) => Ok(Bool(compare(op, a, b))),
            _ => Err(type_err(
                span,
                format!("cannot apply `{}` to {} and {}", op.symbol(), l.type_name(), r.type_name()),
            )),
        }
    }

    fn call(&mut self, name: &str, args: Vec<Value>, span: Span) -> R<Value> {
        if let Some((lo, hi)) = builtin_arity(name) {
            if args.len() < lo || args.len() > hi {
                return Err(ExecError::Arity { name: name.into(), found: args.len(), span });
            }
            return self.builtin(name, args, span);
        }
        if !self.bindings.has(name) {
            return Err(ExecError::UnknownFunction { name: name.into(), span });
        }
        if self.trace.len() as u64 >= self.limits.max_api_calls {
            return Err(ExecError::Resource { kind: ResourceKind::ApiCalls, limit: self.limits.max_api_calls });
        }
        let json_args = args.iter().map(Value::to_json).collect();
        match self.bindings.invoke(name, &args) {
            Ok(v) => {
                self.trace.push(TraceEntry { name: name.to_string(), args: json_args, digest: v.digest() });
                self.check_size(v)
            }
            Err(message) => Err(ExecError::Api { name: name.into(), message, span }),
        }
    }

    fn builtin(&mut self, name: &str, mut args: Vec<Value>, span: Span) -> R<Value> {
        let numbers = |v: &Value, what: &str| -> R<Vec<f64>> {
            match v {
                Value::List(items) => items
                    .iter()
                    .map(|x| {
                        x.as_number()
                            .ok_or_else(|| type_err(span, format!("{what} expects numbers, found a {}", x.type_name())))
                    })
                    .collect(),
                other => Err(type_err(span, format!("{what} expects a list, got a {}", other.type_name()))),
            }
        };
        match name {
            "sum" => {
                let xs = numbers(&args[0], "sum")?;
                self.tick(xs.len() as u64)?;
                let total: f64 = xs.iter().sum();
                if total.is_finite() {
                    Ok(Value::Number(total))
                } else {
                    Err(ExecError::Arithmetic { message: "sum is not a finite number".into(), span })
                }
            }
            "len" => match &args[0] {
                Value::List(items) => Ok(Value::Number(items.len() as f64)),
                Value::Str(s) => Ok(Value::Number(s.chars().count() as f64)),
                other => Err(type_err(span, format!("len expects a list or string, got a {}", other.type_name()))),
            },
            "round" => {
                let x = args[0]
                    .as_number()
                    .ok_or_else(|| type_err(span, format!("round expects a number, got a {}", args[0].type_name())))?;
                let places = match args.get(1) {
                    None => 0,
                    Some(Value::Number(n)) if n.fract() == 0.0 && (0.0..=15.0).contains(n) => *n as u32,
                    Some(other) => {
                        return Err(type_err(span, format!("round digits must be a whole number 0..15, got {other}")))
                    }
                };
                Ok(Value::Number(round_half_away(x, places)))
            }
            "min" | "max" => {
                let xs = if args.len() == 2 {
                    match (&args[0], &args[1]) {
                        (Value::Number(a), Value::Number(b)) => vec![*a, *b],
                        (a, b) => {
                            return Err(type_err(
                                span,
                                format!("{name} expects two numbers, got {} and {}", a.type_name(), b.type_name()),
                            ))
                        }
                    }
                } else {
                    numbers(&args[0], name)?
                };
                self.tick(xs.len() as u64)?;
                let pick = if name == "min" { f64::min } else { f64::max };
                xs.into_iter()
                    .reduce(pick)
                    .map(Value::Number)
                    .ok_or_else(|| type_err(span, format!("{name} of an empty list")))
            }
            "str" => self.check_size(Value::Str(args[0].render())),
            "num" => match &args[0] {
                Value::Number(n) => Ok(Value::Number(*n)),
                Value::Str(s) => {
                    let cleaned: String = s.chars().filter(|c| !matches!(c, ',' | '$' | ' ')).collect();
                    cleaned
                        .parse::<f64>()
                        .ok()
                        .filter(|n| n.is_finite())
                        .map(Value::Number)
                        .ok_or_else(|| type_err(span, format!("num cannot read {s:?} as a number")))
                }
                other => Err(type_err(span, format!("num expects a string or number, got a {}", other.type_name()))),
            },
            "append" => {
                let item = args.pop().unwrap();
                let Value::List(items) = args.pop().unwrap() else {
                    return Err(type_err(span, "append expects a list as its first argument".into()));
                };
                self.tick(items.len() as u64 + 1)?;
                let mut v = Vec::with_capacity(items.len() + 1);
                v.extend(items.iter().cloned());
                v.push(item);
                self.check_size(Value::list(v))
            }
            "unique" => {
                let Value::List(items) = &args[0] else {
                    return Err(type_err(span, format!("unique expects a list, got a {}", args[0].type_name())));
                };
                self.tick(items.len() as u64)?;
                let mut seen = HashSet::new();
                let out: Vec<Value> = items.iter().filter(|v| seen.insert(v.to_json().to_string())).cloned().collect();
                Ok(Value::list(out))
            }
            "sort" => {
                let Value::List(items) = &args[0] else {
                    return Err(type_err(span, format!("sort expects a list, got a {}", args[0].type_name())));
                };
                self.tick(items.len() as u64)?;
                let mut v: Vec<Value> = items.as_ref().clone();
                if v.iter().all(|x| matches!(x, Value::Number(_))) {
                    v.sort_by(|a, b| a.as_number().unwrap().total_cmp(&b.as_number().unwrap()));
                } else if v.iter().all(|x| matches!(x, Value::Str(_))) {
                    v.sort_by(|a, b| a.as_str().cmp(&b.as_str()));
                } else {
                    return Err(type_err(span, "sort needs a list of only numbers or only strings".into()));
                }
                Ok(Value::List(Arc::new(v)))
            }
            _ => unreachable!("builtin table and dispatch disagree on {name}"),
        }
    }
}

fn compare<T: PartialOrd + ?Sized>(op: BinOp, a: &T, b: &T) -> bool {
    match op {
        BinOp::Lt => a < b,
        BinOp::Gt => a > b,
        BinOp::Le => a <= b,
        BinOp::Ge => a >= b,
        _ => unreachable!(),
    }
}

fn index_value(target: &Value, index: &Value, span: Span) -> R<Value> {
    match (target, index) {
        (Value::List(items), Value::Number(n)) => {
            if n.fract() != 0.0 {
                return Err(type_err(span, format!("list index {n} is not a whole number")));
            }
            let len = items.len() as i64;
            let i = *n as i64;
            let pos = if i < 0 { len + i } else { i };
            if pos < 0 || pos >= len {
                return Err(ExecError::Index { message: format!("index {i} out of range for a list of {len}"), span });
            }
            Ok(items[pos as usize].clone())
        }
        (Value::Block(b), Value::Str(key)) => match key.as_str() {
            "name" => Ok(Value::Str(b.fund_name.clone())),
            "accession" => Ok(Value::Str(b.source.accession_number.clone())),
            "id" => Ok(Value::Str(b.block_id())),
            _ => Err(ExecError::Index {
                message: format!("a fund block has no field {key:?} (fields: name, accession, id)"),
                span,
            }),
        },
        (Value::Report(r), Value::Str(key)) => match key.as_str() {
            "accession" => Ok(Value::Str(r.accession_number().to_string())),
            "filed" => Ok(Value::Str(r.filing.filing_date.to_string())),
            "funds" => Ok(Value::strings(r.fund_names.iter().cloned())),
            _ => Err(ExecError::Index {
                message: format!("a report has no field {key:?} (fields: accession, filed, funds)"),
                span,
            }),
        },
        (t, i) => Err(type_err(span, format!("cannot index a {} with a {}", t.type_name(), i.type_name()))),
    }
}
