use std::fmt::Write;

use super::ast::{Expr, Statement};

/// Canonical source text. Binary expressions are fully parenthesized so the
/// output parses back to the same tree.
pub fn print_program(stmts: &[Statement]) -> String {
    let mut out = String::new();
    print_block(stmts, 0, &mut out);
    out
}

fn print_block(stmts: &[Statement], depth: usize, out: &mut String) {
    for s in stmts {
        out.push_str(&"    ".repeat(depth));
        print_statement(s, depth, out);
        out.push('\n');
    }
}

fn print_statement(s: &Statement, depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    match s {
        Statement::Assign { name, value, .. } => {
            let _ = write!(out, "{name} = {}", print_expr(value));
        }
        Statement::Expr { expr, .. } => out.push_str(&print_expr(expr)),
        Statement::For { var, iterable, body, .. } => {
            let _ = writeln!(out, "for {var} in {} {{", print_expr(iterable));
            print_block(body, depth + 1, out);
            out.push_str(&pad);
            out.push('}');
        }
        Statement::If { cond, then_body, else_body, .. } => {
            let _ = writeln!(out, "if {} {{", print_expr(cond));
            print_block(then_body, depth + 1, out);
            out.push_str(&pad);
            out.push('}');
            match else_body.as_slice() {
                [] => {}
                [nested @ Statement::If { .. }] => {
                    out.push_str(" else ");
                    print_statement(nested, depth, out);
                }
                body => {
                    out.push_str(" else {\n");
                    print_block(body, depth + 1, out);
                    out.push_str(&pad);
                    out.push('}');
                }
            }
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Call { name, args, .. } => {
            let args: Vec<String> = args.iter().map(print_expr).collect();
            format!("{name}({})", args.join(", "))
        }
        Expr::Var { name, .. } => name.clone(),
        Expr::Str { value, .. } => quote(value),
        Expr::Number { value, .. } => format!("{value}"),
        Expr::List { items, .. } => {
            let items: Vec<String> = items.iter().map(print_expr).collect();
            format!("[{}]", items.join(", "))
        }
        Expr::Index { target, index, .. } => {
            let t = print_expr(target);
            let t = match **target {
                Expr::Number { value, .. } if value.is_sign_negative() => format!("({t})"),
                _ => t,
            };
            format!("{t}[{}]", print_expr(index))
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            format!("({} {} {})", print_expr(lhs), op.symbol(), print_expr(rhs))
        }
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::super::ast::BinOp;
    use super::super::parser::parse_statements;
    use super::*;

    const OPS: [BinOp; 10] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Gt,
        BinOp::Le,
        BinOp::Ge,
    ];

    fn ident() -> impl Strategy<Value = String> {
        "[a-z_][a-z0-9_]{0,6}".prop_filter("keyword", |s| !["for", "in", "if", "else"].contains(&s.as_str()))
    }

    fn expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            ident().prop_map(|n| Expr::var(&n)),
            "[ -~]{0,8}".prop_map(|s| Expr::string(&s)),
            (-1.0e6f64..1.0e6).prop_map(Expr::number),
            (0u32..1000).prop_map(|n| Expr::number(n as f64)),
        ];
        leaf.prop_recursive(4, 32, 4, |inner| {
            prop_oneof![
                (ident(), prop::collection::vec(inner.clone(), 0..4)).prop_map(|(n, a)| Expr::call(&n, a)),
                prop::collection::vec(inner.clone(), 0..4)
                    .prop_map(|items| Expr::List { items, span: Default::default() }),
                (inner.clone(), inner.clone()).prop_map(|(t, i)| Expr::index(t, i)),
                (0..OPS.len(), inner.clone(), inner).prop_map(|(o, l, r)| Expr::binary(OPS[o], l, r)),
            ]
        })
    }

    fn statement() -> impl Strategy<Value = Statement> {
        let simple = prop_oneof![
            (ident(), expr()).prop_map(|(n, e)| Statement::assign(&n, e)),
            expr().prop_map(Statement::expr),
        ];
        simple.prop_recursive(3, 16, 3, |inner| {
            prop_oneof![
                (ident(), expr(), prop::collection::vec(inner.clone(), 0..3))
                    .prop_map(|(v, it, body)| Statement::for_loop(&v, it, body)),
                (expr(), prop::collection::vec(inner.clone(), 0..3), prop::collection::vec(inner, 0..3)).prop_map(
                    |(cond, then_body, else_body)| Statement::If {
                        cond,
                        then_body,
                        else_body,
                        span: Default::default()
                    }
                ),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_print_round_trip(prog in prop::collection::vec(statement(), 0..6)) {
            let text = print_program(&prog);
            let back = parse_statements(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, prog);
        }
    }

    #[test]
    fn printed_form() {
        let src = "total = 0\nfor b in blocks {\n    total = (total + extract_value(b, \"gross commission\"))\n}\nanswer = round(total, 2)\n";
        assert_eq!(print_program(&parse_statements(src).unwrap()), src);
    }

    #[test]
    fn negative_index_target_keeps_parens() {
        let e = Expr::index(Expr::number(-5.0), Expr::number(0.0));
        assert_eq!(print_expr(&e), "(-5)[0]");
        let back = parse_statements(&print_expr(&e)).unwrap();
        assert_eq!(back, vec![Statement::expr(e)]);
    }
}
