use std::fmt;

use super::ast::Span;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    For,
    In,
    If,
    Else,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    EqEq,
    NotEq,
    Lt,
    Gt,
    Le,
    Ge,
    /// Newline or `;`.
    Sep,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(_) => "identifier",
            Tok::Number(_) => "number",
            Tok::Str(_) => "string",
            Tok::For => "`for`",
            Tok::In => "`in`",
            Tok::If => "`if`",
            Tok::Else => "`else`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::Comma => "`,`",
            Tok::Assign => "`=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Slash => "`/`",
            Tok::EqEq => "`==`",
            Tok::NotEq => "`!=`",
            Tok::Lt => "`<`",
            Tok::Gt => "`>`",
            Tok::Le => "`<=`",
            Tok::Ge => "`>=`",
            Tok::Sep => "end of statement",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub const KEYWORDS: [&str; 4] = ["for", "in", "if", "else"];

/// Newlines inside `(...)` and `[...]` are insignificant, so long call
/// argument lists may wrap.
pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut depth = 0usize;

    macro_rules! bump {
        () => {{
            let c = chars[i];
            i += 1;
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        let next = chars.get(i + 1).copied();
        let simple = |t: Tok| Token { tok: t, span };
        match c {
            ' ' | '\t' | '\r' => {
                bump!();
            }
            '\n' => {
                bump!();
                if depth == 0 {
                    out.push(simple(Tok::Sep));
                }
            }
            ';' => {
                bump!();
                out.push(simple(Tok::Sep));
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    bump!();
                }
            }
            '"' | '\'' => {
                let quote = bump!();
                let mut s = String::new();
                loop {
                    if i >= chars.len() {
                        return Err(SyntaxError::new(
                            span,
                            "unterminated string literal",
                            vec!["closing quote".into()],
                        ));
                    }
                    let ch = bump!();
                    match ch {
                        '\n' => {
                            return Err(SyntaxError::new(
                                span,
                                "newline in string literal",
                                vec!["closing quote".into()],
                            ))
                        }
                        '\\' => {
                            if i >= chars.len() {
                                continue;
                            }
                            let esc = bump!();
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                'r' => '\r',
                                '\\' | '"' | '\'' => esc,
                                other => {
                                    return Err(SyntaxError::new(
                                        span,
                                        &format!("unknown escape `\\{other}`"),
                                        vec!["\\n, \\t, \\r, \\\\, \\\" or \\'".into()],
                                    ))
                                }
                            });
                        }
                        ch if ch == quote => break,
                        ch => s.push(ch),
                    }
                }
                out.push(simple(Tok::Str(s)));
            }
            '0'..='9' | '.' if c.is_ascii_digit() || next.is_some_and(|n| n.is_ascii_digit()) => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
                if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()) {
                    bump!();
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| SyntaxError::new(span, &format!("bad number `{text}`"), vec!["number".into()]))?;
                out.push(simple(Tok::Number(value)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    bump!();
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.as_str() {
                    "for" => Tok::For,
                    "in" => Tok::In,
                    "if" => Tok::If,
                    "else" => Tok::Else,
                    _ => Tok::Ident(word),
                };
                out.push(simple(tok));
            }
            _ => {
                let two = next.map(|n| format!("{c}{n}"));
                let tok2 = match two.as_deref() {
                    Some("==") => Some(Tok::EqEq),
                    Some("!=") => Some(Tok::NotEq),
                    Some("<=") => Some(Tok::Le),
                    Some(">=") => Some(Tok::Ge),
                    _ => None,
                };
                if let Some(t) = tok2 {
                    bump!();
                    bump!();
                    out.push(simple(t));
                    continue;
                }
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    '=' => Tok::Assign,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    other => {
                        return Err(SyntaxError::new(span, &format!("unexpected character {other:?}"), vec![]));
                    }
                };
                match tok {
                    Tok::LParen | Tok::LBracket => depth += 1,
                    Tok::RParen | Tok::RBracket => depth = depth.saturating_sub(1),
                    _ => {}
                }
                bump!();
                out.push(simple(tok));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col) });
    Ok(out)
}
