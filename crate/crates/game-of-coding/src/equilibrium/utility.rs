//! Utility expressions over the pair `(MMSE, PA)`.
//!
//! Grammar (natural log, `^` binds tighter than unary minus and is
//! right-associative):
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := ["-"] power
//! power := atom ["^" unary]
//! atom  := NUMBER | "MMSE" | "PA" | "(" expr ")" | FUNC "(" expr ")"
//! FUNC  := log | sqrt | exp
//! ```
//!
//! The unicode minus sign is accepted as an alias for `-`. Evaluation is
//! total: out-of-domain `log`/`sqrt` arguments follow IEEE semantics and
//! surface as NaN or infinities, which the solver treats as unusable points.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityExpr {
    Const(f64),
    Mmse,
    Pa,
    Neg(Box<UtilityExpr>),
    Add(Box<UtilityExpr>, Box<UtilityExpr>),
    Sub(Box<UtilityExpr>, Box<UtilityExpr>),
    Mul(Box<UtilityExpr>, Box<UtilityExpr>),
    Div(Box<UtilityExpr>, Box<UtilityExpr>),
    Pow(Box<UtilityExpr>, Box<UtilityExpr>),
    Log(Box<UtilityExpr>),
    Sqrt(Box<UtilityExpr>),
    Exp(Box<UtilityExpr>),
}

impl UtilityExpr {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        match parser.peek() {
            (Token::Eof, _) => Ok(expr),
            (tok, offset) => Err(Error::Parse {
                offset,
                message: format!("unexpected {tok} after expression"),
            }),
        }
    }

    pub fn eval(&self, mmse: f64, pa: f64) -> f64 {
        match self {
            UtilityExpr::Const(c) => *c,
            UtilityExpr::Mmse => mmse,
            UtilityExpr::Pa => pa,
            UtilityExpr::Neg(a) => -a.eval(mmse, pa),
            UtilityExpr::Add(a, b) => a.eval(mmse, pa) + b.eval(mmse, pa),
            UtilityExpr::Sub(a, b) => a.eval(mmse, pa) - b.eval(mmse, pa),
            UtilityExpr::Mul(a, b) => a.eval(mmse, pa) * b.eval(mmse, pa),
            UtilityExpr::Div(a, b) => a.eval(mmse, pa) / b.eval(mmse, pa),
            UtilityExpr::Pow(a, b) => a.eval(mmse, pa).powf(b.eval(mmse, pa)),
            UtilityExpr::Log(a) => a.eval(mmse, pa).ln(),
            UtilityExpr::Sqrt(a) => a.eval(mmse, pa).sqrt(),
            UtilityExpr::Exp(a) => a.eval(mmse, pa).exp(),
        }
    }
}

impl fmt::Display for UtilityExpr {
    // Fully parenthesized, so printing and reparsing is structure-preserving.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilityExpr::Const(c) if *c < 0.0 => write!(f, "({c})"),
            UtilityExpr::Const(c) => write!(f, "{c}"),
            UtilityExpr::Mmse => write!(f, "MMSE"),
            UtilityExpr::Pa => write!(f, "PA"),
            UtilityExpr::Neg(a) => write!(f, "(-{a})"),
            UtilityExpr::Add(a, b) => write!(f, "({a} + {b})"),
            UtilityExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            UtilityExpr::Mul(a, b) => write!(f, "({a} * {b})"),
            UtilityExpr::Div(a, b) => write!(f, "({a} / {b})"),
            UtilityExpr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            UtilityExpr::Log(a) => write!(f, "log({a})"),
            UtilityExpr::Sqrt(a) => write!(f, "sqrt({a})"),
            UtilityExpr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Mmse,
    Pa,
    Func(Func),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Log,
    Sqrt,
    Exp,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(n) => write!(f, "number {n}"),
            Token::Mmse => write!(f, "'MMSE'"),
            Token::Pa => write!(f, "'PA'"),
            Token::Func(Func::Log) => write!(f, "'log'"),
            Token::Func(Func::Sqrt) => write!(f, "'sqrt'"),
            Token::Func(Func::Exp) => write!(f, "'exp'"),
            Token::Plus => write!(f, "'+'"),
            Token::Minus => write!(f, "'-'"),
            Token::Star => write!(f, "'*'"),
            Token::Slash => write!(f, "'/'"),
            Token::Caret => write!(f, "'^'"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
            Token::Eof => write!(f, "end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = text[i..].chars().next().unwrap();
        match c {
            ' ' | '\t' | '\n' | '\r' => i += c.len_utf8(),
            '+' => {
                out.push((Token::Plus, i));
                i += 1;
            }
            '-' | '\u{2212}' => {
                out.push((Token::Minus, i));
                i += c.len_utf8();
            }
            '*' => {
                out.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                out.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                out.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                out.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Token::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i], b'0'..=b'9' | b'.') {
                    i += 1;
                }
                if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let num = lit.parse::<f64>().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("malformed number '{lit}'"),
                })?;
                out.push((Token::Num(num), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let ident = &text[start..i];
                let tok = match ident {
                    "MMSE" => Token::Mmse,
                    "PA" => Token::Pa,
                    "log" => Token::Func(Func::Log),
                    "sqrt" => Token::Func(Func::Sqrt),
                    "exp" => Token::Func(Func::Exp),
                    _ => {
                        return Err(Error::Parse {
                            offset: start,
                            message: format!(
                                "unknown identifier '{ident}' (expected MMSE, PA, log, sqrt or exp)"
                            ),
                        })
                    }
                };
                out.push((tok, start));
            }
            other => {
                return Err(Error::Parse {
                    offset: i,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    out.push((Token::Eof, text.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> (Token, usize) {
        self.tokens[self.pos].clone()
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        let (tok, offset) = self.bump();
        if tok == want {
            Ok(())
        } else {
            Err(Error::Parse {
                offset,
                message: format!("expected {what}, found {tok}"),
            })
        }
    }

    fn expr(&mut self) -> Result<UtilityExpr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Token::Plus => {
                    self.bump();
                    lhs = UtilityExpr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.bump();
                    lhs = UtilityExpr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<UtilityExpr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Token::Star => {
                    self.bump();
                    lhs = UtilityExpr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.bump();
                    lhs = UtilityExpr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<UtilityExpr> {
        if self.peek().0 == Token::Minus {
            self.bump();
            return Ok(UtilityExpr::Neg(Box::new(self.power()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<UtilityExpr> {
        let base = self.atom()?;
        if self.peek().0 == Token::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(UtilityExpr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<UtilityExpr> {
        let (tok, offset) = self.bump();
        match tok {
            Token::Num(n) => Ok(UtilityExpr::Const(n)),
            Token::Mmse => Ok(UtilityExpr::Mmse),
            Token::Pa => Ok(UtilityExpr::Pa),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            Token::Func(func) => {
                // Every function takes exactly one parenthesized argument.
                let (next, next_offset) = self.peek();
                if next != Token::LParen {
                    return Err(Error::Parse {
                        offset: next_offset,
                        message: format!(
                            "{tok} takes exactly one parenthesized argument, found {next}"
                        ),
                    });
                }
                self.bump();
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                let boxed = Box::new(inner);
                Ok(match func {
                    Func::Log => UtilityExpr::Log(boxed),
                    Func::Sqrt => UtilityExpr::Sqrt(boxed),
                    Func::Exp => UtilityExpr::Exp(boxed),
                })
            }
            other => Err(Error::Parse {
                offset,
                message: format!("expected a value, found {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_the_reference_utilities() {
        let e = UtilityExpr::parse("log(MMSE) + 0.75*log(PA)").unwrap();
        let m = 10.0;
        let p = 0.8;
        assert!((e.eval(m, p) - (m.ln() + 0.75 * p.ln())).abs() < 1e-15);

        let e = UtilityExpr::parse("PA / sqrt(MMSE)").unwrap();
        assert!((e.eval(m, p) - p / m.sqrt()).abs() < 1e-15);

        let e = UtilityExpr::parse("log(MMSE) + 0.25*log(PA + 0.3)").unwrap();
        assert!((e.eval(m, p) - (m.ln() + 0.25 * (p + 0.3).ln())).abs() < 1e-15);
    }

    #[test]
    fn reports_syntax_error_position() {
        match UtilityExpr::parse("MMSE + )") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_identifiers() {
        match UtilityExpr::parse("MSE + PA") {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 0);
                assert!(message.contains("unknown identifier"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_function_without_argument_list() {
        match UtilityExpr::parse("log + PA") {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("argument"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(UtilityExpr::parse("log(MMSE, PA)").is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let e = UtilityExpr::parse("1 - 2 - 3").unwrap();
        assert_eq!(e.eval(0.0, 0.0), -4.0);
        let e = UtilityExpr::parse("2 ^ 3 ^ 2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 512.0);
        let e = UtilityExpr::parse("-MMSE^2").unwrap();
        assert_eq!(e.eval(3.0, 0.0), -9.0);
        let e = UtilityExpr::parse("2 + 3 * 4").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 14.0);
        // Unicode minus alias.
        let e = UtilityExpr::parse("PA \u{2212} MMSE").unwrap();
        assert_eq!(e.eval(1.0, 3.0), 2.0);
    }

    fn arb_expr() -> impl Strategy<Value = UtilityExpr> {
        let leaf = prop_oneof![
            (-5.0..5.0_f64).prop_map(UtilityExpr::Const),
            Just(UtilityExpr::Mmse),
            Just(UtilityExpr::Pa),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| UtilityExpr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| UtilityExpr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| UtilityExpr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| UtilityExpr::Div(Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| UtilityExpr::Neg(Box::new(a))),
                inner.clone().prop_map(|a| UtilityExpr::Log(Box::new(a))),
                inner.clone().prop_map(|a| UtilityExpr::Sqrt(Box::new(a))),
                inner.prop_map(|a| UtilityExpr::Exp(Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_roundtrip_evaluates_identically(
            expr in arb_expr(),
            pts in proptest::collection::vec((0.01..100.0_f64, 0.01..1.0_f64), 8),
        ) {
            let printed = expr.to_string();
            let reparsed = UtilityExpr::parse(&printed).unwrap();
            for (m, p) in pts {
                let a = expr.eval(m, p);
                let b = reparsed.eval(m, p);
                prop_assert!(
                    (a.is_nan() && b.is_nan()) || a == b,
                    "mismatch for '{}' at ({}, {}): {} vs {}", printed, m, p, a, b
                );
            }
        }
    }
}
