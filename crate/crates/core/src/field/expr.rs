//! Arithmetic expression mini-language for custom drift fields.
//!
//! Grammar: `+ - * / ^` with usual precedence, parentheses, unary minus,
//! float literals, variables `x1..xd`, and `exp(...)`. This is deliberately
//! small; anything richer belongs in a dedicated CAS, not here.

use std::sync::Arc;

use nalgebra::DVector;

use super::{DriftField, DriftFieldBuilder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    /// Parse an expression over variables x1..x`dim`.
    pub fn parse(src: &str, dim: usize) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0, dim };
        let e = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input at token {} in `{src}`",
                parser.pos
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Neg(a) => -a.eval(x),
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '+' || chars[i] == '-')
                            && i > start
                            && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number literal `{s}`")))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        // Unary minus binds looser than `^`, so -x^2 means -(x^2).
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.primary()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            // Right-associative exponent.
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                match self.bump() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(Error::Expr("missing closing parenthesis".into())),
                }
            }
            Some(Token::Ident(name)) => {
                if matches!(self.peek(), Some(Token::LParen)) {
                    self.bump();
                    let arg = self.expr()?;
                    match self.bump() {
                        Some(Token::RParen) => {}
                        _ => return Err(Error::Expr(format!("missing `)` after {name}(..."))),
                    }
                    match name.as_str() {
                        "exp" => Ok(Expr::Exp(Box::new(arg))),
                        other => Err(Error::Expr(format!("unknown function `{other}`"))),
                    }
                } else {
                    self.variable(&name)
                }
            }
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }

    fn variable(&self, name: &str) -> Result<Expr> {
        let idx: usize = name
            .strip_prefix('x')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Expr(format!("unknown identifier `{name}` (expected x1..x{})", self.dim)))?;
        if idx == 0 || idx > self.dim {
            return Err(Error::Expr(format!(
                "variable `{name}` out of range for dimension {}",
                self.dim
            )));
        }
        Ok(Expr::Var(idx - 1))
    }
}

/// Build a custom drift field from per-coordinate expressions.
/// Derivatives fall back to central finite differences.
pub fn build_custom(dim: usize, exprs: &[String]) -> Result<DriftField> {
    if exprs.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: exprs.len() });
    }
    let parsed: Vec<Expr> = exprs
        .iter()
        .map(|s| Expr::parse(s, dim))
        .collect::<Result<_>>()?;
    let drift = Arc::new(move |x: &DVector<f64>| {
        DVector::from_fn(x.len(), |i, _| parsed[i].eval(x))
    });
    Ok(DriftFieldBuilder::new("custom", dim, drift).build())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn parses_polynomial() {
        let e = Expr::parse("x1 - x1^3", 1).unwrap();
        assert_eq!(e.eval(&v(&[2.0])), 2.0 - 8.0);
        assert_eq!(e.eval(&v(&[-1.0])), -1.0 + 1.0);
    }

    #[test]
    fn precedence_and_unary() {
        let e = Expr::parse("-2*x1 + x2^2*3", 2).unwrap();
        assert_eq!(e.eval(&v(&[1.0, 2.0])), -2.0 + 12.0);
        let e = Expr::parse("2^3^2", 1).unwrap(); // right assoc: 2^(3^2)
        assert_eq!(e.eval(&v(&[0.0])), 512.0);
    }

    #[test]
    fn exp_and_constants() {
        let e = Expr::parse("exp(-x1^2) * 1.5e1", 1).unwrap();
        let got = e.eval(&v(&[1.0]));
        assert!((got - 15.0 * (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("x3", 2).is_err());
        assert!(Expr::parse("sin(x1)", 1).is_err());
        assert!(Expr::parse("x1 +", 1).is_err());
        assert!(Expr::parse("(x1", 1).is_err());
        assert!(Expr::parse("x1 $ 2", 1).is_err());
    }

    #[test]
    fn custom_field_drift() {
        let f = build_custom(2, &["x1 - x1^3".into(), "-x2".into()]).unwrap();
        let b = f.eval_drift(&v(&[2.0, 1.0])).unwrap();
        assert_eq!(b, v(&[-6.0, -1.0]));
        // FD Jacobian fallback close to the analytic d/dx (x - x^3) = 1 - 3x^2.
        let j = f.eval_jacobian(&v(&[2.0, 1.0])).unwrap();
        assert!((j[(0, 0)] - (1.0 - 12.0)).abs() < 1e-6);
        assert!((j[(1, 1)] + 1.0).abs() < 1e-9);
    }
}
