//! A small arithmetic expression language for coefficients.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ('+'|'-') factor | base ('^' factor)?
//! base   := number | var | ident '(' expr ')' | '(' expr ')'
//! ident  := exp | log | sin | cos | sqrt | abs
//! ```
//!
//! `var` is `x` for spatial fields; time functions use `t`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Evaluates at `x`. Division by zero, logs of non-positive numbers,
    /// square roots of negatives and non-real powers are reported with `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let fail = |message: &str| Error::Evaluation {
            x,
            message: message.to_string(),
        };
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Bin(op, l, r) => {
                let a = l.eval(x)?;
                let b = r.eval(x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(fail("division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if v.is_nan() && !a.is_nan() && !b.is_nan() {
                            return Err(fail("power has no real value"));
                        }
                        v
                    }
                }
            }
            Expr::Call(f, e) => {
                let a = e.eval(x)?;
                match f {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(fail("log of a non-positive number"));
                        }
                        a.ln()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(fail("sqrt of a negative number"));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                }
            }
        })
    }

    /// True when the expression does not reference the variable.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Bin(_, l, r) => l.is_constant() && r.is_constant(),
        }
    }
}

/// Canonical form: fully parenthesized, numbers in shortest round-trip form.
/// Printing uses `x` as the variable name.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, "x", f)
    }
}

fn write_expr(e: &Expr, var: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        // A bare leading minus would bind looser than `^`.
        Expr::Num(v) if v.is_sign_negative() => write!(f, "({v:?})"),
        Expr::Num(v) => write!(f, "{v:?}"),
        Expr::Var => f.write_str(var),
        Expr::Neg(inner) => {
            f.write_str("(-")?;
            write_expr(inner, var, f)?;
            f.write_str(")")
        }
        Expr::Bin(op, l, r) => {
            f.write_str("(")?;
            write_expr(l, var, f)?;
            write!(f, "{}", op.symbol())?;
            write_expr(r, var, f)?;
            f.write_str(")")
        }
        Expr::Call(func, inner) => {
            write!(f, "{}(", func.name())?;
            write_expr(inner, var, f)?;
            f.write_str(")")
        }
    }
}

/// Parses with `x` as the variable.
pub fn parse(text: &str) -> Result<Expr> {
    parse_with_var(text, "x")
}

pub fn parse_with_var(text: &str, var: &str) -> Result<Expr> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        var,
        len: text.len(),
    };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(Error::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Num(v) => format!("number {v}"),
            Kind::Ident(s) => format!("identifier `{s}`"),
            Kind::Op(c) => format!("operator `{c}`"),
            Kind::LParen => "`(`".into(),
            Kind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push(Token {
                    kind: Kind::Op(c as char),
                    offset: i,
                });
                i += 1;
            }
            b'(' => {
                out.push(Token {
                    kind: Kind::LParen,
                    offset: i,
                });
                i += 1;
            }
            b')' => {
                out.push(Token {
                    kind: Kind::RParen,
                    offset: i,
                });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // Optional exponent; only consumed when digits follow.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{s}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Syntax {
                        offset: start,
                        message: format!("number `{s}` is out of range"),
                    });
                }
                out.push(Token {
                    kind: Kind::Num(v),
                    offset: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: Kind::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    var: &'a str,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: Kind::Op(c), ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn eof_error(&self, what: &str) -> Error {
        Error::Syntax {
            offset: self.len,
            message: format!("unexpected end of input, expected {what}"),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.factor()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                return Ok(Expr::Neg(Box::new(self.factor()?)));
            }
            Some('+') => {
                self.pos += 1;
                return self.factor();
            }
            _ => {}
        }
        let base = self.base()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let tok = self.peek().cloned().ok_or_else(|| self.eof_error("a value"))?;
        self.pos += 1;
        match tok.kind {
            Kind::Num(v) => Ok(Expr::Num(v)),
            Kind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Kind::Ident(name) => {
                if name == self.var {
                    return Ok(Expr::Var);
                }
                let f = Func::from_name(&name).ok_or(Error::UnknownIdentifier {
                    name: name.clone(),
                    offset: tok.offset,
                })?;
                match self.peek() {
                    Some(Token {
                        kind: Kind::LParen, ..
                    }) => self.pos += 1,
                    Some(t) => {
                        return Err(Error::Syntax {
                            offset: t.offset,
                            message: format!("expected `(` after `{name}`"),
                        })
                    }
                    None => return Err(self.eof_error("`(`")),
                }
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expr::Call(f, Box::new(arg)))
            }
            other => Err(Error::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Some(Token {
                kind: Kind::RParen, ..
            }) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(Error::Syntax {
                offset: t.offset,
                message: format!("expected `)`, found {}", t.kind.describe()),
            }),
            None => Err(self.eof_error("`)`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> f64 {
        parse(s).unwrap().eval(x).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1+2*3", 0.0), 7.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("-x^2", 3.0), -9.0);
        assert_eq!(ev("2*-x", 3.0), -6.0);
        assert_eq!(ev("x*(1-x)", 0.5), 0.25);
    }

    #[test]
    fn functions_and_exponents() {
        assert!((ev("exp(-2*x)+1", 1.0) - ((-2.0f64).exp() + 1.0)).abs() < 1e-15);
        assert_eq!(ev("1.5e-3*1e3", 0.0), 1.5);
        assert_eq!(ev("abs(-2)+sqrt(4)", 0.0), 4.0);
    }

    #[test]
    fn errors_carry_positions() {
        match parse("1 + * 2") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse("2*foo(x)") {
            Err(Error::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 2);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("(1+x"), Err(Error::Syntax { offset: 4, .. })));
        assert!(matches!(parse("1 $ 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse(""), Err(Error::Syntax { .. })));
    }

    #[test]
    fn evaluation_errors_carry_x() {
        let e = parse("1/x").unwrap();
        assert_eq!(
            e.eval(0.0),
            Err(Error::Evaluation {
                x: 0.0,
                message: "division by zero".into()
            })
        );
        assert!(parse("log(x)").unwrap().eval(0.0).is_err());
        assert!(parse("sqrt(x-1)").unwrap().eval(0.5).is_err());
    }

    #[test]
    fn canonical_print_round_trips() {
        for s in ["x*(1-x)", "-2.5e-7*x^2/3", "exp(sin(x))-+1", "0.1+0.2"] {
            let e = parse(s).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{s} -> {e}");
        }
        let e = Expr::Bin(BinOp::Pow, Box::new(Expr::Num(-2.0)), Box::new(Expr::Num(2.0)));
        assert_eq!(parse(&e.to_string()).unwrap().eval(0.0).unwrap(), 4.0);
    }

    #[test]
    fn time_variable() {
        let e = parse_with_var("1+sin(t)", "t").unwrap();
        assert!((e.eval(0.5).unwrap() - (1.0 + 0.5f64.sin())).abs() < 1e-16);
        assert!(matches!(
            parse_with_var("x", "t"),
            Err(Error::UnknownIdentifier { .. })
        ));
    }
}
