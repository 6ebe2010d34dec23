//! Arithmetic expressions over the radial variables `r` and `f`.
//!
//! Potential profiles in config files are written as strings such as
//! `"0.3 * r^epsilon / f"`. They are parsed once into an [`Expr`] tree and
//! evaluated on [`Jet`]s so that their derivatives come for free.
//!
//! Supported: `+ - * / ^`, unary minus, parentheses, numeric literals, the
//! variables `r` and `f`, named constants bound at compile time, and the
//! functions `exp`, `log` (natural), `ln`, `sin`, `cos`, `sqrt`, `abs`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    R,
    F,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

/// A compiled radial profile `q(r, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    /// Parses `src`; identifiers other than `r`, `f`, `pi` and the keys of
    /// `constants` are rejected.
    pub fn parse(src: &str, constants: &BTreeMap<String, f64>) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            constants,
            src,
        };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Self {
            source: src.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, r: Jet, f: Jet) -> Jet {
        eval(&self.root, r, f)
    }

    pub fn eval_f64(&self, r: f64, f: f64) -> f64 {
        self.eval(Jet::constant(r), Jet::constant(f)).v
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Num(v) if v == 0.0)
    }
}

fn eval(n: &Node, r: Jet, f: Jet) -> Jet {
    match n {
        Node::Num(v) => Jet::constant(*v),
        Node::R => r,
        Node::F => f,
        Node::Neg(a) => -eval(a, r, f),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, r, f), eval(b, r, f));
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
                Op::Pow => x.pow(y),
            }
        }
        Node::Call(func, a) => {
            let x = eval(a, r, f);
            match func {
                Func::Exp => x.exp(),
                Func::Log => x.ln(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{s}` in `{src}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!(
                "unexpected character `{c}` in `{src}`"
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    constants: &'a BTreeMap<String, f64>,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> Error {
        Error::Expression(format!("{what} at token {} in `{}`", self.pos, self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::Sym('(')) {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "log" | "ln" => Func::Log,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        _ => return Err(self.err(&format!("unknown function `{name}`"))),
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.err("expected `)`"));
                    }
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "r" => Ok(Node::R),
                    "f" => Ok(Node::F),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    other => self
                        .constants
                        .get(other)
                        .map(|&v| Node::Num(v))
                        .ok_or_else(|| self.err(&format!("unknown variable `{other}`"))),
                }
            }
            _ => Err(self.err("expected a value")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> BTreeMap<String, f64> {
        BTreeMap::from([("epsilon".to_string(), 1.0)])
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2*3^2 - 8/4/2", &consts()).unwrap();
        assert_eq!(e.eval_f64(0.0, 0.0), 1.0 + 18.0 - 1.0);
        let e = Expr::parse("2^3^2", &consts()).unwrap();
        assert_eq!(e.eval_f64(0.0, 0.0), 512.0);
        let e = Expr::parse("-2^2", &consts()).unwrap();
        assert_eq!(e.eval_f64(0.0, 0.0), -4.0);
        let e = Expr::parse("1/2", &consts()).unwrap();
        assert_eq!(e.eval_f64(0.0, 0.0), 0.5);
    }

    #[test]
    fn reference_profiles() {
        let q1 = Expr::parse("0.3*r^epsilon/f", &consts()).unwrap();
        assert!((q1.eval_f64(4.0, 3.0) - 0.4).abs() < 1e-15);
        let q2 = Expr::parse("0.5*f^(-2)*sin(r)", &consts()).unwrap();
        assert!((q2.eval_f64(1.0, 2.0) - 0.125 * 1f64.sin()).abs() < 1e-15);
        let e = Expr::parse("exp(-r) + log(f) + 1.5e-1", &consts()).unwrap();
        assert!((e.eval_f64(1.0, 1.0) - ((-1f64).exp() + 0.15)).abs() < 1e-15);
    }

    #[test]
    fn derivatives_propagate() {
        let e = Expr::parse("r^2 * f", &consts()).unwrap();
        let j = e.eval(Jet::variable(3.0), Jet::constant(2.0));
        assert_eq!(j.d1, 12.0);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(Expr::parse("x + 1", &consts()).is_err());
        assert!(Expr::parse("tanh(r)", &consts()).is_err());
        assert!(Expr::parse("(r", &consts()).is_err());
        assert!(Expr::parse("r $ 2", &consts()).is_err());
    }
}
