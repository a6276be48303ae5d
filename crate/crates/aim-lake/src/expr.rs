//! Closed-form scalar fields given as text, e.g. `2 + sin(2*pi*x/L)`.
//!
//! Variables: `x`, `y`, `L` (side length). Constants: `pi`, `e`.
//! Functions: sin cos tan exp log ln sqrt tanh sinh cosh abs, and `pow(a, b)`.
//! Evaluation also runs in forward-mode dual numbers so the gradient is exact.

use crate::error::{Error, Result};
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    L,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
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
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Tanh,
    Sinh,
    Cosh,
    Abs,
    Pow,
}

impl Func {
    fn from_name(s: &str) -> Option<(Func, usize)> {
        Some(match s {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "log" | "ln" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "tanh" => (Func::Tanh, 1),
            "sinh" => (Func::Sinh, 1),
            "cosh" => (Func::Cosh, 1),
            "abs" => (Func::Abs, 1),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

/// A parsed field expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source).map_err(|m| err(source, m))?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr().map_err(|m| err(source, m))?;
        if p.pos != p.tokens.len() {
            return Err(err(source, format!("unexpected token {:?}", p.tokens[p.pos])));
        }
        Ok(Expr { source: source.to_string(), root })
    }

    pub fn constant(c: f64) -> Self {
        Expr { source: format!("{c}"), root: Node::Num(c) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64, y: f64, side: f64) -> f64 {
        eval(&self.root, x, y, side)
    }

    /// Value and gradient `[f, df/dx, df/dy]`.
    pub fn eval_grad(&self, x: f64, y: f64, side: f64) -> [f64; 3] {
        let d: Dual = eval(&self.root, Dual::var(x, 0), Dual::var(y, 1), Dual::cst(side));
        [d.v, d.d[0], d.d[1]]
    }
}

fn err(source: &str, message: impl Into<String>) -> Error {
    Error::Expr { expr: source.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(s: &str) -> std::result::Result<Vec<Tok>, String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
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
            let text: String = chars[start..i].iter().collect();
            out.push(Tok::Num(text.parse().map_err(|_| format!("bad number `{text}`"))?));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

type PResult<T> = std::result::Result<T, String>;

impl Parser {
    fn peek_sym(&self, c: char) -> bool {
        matches!(self.tokens.get(self.pos), Some(Tok::Sym(s)) if *s == c)
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if self.peek_sym(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> PResult<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.peek_sym('+') {
                Op::Add
            } else if self.peek_sym('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.peek_sym('*') {
                Op::Mul
            } else if self.peek_sym('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Node> {
        if self.peek_sym('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.peek_sym('+') {
            self.pos += 1;
            return self.unary();
        }
        let base = self.atom()?;
        if self.peek_sym('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Node> {
        let tok = self.tokens.get(self.pos).cloned().ok_or("unexpected end of input")?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek_sym('(') {
                    let (f, arity) = Func::from_name(&name).ok_or(format!("unknown function `{name}`"))?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_sym(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(format!("`{name}` takes {arity} argument(s)"));
                    }
                    return Ok(Node::Call(f, args));
                }
                match name.as_str() {
                    "x" => Ok(Node::X),
                    "y" => Ok(Node::Y),
                    "L" => Ok(Node::L),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(format!("unknown variable `{name}`")),
                }
            }
            Tok::Sym(c) => Err(format!("unexpected `{c}`")),
        }
    }
}

trait Value:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(c: f64) -> Self;
    fn map(self, f: f64, df: f64) -> Self;
    fn val(self) -> f64;
    fn is_const(self) -> bool;
}

impl Value for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn map(self, f: f64, _df: f64) -> Self {
        f
    }
    fn val(self) -> f64 {
        self
    }
    fn is_const(self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: [f64; 2],
}

impl Dual {
    fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; 2];
        d[i] = 1.0;
        Dual { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: [self.d[0] + o.d[0], self.d[1] + o.d[1]] }
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: [self.d[0] - o.d[0], self.d[1] - o.d[1]] }
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: [self.d[0] * o.v + self.v * o.d[0], self.d[1] * o.v + self.v * o.d[1]],
        }
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let q = self.v / o.v;
        Dual { v: q, d: [(self.d[0] - q * o.d[0]) / o.v, (self.d[1] - q * o.d[1]) / o.v] }
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, d: [-self.d[0], -self.d[1]] }
    }
}

impl Value for Dual {
    fn cst(c: f64) -> Self {
        Dual { v: c, d: [0.0; 2] }
    }
    fn map(self, f: f64, df: f64) -> Self {
        Dual { v: f, d: [df * self.d[0], df * self.d[1]] }
    }
    fn val(self) -> f64 {
        self.v
    }
    fn is_const(self) -> bool {
        self.d == [0.0; 2]
    }
}

fn apply<V: Value>(f: Func, a: V) -> V {
    let x = a.val();
    match f {
        Func::Sin => a.map(x.sin(), x.cos()),
        Func::Cos => a.map(x.cos(), -x.sin()),
        Func::Tan => a.map(x.tan(), 1.0 / (x.cos() * x.cos())),
        Func::Exp => a.map(x.exp(), x.exp()),
        Func::Log => a.map(x.ln(), 1.0 / x),
        Func::Sqrt => a.map(x.sqrt(), 0.5 / x.sqrt()),
        Func::Tanh => a.map(x.tanh(), 1.0 - x.tanh() * x.tanh()),
        Func::Sinh => a.map(x.sinh(), x.cosh()),
        Func::Cosh => a.map(x.cosh(), x.sinh()),
        Func::Abs => a.map(x.abs(), if x >= 0.0 { 1.0 } else { -1.0 }),
        Func::Pow => unreachable!("binary"),
    }
}

fn pow<V: Value>(a: V, b: V) -> V {
    let (x, p) = (a.val(), b.val());
    if b.is_const() {
        a.map(x.powf(p), p * x.powf(p - 1.0))
    } else {
        apply(Func::Exp, b * apply(Func::Log, a))
    }
}

fn eval<V: Value>(n: &Node, x: V, y: V, side: V) -> V {
    match n {
        Node::Num(c) => V::cst(*c),
        Node::X => x,
        Node::Y => y,
        Node::L => side,
        Node::Neg(a) => -eval(a, x, y, side),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, y, side), eval(b, x, y, side));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => pow(a, b),
            }
        }
        Node::Call(Func::Pow, args) => pow(eval(&args[0], x, y, side), eval(&args[1], x, y, side)),
        Node::Call(f, args) => apply(*f, eval(&args[0], x, y, side)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_power() {
        let e = Expr::parse("1 + 2*3^2 - -4/2").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 1.0), 1.0 + 18.0 + 2.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 1.0), 512.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("2 + sin(2*pi*x/L) * cos(y)").unwrap();
        let v = e.eval(1.0, 0.5, 4.0);
        assert!((v - (2.0 + (std::f64::consts::PI / 2.0).sin() * 0.5f64.cos())).abs() < 1e-15);
        assert!(Expr::parse("1.5e-3*exp(-x)").unwrap().eval(0.0, 0.0, 1.0) == 1.5e-3);
    }

    #[test]
    fn gradient_matches_hand_derivative() {
        let e = Expr::parse("x^2*sin(y) + pow(x, 3) + exp(x*y)").unwrap();
        let (x, y) = (0.7, -1.3);
        let g = e.eval_grad(x, y, 1.0);
        let dx = 2.0 * x * y.sin() + 3.0 * x * x + y * (x * y).exp();
        let dy = x * x * y.cos() + x * (x * y).exp();
        assert!((g[1] - dx).abs() < 1e-13 && (g[2] - dy).abs() < 1e-13);
        assert!((g[0] - e.eval(x, y, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1 +", "foo(1)", "z", "sin(1,2)", "(1", "1 $ 2"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }
}
