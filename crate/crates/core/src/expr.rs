//! A small, total arithmetic expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-2^2`
//! is `-4`. Functions: `pow(a, b)`, `exp`, `log` (alias `ln`), `sqrt`, `abs`.
//! The constant `pi` is predefined. The Unicode operators `−`, `×`, `÷`
//! are accepted as aliases. Evaluation is plain IEEE double arithmetic.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAX_DEPTH: usize = 128;
const MAX_LEN: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{msg} at offset {pos}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl ParseError {
    fn new(pos: usize, msg: impl Into<String>) -> Self {
        ParseError {
            pos,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Pow,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "pow" => Func::Pow,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Pow => "pow",
            Func::Exp => "exp",
            Func::Log => "log",
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

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Ident(usize, usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let c = src[i..].chars().next().unwrap();
        let start = i;
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += c.len_utf8();
                continue;
            }
            '+' => Tok::Plus,
            '-' | '\u{2212}' => Tok::Minus,
            '*' | '\u{00d7}' => Tok::Star,
            '/' | '\u{00f7}' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '0'..='9' | '.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let v: f64 = text
                    .parse()
                    .map_err(|_| ParseError::new(i, format!("bad number '{text}'")))?;
                out.push((start, Tok::Num(v)));
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push((start, Tok::Ident(i, j)));
                i = j;
                continue;
            }
            other => {
                return Err(ParseError::new(
                    i,
                    format!("unexpected character '{other}'"),
                ))
            }
        };
        out.push((start, tok));
        i += c.len_utf8();
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.pos).map(|t| t.1)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|t| t.0)
            .unwrap_or(self.src.len())
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError::new(
                self.offset(),
                "expression nested too deeply",
            ));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        while let Some(t @ (Tok::Plus | Tok::Minus)) = self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if t == Tok::Plus {
                BinOp::Add
            } else {
                BinOp::Sub
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(t @ (Tok::Star | Tok::Slash)) = self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if t == Tok::Star {
                BinOp::Mul
            } else {
                BinOp::Div
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let node = match self.peek() {
            Some(Tok::Minus) => {
                self.bump();
                Node::Neg(Box::new(self.unary()?))
            }
            Some(Tok::Plus) => {
                self.bump();
                self.unary()?
            }
            _ => self.power()?,
        };
        self.depth -= 1;
        Ok(node)
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.peek() == Some(Tok::Caret) {
            self.bump();
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let at = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(a, b)) => {
                let name = &self.src[a..b];
                if self.peek() == Some(Tok::LParen) {
                    let func = Func::lookup(name)
                        .ok_or_else(|| ParseError::new(at, format!("unknown function '{name}'")))?;
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(Tok::Comma) {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    if args.len() != func.arity() {
                        return Err(ParseError::new(
                            at,
                            format!(
                                "{} takes {} argument(s), got {}",
                                func.name(),
                                func.arity(),
                                args.len()
                            ),
                        ));
                    }
                    Ok(Node::Call(func, args))
                } else if name == "pi" {
                    Ok(Node::Num(std::f64::consts::PI))
                } else {
                    Ok(Node::Var(name.to_string()))
                }
            }
            Some(_) => Err(ParseError::new(at, "unexpected token")),
            None => Err(ParseError::new(at, "unexpected end of expression")),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        let at = self.offset();
        if self.bump() == Some(tok) {
            Ok(())
        } else {
            Err(ParseError::new(at, format!("expected {what}")))
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Expr {
    src: String,
    root: Node,
}

impl TryFrom<String> for Expr {
    type Error = ParseError;

    fn try_from(s: String) -> Result<Self, ParseError> {
        Expr::parse(&s)
    }
}

impl From<Expr> for String {
    fn from(e: Expr) -> Self {
        e.src
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        if src.len() > MAX_LEN {
            return Err(ParseError::new(MAX_LEN, "expression too long"));
        }
        let toks = lex(src)?;
        let mut p = Parser {
            src,
            toks,
            pos: 0,
            depth: 0,
        };
        let root = p.expr()?;
        if p.pos < p.toks.len() {
            return Err(ParseError::new(p.offset(), "trailing input"));
        }
        Ok(Expr {
            src: src.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Free variables, sorted.
    pub fn variables(&self) -> BTreeSet<String> {
        fn walk(n: &Node, out: &mut BTreeSet<String>) {
            match n {
                Node::Num(_) => {}
                Node::Var(v) => {
                    out.insert(v.clone());
                }
                Node::Neg(a) => walk(a, out),
                Node::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Node::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.root, &mut out);
        out
    }

    /// Resolves variables against `names`; the evaluator takes values in that order.
    pub fn bind(&self, names: &[&str]) -> Result<Compiled, ParseError> {
        fn go(n: &Node, names: &[&str]) -> Result<Op, ParseError> {
            Ok(match n {
                Node::Num(v) => Op::Num(*v),
                Node::Var(v) => match names.iter().position(|m| m == v) {
                    Some(i) => Op::Var(i),
                    None => {
                        return Err(ParseError::new(
                            0,
                            format!(
                                "unknown variable '{v}' (expected one of {})",
                                names.join(", ")
                            ),
                        ))
                    }
                },
                Node::Neg(a) => Op::Neg(Box::new(go(a, names)?)),
                Node::Bin(op, a, b) => {
                    Op::Bin(*op, Box::new(go(a, names)?), Box::new(go(b, names)?))
                }
                Node::Call(f, args) => Op::Call(
                    *f,
                    args.iter()
                        .map(|a| go(a, names))
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            })
        }
        Ok(Compiled {
            op: go(&self.root, names)?,
            arity: names.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Num(f64),
    Var(usize),
    Neg(Box<Op>),
    Bin(BinOp, Box<Op>, Box<Op>),
    Call(Func, Vec<Op>),
}

/// An expression with variables resolved to positional slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    op: Op,
    arity: usize,
}

impl Compiled {
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Evaluates with positional variable values. Missing values read as NaN.
    pub fn eval(&self, vals: &[f64]) -> f64 {
        fn go(op: &Op, vals: &[f64]) -> f64 {
            match op {
                Op::Num(v) => *v,
                Op::Var(i) => vals.get(*i).copied().unwrap_or(f64::NAN),
                Op::Neg(a) => -go(a, vals),
                Op::Bin(o, a, b) => {
                    let (a, b) = (go(a, vals), go(b, vals));
                    match o {
                        BinOp::Add => a + b,
                        BinOp::Sub => a - b,
                        BinOp::Mul => a * b,
                        BinOp::Div => a / b,
                        BinOp::Pow => pow(a, b),
                    }
                }
                Op::Call(f, args) => match f {
                    Func::Pow => pow(go(&args[0], vals), go(&args[1], vals)),
                    Func::Exp => go(&args[0], vals).exp(),
                    Func::Log => go(&args[0], vals).ln(),
                    Func::Sqrt => go(&args[0], vals).sqrt(),
                    Func::Abs => go(&args[0], vals).abs(),
                },
            }
        }
        go(&self.op, vals)
    }
}

// integer exponents go through powi so that x^2 is exact for negative x as well
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Parses and binds in one step.
pub fn compile(src: &str, names: &[&str]) -> Result<Compiled, ParseError> {
    Expr::parse(src)?.bind(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, names: &[&str], vals: &[f64]) -> f64 {
        compile(src, names).unwrap().eval(vals)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[], &[]), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[], &[]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[], &[]), -4.0);
        assert_eq!(ev("2 ^ -1", &[], &[]), 0.5);
        assert_eq!(ev("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(ev("1 - 2 - 3", &[], &[]), -4.0);
        assert_eq!(ev("3 × 4 ÷ 6 − 1", &[], &[]), 1.0);
    }

    #[test]
    fn functions_and_variables() {
        assert_eq!(ev("u * (u - v)", &["u", "v"], &[1.0, 2.5]), -1.5);
        assert!((ev("log(exp(u))", &["u"], &[0.7]) - 0.7).abs() < 1e-15);
        assert_eq!(
            ev("pow(u, 2) + sqrt(v) + abs(-1)", &["u", "v"], &[-3.0, 4.0]),
            12.0
        );
        assert_eq!(ev("ln(1)", &[], &[]), 0.0);
        assert!((ev("pi", &[], &[]) - std::f64::consts::PI).abs() == 0.0);
        assert_eq!(ev("1.5e2 + 2E-1", &[], &[]), 150.2);
        assert_eq!(ev("(-2)^2", &[], &[]), 4.0);
    }

    #[test]
    fn errors_carry_offsets() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("pow(1)").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("").is_err());
        assert_eq!(Expr::parse("1 $ 2").unwrap_err().pos, 2);
        assert!(compile("w + 1", &["u", "v"]).is_err());
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let deep = format!("{}1{}", "(".repeat(10_000), ")".repeat(10_000));
        assert!(Expr::parse(&deep).is_err());
        let negs = format!("{}1", "-".repeat(10_000));
        assert!(Expr::parse(&negs).is_err());
        let pows = format!("2{}", "^2".repeat(10_000));
        assert!(Expr::parse(&pows).is_err());
    }

    #[test]
    fn variables_are_collected() {
        let e = Expr::parse("u1 * v2 + exp(u1)").unwrap();
        let vars: Vec<String> = e.variables().into_iter().collect();
        assert_eq!(vars, vec!["u1", "v2"]);
    }

    #[test]
    fn serde_as_string() {
        let e = Expr::parse("u - v").unwrap();
        assert_eq!(serde_json::to_string(&e).unwrap(), "\"u - v\"");
        let back: Expr = serde_json::from_str("\"u - v\"").unwrap();
        assert_eq!(back, e);
        assert!(serde_json::from_str::<Expr>("\"u -\"").is_err());
    }
}
