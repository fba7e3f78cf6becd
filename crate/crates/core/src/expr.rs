//! Arithmetic expressions over named parameters.
//!
//! Model files write matrix entries either as numbers or as short
//! expressions such as `-sigma`, `(1 - beta) * kappa` or `1 / eta`. The
//! grammar is the usual one:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | atom
//! atom   := number | identifier | '(' expr ')'
//! ```

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error in `{input}` at byte {pos}: {msg}")]
    Parse {
        input: String,
        pos: usize,
        msg: &'static str,
    },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

/// A parsed expression; keeps its source text for serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(input: &str) -> Result<Self, ExprError> {
        let mut p = Parser {
            src: input,
            bytes: input.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Self {
            source: input.to_string(),
            root,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            source: format!("{value}"),
            root: Node::Num(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Identifiers referenced by the expression.
    pub fn parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect(&self.root, &mut out);
        out
    }

    pub fn eval<F>(&self, lookup: &F) -> Result<f64, ExprError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        eval(&self.root, lookup)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn collect(node: &Node, out: &mut BTreeSet<String>) {
    match node {
        Node::Num(_) => {}
        Node::Var(v) => {
            out.insert(v.clone());
        }
        Node::Neg(inner) => collect(inner, out),
        Node::Bin(_, a, b) => {
            collect(a, out);
            collect(b, out);
        }
    }
}

fn eval<F>(node: &Node, lookup: &F) -> Result<f64, ExprError>
where
    F: Fn(&str) -> Option<f64>,
{
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(name) => lookup(name).ok_or_else(|| ExprError::UnknownParameter(name.clone()))?,
        Node::Neg(inner) => -eval(inner, lookup)?,
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, lookup)?, eval(b, lookup)?);
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
            }
        }
    })
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &'static str) -> ExprError {
        ExprError::Parse {
            input: self.src.to_string(),
            pos: self.pos,
            msg,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == b'+' { Op::Add } else { Op::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == b'*' { Op::Mul } else { Op::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.bytes.len() {
                    let c = self.bytes[self.pos];
                    let exp_sign = (c == b'+' || c == b'-')
                        && self.pos > start
                        && matches!(self.bytes[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                self.src[start..self.pos]
                    .parse::<f64>()
                    .map(Node::Num)
                    .map_err(|_| self.err("malformed number"))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.bytes.len()
                    && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Ok(Node::Var(self.src[start..self.pos].to_string()))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// A matrix entry in a model file: a JSON number or an expression string.
#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Literal(f64),
    Expr(Expr),
}

impl Entry {
    pub fn eval<F>(&self, lookup: &F) -> Result<f64, ExprError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        match self {
            Entry::Literal(v) => Ok(*v),
            Entry::Expr(e) => e.eval(lookup),
        }
    }

    pub fn parameters(&self) -> BTreeSet<String> {
        match self {
            Entry::Literal(_) => BTreeSet::new(),
            Entry::Expr(e) => e.parameters(),
        }
    }
}

impl From<f64> for Entry {
    fn from(v: f64) -> Self {
        Entry::Literal(v)
    }
}

impl Serialize for Entry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Entry::Literal(v) => s.serialize_f64(*v),
            Entry::Expr(e) => s.serialize_str(e.source()),
        }
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Entry::Literal(v)),
            Raw::Text(t) => Expr::parse(&t)
                .map(Entry::Expr)
                .map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lookup(name: &str) -> Option<f64> {
        match name {
            "beta" => Some(0.99),
            "kappa" => Some(0.1),
            "sigma" => Some(2.0),
            _ => None,
        }
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-sigma * (1 - beta) + kappa / 2").unwrap();
        let v = e.eval(&lookup).unwrap();
        assert!((v - (-2.0 * 0.01 + 0.05)).abs() < 1e-15);
        assert_eq!(Expr::parse("2 - 3 - 4").unwrap().eval(&lookup).unwrap(), -5.0);
        assert_eq!(Expr::parse("8 / 4 / 2").unwrap().eval(&lookup).unwrap(), 1.0);
        assert_eq!(Expr::parse("1e-2 * 3").unwrap().eval(&lookup).unwrap(), 0.03);
    }

    #[test]
    fn reports_parameters_and_unknowns() {
        let e = Expr::parse("kappa * beta - rho").unwrap();
        let names: Vec<_> = e.parameters().into_iter().collect();
        assert_eq!(names, ["beta", "kappa", "rho"]);
        assert_eq!(
            e.eval(&lookup),
            Err(ExprError::UnknownParameter("rho".into()))
        );
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["", "1 +", "(beta", "beta)", "2 $ 3", "1..2"] {
            assert!(Expr::parse(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn entry_deserializes_numbers_and_strings() {
        let entries: Vec<Entry> = serde_json::from_str(r#"[1.5, "-sigma"]"#).unwrap();
        assert_eq!(entries[0], Entry::Literal(1.5));
        assert_eq!(entries[1].eval(&lookup).unwrap(), -2.0);
        assert!(serde_json::from_str::<Entry>(r#""1 +""#).is_err());
    }
}
