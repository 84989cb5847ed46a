//! Expression mini-language for inequality chains.
//!
//! ```text
//! chain  := expr (rel expr)+          rel := "<" | "<=" | ">" | ">="
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" unary)?
//! atom   := NUMBER | "pi" | "e" | IDENT | IDENT "(" args ")"
//!         | "mean" "(" KIND ";" expr "," expr ")" | "(" expr ")"
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^-x` is accepted.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::means::{mean_of, MeanKind};

/// Variables accepted by [`parse`] unless a caller supplies its own list.
pub const DEFAULT_VARIABLES: &[&str] = &["x", "y", "t", "k", "r", "q", "a", "b"];

/// Unit roundoff of binary64.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

// Assumed relative error of one libm call, in units of roundoff.
const LIBM_ULPS: f64 = 2.0;
// Relative error of one mean evaluation, in units of roundoff.
const MEAN_ULPS: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Asin,
    Acos,
    Atan,
    Asinh,
    Acosh,
    Atanh,
    Ln,
    Exp,
    Sqrt,
    Cbrt,
    Abs,
    Pow,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 20] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Asin,
        Func::Acos,
        Func::Atan,
        Func::Asinh,
        Func::Acosh,
        Func::Atanh,
        Func::Ln,
        Func::Exp,
        Func::Sqrt,
        Func::Cbrt,
        Func::Abs,
        Func::Pow,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Asin => "asin",
            Func::Acos => "acos",
            Func::Atan => "atan",
            Func::Asinh => "asinh",
            Func::Acosh => "acosh",
            Func::Atanh => "atanh",
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Cbrt => "cbrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn apply(self, args: &[f64]) -> f64 {
        let x = args[0];
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Asin => x.asin(),
            Func::Acos => x.acos(),
            Func::Atan => x.atan(),
            Func::Asinh => x.asinh(),
            Func::Acosh => x.acosh(),
            Func::Atanh => x.atanh(),
            Func::Ln => x.ln(),
            Func::Exp => x.exp(),
            Func::Sqrt => x.sqrt(),
            Func::Cbrt => x.cbrt(),
            Func::Abs => x.abs(),
            Func::Pow => x.powf(args[1]),
            Func::Min => x.min(args[1]),
            Func::Max => x.max(args[1]),
        }
    }

    /// |f'(x)| at x, given v = f(x), for the unary functions.
    fn slope(self, x: f64, v: f64) -> f64 {
        match self {
            Func::Sin => x.cos().abs(),
            Func::Cos => x.sin().abs(),
            Func::Tan => 1.0 + v * v,
            Func::Sinh => x.cosh(),
            Func::Cosh => x.sinh().abs(),
            Func::Tanh => 1.0 - v * v,
            Func::Asin | Func::Acos => 1.0 / (1.0 - x * x).sqrt(),
            Func::Atan => 1.0 / (1.0 + x * x),
            Func::Asinh => 1.0 / (1.0 + x * x).sqrt(),
            Func::Acosh => 1.0 / (x * x - 1.0).sqrt(),
            Func::Atanh => 1.0 / (1.0 - x * x),
            Func::Ln => 1.0 / x.abs(),
            Func::Exp => v,
            Func::Sqrt => 0.5 / v,
            Func::Cbrt => 1.0 / (3.0 * v * v),
            Func::Abs => 1.0,
            Func::Pow | Func::Min | Func::Max => unreachable!("binary"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => " * ",
            BinOp::Div => " / ",
            BinOp::Pow => "^",
        }
    }

    fn prec(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Non-negative literal; negation is always an explicit [`Expr::Neg`].
    Num(f64),
    Const(Constant),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Mean(MeanKind, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) | Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, l, r) | Expr::Mean(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(op, _, _) => op.prec(),
            Expr::Neg(_) => 3,
            _ => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Rel::Lt | Rel::Gt)
    }

    /// Signed slack of `left REL right`: positive when the relation holds strictly.
    pub fn slack(self, left: f64, right: f64) -> f64 {
        match self {
            Rel::Lt | Rel::Le => right - left,
            Rel::Gt | Rel::Ge => left - right,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationChain {
    pub exprs: Vec<Expr>,
    pub rels: Vec<Rel>,
}

impl RelationChain {
    pub fn free_vars(&self) -> BTreeSet<String> {
        self.exprs.iter().flat_map(|e| e.free_vars()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Expr(Expr),
    Chain(RelationChain),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{func}` takes {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        func: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{node}`")]
    Domain { node: String },
}

// ---------------------------------------------------------------------------
// parsing

pub fn parse(text: &str) -> Result<Parsed, ParseError> {
    parse_with_vars(text, DEFAULT_VARIABLES)
}

pub fn parse_with_vars(text: &str, vars: &[&str]) -> Result<Parsed, ParseError> {
    let mut p = Parser { src: text, pos: 0, vars };
    let first = p.expr()?;
    let mut exprs = vec![first];
    let mut rels = Vec::new();
    while let Some(rel) = p.rel() {
        rels.push(rel);
        exprs.push(p.expr()?);
    }
    p.skip_ws();
    if p.pos < text.len() {
        let expected = if rels.is_empty() {
            vec!["operator", "relation", "end of input"]
        } else {
            vec!["operator", "end of input"]
        };
        return Err(p.syntax(&expected));
    }
    if rels.is_empty() {
        Ok(Parsed::Expr(exprs.pop().unwrap()))
    } else {
        Ok(Parsed::Chain(RelationChain { exprs, rels }))
    }
}

/// Parses a single expression; a relation is a syntax error.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    match parse(text)? {
        Parsed::Expr(e) => Ok(e),
        Parsed::Chain(_) => Err(ParseError::Syntax {
            offset: relation_offset(text),
            expected: vec!["end of input".into()],
            found: "relation".into(),
        }),
    }
}

/// Parses a chain with at least one relation.
pub fn parse_chain(text: &str) -> Result<RelationChain, ParseError> {
    parse_chain_with_vars(text, DEFAULT_VARIABLES)
}

pub fn parse_chain_with_vars(text: &str, vars: &[&str]) -> Result<RelationChain, ParseError> {
    match parse_with_vars(text, vars)? {
        Parsed::Chain(c) => Ok(c),
        Parsed::Expr(_) => Err(ParseError::Syntax {
            offset: text.len(),
            expected: vec!["relation".into()],
            found: "end of input".into(),
        }),
    }
}

fn relation_offset(text: &str) -> usize {
    text.find(['<', '>']).unwrap_or(text.len())
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn found(&self) -> String {
        match self.rest().chars().next() {
            Some(c) => format!("`{c}`"),
            None => "end of input".into(),
        }
    }

    fn syntax(&mut self, expected: &[&str]) -> ParseError {
        self.skip_ws();
        ParseError::Syntax {
            offset: self.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.found(),
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.syntax(&[tok]))
        }
    }

    fn rel(&mut self) -> Option<Rel> {
        for (tok, rel) in [("<=", Rel::Le), ("<", Rel::Lt), (">=", Rel::Ge), (">", Rel::Gt)] {
            if self.eat(tok) {
                return Some(rel);
            }
        }
        None
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat("^") {
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        const ATOM: &[&str] = &["number", "identifier", "`(`", "`-`"];
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_lowercase() => self.ident_atom(),
            _ => Err(self.syntax(ATOM)),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let b = self.src.as_bytes();
        let mut i = self.pos;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < b.len() && b[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > s
        };
        let int = digits(&mut i);
        let mut frac = false;
        if i < b.len() && b[i] == b'.' {
            i += 1;
            frac = digits(&mut i);
        }
        if !int && !frac {
            return Err(self.syntax(&["digit"]));
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                i = j;
                digits(&mut i);
            }
        }
        self.pos = i;
        let text = &self.src[start..i];
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Expr::Num)
            .ok_or(ParseError::Syntax {
                offset: start,
                expected: vec!["finite number".into()],
                found: format!("`{text}`"),
            })
    }

    fn ident(&mut self) -> (usize, &'a str) {
        let start = self.pos;
        let end = self.rest()
            .find(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'))
            .map_or(self.src.len(), |n| self.pos + n);
        self.pos = end;
        (start, &self.src[start..end])
    }

    fn ident_atom(&mut self) -> Result<Expr, ParseError> {
        let (start, name) = self.ident();
        if name == "mean" {
            return self.mean_call();
        }
        if let Some(func) = Func::from_name(name) {
            self.expect("(")?;
            return self.call(func, start);
        }
        match name {
            "pi" => Ok(Expr::Const(Constant::Pi)),
            "e" => Ok(Expr::Const(Constant::E)),
            _ if self.vars.contains(&name) => Ok(Expr::Var(name.to_string())),
            _ => Err(ParseError::UnknownIdentifier {
                name: name.to_string(),
                offset: start,
            }),
        }
    }

    fn call(&mut self, func: Func, start: usize) -> Result<Expr, ParseError> {
        let want = func.arity();
        let mut args = vec![self.expr()?];
        while args.len() < want {
            if !self.eat(",") {
                if self.peek() == Some(')') {
                    return Err(ParseError::Arity {
                        func: func.name().into(),
                        expected: want,
                        found: args.len(),
                        offset: start,
                    });
                }
                return Err(self.syntax(&["`,`"]));
            }
            args.push(self.expr()?);
        }
        if self.peek() == Some(',') {
            let mut found = args.len();
            while self.eat(",") {
                self.expr()?;
                found += 1;
            }
            return Err(ParseError::Arity {
                func: func.name().into(),
                expected: want,
                found,
                offset: start,
            });
        }
        self.expect(")")?;
        Ok(Expr::Call(func, args))
    }

    fn mean_call(&mut self) -> Result<Expr, ParseError> {
        self.expect("(")?;
        self.skip_ws();
        let kind_start = self.pos;
        let Some(semi) = self.rest().find(';') else {
            return Err(self.syntax(&["mean kind followed by `;`"]));
        };
        let kind_text = &self.src[kind_start..kind_start + semi];
        let kind: MeanKind = kind_text.parse().map_err(|_| ParseError::Syntax {
            offset: kind_start,
            expected: vec!["mean kind".into()],
            found: format!("`{}`", kind_text.trim()),
        })?;
        self.pos = kind_start + semi + 1;
        let a = self.expr()?;
        self.expect(",")?;
        let b = self.expr()?;
        self.expect(")")?;
        Ok(Expr::Mean(kind, Box::new(a), Box::new(b)))
    }
}

// ---------------------------------------------------------------------------
// formatting

fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        // Debug is the shortest round-trip form and switches to exponents
        write!(f, "{v:?}")
    }
}

fn fmt_child(e: &Expr, paren: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if paren {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => {
                f.write_str("(-")?;
                fmt_num(-v, f)?;
                f.write_str(")")
            }
            Expr::Num(v) => fmt_num(*v, f),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(e) => {
                f.write_str("-")?;
                fmt_child(e, e.prec() < 3, f)
            }
            Expr::Bin(BinOp::Pow, l, r) => {
                fmt_child(l, l.prec() < 5, f)?;
                f.write_str("^")?;
                fmt_child(r, r.prec() < 3, f)
            }
            Expr::Bin(op, l, r) => {
                let p = op.prec();
                fmt_child(l, l.prec() < p, f)?;
                f.write_str(op.symbol())?;
                fmt_child(r, r.prec() <= p, f)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Mean(kind, a, b) => write!(f, "mean({kind}; {a}, {b})"),
        }
    }
}

impl fmt::Display for RelationChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.exprs[0])?;
        for (rel, e) in self.rels.iter().zip(&self.exprs[1..]) {
            write!(f, " {} {e}", rel.symbol())?;
        }
        Ok(())
    }
}

impl fmt::Display for Parsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parsed::Expr(e) => e.fmt(f),
            Parsed::Chain(c) => c.fmt(f),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Serialize for RelationChain {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Canonical text of an expression.
pub fn format(expr: &Expr) -> String {
    expr.to_string()
}

// ---------------------------------------------------------------------------
// evaluation

/// Evaluates with named bindings.
pub fn eval_expr(expr: &Expr, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
    let names: Vec<&str> = bindings.keys().map(String::as_str).collect();
    let values: Vec<f64> = names.iter().map(|n| bindings[*n]).collect();
    Program::compile(expr, &names)?.eval(&values)
}

/// An expression with variables resolved to slots, ready for repeated
/// evaluation. Every node also carries a first-order bound on the absolute
/// rounding error of its value.
#[derive(Debug, Clone)]
pub struct Program {
    root: Node,
    texts: Vec<String>,
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    op: Op,
}

#[derive(Debug, Clone)]
enum Op {
    Lit(f64, f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call1(Func, Box<Node>),
    Call2(Func, Box<Node>, Box<Node>),
    Mean(MeanKind, Box<Node>, Box<Node>),
}

fn literal_error(v: f64) -> f64 {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        0.0
    } else {
        v.abs() * UNIT_ROUNDOFF
    }
}

impl Program {
    /// Resolves every variable of `expr` against `slots`.
    pub fn compile(expr: &Expr, slots: &[&str]) -> Result<Program, EvalError> {
        let mut texts = Vec::new();
        let root = Self::build(expr, slots, &mut texts)?;
        Ok(Program { root, texts })
    }

    fn build(e: &Expr, slots: &[&str], texts: &mut Vec<String>) -> Result<Node, EvalError> {
        let id = texts.len();
        texts.push(e.to_string());
        let mut sub = |x: &Expr| Self::build(x, slots, texts).map(Box::new);
        let op = match e {
            Expr::Num(v) => Op::Lit(*v, literal_error(*v)),
            Expr::Const(c) => Op::Lit(c.value(), c.value() * UNIT_ROUNDOFF),
            Expr::Var(name) => Op::Var(
                slots
                    .iter()
                    .position(|s| s == name)
                    .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            ),
            Expr::Neg(x) => Op::Neg(sub(x)?),
            Expr::Bin(op, l, r) => Op::Bin(*op, sub(l)?, sub(r)?),
            Expr::Call(f, args) if args.len() == 1 => Op::Call1(*f, sub(&args[0])?),
            Expr::Call(f, args) => Op::Call2(*f, sub(&args[0])?, sub(&args[1])?),
            Expr::Mean(k, a, b) => Op::Mean(*k, sub(a)?, sub(b)?),
        };
        Ok(Node { id, op })
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        self.eval_with_error(values).map(|(v, _)| v)
    }

    /// Value and a bound on its absolute rounding error.
    pub fn eval_with_error(&self, values: &[f64]) -> Result<(f64, f64), EvalError> {
        self.node(&self.root, values)
    }

    fn domain(&self, n: &Node) -> EvalError {
        EvalError::Domain {
            node: self.texts[n.id].clone(),
        }
    }

    fn node(&self, n: &Node, vals: &[f64]) -> Result<(f64, f64), EvalError> {
        let u = UNIT_ROUNDOFF;
        let (v, e) = match &n.op {
            Op::Lit(v, e) => (*v, *e),
            Op::Var(i) => (vals[*i], 0.0),
            Op::Neg(x) => {
                let (v, e) = self.node(x, vals)?;
                (-v, e)
            }
            Op::Bin(op, l, r) => {
                let (a, ea) = self.node(l, vals)?;
                let (b, eb) = self.node(r, vals)?;
                match op {
                    BinOp::Add => {
                        let v = a + b;
                        (v, ea + eb + v.abs() * u)
                    }
                    BinOp::Sub => {
                        let v = a - b;
                        (v, ea + eb + v.abs() * u)
                    }
                    BinOp::Mul => {
                        let v = a * b;
                        (v, b.abs() * ea + a.abs() * eb + v.abs() * u)
                    }
                    BinOp::Div => {
                        let v = a / b;
                        (v, (ea + v.abs() * eb) / b.abs() + v.abs() * u)
                    }
                    BinOp::Pow => pow_with_error(a, ea, b, eb),
                }
            }
            Op::Call1(f, x) => {
                let (a, ea) = self.node(x, vals)?;
                let v = f.apply(&[a]);
                let prop = if ea == 0.0 { 0.0 } else { f.slope(a, v) * ea };
                (v, prop + LIBM_ULPS * u * v.abs())
            }
            Op::Call2(f, l, r) => {
                let (a, ea) = self.node(l, vals)?;
                let (b, eb) = self.node(r, vals)?;
                match f {
                    Func::Pow => pow_with_error(a, ea, b, eb),
                    _ => (f.apply(&[a, b]), ea.max(eb)),
                }
            }
            Op::Mean(k, l, r) => {
                let (a, ea) = self.node(l, vals)?;
                let (b, eb) = self.node(r, vals)?;
                let m = mean_of(*k, a, b).map_err(|_| self.domain(n))?;
                // means are increasing in each argument and homogeneous of
                // degree one, so dM <= M (da/a + db/b)
                (m, m * (ea / a + eb / b) + MEAN_ULPS * u * m)
            }
        };
        if v.is_finite() && !e.is_nan() {
            Ok((v, e))
        } else {
            Err(self.domain(n))
        }
    }
}

fn pow_with_error(a: f64, ea: f64, b: f64, eb: f64) -> (f64, f64) {
    let v = a.powf(b);
    let mut e = LIBM_ULPS * UNIT_ROUNDOFF * v.abs();
    if ea > 0.0 {
        e += (b * a.powf(b - 1.0)).abs() * ea;
    }
    if eb > 0.0 && v != 0.0 {
        e += (v * a.abs().ln()).abs() * eb;
    }
    (v, e)
}
