//! Arithmetic expressions over `q1..qn` and `d1..dm`.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | 'q' INT | 'd' INT | '-' factor | 'abs' '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are decimal with an optional fraction and exponent. Variable
//! indices are 1-based.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{name}` at byte {offset} (declared n = {n}, m = {m})")]
    UnknownVariable {
        name: String,
        offset: usize,
        n: usize,
        m: usize,
    },
    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("expected {expected_q} q-values and {expected_d} d-values, got {got_q} and {got_d}")]
    DimensionMismatch {
        expected_q: usize,
        expected_d: usize,
        got_q: usize,
        got_d: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Expression tree. Variable indices are 0-based internally.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Q(usize),
    D(usize),
    Neg(Box<Node>),
    Abs(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, q: &[f64], d: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Node::Const(c) => *c,
            Node::Q(i) => q[*i],
            Node::D(i) => d[*i],
            Node::Neg(a) => -a.eval(q, d)?,
            Node::Abs(a) => a.eval(q, d)?.abs(),
            Node::Bin(op, a, b) => {
                let x = a.eval(q, d)?;
                let y = b.eval(q, d)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::DivisionByZero {
                                subexpr: self.to_string(),
                            });
                        }
                        x / y
                    }
                }
            }
        })
    }

    fn mentions_q(&self) -> bool {
        match self {
            Node::Q(_) => true,
            Node::Const(_) | Node::D(_) => false,
            Node::Neg(a) | Node::Abs(a) => a.mentions_q(),
            Node::Bin(_, a, b) => a.mentions_q() || b.mentions_q(),
        }
    }

    fn mentions_d(&self) -> bool {
        match self {
            Node::D(_) => true,
            Node::Const(_) | Node::Q(_) => false,
            Node::Neg(a) | Node::Abs(a) => a.mentions_d(),
            Node::Bin(_, a, b) => a.mentions_d() || b.mentions_d(),
        }
    }

    fn has_division(&self) -> bool {
        match self {
            Node::Bin(BinOp::Div, _, _) => true,
            Node::Const(_) | Node::Q(_) | Node::D(_) => false,
            Node::Neg(a) | Node::Abs(a) => a.has_division(),
            Node::Bin(_, a, b) => a.has_division() || b.has_division(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Bin(BinOp::Add | BinOp::Sub, _, _) => 1,
            Node::Bin(BinOp::Mul | BinOp::Div, _, _) => 2,
            Node::Const(c) if *c < 0.0 => 2,
            _ => 3,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Q(i) => write!(f, "q{}", i + 1),
            Node::D(i) => write!(f, "d{}", i + 1),
            Node::Neg(a) => {
                write!(f, "-")?;
                a.write_at(f, 3)
            }
            Node::Abs(a) => {
                write!(f, "abs(")?;
                a.write_at(f, 0)?;
                write!(f, ")")
            }
            Node::Bin(op, a, b) => {
                let (lp, rp) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                };
                a.write_at(f, lp)?;
                write!(f, " {} ", op.symbol())?;
                b.write_at(f, rp)
            }
        }
    }

    fn remap(&self, f: &impl Fn(&Node) -> Option<Node>) -> Node {
        if let Some(n) = f(self) {
            return n;
        }
        match self {
            Node::Neg(a) => Node::Neg(Box::new(a.remap(f))),
            Node::Abs(a) => Node::Abs(Box::new(a.remap(f))),
            Node::Bin(op, a, b) => Node::Bin(*op, Box::new(a.remap(f)), Box::new(b.remap(f))),
            leaf => leaf.clone(),
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

/// A parsed, immutable expression together with its declared dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    ast: Arc<Node>,
    source: Arc<str>,
    n: usize,
    m: usize,
}

impl Expression {
    /// Parses `text` against `n` q-variables and `m` d-variables.
    pub fn parse(text: &str, n: usize, m: usize) -> Result<Self, ExprError> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            n,
            m,
        };
        p.skip_ws();
        if p.pos >= p.src.len() {
            return Err(ExprError::Syntax {
                offset: 0,
                message: "empty expression".into(),
            });
        }
        let ast = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            ast: Arc::new(ast),
            source: text.into(),
            n,
            m,
        })
    }

    /// A constant expression.
    pub fn constant(value: f64, n: usize, m: usize) -> Self {
        Self::from_node(Node::Const(value), n, m)
    }

    fn from_node(node: Node, n: usize, m: usize) -> Self {
        let source = node.to_string();
        Self {
            ast: Arc::new(node),
            source: source.into(),
            n,
            m,
        }
    }

    pub fn ast(&self) -> &Node {
        &self.ast
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn evaluate(&self, q: &[f64], d: &[f64]) -> Result<f64, ExprError> {
        if q.len() != self.n || d.len() != self.m {
            return Err(ExprError::DimensionMismatch {
                expected_q: self.n,
                expected_d: self.m,
                got_q: q.len(),
                got_d: d.len(),
            });
        }
        self.ast.eval(q, d)
    }

    pub fn mentions_q(&self) -> bool {
        self.ast.mentions_q()
    }

    pub fn mentions_d(&self) -> bool {
        self.ast.mentions_d()
    }

    /// Conservative structural affinity test in the q-variables.
    pub fn is_affine_in_q(&self) -> bool {
        self.affine_in_q().is_some()
    }

    /// Splits the expression as `constant(d) + sum_i coeff_i(d) * q_i`, where
    /// every part is free of q. Returns `None` when the tree is not
    /// structurally affine in q, or uses division anywhere.
    pub fn affine_in_q(&self) -> Option<AffineForm> {
        if self.ast.has_division() {
            return None;
        }
        let lin = linearize(&self.ast, self.n)?;
        Some(AffineForm {
            constant: Self::from_node(lin.constant, self.n, self.m),
            coeffs: lin
                .coeffs
                .into_iter()
                .map(|c| Self::from_node(c.unwrap_or(Node::Const(0.0)), self.n, self.m))
                .collect(),
        })
    }

    /// Re-declares the expression with d-variables turned into q-variables
    /// `q_{n+1}..q_{n+m}`. Used to treat random parameters as a second
    /// deterministic block.
    pub fn d_as_q(&self) -> Self {
        let n = self.n;
        let node = self.ast.remap(&|node| match node {
            Node::D(i) => Some(Node::Q(n + i)),
            _ => None,
        });
        Self::from_node(node, self.n + self.m, 0)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

/// `constant + sum_i coeffs[i] * q_i`, all parts q-free.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub constant: Expression,
    pub coeffs: Vec<Expression>,
}

struct Lin {
    constant: Node,
    coeffs: Vec<Option<Node>>,
}

fn add(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x + y),
        (Node::Const(z), other) | (other, Node::Const(z)) if z == 0.0 => other,
        (a, b) => Node::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x * y),
        (Node::Const(z), _) | (_, Node::Const(z)) if z == 0.0 => Node::Const(0.0),
        (Node::Const(o), other) | (other, Node::Const(o)) if o == 1.0 => other,
        (a, b) => Node::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Const(x) => Node::Const(-x),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn linearize(node: &Node, n: usize) -> Option<Lin> {
    let free = |c: Node| Lin {
        constant: c,
        coeffs: vec![None; n],
    };
    match node {
        Node::Const(_) | Node::D(_) => Some(free(node.clone())),
        Node::Q(i) => {
            let mut coeffs = vec![None; n];
            coeffs[*i] = Some(Node::Const(1.0));
            Some(Lin {
                constant: Node::Const(0.0),
                coeffs,
            })
        }
        Node::Abs(a) if !a.mentions_q() => Some(free(node.clone())),
        Node::Abs(_) => None,
        Node::Neg(a) => {
            let l = linearize(a, n)?;
            Some(Lin {
                constant: neg(l.constant),
                coeffs: l.coeffs.into_iter().map(|c| c.map(neg)).collect(),
            })
        }
        Node::Bin(op @ (BinOp::Add | BinOp::Sub), a, b) => {
            let la = linearize(a, n)?;
            let mut lb = linearize(b, n)?;
            if *op == BinOp::Sub {
                lb.constant = neg(lb.constant);
                lb.coeffs = lb.coeffs.into_iter().map(|c| c.map(neg)).collect();
            }
            Some(Lin {
                constant: add(la.constant, lb.constant),
                coeffs: la
                    .coeffs
                    .into_iter()
                    .zip(lb.coeffs)
                    .map(|(x, y)| match (x, y) {
                        (None, None) => None,
                        (Some(x), None) | (None, Some(x)) => Some(x),
                        (Some(x), Some(y)) => Some(add(x, y)),
                    })
                    .collect(),
            })
        }
        Node::Bin(BinOp::Mul, a, b) => {
            let (scale, other) = if !a.mentions_q() {
                (a, b)
            } else if !b.mentions_q() {
                (b, a)
            } else {
                return None;
            };
            let l = linearize(other, n)?;
            let s = (**scale).clone();
            Some(Lin {
                constant: mul(s.clone(), l.constant),
                coeffs: l
                    .coeffs
                    .into_iter()
                    .map(|c| c.map(|c| mul(s.clone(), c)))
                    .collect(),
            })
        }
        Node::Bin(BinOp::Div, _, _) => None,
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
    m: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.factor()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.word(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < s.len() && s[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.error("malformed number"));
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut e = p + 1;
            if e < s.len() && (s[e] == b'+' || s[e] == b'-') {
                e += 1;
            }
            if !digits(&mut e) {
                self.pos = e;
                return Err(self.error("malformed exponent"));
            }
            p = e;
        }
        let text = std::str::from_utf8(&s[start..p]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| self.error("malformed number"))?;
        self.pos = p;
        Ok(Node::Const(value))
    }

    fn word(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let mut p = self.pos;
        while p < self.src.len() && self.src[p].is_ascii_alphanumeric() {
            p += 1;
        }
        let word = std::str::from_utf8(&self.src[start..p]).expect("ascii");
        if word == "abs" {
            self.pos = p;
            self.expect(b'(')?;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(Node::Abs(Box::new(e)));
        }
        let (kind, rest) = word.split_at(1);
        let index: Option<usize> = if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            rest.parse().ok()
        } else {
            None
        };
        let (Some(index), "q" | "d") = (index, kind) else {
            return Err(ExprError::Syntax {
                offset: start,
                message: format!("unknown identifier `{word}`"),
            });
        };
        let limit = if kind == "q" { self.n } else { self.m };
        if index == 0 || index > limit {
            return Err(ExprError::UnknownVariable {
                name: word.to_string(),
                offset: start,
                n: self.n,
                m: self.m,
            });
        }
        self.pos = p;
        Ok(if kind == "q" {
            Node::Q(index - 1)
        } else {
            Node::D(index - 1)
        })
    }
}
