//! Closed-form interaction functions `ξ(t,u,v)` parsed from text.
//!
//! The grammar covers constants, the variables `t`, `u`, `v`, the unary
//! functions `sin`, `cos`, `exp`, `abs`, unary minus, and the binary
//! operators `+ - * / ^` with the precedence `^` > unary `-` > `* /` >
//! `+ -`. All binary operators, including `^`, associate to the left.
//! Expressions are immutable after parsing and evaluation is pure.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("variable `{name}` is not allowed in this expression (position {pos})")]
    VariableNotAllowed { name: char, pos: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{expr}`: {msg}")]
    Domain { expr: String, msg: String },
    #[error("point has dimension {got}, expression expects {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("grid_per_axis must be at least 2, got {0}")]
    InvalidGrid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
}

/// A parsed closed-form function of up to three variables on `[0,1]^d`.
///
/// The variable tuple is fixed at parse time (`allowed_vars`, in order);
/// [`Expression::eval`] takes one value per declared variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    vars: Vec<char>,
    used: Vec<bool>,
    root: Node,
}

/// Parses `source` over the ordered variable tuple `allowed_vars`.
pub fn parse(source: &str, allowed_vars: &[char]) -> Result<Expression, ParseError> {
    Expression::parse(source, allowed_vars)
}

impl Expression {
    pub fn parse(source: &str, allowed_vars: &[char]) -> Result<Self, ParseError> {
        let tokens = lex(source)?;
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            vars: allowed_vars,
            end: source.len(),
        };
        let root = parser.parse_bp(0)?;
        if let Some((tok, at)) = parser.peek() {
            return Err(ParseError::Syntax {
                pos: at,
                msg: alloc::format!("unexpected `{tok}` after end of expression"),
            });
        }
        let mut used = vec![false; allowed_vars.len()];
        mark_used(&root, &mut used);
        Ok(Expression {
            vars: allowed_vars.to_vec(),
            used,
            root,
        })
    }

    /// The declared variable tuple, in evaluation order.
    pub fn vars(&self) -> &[char] {
        &self.vars
    }

    /// Number of distinct variables actually appearing in the expression.
    pub fn arity(&self) -> usize {
        self.used.iter().filter(|&&u| u).count()
    }

    /// Evaluates at `point`, one coordinate per declared variable.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        if point.len() != self.vars.len() {
            return Err(EvalError::Dimension {
                got: point.len(),
                expected: self.vars.len(),
            });
        }
        let value = eval_node(&self.root, point)?;
        if !value.is_finite() {
            return Err(EvalError::Domain {
                expr: self.to_string(),
                msg: "non-finite result".to_string(),
            });
        }
        Ok(value)
    }

    /// Min and max of the expression over the uniform grid with
    /// `grid_per_axis` points per used axis, corners included.
    pub fn bound_estimate(&self, grid_per_axis: usize) -> Result<(f64, f64), EvalError> {
        if grid_per_axis < 2 {
            return Err(EvalError::InvalidGrid(grid_per_axis));
        }
        let axes: Vec<usize> = (0..self.vars.len()).filter(|&i| self.used[i]).collect();
        let mut point = vec![0.0; self.vars.len()];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut digits = vec![0usize; axes.len()];
        loop {
            for (d, &axis) in axes.iter().enumerate() {
                point[axis] = digits[d] as f64 / (grid_per_axis - 1) as f64;
            }
            let v = self.eval(&point)?;
            lo = lo.min(v);
            hi = hi.max(v);
            // mixed-radix increment; empty digit vector runs exactly once
            let mut d = 0;
            loop {
                if d == digits.len() {
                    return Ok((lo, hi));
                }
                digits[d] += 1;
                if digits[d] < grid_per_axis {
                    break;
                }
                digits[d] = 0;
                d += 1;
            }
        }
    }
}

fn mark_used(node: &Node, used: &mut [bool]) {
    match node {
        Node::Const(_) => {}
        Node::Var(i) => used[*i] = true,
        Node::Unary(_, a) => mark_used(a, used),
        Node::Binary(_, a, b) => {
            mark_used(a, used);
            mark_used(b, used);
        }
    }
}

fn eval_node(node: &Node, point: &[f64]) -> Result<f64, EvalError> {
    Ok(match node {
        Node::Const(c) => *c,
        Node::Var(i) => point[*i],
        Node::Unary(op, a) => {
            let x = eval_node(a, point)?;
            match op {
                UnaryOp::Neg => -x,
                UnaryOp::Sin => libm::sin(x),
                UnaryOp::Cos => libm::cos(x),
                UnaryOp::Exp => libm::exp(x),
                UnaryOp::Abs => libm::fabs(x),
            }
        }
        Node::Binary(op, a, b) => {
            let x = eval_node(a, point)?;
            let y = eval_node(b, point)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(domain(node, "division by zero"));
                    }
                    x / y
                }
                BinOp::Pow => {
                    let v = libm::pow(x, y);
                    if !v.is_finite() {
                        return Err(domain(node, "power outside the real domain"));
                    }
                    v
                }
            }
        }
    })
}

fn domain(node: &Node, msg: &str) -> EvalError {
    struct D<'a>(&'a Node);
    impl fmt::Display for D<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write_node(self.0, &VAR_NAMES, f)
        }
    }
    // sub-expression printing only needs variable names for diagnostics;
    // indices beyond t,u,v cannot occur
    EvalError::Domain {
        expr: alloc::format!("{}", D(node)),
        msg: msg.to_string(),
    }
}

const VAR_NAMES: [char; 3] = ['t', 'u', 'v'];

fn write_node(node: &Node, vars: &[char], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Const(c) => write!(f, "{c}"),
        Node::Var(i) => write!(f, "{}", vars.get(*i).copied().unwrap_or('?')),
        Node::Unary(UnaryOp::Neg, a) => {
            write!(f, "(-")?;
            write_node(a, vars, f)?;
            write!(f, ")")
        }
        Node::Unary(op, a) => {
            let name = match op {
                UnaryOp::Sin => "sin",
                UnaryOp::Cos => "cos",
                UnaryOp::Exp => "exp",
                UnaryOp::Abs => "abs",
                UnaryOp::Neg => unreachable!(),
            };
            write!(f, "{name}(")?;
            write_node(a, vars, f)?;
            write!(f, ")")
        }
        Node::Binary(op, a, b) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            write!(f, "(")?;
            write_node(a, vars, f)?;
            write!(f, "{sym}")?;
            write_node(b, vars, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expression {
    /// Fully parenthesized form; re-parsing yields an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.vars, f)
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

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Plus => write!(f, "+"),
            Token::Minus => write!(f, "-"),
            Token::Star => write!(f, "*"),
            Token::Slash => write!(f, "/"),
            Token::Caret => write!(f, "^"),
            Token::LParen => write!(f, "("),
            Token::RParen => write!(f, ")"),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => push_one(&mut tokens, Token::Plus, &mut i),
            '-' => push_one(&mut tokens, Token::Minus, &mut i),
            '*' => push_one(&mut tokens, Token::Star, &mut i),
            '/' => push_one(&mut tokens, Token::Slash, &mut i),
            '^' => push_one(&mut tokens, Token::Caret, &mut i),
            '(' => push_one(&mut tokens, Token::LParen, &mut i),
            ')' => push_one(&mut tokens, Token::RParen, &mut i),
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        return Err(ParseError::Syntax {
                            pos: i,
                            msg: "exponent requires digits".to_string(),
                        });
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    pos: start,
                    msg: alloc::format!("invalid number `{text}`"),
                })?;
                tokens.push((Token::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(source[start..i].to_string()), start));
            }
            other => {
                return Err(ParseError::Syntax {
                    pos: i,
                    msg: alloc::format!("unexpected character `{other}`"),
                });
            }
        }
    }
    Ok(tokens)
}

fn push_one(tokens: &mut Vec<(Token, usize)>, tok: Token, i: &mut usize) {
    tokens.push((tok, *i));
    *i += 1;
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    vars: &'a [char],
    end: usize,
}

const UNARY_BP: u8 = 30;

fn binary_bp(tok: &Token) -> Option<(BinOp, u8, u8)> {
    match tok {
        Token::Plus => Some((BinOp::Add, 10, 11)),
        Token::Minus => Some((BinOp::Sub, 10, 11)),
        Token::Star => Some((BinOp::Mul, 20, 21)),
        Token::Slash => Some((BinOp::Div, 20, 21)),
        Token::Caret => Some((BinOp::Pow, 40, 41)),
        _ => None,
    }
}

impl Parser<'_> {
    fn peek(&self) -> Option<(&Token, usize)> {
        self.tokens.get(self.pos).map(|(t, p)| (t, *p))
    }

    fn next(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some((Token::RParen, _)) => Ok(()),
            Some((tok, pos)) => Err(ParseError::Syntax {
                pos,
                msg: alloc::format!("expected `)`, found `{tok}`"),
            }),
            None => Err(ParseError::Syntax {
                pos: self.end,
                msg: "expected `)`, found end of input".to_string(),
            }),
        }
    }

    fn parse_bp(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        let mut lhs = match self.next() {
            Some((Token::Num(v), _)) => Node::Const(v),
            Some((Token::Ident(name), pos)) => self.ident(name, pos)?,
            Some((Token::Minus, _)) => {
                let operand = self.parse_bp(UNARY_BP)?;
                Node::Unary(UnaryOp::Neg, Box::new(operand))
            }
            Some((Token::LParen, _)) => {
                let inner = self.parse_bp(0)?;
                self.expect_rparen()?;
                inner
            }
            Some((tok, pos)) => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: alloc::format!("expected a value, found `{tok}`"),
                });
            }
            None => {
                return Err(ParseError::Syntax {
                    pos: self.end,
                    msg: "expected a value, found end of input".to_string(),
                });
            }
        };
        loop {
            let (op, lbp, rbp) = match self.peek() {
                None | Some((Token::RParen, _)) => break,
                Some((tok, pos)) => match binary_bp(tok) {
                    Some(bp) => bp,
                    None => {
                        return Err(ParseError::Syntax {
                            pos,
                            msg: alloc::format!("expected an operator, found `{tok}`"),
                        });
                    }
                },
            };
            if lbp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.parse_bp(rbp)?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Node, ParseError> {
        let func = match name.as_str() {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "abs" => Some(UnaryOp::Abs),
            _ => None,
        };
        if let Some(op) = func {
            match self.next() {
                Some((Token::LParen, _)) => {}
                _ => {
                    return Err(ParseError::Syntax {
                        pos,
                        msg: alloc::format!("function `{name}` requires parentheses"),
                    });
                }
            }
            let arg = self.parse_bp(0)?;
            self.expect_rparen()?;
            return Ok(Node::Unary(op, Box::new(arg)));
        }
        if name.len() == 1 {
            let c = name.chars().next().unwrap();
            if let Some(i) = self.vars.iter().position(|&v| v == c) {
                return Ok(Node::Var(i));
            }
            if VAR_NAMES.contains(&c) {
                return Err(ParseError::VariableNotAllowed { name: c, pos });
            }
        }
        Err(ParseError::UnknownIdentifier { name, pos })
    }
}
