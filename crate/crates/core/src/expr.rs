//! Expression mini-language for package function bodies.
//!
//! ```text
//! expr    := or
//! or      := and ( "||" and )*
//! and     := cmp ( "&&" cmp )*
//! cmp     := sum ( ( "==" | "!=" | "<" | "<=" | ">" | ">=" ) sum )?
//! sum     := product ( ( "+" | "-" ) product )*
//! product := unary ( ( "*" | "/" | "%" ) unary )*
//! unary   := ( "!" | "-" ) unary | primary
//! primary := INT | "true" | "false" | IDENT | "(" expr ")"
//! ```
//!
//! Integers are signed 64-bit in the interpreter. Arithmetic leaving that
//! range is an error, and `/` and `%` truncate toward zero.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type {
    Int,
    Bool,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Bool(_) => Type::Bool,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            Value::Int(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match *self {
            Value::Int(v) => Some(v),
            Value::Bool(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
        }
    }

    pub const ALL: [BinaryOp; 13] = [
        BinaryOp::Or,
        BinaryOp::And,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::Lt,
        BinaryOp::Le,
        BinaryOp::Gt,
        BinaryOp::Ge,
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Mod,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExprNode {
    IntLiteral(i64),
    BoolLiteral(bool),
    /// Package storage variable.
    VarRef(String),
    /// Function parameter.
    ParamRef(String),
    Unary(UnaryOp, Box<ExprNode>),
    Binary(BinaryOp, Box<ExprNode>, Box<ExprNode>),
}

impl ExprNode {
    pub fn var(name: &str) -> Self {
        ExprNode::VarRef(name.to_string())
    }

    pub fn unary(op: UnaryOp, operand: ExprNode) -> Self {
        ExprNode::Unary(op, Box::new(operand))
    }

    pub fn binary(op: BinaryOp, left: ExprNode, right: ExprNode) -> Self {
        ExprNode::Binary(op, Box::new(left), Box::new(right))
    }

    /// Rewrites `VarRef`s naming one of `params` into `ParamRef`s.
    pub fn bind_params(self, params: &[String]) -> Self {
        match self {
            ExprNode::VarRef(name) if params.contains(&name) => ExprNode::ParamRef(name),
            ExprNode::Unary(op, e) => ExprNode::unary(op, e.bind_params(params)),
            ExprNode::Binary(op, l, r) => {
                ExprNode::binary(op, l.bind_params(params), r.bind_params(params))
            }
            other => other,
        }
    }

    /// Names of storage variables read anywhere in the tree.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ExprNode::VarRef(n) => out.push(n),
            ExprNode::Unary(_, e) => e.collect_vars(out),
            ExprNode::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression parse error at offset {offset}: {message}")]
pub struct ExprParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("type error: operator `{op}` cannot apply to {found}")]
    Mismatch { op: &'static str, found: String },
    #[error("unbound name `{0}`")]
    UnboundName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("ill-typed operand for `{0}`")]
    IllTyped(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    True,
    False,
    Op(&'static str),
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

const OPERATORS: [&str; 16] = [
    "||", "&&", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "%", "!", "(", ")",
];

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ExprParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (at, tok) = lx.next()?;
            let end = tok == Tok::Eof;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(usize, Tok), ExprParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((start, Tok::Eof));
        }
        let c = bytes[start];
        if c.is_ascii_digit() {
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let text = &self.src[start..self.pos];
            let v = text.parse::<i64>().map_err(|_| ExprParseError {
                offset: start,
                message: format!("integer literal `{text}` out of 64-bit range"),
            })?;
            return Ok((start, Tok::Int(v)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let tok = match &self.src[start..self.pos] {
                "true" => Tok::True,
                "false" => Tok::False,
                id => Tok::Ident(id.to_string()),
            };
            return Ok((start, tok));
        }
        for op in OPERATORS {
            if self.src[start..].starts_with(op) {
                self.pos += op.len();
                let tok = match op {
                    "(" => Tok::LParen,
                    ")" => Tok::RParen,
                    _ => Tok::Op(op),
                };
                return Ok((start, tok));
            }
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ExprParseError {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        })
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].1
    }

    fn offset(&self) -> usize {
        self.toks[self.idx].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.idx].1.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn eat_op(&mut self, ops: &[(&'static str, BinaryOp)]) -> Option<BinaryOp> {
        if let Tok::Op(s) = self.peek() {
            if let Some(&(_, op)) = ops.iter().find(|(sym, _)| sym == s) {
                self.bump();
                return Some(op);
            }
        }
        None
    }

    fn error(&self, message: impl Into<String>) -> ExprParseError {
        ExprParseError {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn left_assoc(
        &mut self,
        ops: &[(&'static str, BinaryOp)],
        next: fn(&mut Parser) -> Result<ExprNode, ExprParseError>,
    ) -> Result<ExprNode, ExprParseError> {
        let mut lhs = next(self)?;
        while let Some(op) = self.eat_op(ops) {
            let rhs = next(self)?;
            lhs = ExprNode::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<ExprNode, ExprParseError> {
        self.left_assoc(&[("||", BinaryOp::Or)], Parser::and)
    }

    fn and(&mut self) -> Result<ExprNode, ExprParseError> {
        self.left_assoc(&[("&&", BinaryOp::And)], Parser::cmp)
    }

    fn cmp(&mut self) -> Result<ExprNode, ExprParseError> {
        const CMP: [(&str, BinaryOp); 6] = [
            ("==", BinaryOp::Eq),
            ("!=", BinaryOp::Ne),
            ("<", BinaryOp::Lt),
            ("<=", BinaryOp::Le),
            (">", BinaryOp::Gt),
            (">=", BinaryOp::Ge),
        ];
        let lhs = self.sum()?;
        match self.eat_op(&CMP) {
            Some(op) => {
                let rhs = self.sum()?;
                if self.eat_op(&CMP).is_some() {
                    return Err(ExprParseError {
                        offset: self.toks[self.idx - 1].0,
                        message: "comparison operators do not chain; add parentheses".into(),
                    });
                }
                Ok(ExprNode::binary(op, lhs, rhs))
            }
            None => Ok(lhs),
        }
    }

    fn sum(&mut self) -> Result<ExprNode, ExprParseError> {
        self.left_assoc(
            &[("+", BinaryOp::Add), ("-", BinaryOp::Sub)],
            Parser::product,
        )
    }

    fn product(&mut self) -> Result<ExprNode, ExprParseError> {
        self.left_assoc(
            &[
                ("*", BinaryOp::Mul),
                ("/", BinaryOp::Div),
                ("%", BinaryOp::Mod),
            ],
            Parser::unary,
        )
    }

    fn unary(&mut self) -> Result<ExprNode, ExprParseError> {
        match self.peek() {
            Tok::Op("!") => {
                self.bump();
                Ok(ExprNode::unary(UnaryOp::Not, self.unary()?))
            }
            Tok::Op("-") => {
                self.bump();
                Ok(ExprNode::unary(UnaryOp::Neg, self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<ExprNode, ExprParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(ExprNode::IntLiteral(v))
            }
            Tok::True => {
                self.bump();
                Ok(ExprNode::BoolLiteral(true))
            }
            Tok::False => {
                self.bump();
                Ok(ExprNode::BoolLiteral(false))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(ExprNode::VarRef(name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.or()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error("expected `)`"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Eof => Err(self.error("unexpected end of expression")),
            Tok::RParen => Err(self.error("unexpected `)`")),
            Tok::Op(op) => Err(self.error(format!("unexpected operator `{op}`"))),
        }
    }
}

/// Parses expression text. Identifiers come back as `VarRef`; see
/// [`ExprNode::bind_params`] for parameter resolution.
pub fn parse_expr(text: &str) -> Result<ExprNode, ExprParseError> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, idx: 0 };
    let node = p.or()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(node)
}

pub fn typecheck_expr(node: &ExprNode, env: &BTreeMap<String, Type>) -> Result<Type, TypeError> {
    let mismatch = |op: &'static str, found: String| TypeError::Mismatch { op, found };
    match node {
        ExprNode::IntLiteral(_) => Ok(Type::Int),
        ExprNode::BoolLiteral(_) => Ok(Type::Bool),
        ExprNode::VarRef(n) | ExprNode::ParamRef(n) => env
            .get(n)
            .copied()
            .ok_or_else(|| TypeError::UnboundName(n.clone())),
        ExprNode::Unary(op, e) => {
            let t = typecheck_expr(e, env)?;
            match (op, t) {
                (UnaryOp::Not, Type::Bool) => Ok(Type::Bool),
                (UnaryOp::Neg, Type::Int) => Ok(Type::Int),
                (UnaryOp::Not, t) => Err(mismatch("!", t.to_string())),
                (UnaryOp::Neg, t) => Err(mismatch("-", t.to_string())),
            }
        }
        ExprNode::Binary(op, l, r) => {
            let (lt, rt) = (typecheck_expr(l, env)?, typecheck_expr(r, env)?);
            use BinaryOp::*;
            let ok = match op {
                Or | And => lt == Type::Bool && rt == Type::Bool,
                Eq | Ne => lt == rt,
                Lt | Le | Gt | Ge | Add | Sub | Mul | Div | Mod => {
                    lt == Type::Int && rt == Type::Int
                }
            };
            if !ok {
                return Err(mismatch(op.symbol(), format!("{lt} and {rt}")));
            }
            Ok(match op {
                Add | Sub | Mul | Div | Mod => Type::Int,
                _ => Type::Bool,
            })
        }
    }
}

pub fn eval_expr(node: &ExprNode, bindings: &BTreeMap<String, Value>) -> Result<Value, EvalError> {
    match node {
        ExprNode::IntLiteral(v) => Ok(Value::Int(*v)),
        ExprNode::BoolLiteral(b) => Ok(Value::Bool(*b)),
        ExprNode::VarRef(n) | ExprNode::ParamRef(n) => bindings
            .get(n)
            .copied()
            .ok_or_else(|| EvalError::UnboundName(n.clone())),
        ExprNode::Unary(UnaryOp::Not, e) => {
            let b = eval_expr(e, bindings)?
                .as_bool()
                .ok_or(EvalError::IllTyped("!"))?;
            Ok(Value::Bool(!b))
        }
        ExprNode::Unary(UnaryOp::Neg, e) => {
            let v = eval_expr(e, bindings)?
                .as_int()
                .ok_or(EvalError::IllTyped("-"))?;
            v.checked_neg().map(Value::Int).ok_or(EvalError::Overflow)
        }
        ExprNode::Binary(op @ (BinaryOp::And | BinaryOp::Or), l, r) => {
            let lhs = eval_expr(l, bindings)?
                .as_bool()
                .ok_or(EvalError::IllTyped(op.symbol()))?;
            // short-circuit
            match (op, lhs) {
                (BinaryOp::And, false) => return Ok(Value::Bool(false)),
                (BinaryOp::Or, true) => return Ok(Value::Bool(true)),
                _ => {}
            }
            let rhs = eval_expr(r, bindings)?
                .as_bool()
                .ok_or(EvalError::IllTyped(op.symbol()))?;
            Ok(Value::Bool(rhs))
        }
        ExprNode::Binary(op, l, r) => {
            let lhs = eval_expr(l, bindings)?;
            let rhs = eval_expr(r, bindings)?;
            apply_binary(*op, lhs, rhs)
        }
    }
}

fn apply_binary(op: BinaryOp, lhs: Value, rhs: Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    match (op, lhs, rhs) {
        (Eq, a, b) if a.ty() == b.ty() => Ok(Value::Bool(a == b)),
        (Ne, a, b) if a.ty() == b.ty() => Ok(Value::Bool(a != b)),
        (_, Value::Int(a), Value::Int(b)) => {
            let arith = |v: Option<i64>| v.map(Value::Int).ok_or(EvalError::Overflow);
            match op {
                Lt => Ok(Value::Bool(a < b)),
                Le => Ok(Value::Bool(a <= b)),
                Gt => Ok(Value::Bool(a > b)),
                Ge => Ok(Value::Bool(a >= b)),
                Add => arith(a.checked_add(b)),
                Sub => arith(a.checked_sub(b)),
                Mul => arith(a.checked_mul(b)),
                Div if b == 0 => Err(EvalError::DivisionByZero),
                Div => arith(a.checked_div(b)),
                Mod if b == 0 => Err(EvalError::DivisionByZero),
                // i64::MIN % -1 is 0 mathematically; checked_rem reports it as overflow.
                Mod if b == -1 => Ok(Value::Int(0)),
                Mod => arith(a.checked_rem(b)),
                _ => Err(EvalError::IllTyped(op.symbol())),
            }
        }
        _ => Err(EvalError::IllTyped(op.symbol())),
    }
}

/// Emits Solidity expression text with every compound node parenthesized.
pub fn translate_expr(node: &ExprNode) -> String {
    match node {
        ExprNode::IntLiteral(v) if *v < 0 => format!("(-{})", v.unsigned_abs()),
        ExprNode::IntLiteral(v) => v.to_string(),
        ExprNode::BoolLiteral(b) => b.to_string(),
        ExprNode::VarRef(n) | ExprNode::ParamRef(n) => n.clone(),
        ExprNode::Unary(UnaryOp::Not, e) => format!("(!{})", translate_expr(e)),
        ExprNode::Unary(UnaryOp::Neg, e) => format!("(-{})", translate_expr(e)),
        ExprNode::Binary(op, l, r) => format!(
            "({} {} {})",
            translate_expr(l),
            op.symbol(),
            translate_expr(r)
        ),
    }
}

impl fmt::Display for ExprNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&translate_expr(self))
    }
}
