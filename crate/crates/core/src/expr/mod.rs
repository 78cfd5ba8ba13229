//! Scalar expression language used for objectives, constraint bounds and
//! symbolic solution maps.
//!
//! ```text
//! expr     := sum
//! sum      := product (("+" | "-") product)*
//! product  := unary (("*" | "/") unary)*
//! unary    := "-" unary | power
//! power    := atom ("^" unary)?
//! atom     := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")" | cases
//! cases    := "cases" "{" (cond "->" expr ";")* "else" "->" expr ";"? "}"
//! cond     := conj ("or" conj)*
//! conj     := catom ("and" catom)*
//! catom    := expr cmp expr | "(" cond ")"
//! cmp      := "<" | "<=" | "=" | "==" | ">=" | ">"
//! ```
//!
//! Functions: `abs`, `exp`, `floor`, `max`, `min` (the last two take two or more
//! arguments). Piecewise arms are tried in order and the first true condition wins.

mod eval;
mod parse;

use std::fmt;

pub use eval::{Compiled, CompiledCond, EvalError, Switch, SwitchKind};
pub use parse::{parse, parse_condition, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
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
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Floor,
    Max,
    Min,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "floor" => Func::Floor,
            "max" => Func::Max,
            "min" => Func::Min,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Floor => "floor",
            Func::Max => "max",
            Func::Min => "min",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn holds<S: PartialOrd>(self, a: S, b: S) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }
}

/// Expression node. Equality compares structure only, ignoring spans.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Cases(Vec<(Cond, Expr)>, Box<Expr>),
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Cmp(CmpOp, Expr, Expr),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: SourceSpan) -> Self {
        Expr { kind, span }
    }

    /// Free variable names in first-occurrence order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match &self.kind {
            ExprKind::Num(_) => {}
            ExprKind::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            ExprKind::Neg(e) => e.collect_vars(out),
            ExprKind::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            ExprKind::Cases(arms, other) => {
                for (c, e) in arms {
                    c.collect_vars(out);
                    e.collect_vars(out);
                }
                other.collect_vars(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(op, _, _) => op.precedence(),
            ExprKind::Neg(_) => 3,
            ExprKind::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }
}

impl Cond {
    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Cond::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Canonical formatter: `parse(print(e))` reproduces `e` structurally.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({})", v)
                } else {
                    write!(f, "{}", v)
                }
            }
            ExprKind::Var(name) => f.write_str(name),
            ExprKind::Neg(e) => {
                f.write_str("-")?;
                write_child(f, e, 3)
            }
            ExprKind::Binary(op, a, b) => {
                let p = op.precedence();
                match op {
                    // right-associative: the base needs strictly higher precedence
                    BinOp::Pow => {
                        write_child(f, a, p + 1)?;
                        f.write_str("^")?;
                        write_child(f, b, 3)
                    }
                    _ => {
                        write_child(f, a, p)?;
                        write!(f, " {} ", op.symbol())?;
                        write_child(f, b, p + 1)
                    }
                }
            }
            ExprKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            ExprKind::Cases(arms, other) => {
                f.write_str("cases { ")?;
                for (c, e) in arms {
                    write!(f, "{c} -> {e}; ")?;
                }
                write!(f, "else -> {other} }}")
            }
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            Cond::And(a, b) => {
                match **a {
                    Cond::Or(..) => write!(f, "({a})")?,
                    _ => write!(f, "{a}")?,
                }
                f.write_str(" and ")?;
                match **b {
                    Cond::Cmp(..) => write!(f, "{b}"),
                    _ => write!(f, "({b})"),
                }
            }
            Cond::Or(a, b) => {
                write!(f, "{a} or ")?;
                match **b {
                    Cond::Or(..) => write!(f, "({b})"),
                    _ => write!(f, "{b}"),
                }
            }
        }
    }
}
