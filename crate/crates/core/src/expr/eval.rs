use std::collections::HashMap;

use thiserror::Error;

use super::{BinOp, CmpOp, Cond, Expr, ExprKind, Func, SourceSpan};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero at {span}")]
    DivisionByZero { span: SourceSpan },
    #[error("result outside the real line at {span}")]
    Domain { span: SourceSpan },
    #[error("unbound variable `{name}` at {span}")]
    Unbound { name: String, span: SourceSpan },
}

#[derive(Debug, Clone, PartialEq)]
enum Node<S> {
    Lit(S),
    Slot(usize),
    Neg(Box<Node<S>>),
    Bin(BinOp, Box<Node<S>>, Box<Node<S>>, SourceSpan),
    Call(Func, Vec<Node<S>>),
    Cases(Vec<(CNode<S>, Node<S>)>, Box<Node<S>>),
}

#[derive(Debug, Clone, PartialEq)]
enum CNode<S> {
    Cmp(CmpOp, Node<S>, Node<S>),
    And(Box<CNode<S>>, Box<CNode<S>>),
    Or(Box<CNode<S>>, Box<CNode<S>>),
}

/// Postfix instruction for branch-free expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Op<S> {
    Lit(S),
    Slot(usize),
    Neg,
    Bin(BinOp),
    Abs,
    Exp,
    Floor,
    Max,
    Min,
}

const STACK: usize = 16;

/// Expression with variables resolved to argument slots and named constants folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled<S> {
    root: Node<S>,
    /// Flat form of `root` when it has no piecewise arms and fits the stack.
    program: Option<Vec<Op<S>>>,
    arity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCond<S> {
    root: CNode<S>,
    arity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchKind {
    /// the branch changes where the function crosses zero
    Zero,
    /// the branch changes where the function crosses an integer
    Integer,
}

/// A scalar function whose sign (or integer part) selects a branch of the parent expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Switch<S> {
    pub func: Compiled<S>,
    pub kind: SwitchKind,
}

struct Binder<'a> {
    slots: &'a [&'a str],
    constants: &'a HashMap<String, f64>,
}

impl Binder<'_> {
    fn node<S: Scalar>(&self, e: &Expr) -> Result<Node<S>, EvalError> {
        Ok(match &e.kind {
            ExprKind::Num(v) => Node::Lit(S::lit(*v)),
            ExprKind::Var(name) => match self.slots.iter().position(|s| s == name) {
                Some(k) => Node::Slot(k),
                None => match self.constants.get(name) {
                    Some(v) => Node::Lit(S::lit(*v)),
                    None => return Err(EvalError::Unbound { name: name.clone(), span: e.span }),
                },
            },
            ExprKind::Neg(inner) => Node::Neg(Box::new(self.node(inner)?)),
            ExprKind::Binary(op, a, b) => Node::Bin(*op, Box::new(self.node(a)?), Box::new(self.node(b)?), e.span),
            ExprKind::Call(f, args) => Node::Call(*f, args.iter().map(|a| self.node(a)).collect::<Result<_, _>>()?),
            ExprKind::Cases(arms, other) => Node::Cases(
                arms.iter().map(|(c, v)| Ok((self.cond(c)?, self.node(v)?))).collect::<Result<_, EvalError>>()?,
                Box::new(self.node(other)?),
            ),
        })
    }

    fn cond<S: Scalar>(&self, c: &Cond) -> Result<CNode<S>, EvalError> {
        Ok(match c {
            Cond::Cmp(op, a, b) => CNode::Cmp(*op, self.node(a)?, self.node(b)?),
            Cond::And(a, b) => CNode::And(Box::new(self.cond(a)?), Box::new(self.cond(b)?)),
            Cond::Or(a, b) => CNode::Or(Box::new(self.cond(a)?), Box::new(self.cond(b)?)),
        })
    }
}

fn apply<S: Scalar>(op: BinOp, a: S, b: S, span: SourceSpan) -> Result<S, EvalError> {
    let r = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == S::zero() {
                return Err(EvalError::DivisionByZero { span });
            }
            a / b
        }
        BinOp::Pow => {
            if b == S::lit(2.0) {
                a * a
            } else {
                a.powf(b)
            }
        }
    };
    if r.is_nan() && !a.is_nan() && !b.is_nan() {
        return Err(EvalError::Domain { span });
    }
    Ok(r)
}

fn flatten<S: Scalar>(n: &Node<S>, out: &mut Vec<Op<S>>) -> bool {
    match n {
        Node::Lit(v) => out.push(Op::Lit(*v)),
        Node::Slot(k) => out.push(Op::Slot(*k)),
        Node::Neg(e) => {
            if !flatten(e, out) {
                return false;
            }
            out.push(Op::Neg);
        }
        Node::Bin(op, a, b, _) => {
            if !flatten(a, out) || !flatten(b, out) {
                return false;
            }
            out.push(Op::Bin(*op));
        }
        Node::Call(f, xs) => {
            for (k, e) in xs.iter().enumerate() {
                if !flatten(e, out) {
                    return false;
                }
                match f {
                    Func::Max if k > 0 => out.push(Op::Max),
                    Func::Min if k > 0 => out.push(Op::Min),
                    _ => {}
                }
            }
            match f {
                Func::Abs => out.push(Op::Abs),
                Func::Exp => out.push(Op::Exp),
                Func::Floor => out.push(Op::Floor),
                Func::Max | Func::Min => {}
            }
        }
        Node::Cases(..) => return false,
    }
    true
}

fn program<S: Scalar>(root: &Node<S>) -> Option<Vec<Op<S>>> {
    let mut ops = Vec::new();
    if !flatten(root, &mut ops) {
        return None;
    }
    let mut height = 0usize;
    let mut peak = 0usize;
    for op in &ops {
        match op {
            Op::Lit(_) | Op::Slot(_) => height += 1,
            Op::Bin(..) | Op::Max | Op::Min => height -= 1,
            _ => {}
        }
        peak = peak.max(height);
    }
    (peak <= STACK).then_some(ops)
}

/// Evaluates a flat program; `None` when some step divided by zero or left the
/// real line, so that the tree evaluator can report the error.
fn run<S: Scalar>(ops: &[Op<S>], args: &[S]) -> Option<S> {
    let mut st = [S::zero(); STACK];
    let mut h = 0;
    let mut bad = false;
    for op in ops {
        match *op {
            Op::Lit(v) => {
                st[h] = v;
                h += 1;
            }
            Op::Slot(k) => {
                st[h] = args[k];
                h += 1;
            }
            Op::Neg => st[h - 1] = -st[h - 1],
            Op::Abs => st[h - 1] = st[h - 1].abs(),
            Op::Exp => st[h - 1] = st[h - 1].exp(),
            Op::Floor => st[h - 1] = st[h - 1].floor(),
            Op::Max => {
                h -= 1;
                st[h - 1] = st[h - 1].max(st[h]);
            }
            Op::Min => {
                h -= 1;
                st[h - 1] = st[h - 1].min(st[h]);
            }
            Op::Bin(b) => {
                h -= 1;
                let (x, y) = (st[h - 1], st[h]);
                let r = match b {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        bad |= y == S::zero();
                        x / y
                    }
                    BinOp::Pow if y == S::lit(2.0) => x * x,
                    BinOp::Pow => x.powf(y),
                };
                bad |= r.is_nan();
                st[h - 1] = r;
            }
        }
    }
    (!bad).then_some(st[0])
}

impl<S: Scalar> Node<S> {
    fn eval(&self, args: &[S]) -> Result<S, EvalError> {
        match self {
            Node::Lit(v) => Ok(*v),
            Node::Slot(k) => Ok(args[*k]),
            Node::Neg(e) => Ok(-e.eval(args)?),
            Node::Bin(op, a, b, span) => {
                let a = a.eval(args)?;
                let b = b.eval(args)?;
                apply(*op, a, b, *span)
            }
            Node::Call(f, xs) => {
                let first = xs[0].eval(args)?;
                Ok(match f {
                    Func::Abs => first.abs(),
                    Func::Exp => first.exp(),
                    Func::Floor => first.floor(),
                    Func::Max => xs[1..].iter().try_fold(first, |m, e| e.eval(args).map(|v| m.max(v)))?,
                    Func::Min => xs[1..].iter().try_fold(first, |m, e| e.eval(args).map(|v| m.min(v)))?,
                })
            }
            Node::Cases(arms, other) => {
                for (c, v) in arms {
                    if c.eval(args)? {
                        return v.eval(args);
                    }
                }
                other.eval(args)
            }
        }
    }

    fn freeze(&self, args: &[S]) -> Result<Node<S>, EvalError> {
        Ok(match self {
            Node::Lit(_) | Node::Slot(_) => self.clone(),
            Node::Neg(e) => Node::Neg(Box::new(e.freeze(args)?)),
            Node::Bin(op, a, b, span) => Node::Bin(*op, Box::new(a.freeze(args)?), Box::new(b.freeze(args)?), *span),
            Node::Call(Func::Exp, xs) => Node::Call(Func::Exp, vec![xs[0].freeze(args)?]),
            Node::Call(Func::Floor, xs) => Node::Lit(xs[0].eval(args)?.floor()),
            Node::Call(Func::Abs, xs) => {
                let inner = xs[0].freeze(args)?;
                if xs[0].eval(args)? >= S::zero() {
                    inner
                } else {
                    Node::Neg(Box::new(inner))
                }
            }
            Node::Call(f, xs) => {
                let mut best = 0;
                let mut best_v = xs[0].eval(args)?;
                for (k, e) in xs.iter().enumerate().skip(1) {
                    let v = e.eval(args)?;
                    let better = match f {
                        Func::Max => v > best_v,
                        _ => v < best_v,
                    };
                    if better {
                        best = k;
                        best_v = v;
                    }
                }
                xs[best].freeze(args)?
            }
            Node::Cases(arms, other) => {
                for (c, v) in arms {
                    if c.eval(args)? {
                        return v.freeze(args);
                    }
                }
                other.freeze(args)?
            }
        })
    }

    fn uses(&self, slot: usize) -> bool {
        match self {
            Node::Lit(_) => false,
            Node::Slot(k) => *k == slot,
            Node::Neg(e) => e.uses(slot),
            Node::Bin(_, a, b, _) => a.uses(slot) || b.uses(slot),
            Node::Call(_, xs) => xs.iter().any(|e| e.uses(slot)),
            Node::Cases(arms, other) => arms.iter().any(|(c, v)| c.uses(slot) || v.uses(slot)) || other.uses(slot),
        }
    }

    fn switches(&self, out: &mut Vec<(Node<S>, SwitchKind)>) {
        match self {
            Node::Lit(_) | Node::Slot(_) => {}
            Node::Neg(e) => e.switches(out),
            Node::Bin(_, a, b, _) => {
                a.switches(out);
                b.switches(out);
            }
            Node::Call(f, xs) => {
                xs.iter().for_each(|e| e.switches(out));
                match f {
                    Func::Floor => out.push((xs[0].clone(), SwitchKind::Integer)),
                    Func::Abs => out.push((xs[0].clone(), SwitchKind::Zero)),
                    Func::Max | Func::Min => {
                        for i in 0..xs.len() {
                            for j in i + 1..xs.len() {
                                out.push((difference(&xs[i], &xs[j]), SwitchKind::Zero));
                            }
                        }
                    }
                    Func::Exp => {}
                }
            }
            Node::Cases(arms, other) => {
                for (c, v) in arms {
                    c.switches(out);
                    v.switches(out);
                }
                other.switches(out);
            }
        }
    }
}

fn difference<S: Scalar>(a: &Node<S>, b: &Node<S>) -> Node<S> {
    Node::Bin(BinOp::Sub, Box::new(a.clone()), Box::new(b.clone()), SourceSpan::default())
}

impl<S: Scalar> CNode<S> {
    fn eval(&self, args: &[S]) -> Result<bool, EvalError> {
        Ok(match self {
            CNode::Cmp(op, a, b) => op.holds(a.eval(args)?, b.eval(args)?),
            CNode::And(a, b) => a.eval(args)? && b.eval(args)?,
            CNode::Or(a, b) => a.eval(args)? || b.eval(args)?,
        })
    }

    fn uses(&self, slot: usize) -> bool {
        match self {
            CNode::Cmp(_, a, b) => a.uses(slot) || b.uses(slot),
            CNode::And(a, b) | CNode::Or(a, b) => a.uses(slot) || b.uses(slot),
        }
    }

    fn switches(&self, out: &mut Vec<(Node<S>, SwitchKind)>) {
        match self {
            CNode::Cmp(_, a, b) => {
                a.switches(out);
                b.switches(out);
                out.push((difference(a, b), SwitchKind::Zero));
            }
            CNode::And(a, b) | CNode::Or(a, b) => {
                a.switches(out);
                b.switches(out);
            }
        }
    }
}

impl<S: Scalar> Compiled<S> {
    /// Resolves every variable to a slot in `slots` or a value in `constants`.
    pub fn compile(expr: &Expr, slots: &[&str], constants: &HashMap<String, f64>) -> Result<Self, EvalError> {
        let root = Binder { slots, constants }.node(expr)?;
        Ok(Self::from_root(root, slots.len()))
    }

    fn from_root(root: Node<S>, arity: usize) -> Self {
        Compiled { program: program(&root), root, arity }
    }

    pub fn constant(v: S, arity: usize) -> Self {
        Self::from_root(Node::Lit(v), arity)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, args: &[S]) -> Result<S, EvalError> {
        debug_assert_eq!(args.len(), self.arity);
        match self.program.as_deref().and_then(|ops| run(ops, args)) {
            Some(v) => Ok(v),
            None => self.root.eval(args),
        }
    }

    /// Branch-free copy of the expression valid around `args`: piecewise arms,
    /// `abs`, `max`, `min` resolved as at `args`, and `floor` replaced by its value there.
    pub fn freeze(&self, args: &[S]) -> Result<Self, EvalError> {
        Ok(Self::from_root(self.root.freeze(args)?, self.arity))
    }

    pub fn uses_slot(&self, slot: usize) -> bool {
        self.root.uses(slot)
    }

    pub fn switches(&self) -> Vec<Switch<S>> {
        let mut raw = Vec::new();
        self.root.switches(&mut raw);
        raw.into_iter().map(|(n, kind)| Switch { func: Compiled::from_root(n, self.arity), kind }).collect()
    }
}

impl<S: Scalar> CompiledCond<S> {
    pub fn compile(cond: &Cond, slots: &[&str], constants: &HashMap<String, f64>) -> Result<Self, EvalError> {
        let root = Binder { slots, constants }.cond(cond)?;
        Ok(CompiledCond { root, arity: slots.len() })
    }

    pub fn eval(&self, args: &[S]) -> Result<bool, EvalError> {
        self.root.eval(args)
    }

    pub fn uses_slot(&self, slot: usize) -> bool {
        self.root.uses(slot)
    }

    pub fn switches(&self) -> Vec<Switch<S>> {
        let mut raw = Vec::new();
        self.root.switches(&mut raw);
        raw.into_iter().map(|(n, kind)| Switch { func: Compiled::from_root(n, self.arity), kind }).collect()
    }
}

impl Expr {
    /// Evaluates with named bindings.
    pub fn evaluate<S: Scalar>(&self, bindings: &HashMap<String, S>) -> Result<S, EvalError> {
        let names: Vec<&str> = bindings.keys().map(String::as_str).collect();
        let values: Vec<S> = names.iter().map(|n| bindings[*n]).collect();
        Compiled::<S>::compile(self, &names, &HashMap::new())?.eval(&values)
    }
}
