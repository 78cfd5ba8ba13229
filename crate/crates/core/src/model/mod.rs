//! Bilevel problem schema, grids and the problem-file loader.
//!
//! A problem file is a sequence of `key = value` lines grouped in sections:
//!
//! ```text
//! name = floor-closedness
//! [constants]
//! alpha = 4
//! [leader]
//! x = 0, 1, 0.01            # name = lower, upper, step
//! x.include = 0.5           # extra grid points
//! [follower]
//! y = 0, 1, 0.01            # bounds may depend on leader variables
//! where = y <= 1 - x        # optional membership predicate
//! [objectives]
//! upper = x - y
//! lower = floor(x + y)
//! [psi]
//! mode = symbolic           # or grid (the default)
//! piece = x < 1 -> [0, 1 - x)
//! piece = x = 1 -> [0, 1)
//! [analysis]
//! tolerance = 1e-9
//! radii = 0.3333333333333333, 0.5
//! assert = lsc_upper, locally_bounded_psi
//! spne = none
//! [golden]
//! expect = real_optimistic == {0, 1}
//! ```
//!
//! `#` starts a comment. Piece conditions are tried in order.

pub(crate) mod load;

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::expr::{Compiled, CompiledCond, Cond, EvalError, Expr, ExprKind, ParseError, SwitchKind};
use crate::roots::breakpoints;
use crate::scalar::{fmt_scalar, Scalar};
use crate::setreal::{Endpoint, ExtendedRealSet, Interval, SetError};

pub use load::parse_problem;

/// Line number in the source file. Compares equal to every other `Loc` so
/// that printed-and-reloaded specs compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Loc(pub usize);

impl PartialEq for Loc {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}, column {column}: {source}")]
    Syntax { line: usize, column: usize, source: ParseError },
    #[error("line {line}: {source}")]
    Bind { line: usize, source: EvalError },
    #[error("line {line}: {message}")]
    Invariant { line: usize, message: String },
    #[error("no feasible follower point at x = {x}")]
    InfeasibleFollower { x: String },
    #[error("no psi piece matches x = {x}")]
    NoPsiPiece { x: String },
    #[error("psi at x = {x}: {source}")]
    PsiSet { x: String, source: SetError },
    #[error("evaluation at x = {x}: {source}")]
    Eval { x: String, source: EvalError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiMode {
    Grid,
    Symbolic,
}

impl PsiMode {
    pub fn name(self) -> &'static str {
        match self {
            PsiMode::Grid => "grid",
            PsiMode::Symbolic => "symbolic",
        }
    }
}

/// Regularity properties the engine cannot decide; a problem file asserts them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hypothesis {
    LscUpper,
    LocallyBoundedPsi,
    ClosedGraphPsi,
    ContinuousObjectives,
    ContinuousCompactConstraints,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 5] = [
        Hypothesis::LscUpper,
        Hypothesis::LocallyBoundedPsi,
        Hypothesis::ClosedGraphPsi,
        Hypothesis::ContinuousObjectives,
        Hypothesis::ContinuousCompactConstraints,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::LscUpper => "lsc_upper",
            Hypothesis::LocallyBoundedPsi => "locally_bounded_psi",
            Hypothesis::ClosedGraphPsi => "closed_graph_psi",
            Hypothesis::ContinuousObjectives => "continuous_objectives",
            Hypothesis::ContinuousCompactConstraints => "continuous_compact_constraints",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|h| h.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimSpec {
    pub name: String,
    pub lo: Expr,
    pub hi: Expr,
    pub step: Expr,
    pub include: Vec<Expr>,
    pub loc: Loc,
}

/// One interval of a symbolic solution set, endpoints as expressions in the leader variables.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTemplate {
    pub lo: Expr,
    pub hi: Expr,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub point: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiPieceSpec {
    pub when: Cond,
    pub set: Vec<IntervalTemplate>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenLine {
    pub text: String,
    pub loc: Loc,
}

/// Uncompiled problem as written in a file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub constants: Vec<(String, f64)>,
    pub leader: Vec<DimSpec>,
    pub follower: Vec<DimSpec>,
    pub feasible: Option<(Cond, Loc)>,
    pub upper: (Expr, Loc),
    pub lower: (Expr, Loc),
    pub psi_mode: PsiMode,
    pub psi: Vec<PsiPieceSpec>,
    pub tolerance: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub grid_cap: Option<usize>,
    pub hypotheses: Vec<Hypothesis>,
    pub spne_none: bool,
    pub goldens: Vec<GoldenLine>,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_GRID_CAP: usize = 1_000_000;
const SWITCH_SAMPLES: usize = 2049;

fn endpoint_text(e: &Expr) -> String {
    match e.kind {
        ExprKind::Num(v) if v.is_infinite() => fmt_scalar(v),
        _ => e.to_string(),
    }
}

impl fmt::Display for IntervalTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.point {
            return write!(f, "{{{}}}", endpoint_text(&self.lo));
        }
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            endpoint_text(&self.lo),
            endpoint_text(&self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

fn write_dim(f: &mut fmt::Formatter<'_>, d: &DimSpec) -> fmt::Result {
    writeln!(f, "{} = {}, {}, {}", d.name, d.lo, d.hi, d.step)?;
    if !d.include.is_empty() {
        let pts: Vec<String> = d.include.iter().map(|e| e.to_string()).collect();
        writeln!(f, "{}.include = {}", d.name, pts.join(", "))?;
    }
    Ok(())
}

/// Canonical problem-file text; loading it reproduces the spec.
impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        if !self.constants.is_empty() {
            writeln!(f, "[constants]")?;
            for (k, v) in &self.constants {
                writeln!(f, "{k} = {v:?}")?;
            }
        }
        writeln!(f, "[leader]")?;
        for d in &self.leader {
            write_dim(f, d)?;
        }
        writeln!(f, "[follower]")?;
        for d in &self.follower {
            write_dim(f, d)?;
        }
        if let Some((c, _)) = &self.feasible {
            writeln!(f, "where = {c}")?;
        }
        writeln!(f, "[objectives]")?;
        writeln!(f, "upper = {}", self.upper.0)?;
        writeln!(f, "lower = {}", self.lower.0)?;
        if self.psi_mode == PsiMode::Symbolic || !self.psi.is_empty() {
            writeln!(f, "[psi]")?;
            writeln!(f, "mode = {}", self.psi_mode.name())?;
            for p in &self.psi {
                let parts: Vec<String> = p.set.iter().map(|t| t.to_string()).collect();
                writeln!(f, "piece = {} -> {}", p.when, parts.join(" u "))?;
            }
        }
        let has_analysis = self.tolerance.is_some()
            || self.radii.is_some()
            || self.grid_cap.is_some()
            || !self.hypotheses.is_empty()
            || self.spne_none;
        if has_analysis {
            writeln!(f, "[analysis]")?;
            if let Some(t) = self.tolerance {
                writeln!(f, "tolerance = {t:?}")?;
            }
            if let Some(r) = &self.radii {
                let r: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
                writeln!(f, "radii = {}", r.join(", "))?;
            }
            if let Some(c) = self.grid_cap {
                writeln!(f, "grid_cap = {c}")?;
            }
            if !self.hypotheses.is_empty() {
                let h: Vec<&str> = self.hypotheses.iter().map(|h| h.name()).collect();
                writeln!(f, "assert = {}", h.join(", "))?;
            }
            if self.spne_none {
                writeln!(f, "spne = none")?;
            }
        }
        if !self.goldens.is_empty() {
            writeln!(f, "[golden]")?;
            for g in &self.goldens {
                writeln!(f, "expect = {}", g.text)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct FollowerDim<S> {
    lo: Compiled<S>,
    hi: Compiled<S>,
    step: S,
    include: Vec<S>,
    /// The axis, once built, when neither bound depends on the leader.
    fixed: OnceLock<Vec<S>>,
}

#[derive(Debug, Clone)]
struct PsiPiece<S> {
    when: CompiledCond<S>,
    set: SetTemplate<S>,
}

/// An interval union whose endpoints are expressions in the leader variables.
#[derive(Debug, Clone)]
pub struct SetTemplate<S> {
    parts: Vec<(Compiled<S>, Compiled<S>, bool, bool)>,
}

impl<S: Scalar> SetTemplate<S> {
    /// The set at `x`, endpoints evaluated and snapped.
    pub fn eval(&self, x: &[S]) -> Result<ExtendedRealSet<S>, ModelError> {
        let eval_err = |source| ModelError::Eval { x: fmt_point(x), source };
        let mut raw = Vec::new();
        for (lo, hi, lc, hc) in &self.parts {
            let l = lo.eval(x).map_err(eval_err)?.snap();
            let h = hi.eval(x).map_err(eval_err)?.snap();
            let iv = Interval::new(Endpoint::new(l, *lc), Endpoint::new(h, *hc))
                .map_err(|source| ModelError::PsiSet { x: fmt_point(x), source })?;
            raw.push(iv);
        }
        ExtendedRealSet::canonicalize(raw).map_err(|source| ModelError::PsiSet { x: fmt_point(x), source })
    }
}

/// Validated, compiled bilevel problem. Variables are bound to argument
/// slots: leader coordinates first, then follower coordinates.
#[derive(Debug, Clone)]
pub struct BilevelInstance<S> {
    spec: ProblemSpec,
    leader_names: Vec<String>,
    follower_names: Vec<String>,
    leader_axes: Vec<Vec<S>>,
    leader_steps: Vec<S>,
    follower: Vec<FollowerDim<S>>,
    feasible: Option<CompiledCond<S>>,
    upper: Compiled<S>,
    lower: Compiled<S>,
    psi: Vec<PsiPiece<S>>,
    tolerance: S,
    radii: Vec<S>,
}

/// Command-line style adjustments applied on top of a problem file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid_step: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub psi_mode: Option<PsiMode>,
}

fn fmt_point<S: Scalar>(x: &[S]) -> String {
    let parts: Vec<String> = x.iter().map(|v| fmt_scalar(*v)).collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        format!("({})", parts.join(", "))
    }
}

pub fn point_text<S: Scalar>(x: &[S]) -> String {
    fmt_point(x)
}

/// Lattice `lo + k step` on `[lo, hi]`, plus `hi` and the extra points inside the range,
/// snapped, sorted and deduplicated.
pub fn lattice<S: Scalar>(lo: S, hi: S, step: S, extra: &[S]) -> Vec<S> {
    let eps = step * S::lit(1e-9);
    let clean = |v: S| {
        let v = v.snap();
        if v.abs() < eps { S::zero() } else { v }
    };
    let mut pts = Vec::new();
    let n = ((hi - lo) / step + S::lit(1e-9)).floor().to_usize().unwrap_or(0);
    for k in 0..=n {
        pts.push(clean(lo + S::from_usize(k).unwrap() * step));
    }
    if let Some(last) = pts.last_mut() {
        if (*last - hi).abs() <= eps {
            *last = hi;
        } else if *last < hi {
            pts.push(hi);
        }
    }
    for &e in extra {
        if e >= lo && e <= hi {
            pts.push(clean(e));
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= eps);
    pts
}

struct Binder<'a> {
    slots: Vec<&'a str>,
    leader_slots: Vec<&'a str>,
    constants: HashMap<String, f64>,
}

impl Binder<'_> {
    fn expr<S: Scalar>(&self, e: &Expr, slots: &[&str], loc: Loc) -> Result<Compiled<S>, ModelError> {
        Compiled::compile(e, slots, &self.constants).map_err(|source| ModelError::Bind { line: loc.0, source })
    }

    fn cond<S: Scalar>(&self, c: &Cond, slots: &[&str], loc: Loc) -> Result<CompiledCond<S>, ModelError> {
        CompiledCond::compile(c, slots, &self.constants).map_err(|source| ModelError::Bind { line: loc.0, source })
    }

    fn template<S: Scalar>(&self, set: &[IntervalTemplate], loc: Loc) -> Result<SetTemplate<S>, ModelError> {
        let mut parts = Vec::new();
        for t in set {
            parts.push((
                self.expr(&t.lo, &self.leader_slots, loc)?,
                self.expr(&t.hi, &self.leader_slots, loc)?,
                t.lo_closed,
                t.hi_closed,
            ));
        }
        Ok(SetTemplate { parts })
    }

    fn number<S: Scalar>(&self, e: &Expr, loc: Loc, what: &str) -> Result<S, ModelError> {
        let v = self.expr::<S>(e, &[], loc)?.eval(&[]).map_err(|source| ModelError::Bind { line: loc.0, source })?;
        if v.is_nan() {
            return Err(ModelError::Schema { line: loc.0, message: format!("{what} is not a number") });
        }
        Ok(v)
    }
}

fn dedup_sorted<S: Scalar>(mut v: Vec<S>) -> Vec<S> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// Breakpoints of switches that depend on exactly one coordinate `slot`, over `[lo, hi]`.
fn single_slot_breakpoints<S: Scalar>(
    exprs: &[&Compiled<S>],
    conds: &[&CompiledCond<S>],
    slot: usize,
    arity: usize,
    lo: S,
    hi: S,
) -> Result<Vec<S>, EvalError> {
    let mut switches = Vec::new();
    for e in exprs {
        switches.extend(e.switches());
    }
    for c in conds {
        switches.extend(c.switches());
    }
    let mut out = Vec::new();
    for sw in switches {
        let only_here = (0..arity).all(|k| (k == slot) == sw.func.uses_slot(k));
        if !only_here {
            continue;
        }
        let mut args = vec![S::zero(); arity];
        out.extend(breakpoints(
            |v| {
                let mut a = args.clone();
                a[slot] = v;
                sw.func.eval(&a)
            },
            sw.kind,
            lo,
            hi,
            SWITCH_SAMPLES,
        )?);
        if sw.kind == SwitchKind::Zero {
            for end in [lo, hi] {
                args[slot] = end;
                if end.is_finite() && sw.func.eval(&args)? == S::zero() {
                    out.push(end);
                }
            }
        }
    }
    Ok(dedup_sorted(out))
}

impl<S: Scalar> BilevelInstance<S> {
    pub fn load(text: &str) -> Result<Self, ModelError> {
        Self::from_spec(parse_problem(text)?)
    }

    pub fn from_spec(spec: ProblemSpec) -> Result<Self, ModelError> {
        let leader_names: Vec<String> = spec.leader.iter().map(|d| d.name.clone()).collect();
        let follower_names: Vec<String> = spec.follower.iter().map(|d| d.name.clone()).collect();
        if spec.leader.is_empty() || spec.leader.len() > 2 {
            return Err(ModelError::Schema { line: 0, message: "one or two leader variables required".into() });
        }
        if spec.follower.is_empty() || spec.follower.len() > 2 {
            return Err(ModelError::Schema { line: 0, message: "one or two follower variables required".into() });
        }
        let mut seen: Vec<&str> = spec.constants.iter().map(|(k, _)| k.as_str()).collect();
        for d in spec.leader.iter().chain(&spec.follower) {
            if seen.contains(&d.name.as_str()) {
                return Err(ModelError::Schema { line: d.loc.0, message: format!("`{}` declared twice", d.name) });
            }
            seen.push(&d.name);
        }
        let b = Binder {
            slots: leader_names.iter().chain(&follower_names).map(String::as_str).collect(),
            leader_slots: leader_names.iter().map(String::as_str).collect(),
            constants: spec.constants.iter().cloned().collect(),
        };
        let nx = leader_names.len();
        let arity = b.slots.len();

        let upper = b.expr(&spec.upper.0, &b.slots, spec.upper.1)?;
        let lower = b.expr(&spec.lower.0, &b.slots, spec.lower.1)?;
        let feasible = match &spec.feasible {
            Some((c, loc)) => Some(b.cond(c, &b.slots, *loc)?),
            None => None,
        };
        let mut psi = Vec::new();
        for p in &spec.psi {
            let when = b.cond(&p.when, &b.leader_slots, p.loc)?;
            let set = b.template(&p.set, p.loc)?;
            psi.push(PsiPiece { when, set });
        }
        if spec.psi_mode == PsiMode::Symbolic {
            if psi.is_empty() {
                return Err(ModelError::Schema { line: 0, message: "symbolic mode needs at least one psi piece".into() });
            }
            if follower_names.len() != 1 {
                return Err(ModelError::Schema { line: 0, message: "symbolic psi needs a single follower variable".into() });
            }
        }

        let tolerance = S::lit(spec.tolerance.unwrap_or(DEFAULT_TOLERANCE));
        if !(tolerance >= S::zero()) {
            return Err(ModelError::Invariant { line: 0, message: "tolerance must be nonnegative".into() });
        }
        let cap = spec.grid_cap.unwrap_or(DEFAULT_GRID_CAP);

        let mut follower = Vec::new();
        for d in &spec.follower {
            let step = b.number::<S>(&d.step, d.loc, "step")?;
            if !(step > S::zero()) || !step.is_finite() {
                return Err(ModelError::Invariant { line: d.loc.0, message: format!("step of `{}` must be positive", d.name) });
            }
            let include = d.include.iter().map(|e| b.number::<S>(e, d.loc, "grid point")).collect::<Result<_, _>>()?;
            follower.push(FollowerDim {
                lo: b.expr(&d.lo, &b.leader_slots, d.loc)?,
                hi: b.expr(&d.hi, &b.leader_slots, d.loc)?,
                step,
                include,
                fixed: OnceLock::new(),
            });
        }

        let psi_conds: Vec<&CompiledCond<S>> = psi.iter().map(|p| &p.when).collect();
        let mut leader_axes = Vec::new();
        let mut leader_steps = Vec::new();
        for (k, d) in spec.leader.iter().enumerate() {
            let lo = b.number::<S>(&d.lo, d.loc, "lower bound")?;
            let hi = b.number::<S>(&d.hi, d.loc, "upper bound")?;
            let step = b.number::<S>(&d.step, d.loc, "step")?;
            if !(step > S::zero()) || !step.is_finite() {
                return Err(ModelError::Invariant { line: d.loc.0, message: format!("step of `{}` must be positive", d.name) });
            }
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(ModelError::Invariant { line: d.loc.0, message: format!("bounds of `{}` must be finite with lower <= upper", d.name) });
            }
            let mut extra: Vec<S> = d.include.iter().map(|e| b.number::<S>(e, d.loc, "grid point")).collect::<Result<_, _>>()?;
            extra.push(S::zero());
            // follower bounds and psi conditions only see the leader slots
            let full: Vec<&Compiled<S>> = vec![&upper, &lower];
            let full_conds: Vec<&CompiledCond<S>> = feasible.iter().collect();
            let bind = |source| ModelError::Bind { line: d.loc.0, source };
            extra.extend(single_slot_breakpoints(&full, &full_conds, k, arity, lo, hi).map_err(bind)?);
            let leader_only: Vec<&Compiled<S>> = follower.iter().flat_map(|f| [&f.lo, &f.hi]).collect();
            extra.extend(single_slot_breakpoints(&leader_only, &psi_conds, k, nx, lo, hi).map_err(bind)?);
            let axis = lattice(lo, hi, step, &extra);
            if axis.len() > cap {
                return Err(ModelError::Invariant {
                    line: d.loc.0,
                    message: format!("leader grid of `{}` has {} points, above the cap {cap}", d.name, axis.len()),
                });
            }
            leader_axes.push(axis);
            leader_steps.push(step);
        }
        let total: usize = leader_axes.iter().map(Vec::len).product();
        if total > cap {
            return Err(ModelError::Invariant { line: 0, message: format!("leader grid has {total} points, above the cap {cap}") });
        }

        let max_step = leader_steps.iter().copied().fold(S::zero(), S::max);
        let radii: Vec<S> = match &spec.radii {
            Some(r) => r.iter().map(|v| S::lit(*v)).collect(),
            None => {
                let mut r: Vec<S> = [1.0 / 3.0, 0.5].iter().map(|v| S::lit(*v)).filter(|v| *v > max_step).collect();
                if r.is_empty() {
                    r = vec![max_step * S::lit(1.5), max_step * S::lit(2.5)];
                }
                r
            }
        };
        if radii.is_empty() || radii.windows(2).any(|w| !(w[0] < w[1])) || radii.iter().any(|r| !(*r > max_step)) {
            return Err(ModelError::Invariant {
                line: 0,
                message: "radii must be strictly increasing and larger than the leader grid step".into(),
            });
        }

        let mut inst = BilevelInstance {
            spec,
            leader_names,
            follower_names,
            leader_axes,
            leader_steps,
            follower,
            feasible,
            upper,
            lower,
            psi,
            tolerance,
            radii,
        };
        inst.inject_follower_breakpoints()?;
        inst.validate_over_grid()?;
        Ok(inst)
    }

    fn inject_follower_breakpoints(&mut self) -> Result<(), ModelError> {
        let grid = self.leader_grid();
        let nx = self.nx();
        let arity = nx + self.follower.len();
        for j in 0..self.follower.len() {
            let (mut lo, mut hi) = (S::infinity(), S::neg_infinity());
            for x in &grid {
                let f = &self.follower[j];
                let l = f.lo.eval(x).map_err(|source| ModelError::Eval { x: fmt_point(x), source })?;
                let h = f.hi.eval(x).map_err(|source| ModelError::Eval { x: fmt_point(x), source })?;
                lo = lo.min(l);
                hi = hi.max(h);
            }
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                continue;
            }
            let conds: Vec<&CompiledCond<S>> = self.feasible.iter().collect();
            let extra = single_slot_breakpoints(&[&self.upper, &self.lower], &conds, nx + j, arity, lo, hi)
                .map_err(|source| ModelError::Bind { line: self.spec.follower[j].loc.0, source })?;
            let f = &mut self.follower[j];
            f.include.extend(extra);
            f.include = dedup_sorted(std::mem::take(&mut f.include));
        }
        Ok(())
    }

    fn validate_over_grid(&self) -> Result<(), ModelError> {
        for x in self.leader_grid() {
            for (j, f) in self.follower.iter().enumerate() {
                let l = f.lo.eval(&x).map_err(|source| ModelError::Eval { x: fmt_point(&x), source })?;
                let h = f.hi.eval(&x).map_err(|source| ModelError::Eval { x: fmt_point(&x), source })?;
                if l > h {
                    return Err(ModelError::Invariant {
                        line: self.spec.follower[j].loc.0,
                        message: format!("follower bounds cross at x = {}", fmt_point(&x)),
                    });
                }
            }
            if self.spec.psi_mode == PsiMode::Symbolic {
                self.symbolic_psi(&x)?;
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn nx(&self) -> usize {
        self.leader_names.len()
    }

    pub fn ny(&self) -> usize {
        self.follower_names.len()
    }

    pub fn leader_names(&self) -> &[String] {
        &self.leader_names
    }

    pub fn follower_names(&self) -> &[String] {
        &self.follower_names
    }

    pub fn upper(&self) -> &Compiled<S> {
        &self.upper
    }

    pub fn lower(&self) -> &Compiled<S> {
        &self.lower
    }

    pub fn psi_mode(&self) -> PsiMode {
        self.spec.psi_mode
    }

    pub fn has_symbolic_psi(&self) -> bool {
        !self.psi.is_empty()
    }

    pub fn tolerance(&self) -> S {
        self.tolerance
    }

    pub fn radii(&self) -> &[S] {
        &self.radii
    }

    pub fn leader_step(&self) -> S {
        self.leader_steps.iter().copied().fold(S::zero(), S::max)
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.spec.hypotheses
    }

    pub fn spne_none(&self) -> bool {
        self.spec.spne_none
    }

    /// Leader grid points in lexicographic order.
    pub fn leader_grid(&self) -> Vec<Vec<S>> {
        let mut out: Vec<Vec<S>> = vec![vec![]];
        for axis in &self.leader_axes {
            out = out.iter().flat_map(|p| axis.iter().map(move |v| { let mut q = p.clone(); q.push(*v); q })).collect();
        }
        out
    }

    /// Follower grid points at `x` in lexicographic order, filtered by the predicate.
    pub fn follower_grid(&self, x: &[S]) -> Result<Vec<Vec<S>>, ModelError> {
        Ok(self.follower_grid_flat(x)?.chunks(self.ny()).map(<[S]>::to_vec).collect())
    }

    /// As [`Self::follower_grid`], flattened: `ny` consecutive values per point.
    pub fn follower_grid_flat(&self, x: &[S]) -> Result<Vec<S>, ModelError> {
        let eval_err = |source| ModelError::Eval { x: fmt_point(x), source };
        let cap = self.spec.grid_cap.unwrap_or(DEFAULT_GRID_CAP);
        let mut axes = Vec::with_capacity(self.follower.len());
        let mut total = 1usize;
        for f in &self.follower {
            let lo = f.lo.eval(x).map_err(eval_err)?;
            let hi = f.hi.eval(x).map_err(eval_err)?;
            if !(lo <= hi) {
                return Err(ModelError::InfeasibleFollower { x: fmt_point(x) });
            }
            if !lo.is_finite() || !hi.is_finite() {
                return Err(ModelError::Invariant {
                    line: 0,
                    message: format!("follower bounds at x = {} are unbounded; use a symbolic psi", fmt_point(x)),
                });
            }
            let constant = (0..x.len()).all(|k| !f.lo.uses_slot(k) && !f.hi.uses_slot(k));
            let axis = if constant {
                f.fixed.get_or_init(|| lattice(lo, hi, f.step, &f.include)).clone()
            } else {
                lattice(lo, hi, f.step, &f.include)
            };
            total = total.saturating_mul(axis.len());
            if total > cap {
                return Err(ModelError::Invariant { line: 0, message: format!("follower grid above the cap {cap}") });
            }
            axes.push(axis);
        }
        let ny = axes.len();
        let mut flat = Vec::with_capacity(total * ny);
        let mut args = self.args(x, &vec![S::zero(); ny]);
        let nx = x.len();
        let mut idx = vec![0usize; ny];
        'outer: loop {
            for j in 0..ny {
                args[nx + j] = axes[j][idx[j]];
            }
            let keep = match &self.feasible {
                Some(pred) => pred.eval(&args).map_err(eval_err)?,
                None => true,
            };
            if keep {
                flat.extend_from_slice(&args[nx..]);
            }
            let mut j = ny;
            loop {
                if j == 0 {
                    break 'outer;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < axes[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
        if flat.is_empty() {
            return Err(ModelError::InfeasibleFollower { x: fmt_point(x) });
        }
        Ok(flat)
    }

    /// The declared solution set at `x`: first matching piece, endpoints evaluated and snapped.
    pub fn symbolic_psi(&self, x: &[S]) -> Result<ExtendedRealSet<S>, ModelError> {
        let eval_err = |source| ModelError::Eval { x: fmt_point(x), source };
        for p in &self.psi {
            if !p.when.eval(x).map_err(eval_err)? {
                continue;
            }
            return p.set.eval(x);
        }
        Err(ModelError::NoPsiPiece { x: fmt_point(x) })
    }

    /// Compiles set-literal text such as `(2*x - 1, x] u {1}` over the leader variables.
    pub fn set_template(&self, text: &str) -> Result<SetTemplate<S>, ModelError> {
        let b = Binder {
            slots: vec![],
            leader_slots: self.leader_names.iter().map(String::as_str).collect(),
            constants: self.spec.constants.iter().cloned().collect(),
        };
        b.template(&load::set_templates(text)?, Loc(0))
    }

    /// A copy with command-line adjustments applied and revalidated.
    pub fn with_overrides(&self, o: &Overrides) -> Result<Self, ModelError> {
        let mut spec = self.spec.clone();
        if let Some(step) = o.grid_step {
            for d in &mut spec.leader {
                d.step = Expr::new(ExprKind::Num(step), Default::default());
            }
        }
        if let Some(r) = &o.radii {
            spec.radii = Some(r.clone());
        }
        if let Some(t) = o.tolerance {
            spec.tolerance = Some(t);
        }
        if let Some(m) = o.psi_mode {
            spec.psi_mode = m;
        }
        Self::from_spec(spec)
    }

    /// Objective arguments for a leader point and a follower point.
    pub fn args(&self, x: &[S], y: &[S]) -> Vec<S> {
        let mut a = Vec::with_capacity(x.len() + y.len());
        a.extend_from_slice(x);
        a.extend_from_slice(y);
        a
    }
}

/// Euclidean norm of a difference, the per-space norm of the product norm.
pub fn distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter().zip(b).map(|(p, q)| (*p - *q) * (*p - *q)).fold(S::zero(), |s, v| s + v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX34: &str = "name = ex\n[leader]\nx = -1, 1, 0.5\n[follower]\ny = 0, 1 - x, 0.25\n[objectives]\nupper = x\nlower = x*y\n";

    #[test]
    fn lattices_include_mandatory_points() {
        assert_eq!(lattice(0.0, 1.0, 0.5, &[]), vec![0.0, 0.5, 1.0]);
        assert_eq!(lattice(-0.3, 1.0, 0.5, &[0.0]), vec![-0.3, 0.0, 0.2, 0.7, 1.0]);
        assert_eq!(lattice(0.0, 1.0, 0.3, &[]), vec![0.0, 0.3, 0.6, 0.9, 1.0]);
    }

    #[test]
    fn follower_grid_respects_bounds() {
        let inst = BilevelInstance::<f64>::load(EX34).unwrap();
        assert_eq!(inst.leader_grid(), vec![vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]]);
        let ys: Vec<f64> = inst.follower_grid(&[0.5]).unwrap().into_iter().map(|y| y[0]).collect();
        assert_eq!(ys, vec![0.0, 0.25, 0.5]);
    }

    #[test]
    fn breakpoints_of_conditions_are_on_grid() {
        let src = "name = t\n[leader]\nx = 0, 1, 0.3\n[follower]\ny = 0, 1, 0.3\n[objectives]\n\
                   upper = cases { y > 0.5 -> x; else -> 0 }\nlower = cases { x < 0.45 -> y; else -> 0 }\n";
        let inst = BilevelInstance::<f64>::load(src).unwrap();
        let xs: Vec<f64> = inst.leader_grid().into_iter().map(|x| x[0]).collect();
        assert!(xs.contains(&0.45));
        let ys: Vec<f64> = inst.follower_grid(&[0.0]).unwrap().into_iter().map(|y| y[0]).collect();
        assert!(ys.contains(&0.5));
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let bad_step = EX34.replace("x = -1, 1, 0.5", "x = -1, 1, 0");
        assert!(matches!(BilevelInstance::<f64>::load(&bad_step), Err(ModelError::Invariant { line: 3, .. })));
        let unbound = EX34.replace("upper = x", "upper = x + z");
        assert!(matches!(BilevelInstance::<f64>::load(&unbound), Err(ModelError::Bind { line: 7, .. })));
        let crossing = EX34.replace("y = 0, 1 - x", "y = 0, -x");
        assert!(matches!(BilevelInstance::<f64>::load(&crossing), Err(ModelError::Invariant { .. })));
    }

    #[test]
    fn printed_spec_reloads_identically() {
        let src = "name = fl\n[leader]\nx = 0, 1, 0.25\n[follower]\ny = 0, 1, 0.25\n[objectives]\nupper = x - y\n\
                   lower = floor(x + y)\n[psi]\nmode = symbolic\npiece = x < 1 -> [0, 1 - x)\npiece = x = 1 -> [0, 1) u {2}\n\
                   [analysis]\nradii = 0.5\nassert = lsc_upper\nspne = none\n[golden]\nexpect = real_optimistic == {0, 1}\n";
        let spec = parse_problem(src).unwrap();
        let again = parse_problem(&spec.to_string()).unwrap();
        assert_eq!(spec, again);
        let inst = BilevelInstance::<f64>::from_spec(again).unwrap();
        assert_eq!(inst.symbolic_psi(&[0.25]).unwrap().to_string(), "[0,0.75)");
        assert_eq!(inst.symbolic_psi(&[1.0]).unwrap().to_string(), "[0,1) u {2}");
    }

    #[test]
    fn uncovered_symbolic_domain_is_an_error() {
        let src = "name = t\n[leader]\nx = 0, 1, 0.5\n[follower]\ny = 0, 1, 0.5\n[objectives]\nupper = x\nlower = 0\n\
                   [psi]\nmode = symbolic\npiece = x < 1 -> [0, 1]\n";
        assert!(matches!(BilevelInstance::<f64>::load(src), Err(ModelError::NoPsiPiece { .. })));
    }
}
