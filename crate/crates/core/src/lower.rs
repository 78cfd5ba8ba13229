//! Lower-level solver: solution sets, lower value, and image sets of the
//! upper objective over the solution set.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{Compiled, EvalError};
use crate::model::{point_text, BilevelInstance, ModelError, PsiMode};
use crate::roots::{breakpoints, Chart};
use crate::scalar::{fmt_scalar, Scalar};
use crate::setreal::{Endpoint, ExtendedRealSet, Extremum, Interval, SetError};

const IMAGE_SWITCH_SAMPLES: usize = 513;
const MONOTONE_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LowerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("lower objective unbounded below at x = {x}")]
    UnboundedLower { x: String },
    #[error("upper objective is not monotone on ({lo}, {hi}) at x = {x}")]
    NonMonotonePiece { x: String, lo: String, hi: String },
    #[error("upper objective has no limit at y = {at} for x = {x}")]
    NoLimit { x: String, at: String },
    #[error("evaluation at x = {x}: {source}")]
    Eval { x: String, source: EvalError },
    #[error("set at x = {x}: {source}")]
    Set { x: String, source: SetError },
    #[error("symbolic analysis needs a single follower variable")]
    NotScalarFollower,
}

/// A follower point in the solution set together with its upper-objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Member<S> {
    pub y: Vec<S>,
    pub value: S,
}

/// The lower-level solution set: grid points or an exact interval union.
#[derive(Debug, Clone, PartialEq)]
pub enum YSet<S> {
    Points(Vec<Vec<S>>),
    Exact(ExtendedRealSet<S>),
}

impl<S: Scalar> fmt::Display for YSet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YSet::Exact(s) => write!(f, "{s}"),
            YSet::Points(pts) if pts.first().map_or(false, |p| p.len() == 1) => {
                match ExtendedRealSet::from_points(pts.iter().map(|p| p[0])) {
                    Ok(s) => write!(f, "{s}"),
                    Err(_) => f.write_str("{}"),
                }
            }
            YSet::Points(pts) => {
                let parts: Vec<String> = pts.iter().map(|p| point_text(p)).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiResult<S> {
    pub x: Vec<S>,
    pub psi: YSet<S>,
    pub lower_value: S,
    pub image: ExtendedRealSet<S>,
    pub inf: Extremum<S>,
    pub sup: Extremum<S>,
    /// Every graph point in grid mode; in symbolic mode the points where an
    /// image value is attained by a closed endpoint, a breakpoint, or a constant piece.
    pub members: Vec<Member<S>>,
}

impl<S: Scalar> PsiResult<S> {
    fn new(x: Vec<S>, psi: YSet<S>, lower_value: S, image: ExtendedRealSet<S>, members: Vec<Member<S>>) -> Self {
        let inf = image.inf_of();
        let sup = image.sup_of();
        PsiResult { x, psi, lower_value, image, inf, sup, members }
    }

    /// Members whose value equals `v`.
    pub fn witnesses(&self, v: S) -> impl Iterator<Item = &Member<S>> {
        self.members.iter().filter(move |m| m.value == v)
    }
}

/// Image sets over every leader grid point, in grid order.
#[derive(Debug, Clone)]
pub struct ImageFamily<S> {
    pub mode: PsiMode,
    pub results: Vec<PsiResult<S>>,
}

impl<S: Scalar> ImageFamily<S> {
    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    pub fn images(&self) -> Vec<ExtendedRealSet<S>> {
        self.results.iter().map(|r| r.image.clone()).collect()
    }

    pub fn position(&self, x: &[S]) -> Option<usize> {
        self.results.iter().position(|r| r.x == x)
    }
}

fn xerr<S: Scalar>(x: &[S]) -> impl Fn(EvalError) -> LowerError + '_ {
    move |source| LowerError::Eval { x: point_text(x), source }
}

/// Grid argmin of the lower objective, within the instance tolerance.
pub fn solve_psi_grid<S: Scalar>(inst: &BilevelInstance<S>, x: &[S]) -> Result<PsiResult<S>, LowerError> {
    let ny = inst.ny();
    let ys = inst.follower_grid_flat(x)?;
    let mut args = inst.args(x, &vec![S::zero(); ny]);
    let nx = x.len();
    let lower = inst.lower();
    let mut values = Vec::with_capacity(ys.len() / ny);
    let mut best = S::infinity();
    for y in ys.chunks(ny) {
        args[nx..].copy_from_slice(y);
        let v = lower.eval(&args).map_err(xerr(x))?;
        if v.is_nan() {
            return Err(LowerError::NoLimit { x: point_text(x), at: point_text(y) });
        }
        if v == S::neg_infinity() {
            return Err(LowerError::UnboundedLower { x: point_text(x) });
        }
        best = best.min(v);
        values.push(v);
    }
    let cut = best + inst.tolerance();
    let mut psi = Vec::new();
    let mut members = Vec::new();
    for (y, v) in ys.chunks(ny).zip(&values) {
        if *v <= cut {
            args[nx..].copy_from_slice(y);
            let value = inst.upper().eval(&args).map_err(xerr(x))?.snap();
            if value.is_nan() {
                return Err(LowerError::NoLimit { x: point_text(x), at: point_text(y) });
            }
            psi.push(y.to_vec());
            members.push(Member { y: y.to_vec(), value });
        }
    }
    let image = ExtendedRealSet::from_points(members.iter().map(|m| m.value))
        .map_err(|source| LowerError::Set { x: point_text(x), source })?;
    Ok(PsiResult::new(x.to_vec(), YSet::Points(psi), best, image, members))
}

/// The declared solution set with its exact image.
pub fn solve_psi_symbolic<S: Scalar>(inst: &BilevelInstance<S>, x: &[S]) -> Result<PsiResult<S>, LowerError> {
    let psi = inst.symbolic_psi(x)?;
    let (image, members) = image_over(inst, x, &psi)?;
    let rep = representative(&psi);
    let lower_value = inst.lower().eval(&inst.args(x, &[rep])).map_err(xerr(x))?;
    Ok(PsiResult::new(x.to_vec(), YSet::Exact(psi), lower_value, image, members))
}

pub fn solve_psi<S: Scalar>(inst: &BilevelInstance<S>, x: &[S]) -> Result<PsiResult<S>, LowerError> {
    match inst.psi_mode() {
        PsiMode::Grid => solve_psi_grid(inst, x),
        PsiMode::Symbolic => solve_psi_symbolic(inst, x),
    }
}

/// Solves every leader grid point, in parallel, keeping grid order.
pub fn image_family<S: Scalar>(inst: &BilevelInstance<S>) -> Result<ImageFamily<S>, LowerError> {
    let grid = inst.leader_grid();
    let results = grid.par_iter().map(|x| solve_psi(inst, x)).collect::<Result<Vec<_>, _>>()?;
    Ok(ImageFamily { mode: inst.psi_mode(), results })
}

fn representative<S: Scalar>(set: &ExtendedRealSet<S>) -> S {
    let iv = set.intervals()[0];
    if iv.lo().closed {
        iv.lo().value
    } else if iv.hi().closed {
        iv.hi().value
    } else {
        Chart::new(iv.lo().value, iv.hi().value).at(S::lit(0.5))
    }
}

/// Exact image of `y -> F(x, y)` over a set of follower values.
///
/// Each interval is cut at the breakpoints of the upper objective's branch
/// structure. Cut points and closed endpoints contribute attained values; each
/// open piece between them must be monotone under one fixed branch and maps to
/// the open interval between its end limits.
pub fn image_over<S: Scalar>(
    inst: &BilevelInstance<S>,
    x: &[S],
    set: &ExtendedRealSet<S>,
) -> Result<(ExtendedRealSet<S>, Vec<Member<S>>), LowerError> {
    if inst.ny() != 1 {
        return Err(LowerError::NotScalarFollower);
    }
    let upper = inst.upper();
    let nx = x.len();
    let mut args = inst.args(x, &[S::zero()]);
    let mut at = |y: S| -> Result<S, EvalError> {
        args[nx] = y;
        upper.eval(&args)
    };
    let switches = upper.switches();
    let mut raw = Vec::new();
    let mut members = Vec::new();
    for iv in set.intervals() {
        let (lo, hi) = (iv.lo(), iv.hi());
        if iv.is_point() {
            let v = closed_value(&mut at, x, lo.value)?;
            raw.push(Interval::point(v).map_err(|source| LowerError::Set { x: point_text(x), source })?);
            members.push(Member { y: vec![lo.value], value: v });
            continue;
        }
        let mut cuts = Vec::new();
        for sw in &switches {
            let base = inst.args(x, &[S::zero()]);
            let found = breakpoints(
                |y| {
                    let mut a = base.clone();
                    a[nx] = y;
                    sw.func.eval(&a)
                },
                sw.kind,
                lo.value,
                hi.value,
                IMAGE_SWITCH_SAMPLES,
            )
            .map_err(xerr(x))?;
            cuts.extend(found.into_iter().filter(|c| *c > lo.value && *c < hi.value));
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut closed_points = cuts.clone();
        if lo.closed {
            closed_points.push(lo.value);
        }
        if hi.closed {
            closed_points.push(hi.value);
        }
        for c in closed_points {
            let v = closed_value(&mut at, x, c)?;
            raw.push(Interval::point(v).map_err(|source| LowerError::Set { x: point_text(x), source })?);
            members.push(Member { y: vec![c], value: v });
        }
        let mut fences = vec![lo.value];
        fences.extend(cuts);
        fences.push(hi.value);
        for w in fences.windows(2) {
            match open_piece(upper, &inst.args(x, &[S::zero()]), x, w[0], w[1])? {
                Piece::Constant(y, v) => {
                    raw.push(Interval::point(v).map_err(|source| LowerError::Set { x: point_text(x), source })?);
                    members.push(Member { y: vec![y], value: v });
                }
                Piece::Open(a, b) => {
                    raw.push(
                        Interval::new(Endpoint::open(a), Endpoint::open(b))
                            .map_err(|source| LowerError::Set { x: point_text(x), source })?,
                    );
                }
            }
        }
    }
    members.sort_by(|a, b| a.y[0].partial_cmp(&b.y[0]).unwrap());
    members.dedup_by(|a, b| a.y == b.y);
    let image = ExtendedRealSet::canonicalize(raw).map_err(|source| LowerError::Set { x: point_text(x), source })?;
    Ok((image, members))
}

fn closed_value<S: Scalar>(at: &mut impl FnMut(S) -> Result<S, EvalError>, x: &[S], y: S) -> Result<S, LowerError> {
    let v = at(y).map_err(xerr(x))?;
    if v.is_nan() {
        return Err(LowerError::NoLimit { x: point_text(x), at: fmt_scalar(y) });
    }
    Ok(v.snap())
}

enum Piece<S> {
    Constant(S, S),
    Open(S, S),
}

fn open_piece<S: Scalar>(upper: &Compiled<S>, base: &[S], x: &[S], lo: S, hi: S) -> Result<Piece<S>, LowerError> {
    let nx = x.len();
    let chart = Chart::new(lo, hi);
    let with = |y: S| {
        let mut a = base.to_vec();
        a[nx] = y;
        a
    };
    let non_monotone = || LowerError::NonMonotonePiece { x: point_text(x), lo: fmt_scalar(lo), hi: fmt_scalar(hi) };
    let mid = chart.at(S::lit(0.5));
    let frozen = upper.freeze(&with(mid)).map_err(xerr(x))?;
    let n = MONOTONE_SAMPLES;
    let mut values = Vec::with_capacity(n);
    for k in 1..=n {
        let t = S::from_usize(k).unwrap() / S::from_usize(n + 1).unwrap();
        let y = chart.at(t);
        if !(y > lo && y < hi) {
            continue;
        }
        if upper.freeze(&with(y)).map_err(xerr(x))? != frozen {
            return Err(non_monotone());
        }
        values.push(frozen.eval(&with(y)).map_err(xerr(x))?);
    }
    let limit = |y: S| -> Result<S, LowerError> {
        let v = frozen.eval(&with(y)).map_err(xerr(x))?;
        if v.is_nan() {
            Err(LowerError::NoLimit { x: point_text(x), at: fmt_scalar(y) })
        } else {
            Ok(v)
        }
    };
    let (va, vb) = (limit(lo)?, limit(hi)?);
    let scale = values.iter().chain([&va, &vb]).filter(|v| v.is_finite()).fold(S::one(), |m, v| m.max(v.abs()));
    let tol = scale * S::epsilon() * S::lit(64.0);
    let (mut up, mut down) = (false, false);
    for w in values.windows(2) {
        let d = w[1] - w[0];
        up |= d > tol;
        down |= d < -tol;
    }
    if up && down {
        return Err(non_monotone());
    }
    let vm = frozen.eval(&with(mid)).map_err(xerr(x))?;
    let flat = |v: S| v.is_finite() && (v - vm).abs() <= tol;
    if !up && !down && flat(va) && flat(vb) {
        return Ok(Piece::Constant(mid, vm.snap()));
    }
    let (a, b) = (va.snap(), vb.snap());
    if a == b {
        return Err(non_monotone());
    }
    Ok(Piece::Open(a.min(b), a.max(b)))
}

/// Grid and exact backends agree up to `tol`: grid solution points lie in the
/// declared solution set and grid image values lie in the exact image.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck<S> {
    pub x: Vec<S>,
    pub psi_outside: Vec<S>,
    pub image_outside: Vec<S>,
}

impl<S> CrossCheck<S> {
    pub fn consistent(&self) -> bool {
        self.psi_outside.is_empty() && self.image_outside.is_empty()
    }
}

pub fn cross_check<S: Scalar>(inst: &BilevelInstance<S>, x: &[S], tol: S) -> Result<CrossCheck<S>, LowerError> {
    let grid = solve_psi_grid(inst, x)?;
    let exact = solve_psi_symbolic(inst, x)?;
    let YSet::Exact(psi) = &exact.psi else { unreachable!("symbolic solve yields an exact set") };
    let psi_outside = grid.members.iter().map(|m| m.y[0]).filter(|y| !psi.contains_within(*y, tol)).collect();
    let image_outside = grid.members.iter().map(|m| m.value).filter(|v| !exact.image.contains_within(*v, tol)).collect();
    Ok(CrossCheck { x: x.to_vec(), psi_outside, image_outside })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(body: &str) -> BilevelInstance<f64> {
        BilevelInstance::load(body).unwrap()
    }

    const LAST: &str = "[leader]\nx = -1, 1, 0.25\n[follower]\ny = 0, 1, 0.25\n[objectives]\n\
        upper = cases { y > 0.5 -> x - y; else -> x^2 + y^2 }\nlower = x*y\n[psi]\nmode = symbolic\n\
        piece = x < 0 -> {1}\npiece = x = 0 -> [0, 1]\npiece = x > 0 -> {0}\n";

    #[test]
    fn split_image_at_zero() {
        let i = inst(LAST);
        let r = solve_psi_symbolic(&i, &[0.0]).unwrap();
        assert_eq!(r.image.to_string(), "[-1,-0.5) u [0,0.25]");
        assert_eq!(r.inf, Extremum { value: -1.0, attained: true });
        let ys: Vec<f64> = r.members.iter().map(|m| m.y[0]).collect();
        assert_eq!(ys, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn unbounded_solution_set_maps_through_limits() {
        let i = inst(
            "[leader]\nx = 0, 1, 0.5\n[follower]\ny = -1, 3, 0.5\n[objectives]\nupper = exp(x - y)\n\
             lower = max(x - y, 0)\n[psi]\nmode = symbolic\npiece = x >= 0 -> [x, inf)\n",
        );
        let r = solve_psi_symbolic(&i, &[0.5]).unwrap();
        assert_eq!(r.image.to_string(), "(0,1]");
        assert!(!r.inf.attained);
        assert!(cross_check(&i, &[0.5], 1e-9).unwrap().consistent());
    }

    #[test]
    fn grid_argmin_and_ties() {
        let i = inst("[leader]\nx = -1, 1, 0.5\n[follower]\ny = 0, 1, 0.25\n[objectives]\nupper = x\nlower = x*y\n");
        let r = solve_psi_grid(&i, &[0.0]).unwrap();
        assert_eq!(r.psi.to_string(), "{0} u {0.25} u {0.5} u {0.75} u {1}");
        assert_eq!(solve_psi_grid(&i, &[0.5]).unwrap().psi.to_string(), "{0}");
        assert_eq!(solve_psi_grid(&i, &[-0.5]).unwrap().psi.to_string(), "{1}");
        let fam = image_family(&i).unwrap();
        assert!(fam.results.iter().all(|r| r.image == ExtendedRealSet::singleton(r.x[0]).unwrap()));
    }

    #[test]
    fn unbounded_and_infeasible_followers() {
        let i = inst("[leader]\nx = 0, 1, 1\n[follower]\ny = 0, 1, 1\n[objectives]\nupper = x\nlower = -1/(y - y + 0) \n");
        assert!(matches!(solve_psi_grid(&i, &[0.0]), Err(LowerError::Eval { .. })));
        let i = inst("[leader]\nx = 0, 1, 1\n[follower]\ny = 0, 1, 1\n[objectives]\nupper = x\nlower = -exp(1000*y)\n");
        assert!(matches!(solve_psi_grid(&i, &[0.0]), Err(LowerError::UnboundedLower { .. })));
        let i = inst("[leader]\nx = 0, 1, 1\n[follower]\ny = 0, 1, 1\nwhere = y > 5\n[objectives]\nupper = x\nlower = y\n");
        assert!(matches!(solve_psi_grid(&i, &[0.0]), Err(LowerError::Model(ModelError::InfeasibleFollower { .. }))));
    }

    #[test]
    fn non_monotone_piece_is_rejected() {
        let i = inst(
            "[leader]\nx = 0, 1, 1\n[follower]\ny = -1, 1, 1\n[objectives]\nupper = y^2\nlower = 0\n\
             [psi]\nmode = symbolic\npiece = x >= 0 -> (-1, 1)\n",
        );
        assert!(matches!(solve_psi_symbolic(&i, &[0.0]), Err(LowerError::NonMonotonePiece { .. })));
    }
}
