//! The implication matrix between solution concepts and the golden-statement checker.
//!
//! Each claim is an inclusion between concept sets that must hold whenever its
//! hypothesis does. Hypotheses decidable from the image family are decided;
//! analytic ones (semicontinuity, compactness) count only when asserted in the
//! problem file.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::expr::{parse, parse_condition, Compiled, CompiledCond};
use crate::games::{correspondence_report, GameTree};
use crate::lower::{cross_check, image_family, ImageFamily, YSet};
use crate::model::{point_text, BilevelInstance, Hypothesis, ModelError};
use crate::robust::{verify_triangle, UncertainProblem};
use crate::scalar::{fmt_scalar, Scalar};
use crate::solutions::{analyze, neighbours, Concept, ConceptReport, LocalPoint};
use crate::setreal::ExtendedRealSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypothesisStatus {
    Holds,
    Fails,
    UserAsserted,
    NotChecked,
}

impl HypothesisStatus {
    pub fn name(self) -> &'static str {
        match self {
            HypothesisStatus::Holds => "holds",
            HypothesisStatus::Fails => "fails",
            HypothesisStatus::UserAsserted => "user-asserted",
            HypothesisStatus::NotChecked => "not-checked",
        }
    }

    fn binding(self) -> bool {
        matches!(self, HypothesisStatus::Holds | HypothesisStatus::UserAsserted)
    }
}

/// Where a claim was checked: over the whole grid, at one schedule radius,
/// or across the schedule (some radius on each side).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scope<S> {
    Global,
    Radius(S),
    Schedule,
}

impl<S: Scalar> fmt::Display for Scope<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Radius(r) => write!(f, "radius {}", fmt_scalar(*r)),
            Scope::Schedule => f.write_str("schedule"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimResult<S> {
    pub id: &'static str,
    pub scope: Scope<S>,
    pub hypothesis: HypothesisStatus,
    pub conclusion: bool,
    /// Offending points when the conclusion fails, otherwise empty.
    pub details: Vec<String>,
}

impl<S> ClaimResult<S> {
    pub fn violated(&self) -> bool {
        !self.conclusion && self.hypothesis.binding()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplicationMatrix<S> {
    pub instance: String,
    pub radii: Vec<S>,
    pub claims: Vec<ClaimResult<S>>,
}

impl<S> ImplicationMatrix<S> {
    pub fn violations(&self) -> impl Iterator<Item = &ClaimResult<S>> {
        self.claims.iter().filter(|c| c.violated())
    }

    pub fn is_clean(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn claim(&self, id: &str) -> impl Iterator<Item = &ClaimResult<S>> + '_ {
        let id = id.to_string();
        self.claims.iter().filter(move |c| c.id == id)
    }
}

pub const CLAIM_IDS: [&str; 14] = [
    "real_optimistic_attained_to_standard",
    "standard_to_real_optimistic",
    "standard_to_l_minimal_and_vector",
    "l_minimal_to_real_optimistic",
    "u_minimal_to_real_pessimistic",
    "closed_real_optimistic_to_l_minimal",
    "closed_real_pessimistic_to_u_minimal",
    "vector_to_real_and_standard",
    "optimistic_attainment_partition",
    "pessimistic_attainment_partition",
    "strict_minimizer_standard_to_real_local",
    "bounded_closed_graph_standard_to_real_local",
    "continuous_lower_level_equivalence",
    "grid_symbolic_consistency",
];

struct Ctx<'a, S> {
    inst: &'a BilevelInstance<S>,
    fam: &'a ImageFamily<S>,
    rep: &'a ConceptReport<S>,
}

impl<S: Scalar> Ctx<'_, S> {
    fn xt(&self, i: usize) -> String {
        point_text(&self.rep.xs[i])
    }

    fn at(&self, points: &[LocalPoint<S>], r: S) -> Vec<usize> {
        ConceptReport::local_at(points, r)
    }

    fn so_at(&self, r: S) -> Vec<(usize, &[S])> {
        self.rep
            .local_standard_optimistic
            .iter()
            .filter(|p| p.radius.map_or(false, |a| a <= r) && p.reach.map_or(false, |b| r <= b))
            .map(|p| (p.index, p.y.as_slice()))
            .collect()
    }

    fn vector_at(&self, r: S) -> Vec<usize> {
        self.rep
            .local_vector
            .iter()
            .filter(|p| p.radius.map_or(false, |a| a <= r) && p.reach.map_or(false, |b| r <= b))
            .map(|p| p.index)
            .collect()
    }

    fn asserted(&self, hs: &[Hypothesis]) -> HypothesisStatus {
        if hs.iter().all(|h| self.inst.hypotheses().contains(h)) {
            HypothesisStatus::UserAsserted
        } else {
            HypothesisStatus::NotChecked
        }
    }
}

fn claim<S>(id: &'static str, scope: Scope<S>, hypothesis: HypothesisStatus, details: Vec<String>) -> ClaimResult<S> {
    ClaimResult { id, scope, hypothesis, conclusion: details.is_empty(), details }
}

fn missing<S: Scalar>(c: &Ctx<'_, S>, sub: &[usize], sup: &[usize], what: &str) -> Vec<String> {
    sub.iter().filter(|i| !sup.contains(i)).map(|&i| format!("x = {} is not {what}", c.xt(i))).collect()
}

fn attained_to_standard<S: Scalar>(c: &Ctx<'_, S>, xs: &[usize], pairs: &[(usize, &[S])], scope: Scope<S>) -> ClaimResult<S> {
    let mut details = Vec::new();
    for &i in xs {
        let r = &c.fam.results[i];
        if !r.inf.attained {
            continue;
        }
        for m in r.witnesses(r.inf.value) {
            if !pairs.iter().any(|&(j, y)| j == i && y == m.y.as_slice()) {
                details.push(format!(
                    "(x, y) = ({}, {}) with F = {} is not standard optimistic",
                    c.xt(i),
                    point_text(&m.y),
                    fmt_scalar(m.value)
                ));
            }
        }
    }
    claim("real_optimistic_attained_to_standard", scope, HypothesisStatus::Holds, details)
}

fn set_eq<S: Scalar>(c: &Ctx<'_, S>, got: &[usize], want: &[usize], what: &str) -> Vec<String> {
    let mut d = missing(c, want, got, what);
    d.extend(got.iter().filter(|i| !want.contains(i)).map(|&i| format!("x = {} is {what} but should not be", c.xt(i))));
    d
}

fn global_claims<S: Scalar>(c: &Ctx<'_, S>) -> Vec<ClaimResult<S>> {
    let rep = c.rep;
    let res = &c.fam.results;
    let so_pairs: Vec<(usize, &[S])> = rep.standard_optimistic.iter().map(|p| (p.index, p.y.as_slice())).collect();
    let so_x: Vec<usize> = rep.global_indices(Concept::StandardOptimistic);
    let mut out = vec![attained_to_standard(c, &rep.real_optimistic, &so_pairs, Scope::Global)];

    out.push(claim(
        "standard_to_real_optimistic",
        Scope::Global,
        HypothesisStatus::Holds,
        missing(c, &so_x, &rep.real_optimistic, "real optimistic"),
    ));

    let mut d = missing(c, &so_x, &rep.l_minimal, "l-minimal");
    for p in &rep.standard_optimistic {
        if !rep.vector.iter().any(|v| v.index == p.index && v.z == p.value) {
            d.push(format!("(x, z) = ({}, {}) is not a vector solution", c.xt(p.index), fmt_scalar(p.value)));
        }
    }
    out.push(claim("standard_to_l_minimal_and_vector", Scope::Global, HypothesisStatus::Holds, d));

    out.push(claim(
        "l_minimal_to_real_optimistic",
        Scope::Global,
        HypothesisStatus::Holds,
        missing(c, &rep.l_minimal, &rep.real_optimistic, "real optimistic"),
    ));
    out.push(claim(
        "u_minimal_to_real_pessimistic",
        Scope::Global,
        HypothesisStatus::Holds,
        missing(c, &rep.u_minimal, &rep.real_pessimistic, "real pessimistic"),
    ));

    let closed = if res.iter().all(|r| r.image.is_closed()) { HypothesisStatus::Holds } else { HypothesisStatus::Fails };
    out.push(claim(
        "closed_real_optimistic_to_l_minimal",
        Scope::Global,
        closed,
        missing(c, &rep.real_optimistic, &rep.l_minimal, "l-minimal"),
    ));
    out.push(claim(
        "closed_real_pessimistic_to_u_minimal",
        Scope::Global,
        closed,
        missing(c, &rep.real_pessimistic, &rep.u_minimal, "u-minimal"),
    ));

    let mut d = Vec::new();
    for v in &rep.vector {
        if !rep.real_optimistic.contains(&v.index) {
            d.push(format!("vector x = {} is not real optimistic", c.xt(v.index)));
        }
        if !so_x.contains(&v.index) {
            d.push(format!("vector x = {} has no standard optimistic pair", c.xt(v.index)));
        }
    }
    out.push(claim("vector_to_real_and_standard", Scope::Global, HypothesisStatus::Holds, d));

    let q_nonempty = if rep.q.is_empty() { HypothesisStatus::Fails } else { HypothesisStatus::Holds };
    let want = if rep.t.is_empty() { &rep.q } else { &rep.t };
    out.push(claim("optimistic_attainment_partition", Scope::Global, q_nonempty, set_eq(c, &rep.l_minimal, want, "l-minimal")));

    let qh_nonempty = if rep.q_hat.is_empty() { HypothesisStatus::Fails } else { HypothesisStatus::Holds };
    let open: Vec<usize> = rep.q_hat.iter().copied().filter(|i| !rep.t_hat.contains(i)).collect();
    let want = if open.is_empty() { &rep.q_hat } else { &open };
    out.push(claim(
        "pessimistic_attainment_partition",
        Scope::Global,
        qh_nonempty,
        set_eq(c, &rep.u_minimal, want, "u-minimal"),
    ));

    let hyp = c.asserted(&[Hypothesis::ContinuousObjectives, Hypothesis::ContinuousCompactConstraints, Hypothesis::LscUpper]);
    let mut d: Vec<String> = res
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.inf.attained)
        .map(|(i, r)| format!("x = {}: infimum {} not attained", c.xt(i), fmt_scalar(r.inf.value)))
        .collect();
    d.extend(set_eq(c, &so_x, &rep.real_optimistic, "standard optimistic"));
    out.push(claim("continuous_lower_level_equivalence", Scope::Global, hyp, d));
    out
}

fn local_claims<S: Scalar>(c: &Ctx<'_, S>, r: S) -> Vec<ClaimResult<S>> {
    let rep = c.rep;
    let res = &c.fam.results;
    let scope = Scope::Radius(r);
    let ro = c.at(&rep.local_real_optimistic, r);
    let rp = c.at(&rep.local_real_pessimistic, r);
    let lmin = c.at(&rep.local_l_minimal, r);
    let umin = c.at(&rep.local_u_minimal, r);
    let so = c.so_at(r);
    let mut out = vec![attained_to_standard(c, &ro, &so, scope)];

    out.push(claim("l_minimal_to_real_optimistic", scope, HypothesisStatus::Holds, missing(c, &lmin, &ro, "local real optimistic")));
    out.push(claim("u_minimal_to_real_pessimistic", scope, HypothesisStatus::Holds, missing(c, &umin, &rp, "local real pessimistic")));

    let closed = if res.iter().all(|r| r.image.is_closed()) { HypothesisStatus::Holds } else { HypothesisStatus::Fails };
    out.push(claim("closed_real_optimistic_to_l_minimal", scope, closed, missing(c, &ro, &lmin, "local l-minimal")));
    out.push(claim("closed_real_pessimistic_to_u_minimal", scope, closed, missing(c, &rp, &umin, "local u-minimal")));

    let mut d = Vec::new();
    for i in c.vector_at(r) {
        if !ro.contains(&i) {
            d.push(format!("local vector x = {} is not local real optimistic", c.xt(i)));
        }
        if !so.iter().any(|p| p.0 == i) {
            d.push(format!("local vector x = {} has no local standard optimistic pair", c.xt(i)));
        }
    }
    out.push(claim("vector_to_real_and_standard", scope, HypothesisStatus::Holds, d));

    // At a fixed ball, a local real optimistic point fails to be l-minimal
    // exactly when it misses its infimum and a ball neighbour attains the same value.
    let dominated = |i: usize, val: &dyn Fn(usize) -> (S, bool), want_attained: bool| {
        neighbours(&rep.xs, i, r).into_iter().any(|(j, _)| j != i && val(j).0 == val(i).0 && val(j).1 == want_attained)
    };
    let inf = |j: usize| (res[j].inf.value, res[j].inf.attained);
    let sup = |j: usize| (res[j].sup.value, res[j].sup.attained);
    let mut d = Vec::new();
    for &i in &ro {
        let expected = res[i].inf.attained || !dominated(i, &inf, true);
        if expected != lmin.contains(&i) {
            d.push(format!("x = {}: expected l-minimal = {expected}", c.xt(i)));
        }
    }
    let q_nonempty = if ro.is_empty() { HypothesisStatus::Fails } else { HypothesisStatus::Holds };
    out.push(claim("optimistic_attainment_partition", scope, q_nonempty, d));
    let mut d = Vec::new();
    for &i in &rp {
        let expected = !res[i].sup.attained || !dominated(i, &sup, false);
        if expected != umin.contains(&i) {
            d.push(format!("x = {}: expected u-minimal = {expected}", c.xt(i)));
        }
    }
    let qh_nonempty = if rp.is_empty() { HypothesisStatus::Fails } else { HypothesisStatus::Holds };
    out.push(claim("pessimistic_attainment_partition", scope, qh_nonempty, d));
    out
}

fn schedule_claims<S: Scalar>(c: &Ctx<'_, S>) -> Vec<ClaimResult<S>> {
    let rep = c.rep;
    let ro: Vec<usize> = rep.local_real_optimistic.iter().map(|p| p.index).collect();
    let not_local = |strict_only: bool| -> Vec<String> {
        rep.local_standard_optimistic
            .iter()
            .filter(|p| !strict_only || p.strict)
            .filter(|p| !ro.contains(&p.index))
            .map(|p| format!("(x, y) = ({}, {}) is local standard optimistic but x is not local real optimistic", c.xt(p.index), point_text(&p.y)))
            .collect()
    };
    let compact = [Hypothesis::LscUpper, Hypothesis::LocallyBoundedPsi, Hypothesis::ClosedGraphPsi];
    vec![
        claim("strict_minimizer_standard_to_real_local", Scope::Schedule, c.asserted(&compact), not_local(true)),
        claim("bounded_closed_graph_standard_to_real_local", Scope::Schedule, c.asserted(&compact), not_local(false)),
    ]
}

fn consistency_claim<S: Scalar>(c: &Ctx<'_, S>) -> Option<ClaimResult<S>> {
    if !c.inst.has_symbolic_psi() || c.inst.ny() != 1 {
        return None;
    }
    let tol = c.inst.tolerance().max(S::lit(1e-9));
    let checks: Vec<(HypothesisStatus, Vec<String>)> = c
        .rep
        .xs
        .par_iter()
        .map(|x| {
            let xt = point_text(x);
            let hits = c.inst.follower_grid_flat(x).and_then(|ys| Ok((ys, c.inst.symbolic_psi(x)?)));
            let (ys, psi) = match hits {
                Ok(v) => v,
                Err(e) => return (HypothesisStatus::NotChecked, vec![format!("x = {xt}: {e}")]),
            };
            if !ys.iter().any(|y| psi.contains_within(*y, tol)) {
                return (HypothesisStatus::Fails, vec![format!("x = {xt}: no grid point in {psi}")]);
            }
            match cross_check(c.inst, x, tol) {
                Ok(cc) => {
                    let mut d: Vec<String> =
                        cc.psi_outside.iter().map(|y| format!("x = {xt}: grid y = {} outside {psi}", fmt_scalar(*y))).collect();
                    d.extend(cc.image_outside.iter().map(|v| format!("x = {xt}: grid value {} outside the image", fmt_scalar(*v))));
                    (HypothesisStatus::Holds, d)
                }
                Err(e) => (HypothesisStatus::NotChecked, vec![format!("x = {xt}: {e}")]),
            }
        })
        .collect();
    let mut hyp = HypothesisStatus::Holds;
    let mut details = Vec::new();
    for (h, d) in checks {
        if h != HypothesisStatus::Holds {
            hyp = if hyp == HypothesisStatus::NotChecked { hyp } else { h };
            continue;
        }
        details.extend(d);
    }
    Some(claim("grid_symbolic_consistency", Scope::Global, hyp, details))
}

/// Checks every claim on one instance: global claims once, local claims at each schedule radius.
pub fn run_matrix<S: Scalar>(inst: &BilevelInstance<S>, fam: &ImageFamily<S>, rep: &ConceptReport<S>) -> ImplicationMatrix<S> {
    let c = Ctx { inst, fam, rep };
    let mut claims = global_claims(&c);
    for &r in &rep.radii {
        claims.extend(local_claims(&c, r));
    }
    claims.extend(schedule_claims(&c));
    claims.extend(consistency_claim(&c));
    ImplicationMatrix { instance: inst.name().to_string(), radii: rep.radii.clone(), claims }
}

// ---------------------------------------------------------------------------
// Golden statements

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenOutcome {
    pub line: usize,
    pub statement: String,
    pub passed: bool,
    /// What the engine produced when the statement fails.
    pub actual: Option<String>,
}

struct Golden<'a, S> {
    inst: &'a BilevelInstance<S>,
    fam: &'a ImageFamily<S>,
    rep: &'a ConceptReport<S>,
    consts: HashMap<String, f64>,
}

fn split_top(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (k, ch) in s.char_indices() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..k].trim());
                start = k + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out.into_iter().filter(|p| !p.is_empty()).collect()
}

impl<S: Scalar> Golden<'_, S> {
    fn number(&self, text: &str) -> Result<S, String> {
        let e = parse(text).map_err(|e| format!("`{text}`: {e}"))?;
        let c = Compiled::<S>::compile(&e, &[], &self.consts).map_err(|e| format!("`{text}`: {e}"))?;
        c.eval(&[]).map(|v| v.snap()).map_err(|e| format!("`{text}`: {e}"))
    }

    fn point(&self, text: &str) -> Result<Vec<S>, String> {
        let t = text.trim();
        match t.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
            Some(inner) if split_top(inner).len() > 1 => split_top(inner).into_iter().map(|p| self.number(p)).collect(),
            _ => Ok(vec![self.number(t)?]),
        }
    }

    /// `{}`, `all`, or `{p, q, ...}`; `None` stands for `all`.
    fn point_set(&self, text: &str) -> Result<Option<Vec<Vec<S>>>, String> {
        let t = text.trim();
        if t == "all" {
            return Ok(None);
        }
        let inner = t.strip_prefix('{').and_then(|s| s.strip_suffix('}')).ok_or_else(|| format!("expected a point set, found `{t}`"))?;
        let mut pts = split_top(inner).into_iter().map(|p| self.point(p)).collect::<Result<Vec<_>, _>>()?;
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(Some(pts))
    }

    fn radius(&self, text: &str) -> Result<S, String> {
        let r = self.number(text)?;
        self.rep
            .radii
            .iter()
            .copied()
            .find(|q| (*q - r).abs() <= S::lit(1e-12) * r.abs().max(S::one()))
            .ok_or_else(|| format!("radius {} is not in the schedule", fmt_scalar(r)))
    }

    fn index_of(&self, x: &[S]) -> Result<usize, String> {
        self.rep.xs.iter().position(|p| p.as_slice() == x).ok_or_else(|| format!("{} is not a leader grid point", point_text(x)))
    }

    fn leader_cond(&self, text: &str) -> Result<CompiledCond<S>, String> {
        let c = parse_condition(text).map_err(|e| format!("`{text}`: {e}"))?;
        let slots: Vec<&str> = self.inst.leader_names().iter().map(String::as_str).collect();
        CompiledCond::compile(&c, &slots, &self.consts).map_err(|e| e.to_string())
    }

    fn selected(&self, cond: Option<&str>) -> Result<Vec<usize>, String> {
        let Some(cond) = cond else { return Ok((0..self.rep.xs.len()).collect()) };
        let c = self.leader_cond(cond)?;
        let mut out = Vec::new();
        for (i, x) in self.rep.xs.iter().enumerate() {
            if c.eval(x).map_err(|e| e.to_string())? {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Points produced for a concept, global or at a radius; pair concepts append `y` or `z`.
    fn concept_points(&self, name: &str, r: Option<S>) -> Result<Vec<Vec<S>>, String> {
        let rep = self.rep;
        let xs = |idx: Vec<usize>| idx.into_iter().map(|i| rep.xs[i].clone()).collect::<Vec<_>>();
        let join = |i: usize, tail: &[S]| rep.xs[i].iter().chain(tail).copied().collect::<Vec<S>>();
        let within = |a: Option<S>, b: Option<S>, r: S| a.map_or(false, |a| a <= r) && b.map_or(false, |b| r <= b);
        let mut pts = match (name, r) {
            ("Q", None) => xs(rep.q.clone()),
            ("T", None) => xs(rep.t.clone()),
            ("Q_hat", None) => xs(rep.q_hat.clone()),
            ("T_hat", None) => xs(rep.t_hat.clone()),
            (n, None) => match Concept::from_name(n) {
                Some(Concept::StandardOptimistic) => rep.standard_optimistic.iter().map(|p| join(p.index, &p.y)).collect(),
                Some(Concept::Vector) => rep.vector.iter().map(|p| join(p.index, &[p.z])).collect(),
                Some(c) => xs(rep.global_indices(c)),
                None => return Err(format!("unknown concept `{n}`")),
            },
            (n, Some(r)) => match n.strip_prefix("local_").and_then(Concept::from_name) {
                Some(Concept::StandardOptimistic) => rep
                    .local_standard_optimistic
                    .iter()
                    .filter(|p| within(p.radius, p.reach, r))
                    .map(|p| join(p.index, &p.y))
                    .collect(),
                Some(Concept::Vector) => {
                    rep.local_vector.iter().filter(|p| within(p.radius, p.reach, r)).map(|p| join(p.index, &[p.z])).collect()
                }
                Some(c) => {
                    let points = match c {
                        Concept::RealOptimistic => &rep.local_real_optimistic,
                        Concept::RealPessimistic => &rep.local_real_pessimistic,
                        Concept::LMinimal => &rep.local_l_minimal,
                        _ => &rep.local_u_minimal,
                    };
                    xs(ConceptReport::local_at(points, r))
                }
                None => return Err(format!("unknown local concept `{n}`")),
            },
        };
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(pts)
    }

    fn points_text(pts: &[Vec<S>]) -> String {
        let parts: Vec<String> = pts.iter().map(|p| point_text(p)).collect();
        format!("{{{}}}", parts.join(", "))
    }

    fn set_of(&self, which: &str, i: usize) -> String {
        let r = &self.fam.results[i];
        match which {
            "image" => r.image.to_string(),
            _ => r.psi.to_string(),
        }
    }

    /// Compares a per-x set (`image` or `psi`) with a literal or leader-dependent template.
    fn check_sets(&self, which: &str, idx: &[usize], rhs: &str) -> Result<Option<String>, String> {
        let tpl = self.inst.set_template(rhs).map_err(|e| e.to_string())?;
        for &i in idx {
            let want: ExtendedRealSet<S> = tpl.eval(&self.rep.xs[i]).map_err(|e| e.to_string())?;
            let got = self.set_of(which, i);
            let matches = match (which, &self.fam.results[i].psi) {
                ("psi", YSet::Points(pts)) => {
                    pts.iter().all(|p| want.contains(p[0])) && pts.len() == want.intervals().len() && want.intervals().iter().all(|iv| iv.is_point())
                }
                _ => got == want.to_string(),
            };
            if !matches {
                return Ok(Some(format!("{which}({}) = {got}, expected {want}", point_text(&self.rep.xs[i]))));
            }
        }
        Ok(None)
    }

    fn check_values(&self, which: &str, idx: &[usize], rhs: &str) -> Result<Option<String>, String> {
        let e = parse(rhs).map_err(|e| format!("`{rhs}`: {e}"))?;
        let slots: Vec<&str> = self.inst.leader_names().iter().map(String::as_str).collect();
        let f = Compiled::<S>::compile(&e, &slots, &self.consts).map_err(|e| e.to_string())?;
        let tol = S::lit(1e-9);
        for &i in idx {
            let x = &self.rep.xs[i];
            let want = f.eval(x).map_err(|e| e.to_string())?;
            let got = if which == "F_o" { self.rep.f_o[i].value } else { self.rep.f_p[i].value };
            let close = got == want || (got - want).abs() <= tol * want.abs().max(S::one());
            if !close {
                return Ok(Some(format!("{which}({}) = {}, expected {}", point_text(x), fmt_scalar(got), fmt_scalar(want))));
            }
        }
        Ok(None)
    }

    /// `Ok(None)` on success, `Ok(Some(actual))` on mismatch, `Err` for malformed statements.
    fn check(&self, text: &str) -> Result<Option<String>, String> {
        let text = text.trim();
        if text == "spne == none" {
            return Ok((!self.inst.spne_none()).then(|| "no `spne = none` assertion in [analysis]".into()));
        }
        if let Some(rest) = text.strip_prefix("diagnostic ") {
            let (concept, needle) = rest.split_once('~').ok_or("diagnostic needs `concept ~ \"text\"`")?;
            let needle = needle.trim().trim_matches('"');
            let c = Concept::from_name(concept.trim()).ok_or_else(|| format!("unknown concept `{}`", concept.trim()))?;
            let msgs: Vec<&str> = self.rep.diagnostics_for(c).map(|d| d.message.as_str()).collect();
            return Ok((!msgs.iter().any(|m| m.contains(needle))).then(|| format!("diagnostics: {msgs:?}")));
        }
        for (op, want) in [(" has ", true), (" lacks ", false)] {
            if let Some((lhs, rhs)) = text.split_once(op) {
                let (pt, r) = rhs.split_once('@').ok_or("membership needs `@ radius`")?;
                let r = self.radius(r.trim())?;
                let p = self.point(pt)?;
                let pts = self.concept_points(lhs.trim(), Some(r))?;
                return Ok((pts.contains(&p) != want).then(|| Self::points_text(&pts)));
            }
        }
        let (lhs, rhs) = text.split_once("==").ok_or("statement needs `==`, `has` or `lacks`")?;
        let (lhs, rhs) = (lhs.trim(), rhs.trim());
        for which in ["image", "psi", "F_o", "F_p"] {
            let Some(rest) = lhs.strip_prefix(which) else { continue };
            let rest = rest.trim();
            let idx = if rest.is_empty() {
                self.selected(None)?
            } else if let Some(cond) = rest.strip_prefix("where ") {
                self.selected(Some(cond))?
            } else if let Some(arg) = rest.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
                vec![self.index_of(&self.point(&format!("({arg})"))?)?]
            } else {
                return Err(format!("cannot read `{lhs}`"));
            };
            return if which.starts_with("F_") { self.check_values(which, &idx, rhs) } else { self.check_sets(which, &idx, rhs) };
        }
        let (rhs, r) = match rhs.rsplit_once('@') {
            Some((set, r)) => (set.trim(), Some(self.radius(r.trim())?)),
            None => (rhs, None),
        };
        let got = self.concept_points(lhs, r)?;
        let matches = match self.point_set(rhs)? {
            Some(want) => got == want,
            None => got.len() == self.rep.xs.len(),
        };
        Ok((!matches).then(|| Self::points_text(&got)))
    }
}

/// Evaluates the `[golden]` statements of an instance against its report.
pub fn check_goldens<S: Scalar>(inst: &BilevelInstance<S>, fam: &ImageFamily<S>, rep: &ConceptReport<S>) -> Vec<GoldenOutcome> {
    let g = Golden { inst, fam, rep, consts: inst.spec().constants.iter().cloned().collect() };
    inst.spec()
        .goldens
        .iter()
        .map(|line| {
            let (passed, actual) = match g.check(&line.text) {
                Ok(None) => (true, None),
                Ok(Some(a)) => (false, Some(a)),
                Err(e) => (false, Some(format!("malformed statement: {e}"))),
            };
            GoldenOutcome { line: line.loc.0, statement: line.text.clone(), passed, actual }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Suites

#[derive(Debug, Clone, PartialEq)]
pub enum FileVerdict {
    Bilevel { matrix: ImplicationMatrix<f64>, goldens: Vec<GoldenOutcome> },
    Game { equilibria: usize, uncovered: usize },
    Robust { holds: bool },
    Error(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileReport {
    pub path: PathBuf,
    pub verdict: FileVerdict,
}

impl FileReport {
    pub fn passed(&self) -> bool {
        match &self.verdict {
            FileVerdict::Bilevel { matrix, goldens } => matrix.is_clean() && goldens.iter().all(|g| g.passed),
            FileVerdict::Game { .. } => true,
            FileVerdict::Robust { holds } => *holds,
            FileVerdict::Error(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub files: Vec<FileReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.files.iter().all(FileReport::passed)
    }
}

/// Matrix and goldens for one bilevel instance.
pub fn verify_instance<S: Scalar>(inst: &BilevelInstance<S>) -> Result<(ImplicationMatrix<S>, Vec<GoldenOutcome>), String> {
    let fam = image_family(inst).map_err(|e| e.to_string())?;
    let rep = analyze(inst, &fam).map_err(|e| e.to_string())?;
    Ok((run_matrix(inst, &fam, &rep), check_goldens(inst, &fam, &rep)))
}

pub fn verify_file(path: &Path, transform: &dyn Fn(&BilevelInstance<f64>) -> Result<BilevelInstance<f64>, ModelError>) -> FileReport {
    let verdict = match std::fs::read_to_string(path) {
        Err(e) => FileVerdict::Error(e.to_string()),
        Ok(text) => match path.extension().and_then(|e| e.to_str()) {
            Some("game") => match GameTree::parse(&text).and_then(|g| correspondence_report(&g)) {
                Ok(c) => FileVerdict::Game { equilibria: c.spne.len(), uncovered: c.uncovered.len() },
                Err(e) => FileVerdict::Error(e.to_string()),
            },
            Some("rob") => match UncertainProblem::parse(&text).map_err(|e| e.to_string()).and_then(|p| verify_triangle::<f64>(&p).map_err(|e| e.to_string())) {
                Ok(v) => FileVerdict::Robust { holds: v.holds() },
                Err(e) => FileVerdict::Error(e),
            },
            _ => match BilevelInstance::<f64>::load(&text).and_then(|i| transform(&i)) {
                Err(e) => FileVerdict::Error(e.to_string()),
                Ok(inst) => match verify_instance(&inst) {
                    Ok((matrix, goldens)) => FileVerdict::Bilevel { matrix, goldens },
                    Err(e) => FileVerdict::Error(e),
                },
            },
        },
    };
    FileReport { path: path.to_path_buf(), verdict }
}

pub const SUITE_EXTENSIONS: [&str; 3] = ["blv", "game", "rob"];

/// Verifies a single file or every problem, game and robust file in a directory, in path order.
pub fn run_goldens(
    path: &Path,
    transform: &dyn Fn(&BilevelInstance<f64>) -> Result<BilevelInstance<f64>, ModelError>,
) -> std::io::Result<SuiteReport> {
    let mut paths = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path)? {
            let p = entry?.path();
            if p.extension().and_then(|e| e.to_str()).map_or(false, |e| SUITE_EXTENSIONS.contains(&e)) {
                paths.push(p);
            }
        }
        paths.sort();
    } else {
        paths.push(path.to_path_buf());
    }
    Ok(SuiteReport { files: paths.iter().map(|p| verify_file(p, transform)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLOOR: &str = "name = floor\n[leader]\nx = 0, 1, 0.5\n[follower]\ny = 0, 1, 0.25\n[objectives]\n\
        upper = cases { x < 1 -> x - y; else -> y - x }\nlower = floor(x + y)\n[psi]\nmode = symbolic\n\
        piece = x < 1 -> [0, 1 - x)\npiece = x = 1 -> [0, 1)\n[golden]\n\
        expect = real_optimistic == {0, 1}\nexpect = l_minimal == {1}\nexpect = standard_optimistic == {(1, 0)}\n\
        expect = vector == {(1, -1)}\nexpect = image where x < 1 == (2*x - 1, x]\nexpect = image(1) == [-1, 0)\n\
        expect = Q == {0, 1}\nexpect = T == {1}\nexpect = psi(0.5) == [0, 0.5)\n";

    fn run(src: &str) -> (ImplicationMatrix<f64>, Vec<GoldenOutcome>) {
        verify_instance(&BilevelInstance::<f64>::load(src).unwrap()).unwrap()
    }

    #[test]
    fn floor_converse_is_not_asserted() {
        let (m, g) = run(FLOOR);
        assert!(g.iter().all(|o| o.passed), "{g:?}");
        let conv = m.claim("closed_real_optimistic_to_l_minimal").next().unwrap();
        assert_eq!(conv.hypothesis, HypothesisStatus::Fails);
        assert!(!conv.conclusion);
        assert!(m.is_clean(), "{:?}", m.violations().collect::<Vec<_>>());
        assert!(m.claim("grid_symbolic_consistency").next().unwrap().conclusion);
    }

    #[test]
    fn failing_golden_reports_actual_value() {
        let src = FLOOR.replace("l_minimal == {1}", "l_minimal == {0}");
        let (_, g) = run(&src);
        let bad: Vec<&GoldenOutcome> = g.iter().filter(|o| !o.passed).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].actual.as_deref(), Some("{1}"));
    }

    #[test]
    fn malformed_goldens_fail() {
        let src = FLOOR.replace("T == {1}", "nonsense == {1}");
        let (_, g) = run(&src);
        assert!(g.iter().any(|o| !o.passed && o.actual.as_deref().unwrap().starts_with("malformed")));
    }

    #[test]
    fn local_membership_statements() {
        let src = "[leader]\nx = -1, 1, 0.25\n[follower]\ny = 0, 1, 0.25\n[objectives]\n\
            upper = cases { y > 0.5 -> x - y; else -> x^2 + y^2 }\nlower = x*y\n[psi]\nmode = symbolic\n\
            piece = x < 0 -> {1}\npiece = x = 0 -> [0, 1]\npiece = x > 0 -> {0}\n[analysis]\nradii = 1/3, 0.5\n\
            [golden]\nexpect = local_standard_optimistic has (0, 0) @ 1/3\nexpect = l_minimal == {-1}\n\
            expect = F_o where x > 0 == x^2\nexpect = diagnostic vector ~ \"nothing\"\n";
        let (m, g) = run(src);
        assert!(m.is_clean());
        assert!(g[0].passed && g[1].passed && g[2].passed, "{g:?}");
        assert!(!g[3].passed);
    }
}
