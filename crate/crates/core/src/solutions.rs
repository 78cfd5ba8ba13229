//! Solution concepts decided from an image family.
//!
//! Local concepts quantify over the grid points inside an open ball whose
//! radius comes from the instance schedule. A point that is minimal in some
//! ball is minimal in every smaller one, so each local solution records the
//! smallest schedule radius that witnesses it (`radius`) and the largest one
//! (`reach`).

use std::fmt;

use rayon::prelude::*;

use crate::lower::{image_over, ImageFamily, LowerError, Member, YSet};
use crate::model::{distance, BilevelInstance};
use crate::scalar::{fmt_scalar, Scalar};
use crate::setreal::{minimal_members, Endpoint, ExtendedRealSet, Extremum, Interval, OrderVerdict, SetOrder};

/// Relative shrink applied to every radius so that grid points at exactly
/// the radius, up to rounding, fall outside the open ball.
const BALL_SHRINK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Concept {
    RealOptimistic,
    RealPessimistic,
    StandardOptimistic,
    LMinimal,
    UMinimal,
    Vector,
}

impl Concept {
    pub const ALL: [Concept; 6] = [
        Concept::RealOptimistic,
        Concept::RealPessimistic,
        Concept::StandardOptimistic,
        Concept::LMinimal,
        Concept::UMinimal,
        Concept::Vector,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Concept::RealOptimistic => "real_optimistic",
            Concept::RealPessimistic => "real_pessimistic",
            Concept::StandardOptimistic => "standard_optimistic",
            Concept::LMinimal => "l_minimal",
            Concept::UMinimal => "u_minimal",
            Concept::Vector => "vector",
        }
    }

    pub fn from_name(s: &str) -> Option<Concept> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A local solution given by a leader grid index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPoint<S> {
    pub index: usize,
    pub radius: S,
    pub reach: S,
}

/// A standard optimistic solution `(x, y)` with `F(x, y) = value`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSolution<S> {
    pub index: usize,
    pub y: Vec<S>,
    pub value: S,
    /// `y` is the only solution-set point reaching `value` at this `x`.
    pub strict: bool,
    pub radius: Option<S>,
    pub reach: Option<S>,
}

/// A vector solution `(x, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSolution<S> {
    pub index: usize,
    pub z: S,
    pub radius: Option<S>,
    pub reach: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub concept: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ConceptReport<S> {
    pub xs: Vec<Vec<S>>,
    pub radii: Vec<S>,
    pub f_o: Vec<Extremum<S>>,
    pub f_p: Vec<Extremum<S>>,
    pub real_optimistic: Vec<usize>,
    pub local_real_optimistic: Vec<LocalPoint<S>>,
    pub real_pessimistic: Vec<usize>,
    pub local_real_pessimistic: Vec<LocalPoint<S>>,
    pub standard_optimistic: Vec<PairSolution<S>>,
    pub local_standard_optimistic: Vec<PairSolution<S>>,
    pub l_minimal: Vec<usize>,
    pub local_l_minimal: Vec<LocalPoint<S>>,
    pub u_minimal: Vec<usize>,
    pub local_u_minimal: Vec<LocalPoint<S>>,
    pub vector: Vec<VectorSolution<S>>,
    pub local_vector: Vec<VectorSolution<S>>,
    pub q: Vec<usize>,
    pub t: Vec<usize>,
    pub q_hat: Vec<usize>,
    pub t_hat: Vec<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

impl<S: Scalar> ConceptReport<S> {
    /// Leader indices of a local x-based concept whose witness holds at radius `r`.
    pub fn local_at(points: &[LocalPoint<S>], r: S) -> Vec<usize> {
        points.iter().filter(|p| p.radius <= r && r <= p.reach).map(|p| p.index).collect()
    }

    pub fn global_indices(&self, c: Concept) -> Vec<usize> {
        let mut v = match c {
            Concept::RealOptimistic => self.real_optimistic.clone(),
            Concept::RealPessimistic => self.real_pessimistic.clone(),
            Concept::LMinimal => self.l_minimal.clone(),
            Concept::UMinimal => self.u_minimal.clone(),
            Concept::StandardOptimistic => self.standard_optimistic.iter().map(|p| p.index).collect(),
            Concept::Vector => self.vector.iter().map(|p| p.index).collect(),
        };
        v.dedup();
        v
    }

    pub fn local_indices(&self, c: Concept) -> Vec<usize> {
        let mut v: Vec<usize> = match c {
            Concept::RealOptimistic => self.local_real_optimistic.iter().map(|p| p.index).collect(),
            Concept::RealPessimistic => self.local_real_pessimistic.iter().map(|p| p.index).collect(),
            Concept::LMinimal => self.local_l_minimal.iter().map(|p| p.index).collect(),
            Concept::UMinimal => self.local_u_minimal.iter().map(|p| p.index).collect(),
            Concept::StandardOptimistic => self.local_standard_optimistic.iter().map(|p| p.index).collect(),
            Concept::Vector => self.local_vector.iter().map(|p| p.index).collect(),
        };
        v.dedup();
        v
    }

    pub fn diagnostics_for(&self, c: Concept) -> impl Iterator<Item = &Diagnostic> {
        let name = c.name();
        self.diagnostics.iter().filter(move |d| d.concept == name)
    }
}

fn shrink<S: Scalar>(r: S) -> S {
    r * (S::one() - S::lit(BALL_SHRINK))
}

/// Grid indices within the open ball of radius `r` around `xs[i]`, with distances.
/// Relies on the lexicographic grid order: the first coordinate is nondecreasing.
pub fn neighbours<S: Scalar>(xs: &[Vec<S>], i: usize, r: S) -> Vec<(usize, S)> {
    let r = shrink(r);
    let c = &xs[i];
    let mut out = vec![(i, S::zero())];
    for j in (0..i).rev() {
        if c[0] - xs[j][0] >= r {
            break;
        }
        let d = distance(&xs[j], c);
        if d < r {
            out.push((j, d));
        }
    }
    for (j, x) in xs.iter().enumerate().skip(i + 1) {
        if x[0] - c[0] >= r {
            break;
        }
        let d = distance(x, c);
        if d < r {
            out.push((j, d));
        }
    }
    out.sort_by_key(|p| p.0);
    out
}

fn argmin<S: Scalar>(values: &[S]) -> Vec<usize> {
    let best = values.iter().copied().fold(S::infinity(), S::min);
    (0..values.len()).filter(|&i| values[i] == best).collect()
}

fn reach_of<S: Scalar>(radii: &[S], nearest_rival: Option<S>) -> Option<(S, S)> {
    let ok: Vec<S> = radii.iter().copied().filter(|r| nearest_rival.map_or(true, |d| d >= shrink(*r))).collect();
    Some((*ok.first()?, *ok.last()?))
}

/// Local minimality over the schedule: `i` is a solution at radius `r` when no
/// grid point `j` in the ball satisfies `beats(j, i)`.
pub fn local_points<S, B>(xs: &[Vec<S>], radii: &[S], candidate: impl Fn(usize) -> bool + Sync, beats: B) -> Vec<LocalPoint<S>>
where
    S: Scalar,
    B: Fn(usize, usize) -> bool + Sync,
{
    let rmax = *radii.last().expect("radius schedule is nonempty");
    (0..xs.len())
        .into_par_iter()
        .map(|i| {
            if !candidate(i) {
                return None;
            }
            let rival = neighbours(xs, i, rmax)
                .into_iter()
                .filter(|&(j, _)| j != i && beats(j, i))
                .map(|(_, d)| d)
                .fold(None, |m: Option<S>, d| Some(m.map_or(d, |m| m.min(d))));
            reach_of(radii, rival).map(|(radius, reach)| LocalPoint { index: i, radius, reach })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn real_optimistic_global<S: Scalar>(family: &ImageFamily<S>) -> Vec<usize> {
    argmin(&family.results.iter().map(|r| r.inf.value).collect::<Vec<_>>())
}

pub fn real_pessimistic_global<S: Scalar>(family: &ImageFamily<S>) -> Vec<usize> {
    argmin(&family.results.iter().map(|r| r.sup.value).collect::<Vec<_>>())
}

pub fn real_optimistic_local<S: Scalar>(family: &ImageFamily<S>, radii: &[S]) -> Vec<LocalPoint<S>> {
    let xs = xs_of(family);
    let r = &family.results;
    local_points(&xs, radii, |_| true, |j, i| r[j].inf.value < r[i].inf.value)
}

pub fn real_pessimistic_local<S: Scalar>(family: &ImageFamily<S>, radii: &[S]) -> Vec<LocalPoint<S>> {
    let xs = xs_of(family);
    let r = &family.results;
    local_points(&xs, radii, |_| true, |j, i| r[j].sup.value < r[i].sup.value)
}

pub fn set_minimal_global<S: Scalar>(family: &ImageFamily<S>, order: SetOrder) -> Vec<usize> {
    minimal_members(&family.images(), order)
}

pub fn set_minimal_local<S: Scalar>(family: &ImageFamily<S>, radii: &[S], order: SetOrder) -> Vec<LocalPoint<S>> {
    let xs = xs_of(family);
    let r = &family.results;
    local_points(&xs, radii, |_| true, |j, i| {
        r[j].image.leq(&r[i].image, order) && !r[i].image.leq(&r[j].image, order)
    })
}

/// Pairs `(x, z)` with `z` the attained minimum of the union of all image sets.
pub fn vector_global<S: Scalar>(family: &ImageFamily<S>) -> (Vec<VectorSolution<S>>, Option<Diagnostic>) {
    let z = family.results.iter().map(|r| r.inf.value).fold(S::infinity(), S::min);
    let sols: Vec<VectorSolution<S>> = family
        .results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.inf.value == z && r.inf.attained)
        .map(|(index, _)| VectorSolution { index, z, radius: None, reach: None })
        .collect();
    let diag = sols.is_empty().then(|| Diagnostic {
        concept: Concept::Vector.name().into(),
        message: format!("infimum {} unattained", fmt_scalar(z)),
    });
    (sols, diag)
}

pub fn vector_local<S: Scalar>(family: &ImageFamily<S>, radii: &[S]) -> Vec<VectorSolution<S>> {
    let xs = xs_of(family);
    let r = &family.results;
    local_points(&xs, radii, |i| r[i].inf.attained, |j, i| r[j].inf.value < r[i].inf.value)
        .into_iter()
        .map(|p| VectorSolution { index: p.index, z: r[p.index].inf.value, radius: Some(p.radius), reach: Some(p.reach) })
        .collect()
}

fn strict_at<S: Scalar>(family: &ImageFamily<S>, i: usize, value: S) -> bool {
    let r = &family.results[i];
    r.inf.attained && r.inf.value == value && r.members.iter().filter(|m| m.value <= value).count() == 1
}

/// Pairs minimizing the upper objective over the graph of the solution map.
pub fn standard_optimistic_global<S: Scalar>(family: &ImageFamily<S>) -> (Vec<PairSolution<S>>, Option<Diagnostic>) {
    let v = family.results.iter().map(|r| r.inf.value).fold(S::infinity(), S::min);
    let mut sols = Vec::new();
    for (i, r) in family.results.iter().enumerate() {
        if r.inf.value == v && r.inf.attained {
            for m in r.witnesses(v) {
                sols.push(PairSolution {
                    index: i,
                    y: m.y.clone(),
                    value: v,
                    strict: strict_at(family, i, v),
                    radius: None,
                    reach: None,
                });
            }
        }
    }
    let diag = sols.is_empty().then(|| Diagnostic {
        concept: Concept::StandardOptimistic.name().into(),
        message: format!("infimum {} unattained", fmt_scalar(v)),
    });
    (sols, diag)
}

/// Whether `(x_i, m)` is minimal over the graph inside the product-norm ball of radius `r`.
fn pair_holds<S: Scalar>(
    inst: &BilevelInstance<S>,
    family: &ImageFamily<S>,
    xs: &[Vec<S>],
    i: usize,
    m: &Member<S>,
    r: S,
) -> Result<bool, LowerError> {
    let rs = shrink(r);
    for (j, dx) in neighbours(xs, i, r) {
        let rj = &family.results[j];
        if rj.inf.value >= m.value {
            continue;
        }
        let rho = rs - dx;
        match &rj.psi {
            YSet::Points(_) => {
                let closer = rj
                    .members
                    .iter()
                    .any(|o| o.value < m.value && dx + distance(&o.y, &m.y) < rs);
                if closer {
                    return Ok(false);
                }
            }
            YSet::Exact(psi) => {
                let y = m.y[0];
                let Ok(window) = Interval::new(Endpoint::open(y - rho), Endpoint::open(y + rho)) else {
                    continue;
                };
                let Some(part) = psi.intersect(&ExtendedRealSet::from_interval(window)) else { continue };
                let (img, _) = image_over(inst, &rj.x, &part)?;
                if img.inf_of().value < m.value {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

pub fn standard_optimistic_local<S: Scalar>(
    inst: &BilevelInstance<S>,
    family: &ImageFamily<S>,
    radii: &[S],
) -> Result<Vec<PairSolution<S>>, LowerError> {
    let xs = xs_of(family);
    let candidates: Vec<(usize, &Member<S>)> =
        family.results.iter().enumerate().flat_map(|(i, r)| r.members.iter().map(move |m| (i, m))).collect();
    let checked = candidates
        .par_iter()
        .map(|&(i, m)| -> Result<Option<PairSolution<S>>, LowerError> {
            let mut ok = Vec::new();
            for &r in radii {
                if !pair_holds(inst, family, &xs, i, m, r)? {
                    break;
                }
                ok.push(r);
            }
            Ok(ok.first().map(|&radius| PairSolution {
                index: i,
                y: m.y.clone(),
                value: m.value,
                strict: strict_at(family, i, m.value),
                radius: Some(radius),
                reach: ok.last().copied(),
            }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(checked.into_iter().flatten().collect())
}

fn xs_of<S: Scalar>(family: &ImageFamily<S>) -> Vec<Vec<S>> {
    family.results.iter().map(|r| r.x.clone()).collect()
}

/// Decides every concept, global and local, for the instance schedule.
pub fn analyze<S: Scalar>(inst: &BilevelInstance<S>, family: &ImageFamily<S>) -> Result<ConceptReport<S>, LowerError> {
    let radii = inst.radii().to_vec();
    let res = &family.results;
    let real_optimistic = real_optimistic_global(family);
    let real_pessimistic = real_pessimistic_global(family);
    let (standard_optimistic, so_diag) = standard_optimistic_global(family);
    let (vector, v_diag) = vector_global(family);
    let t = real_optimistic.iter().copied().filter(|&i| res[i].inf.attained).collect();
    let t_hat = real_pessimistic.iter().copied().filter(|&i| res[i].sup.attained).collect();
    Ok(ConceptReport {
        xs: xs_of(family),
        f_o: res.iter().map(|r| r.inf).collect(),
        f_p: res.iter().map(|r| r.sup).collect(),
        local_real_optimistic: real_optimistic_local(family, &radii),
        local_real_pessimistic: real_pessimistic_local(family, &radii),
        local_standard_optimistic: standard_optimistic_local(inst, family, &radii)?,
        l_minimal: set_minimal_global(family, SetOrder::Lower),
        local_l_minimal: set_minimal_local(family, &radii, SetOrder::Lower),
        u_minimal: set_minimal_global(family, SetOrder::Upper),
        local_u_minimal: set_minimal_local(family, &radii, SetOrder::Upper),
        local_vector: vector_local(family, &radii),
        q: real_optimistic.clone(),
        q_hat: real_pessimistic.clone(),
        t,
        t_hat,
        real_optimistic,
        real_pessimistic,
        standard_optimistic,
        vector,
        diagnostics: so_diag.into_iter().chain(v_diag).collect(),
        radii,
    })
}

/// Pairwise set-order verdicts `table[i][j] = compare(image_i, image_j)`.
pub fn relation_table<S: Scalar>(family: &ImageFamily<S>) -> Vec<Vec<OrderVerdict>> {
    let images = family.images();
    images.par_iter().map(|a| images.iter().map(|b| a.compare(b)).collect()).collect()
}
