#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use bilevel_core::expr::Compiled;
use bilevel_core::games::{correspondence_report, spne_enumerate, GameTree, StrategyProfile};
use bilevel_core::lower::image_family;
use bilevel_core::model::DimSpec;
use bilevel_core::robust::{verify_triangle, UncertainProblem};
use bilevel_core::setreal::{Endpoint, ExtendedRealSet, Interval};
use bilevel_core::solutions::{analyze, ConceptReport};
use bilevel_core::verify::run_matrix;
use bilevel_core::{Instance, RealSet};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

pub fn problem(name: &str) -> String {
    std::fs::read_to_string(problems_dir().join(name)).unwrap()
}

/// Union of up to three intervals with integer endpoints in [-5, 5], occasionally unbounded.
pub fn random_set(rng: &mut impl Rng) -> RealSet {
    let n = rng.gen_range(1..=3);
    let mut raw = Vec::new();
    for _ in 0..n {
        let a = rng.gen_range(-5..=5) as f64;
        let b = rng.gen_range(-5..=5) as f64;
        let (mut lo, mut hi) = (a.min(b), a.max(b));
        if rng.gen_ratio(1, 8) {
            lo = f64::NEG_INFINITY;
        }
        if rng.gen_ratio(1, 8) {
            hi = f64::INFINITY;
        }
        let lo_closed = lo.is_finite() && (lo == hi || rng.gen_bool(0.5));
        let hi_closed = hi.is_finite() && (lo == hi || rng.gen_bool(0.5));
        raw.push(Interval::new(Endpoint::new(lo, lo_closed), Endpoint::new(hi, hi_closed)).unwrap());
    }
    ExtendedRealSet::canonicalize(raw).unwrap()
}

/// Quarter-integer sample points covering every piece of a [`random_set`] set.
pub fn samples() -> Vec<f64> {
    (-48..=48).map(|k| k as f64 / 4.0).collect()
}

/// `B ⊆ A + [0, ∞)` decided on the sample lattice.
pub fn oracle_leq_l(a: &RealSet, b: &RealSet) -> bool {
    let pts = samples();
    pts.iter().filter(|&&t| b.contains(t)).all(|&t| pts.iter().any(|&s| s <= t && a.contains(s)))
}

/// `A ⊆ B - [0, ∞)` decided on the sample lattice.
pub fn oracle_leq_u(a: &RealSet, b: &RealSet) -> bool {
    let pts = samples();
    pts.iter().filter(|&&t| a.contains(t)).all(|&t| pts.iter().any(|&s| s >= t && b.contains(s)))
}

fn term(rng: &mut impl Rng, pool: &[&str], max_coef: i32) -> Option<String> {
    let c = rng.gen_range(-max_coef..=max_coef);
    if c == 0 {
        return None;
    }
    Some(format!("({c})*{}", pool.choose(rng).unwrap()))
}

fn combination(rng: &mut impl Rng, pool: &[&str], max_coef: i32, terms: usize) -> String {
    let parts: Vec<String> = (0..terms).filter_map(|_| term(rng, pool, max_coef)).collect();
    let body = if parts.is_empty() { "0".to_string() } else { parts.join(" + ") };
    format!("({body})/{}", rng.gen_range(1..=3))
}

/// Finite bilevel problem on integer grids with at most 30 leader and 30 follower points.
#[derive(Debug, Clone)]
pub struct FiniteCase {
    pub text: String,
    pub nx: usize,
    pub ny: usize,
    /// Follower points satisfy `y <= x + slack`.
    pub slack: Option<usize>,
}

pub fn random_finite_problem(rng: &mut impl Rng, id: usize) -> FiniteCase {
    let nx = rng.gen_range(1..=30);
    let ny = rng.gen_range(1..=30);
    let upper = combination(rng, &["x", "y", "x*y", "x^2", "y^2", "abs(x - y)", "floor(x/2)", "floor((x + y)/3)"], 3, 3);
    let lower = combination(rng, &["x*y", "y^2", "y", "floor(y/2)", "floor(y/3)", "abs(y - x)", "abs(2*y - x)", "x*floor(y/4)"], 2, 3);
    let mut text = format!("name = random {id}\n[leader]\nx = 0, {}, 1\n[follower]\ny = 0, {}, 1\n", nx - 1, ny - 1);
    let slack = rng.gen_bool(0.3).then(|| rng.gen_range(0..=3));
    if let Some(k) = slack {
        text.push_str(&format!("where = y <= x + {k}\n"));
    }
    text.push_str(&format!("[objectives]\nupper = {upper}\nlower = {lower}\n[analysis]\nradii = 1.5, 3.5\n"));
    FiniteCase { text, nx, ny, slack }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn argmin_close(v: &[f64]) -> Vec<usize> {
    let m = v.iter().copied().fold(f64::INFINITY, f64::min);
    (0..v.len()).filter(|&i| close(v[i], m)).collect()
}

/// Brute-force solution concepts of a finite case, checked against the engine
/// and the implication matrix.
pub fn check_finite_case(case: &FiniteCase) -> Result<(), String> {
    let inst = Instance::load(&case.text).map_err(|e| e.to_string())?;
    let fam = image_family(&inst).map_err(|e| e.to_string())?;
    let rep = analyze(&inst, &fam).map_err(|e| e.to_string())?;
    let matrix = run_matrix(&inst, &fam, &rep);
    if let Some(c) = matrix.violations().next() {
        return Err(format!("claim {} violated at {}: {:?}", c.id, c.scope, c.details));
    }

    let eval = |x: usize, y: usize| -> (f64, f64) {
        let args = [x as f64, y as f64];
        (inst.upper().eval(&args).unwrap(), inst.lower().eval(&args).unwrap())
    };
    let mut graph: Vec<Vec<(usize, f64)>> = Vec::new();
    for x in 0..case.nx {
        let ys: Vec<usize> = (0..case.ny).filter(|&y| case.slack.map_or(true, |k| y <= x + k)).collect();
        let vals: Vec<(f64, f64)> = ys.iter().map(|&y| eval(x, y)).collect();
        let fmin = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        graph.push(ys.iter().zip(&vals).filter(|(_, v)| close(v.1, fmin)).map(|(&y, v)| (y, v.0)).collect());
    }
    let f_o: Vec<f64> = graph.iter().map(|g| g.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)).collect();
    let f_p: Vec<f64> = graph.iter().map(|g| g.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)).collect();

    for x in 0..case.nx {
        if !close(rep.f_o[x].value, f_o[x]) || !close(rep.f_p[x].value, f_p[x]) {
            return Err(format!("value functions differ at x = {x}"));
        }
    }
    let ro = argmin_close(&f_o);
    let rp = argmin_close(&f_p);
    let same = |name: &str, got: &[usize], want: &[usize]| -> Result<(), String> {
        let mut g = got.to_vec();
        g.sort_unstable();
        if g != want {
            return Err(format!("{name}: engine {g:?}, oracle {want:?}"));
        }
        Ok(())
    };
    same("real optimistic", &rep.real_optimistic, &ro)?;
    same("real pessimistic", &rep.real_pessimistic, &rp)?;
    same("l-minimal", &rep.l_minimal, &ro)?;
    same("u-minimal", &rep.u_minimal, &rp)?;

    let best = f_o.iter().copied().fold(f64::INFINITY, f64::min);
    let mut so: Vec<(usize, usize)> =
        graph.iter().enumerate().flat_map(|(x, g)| g.iter().filter(|p| close(p.1, best)).map(move |p| (x, p.0))).collect();
    let mut got: Vec<(usize, usize)> = rep.standard_optimistic.iter().map(|p| (p.index, p.y[0] as usize)).collect();
    so.sort_unstable();
    got.sort_unstable();
    if so != got {
        return Err(format!("standard optimistic: engine {got:?}, oracle {so:?}"));
    }

    let rmax = *inst.radii().last().unwrap();
    for (global, local) in [
        (&rep.real_optimistic, &rep.local_real_optimistic),
        (&rep.real_pessimistic, &rep.local_real_pessimistic),
        (&rep.l_minimal, &rep.local_l_minimal),
        (&rep.u_minimal, &rep.local_u_minimal),
    ] {
        let at = ConceptReport::local_at(local, rmax);
        if let Some(x) = global.iter().find(|x| !at.contains(x)) {
            return Err(format!("global solution {x} is not local at radius {rmax}"));
        }
    }

    for &r in inst.radii() {
        let reach = (r - 1e-6).floor() as usize;
        let local_best = |v: &[f64], x: usize| (x.saturating_sub(reach)..=(x + reach).min(case.nx - 1)).all(|j| !(v[j] < v[x] && !close(v[j], v[x])));
        let lro: Vec<usize> = (0..case.nx).filter(|&x| local_best(&f_o, x)).collect();
        let lrp: Vec<usize> = (0..case.nx).filter(|&x| local_best(&f_p, x)).collect();
        same("local real optimistic", &ConceptReport::local_at(&rep.local_real_optimistic, r), &lro)?;
        same("local real pessimistic", &ConceptReport::local_at(&rep.local_real_pessimistic, r), &lrp)?;
        same("local l-minimal", &ConceptReport::local_at(&rep.local_l_minimal, r), &lro)?;
        same("local u-minimal", &ConceptReport::local_at(&rep.local_u_minimal, r), &lrp)?;

        let mut lso = Vec::new();
        for (x, g) in graph.iter().enumerate() {
            for &(y, v) in g {
                let beaten = graph.iter().enumerate().any(|(x2, g2)| {
                    g2.iter().any(|&(y2, v2)| x.abs_diff(x2) + y.abs_diff(y2) <= reach && v2 < v && !close(v2, v))
                });
                if !beaten {
                    lso.push((x, y));
                }
            }
        }
        let mut got: Vec<(usize, usize)> = rep
            .local_standard_optimistic
            .iter()
            .filter(|p| p.radius.unwrap() <= r && r <= p.reach.unwrap())
            .map(|p| (p.index, p.y[0] as usize))
            .collect();
        got.sort_unstable();
        if lso != got {
            return Err(format!("local standard optimistic at {r}: engine {got:?}, oracle {lso:?}"));
        }
    }
    Ok(())
}

/// Two-stage game text with 1 to 4 leader moves, 1 to 4 replies each and costs in 0..=3.
pub fn random_game(rng: &mut impl Rng) -> String {
    let mut text = String::new();
    for x in 0..rng.gen_range(1..=4) {
        for y in 0..rng.gen_range(1..=4) {
            text.push_str(&format!("L{x}.R{y} = {}, {}\n", rng.gen_range(0..=3), rng.gen_range(0..=3)));
        }
    }
    text
}

/// Robust problem over integer decisions and scenarios, at most 20 of each.
pub fn random_robust(rng: &mut impl Rng, id: usize) -> String {
    let s0 = rng.gen_range(-5..=0);
    let s1 = s0 + rng.gen_range(0..=19);
    let u0 = rng.gen_range(-5..=0);
    let u1 = u0 + rng.gen_range(0..=19);
    let phi = combination(rng, &["x", "xi", "x*xi", "x^2", "xi^2", "abs(x - xi)", "abs(x + xi)"], 3, 3);
    format!("name = robust {id}\n[decision]\nx = {s0}, {s1}, 1\n[uncertainty]\nxi = {u0}, {u1}, 1\n[objective]\nphi = {phi}\n")
}

/// Subgame perfect equilibria by brute force over every strategy profile,
/// checked against the engine, plus the bilevel correspondences for finite games.
pub fn check_game(text: &str) -> Result<(), String> {
    let g = GameTree::parse(text).map_err(|e| e.to_string())?;
    let n = g.leader_moves.len();
    let mut policies: Vec<Vec<usize>> = vec![vec![]];
    for x in 0..n {
        policies = policies.iter().flat_map(|p| (0..g.costs[x].len()).map(move |y| [p.clone(), vec![y]].concat())).collect();
    }
    let mut oracle = Vec::new();
    for policy in &policies {
        let subgame_optimal = (0..n).all(|x| g.costs[x].iter().all(|c| c.1 >= g.costs[x][policy[x]].1));
        if !subgame_optimal {
            continue;
        }
        for x in 0..n {
            if (0..n).all(|x2| g.costs[x2][policy[x2]].0 >= g.costs[x][policy[x]].0) {
                oracle.push(StrategyProfile { leader: x, policy: policy.clone() });
            }
        }
    }
    let mut engine = spne_enumerate(&g);
    engine.sort();
    oracle.sort();
    if engine != oracle {
        return Err(format!("equilibria differ: engine {}, oracle {}", engine.len(), oracle.len()));
    }
    let c = correspondence_report(&g).map_err(|e| e.to_string())?;
    for m in c.standard_optimistic.iter().chain(&c.real_optimistic).chain(&c.real_pessimistic) {
        if m.spne.is_empty() {
            return Err(format!("solution with leader {} and reply {:?} has no equilibrium", m.leader, m.reply));
        }
    }
    Ok(())
}

/// Min-max and optimistic robust solutions by a direct double loop, checked
/// against the engine and both bilevel reformulations.
pub fn check_robust(text: &str) -> Result<(), String> {
    let p = UncertainProblem::parse(text).map_err(|e| e.to_string())?;
    let v = verify_triangle::<f64>(&p).map_err(|e| e.to_string())?;
    if !v.holds() {
        return Err("bilevel reformulations disagree with the robust counterparts".into());
    }
    let phi = Compiled::<f64>::compile(&p.objective, &["x", "xi"], &HashMap::new()).map_err(|e| e.to_string())?;
    let range = |d: &DimSpec| -> Vec<f64> {
        let num = |e: &bilevel_core::expr::Expr| Compiled::<f64>::compile(e, &[], &HashMap::new()).unwrap().eval(&[]).unwrap();
        let (lo, hi, step) = (num(&d.lo), num(&d.hi), num(&d.step));
        (0..).map(|k| lo + k as f64 * step).take_while(|v| *v <= hi + 1e-9).collect()
    };
    let xs = range(&p.decision[0]);
    let us = range(&p.uncertainty[0]);
    let worst: Vec<f64> = xs.iter().map(|&x| us.iter().map(|&u| phi.eval(&[x, u]).unwrap()).fold(f64::NEG_INFINITY, f64::max)).collect();
    let best: Vec<f64> = xs.iter().map(|&x| us.iter().map(|&u| phi.eval(&[x, u]).unwrap()).fold(f64::INFINITY, f64::min)).collect();
    let pick = |v: &[f64]| -> Vec<f64> { argmin_close(v).into_iter().map(|i| xs[i]).collect() };
    let got = |s: &[usize]| -> Vec<f64> { s.iter().map(|&i| v.report.xs[i][0]).collect() };
    if got(&v.report.minmax_solutions) != pick(&worst) || got(&v.report.optimistic_solutions) != pick(&best) {
        return Err("robust solutions differ from the direct double loop".into());
    }
    Ok(())
}
