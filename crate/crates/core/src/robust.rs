//! Robust counterparts of an uncertain scalar problem and their bilevel reformulations.
//!
//! File format:
//!
//! ```text
//! name = shifted square
//! [constants]
//! a = 1
//! [decision]
//! x = -1, 1, 1
//! [uncertainty]
//! xi = -1, 1, 2
//! [objective]
//! phi = (x - a * xi)^2
//! ```
//!
//! Uncertainty bounds may use constants only. The uncertainty parameter enters
//! the objective and nothing else.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{parse, Compiled, Expr};
use crate::lower::{image_family, LowerError};
use crate::model::load::{dim, entries, is_ident, Entry};
use crate::model::{BilevelInstance, DimSpec, Loc, ModelError, ProblemSpec, PsiMode};
use crate::scalar::{fmt_scalar, Scalar};
use crate::solutions::{real_optimistic_global, real_pessimistic_global};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobustError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error("objective undefined at x = {x}, xi = {xi}")]
    Undefined { x: String, xi: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertainProblem {
    pub name: String,
    pub constants: Vec<(String, f64)>,
    pub decision: Vec<DimSpec>,
    pub uncertainty: Vec<DimSpec>,
    pub objective: Expr,
}

impl UncertainProblem {
    pub fn parse(text: &str) -> Result<UncertainProblem, ModelError> {
        #[derive(PartialEq)]
        enum Sec {
            Top,
            Constants,
            Decision,
            Uncertainty,
            Objective,
        }
        let mut sec = Sec::Top;
        let mut name = "uncertain".to_string();
        let mut constants = Vec::new();
        let mut const_map = HashMap::new();
        let mut decision = Vec::new();
        let mut uncertainty = Vec::new();
        let mut objective = None;
        for entry in entries(text) {
            let v = match entry? {
                Entry::Section { line, name } => {
                    sec = match name {
                        "constants" => Sec::Constants,
                        "decision" => Sec::Decision,
                        "uncertainty" => Sec::Uncertainty,
                        "objective" => Sec::Objective,
                        _ => return Err(ModelError::Schema { line, message: format!("unknown section `[{name}]`") }),
                    };
                    continue;
                }
                Entry::Pair { key, value } => (key, value),
            };
            let (key, v) = v;
            match sec {
                Sec::Top if key == "name" => name = v.text.to_string(),
                Sec::Constants if is_ident(key) => {
                    let c = v.number(&const_map, 0, v.text)?;
                    const_map.insert(key.to_string(), c);
                    constants.push((key.to_string(), c));
                }
                Sec::Decision if is_ident(key) => decision.push(dim(&v, key)?),
                Sec::Uncertainty if is_ident(key) => uncertainty.push(dim(&v, key)?),
                Sec::Objective if key == "phi" => objective = Some(v.expr()?),
                _ => return Err(v.schema(format!("unexpected key `{key}`"))),
            }
        }
        let missing = |what: &str| ModelError::Schema { line: 0, message: format!("missing {what}") };
        if decision.is_empty() || decision.len() > 2 {
            return Err(missing("one or two decision variables"));
        }
        if uncertainty.is_empty() || uncertainty.len() > 2 {
            return Err(missing("one or two uncertainty variables"));
        }
        let objective = objective.ok_or_else(|| missing("`phi` objective"))?;
        Ok(UncertainProblem { name, constants, decision, uncertainty, objective })
    }

    fn spec(&self, suffix: &str, upper: Expr, lower: Expr) -> ProblemSpec {
        ProblemSpec {
            name: format!("{} ({suffix})", self.name),
            constants: self.constants.clone(),
            leader: self.decision.clone(),
            follower: self.uncertainty.clone(),
            feasible: None,
            upper: (upper, Loc(0)),
            lower: (lower, Loc(0)),
            psi_mode: PsiMode::Grid,
            psi: vec![],
            tolerance: Some(0.0),
            radii: None,
            grid_cap: None,
            hypotheses: vec![],
            spne_none: false,
            goldens: vec![],
        }
    }

    fn bounds<S: Scalar>(&self) -> Result<Vec<(S, S)>, ModelError> {
        let consts: HashMap<String, f64> = self.constants.iter().cloned().collect();
        self.uncertainty
            .iter()
            .map(|d| {
                let num = |e: &Expr| {
                    Compiled::<S>::compile(e, &[], &consts)
                        .and_then(|c| c.eval(&[]))
                        .map_err(|source| ModelError::Bind { line: d.loc.0, source })
                };
                Ok((num(&d.lo)?, num(&d.hi)?))
            })
            .collect()
    }
}

fn syntax(src: &str) -> Result<Expr, ModelError> {
    parse(src).map_err(|source| ModelError::Syntax { line: 0, column: source.span.column, source })
}

/// Bilevel problem whose lower level is the indicator of `U`, so that `psi(x) = U`.
pub fn build_dummy_bilevel<S: Scalar>(p: &UncertainProblem) -> Result<BilevelInstance<S>, ModelError> {
    let conds: Vec<String> = p
        .uncertainty
        .iter()
        .zip(p.bounds::<S>()?)
        .map(|(d, (lo, hi))| format!("{n} >= {} and {n} <= {}", fmt_scalar(lo), fmt_scalar(hi), n = d.name))
        .collect();
    let lower = syntax(&format!("cases {{ {} -> 0; else -> 1 }}", conds.join(" and ")))?;
    BilevelInstance::from_spec(p.spec("dummy", p.objective.clone(), lower))
}

/// `(pessimistic, optimistic)`: lower objectives `-phi` and `phi`, upper objective `phi` in both.
pub fn build_signed_bilevels<S: Scalar>(
    p: &UncertainProblem,
) -> Result<(BilevelInstance<S>, BilevelInstance<S>), ModelError> {
    let neg = syntax(&format!("-({})", p.objective))?;
    let pess = BilevelInstance::from_spec(p.spec("pessimistic", p.objective.clone(), neg))?;
    let opt = BilevelInstance::from_spec(p.spec("optimistic", p.objective.clone(), p.objective.clone()))?;
    Ok((pess, opt))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSolutionReport<S> {
    pub name: String,
    pub xs: Vec<Vec<S>>,
    pub uncertainty: Vec<Vec<S>>,
    /// Worst case `sup phi(x, .)` over `U`, per leader point.
    pub phi_p: Vec<S>,
    /// Best case `inf phi(x, .)` over `U`, per leader point.
    pub phi_o: Vec<S>,
    pub minmax_solutions: Vec<usize>,
    pub optimistic_solutions: Vec<usize>,
}

fn argmin<S: Scalar>(values: &[S]) -> Vec<usize> {
    let best = values.iter().copied().fold(S::infinity(), S::min);
    (0..values.len()).filter(|&i| values[i] == best).collect()
}

/// Tabulates both counterparts by a direct double loop over `S x U`.
pub fn solve<S: Scalar>(p: &UncertainProblem) -> Result<RobustSolutionReport<S>, RobustError> {
    let domain = build_dummy_bilevel::<S>(p)?;
    let xs = domain.leader_grid();
    let us = domain.follower_grid(&xs[0])?;
    let slots: Vec<&str> = p.decision.iter().chain(&p.uncertainty).map(|d| d.name.as_str()).collect();
    let consts: HashMap<String, f64> = p.constants.iter().cloned().collect();
    let phi = Compiled::<S>::compile(&p.objective, &slots, &consts).map_err(|source| ModelError::Bind { line: 0, source })?;
    let rows: Vec<(S, S)> = xs
        .par_iter()
        .map(|x| {
            let mut hi = S::neg_infinity();
            let mut lo = S::infinity();
            for u in &us {
                let args: Vec<S> = x.iter().chain(u).copied().collect();
                let v = phi.eval(&args).ok().filter(|v| !v.is_nan()).ok_or_else(|| RobustError::Undefined {
                    x: crate::model::point_text(x),
                    xi: crate::model::point_text(u),
                })?;
                let v = v.snap();
                hi = hi.max(v);
                lo = lo.min(v);
            }
            Ok((hi, lo))
        })
        .collect::<Result<_, RobustError>>()?;
    let phi_p: Vec<S> = rows.iter().map(|r| r.0).collect();
    let phi_o: Vec<S> = rows.iter().map(|r| r.1).collect();
    Ok(RobustSolutionReport {
        name: p.name.clone(),
        minmax_solutions: argmin(&phi_p),
        optimistic_solutions: argmin(&phi_o),
        xs,
        uncertainty: us,
        phi_p,
        phi_o,
    })
}

pub fn solve_minmax<S: Scalar>(p: &UncertainProblem) -> Result<Vec<Vec<S>>, RobustError> {
    let r = solve::<S>(p)?;
    Ok(r.minmax_solutions.iter().map(|&i| r.xs[i].clone()).collect())
}

pub fn solve_optimistic<S: Scalar>(p: &UncertainProblem) -> Result<Vec<Vec<S>>, RobustError> {
    let r = solve::<S>(p)?;
    Ok(r.optimistic_solutions.iter().map(|&i| r.xs[i].clone()).collect())
}

/// Robust solution sets next to the real optimistic and pessimistic sets of the three reformulations.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustVerdict<S> {
    pub report: RobustSolutionReport<S>,
    /// Whether the dummy lower level returns all of `U` at every leader point.
    pub dummy_psi_is_uncertainty: bool,
    pub dummy_pessimistic: Vec<usize>,
    pub dummy_optimistic: Vec<usize>,
    pub signed_pessimistic: Vec<usize>,
    pub signed_optimistic: Vec<usize>,
}

impl<S> RobustVerdict<S> {
    pub fn minmax_agrees(&self) -> bool {
        self.report.minmax_solutions == self.dummy_pessimistic && self.report.minmax_solutions == self.signed_pessimistic
    }

    pub fn optimistic_agrees(&self) -> bool {
        self.report.optimistic_solutions == self.dummy_optimistic
            && self.report.optimistic_solutions == self.signed_optimistic
    }

    pub fn holds(&self) -> bool {
        self.dummy_psi_is_uncertainty && self.minmax_agrees() && self.optimistic_agrees()
    }
}

pub fn verify_triangle<S: Scalar>(p: &UncertainProblem) -> Result<RobustVerdict<S>, RobustError> {
    let report = solve::<S>(p)?;
    let dummy = build_dummy_bilevel::<S>(p)?;
    let (pess, opt) = build_signed_bilevels::<S>(p)?;
    let grids_match = [&dummy, &pess, &opt].iter().all(|i| i.leader_grid() == report.xs);
    if !grids_match {
        return Err(ModelError::Invariant { line: 0, message: "reformulations disagree on the leader grid".into() }.into());
    }
    let dummy_fam = image_family(&dummy)?;
    let dummy_psi_is_uncertainty = dummy_fam.results.iter().all(|r| match &r.psi {
        crate::lower::YSet::Points(ps) => ps == &report.uncertainty,
        crate::lower::YSet::Exact(_) => false,
    });
    let pess_fam = image_family(&pess)?;
    let opt_fam = image_family(&opt)?;
    Ok(RobustVerdict {
        dummy_pessimistic: real_pessimistic_global(&dummy_fam),
        dummy_optimistic: real_optimistic_global(&dummy_fam),
        signed_pessimistic: real_pessimistic_global(&pess_fam),
        signed_optimistic: real_optimistic_global(&opt_fam),
        dummy_psi_is_uncertainty,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "name = square\n[decision]\nx = -1, 1, 1\n[uncertainty]\nxi = -1, 1, 2\n[objective]\nphi = (x - xi)^2\n";

    #[test]
    fn square_counterparts() {
        let p = UncertainProblem::parse(SQUARE).unwrap();
        let r = solve::<f64>(&p).unwrap();
        assert_eq!(r.xs, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        assert_eq!(r.phi_p, vec![4.0, 1.0, 4.0]);
        assert_eq!(r.phi_o, vec![0.0, 1.0, 0.0]);
        assert_eq!(solve_minmax::<f64>(&p).unwrap(), vec![vec![0.0]]);
        assert_eq!(solve_optimistic::<f64>(&p).unwrap(), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn reformulations_agree_on_square() {
        let p = UncertainProblem::parse(SQUARE).unwrap();
        let v = verify_triangle::<f64>(&p).unwrap();
        assert!(v.dummy_psi_is_uncertainty);
        assert!(v.holds(), "{v:?}");
    }

    #[test]
    fn constant_objective_selects_everything() {
        let src = "[decision]\nx = 0, 2, 1\n[uncertainty]\nxi = 0, 1, 1\n[objective]\nphi = 3\n";
        let p = UncertainProblem::parse(src).unwrap();
        let r = solve::<f64>(&p).unwrap();
        assert_eq!(r.minmax_solutions, vec![0, 1, 2]);
        assert_eq!(r.optimistic_solutions, vec![0, 1, 2]);
        assert!(verify_triangle::<f64>(&p).unwrap().holds());
    }

    #[test]
    fn malformed_problems() {
        assert!(UncertainProblem::parse("[decision]\nx = 0, 1, 1\n").is_err());
        assert!(UncertainProblem::parse("[elsewhere]\n").is_err());
        assert!(UncertainProblem::parse("[decision]\nx = 0, 1, 1\n[uncertainty]\nxi = 0, 1, 1\n[objective]\npsi = 1\n").is_err());
    }
}
