//! Two-stage extensive-form games: backward induction, subgame perfect
//! equilibria, and the translation into a finite bilevel problem.
//!
//! Game files list one leaf per line as `leader_move.follower_move = leader_cost, follower_cost`.
//! Moves are ordered by first appearance. Both players minimize cost.

use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::parse;
use crate::lower::{image_family, LowerError};
use crate::model::{BilevelInstance, DimSpec, Loc, ModelError, ProblemSpec, PsiMode};
use crate::solutions::{analyze, ConceptReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("game has no moves")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lower(#[from] LowerError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTree {
    pub name: String,
    pub leader_moves: Vec<String>,
    pub follower_moves: Vec<Vec<String>>,
    /// `costs[x][y] = (leader cost, follower cost)`
    pub costs: Vec<Vec<(f64, f64)>>,
}

/// Leader move and a follower reply for every leader move.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StrategyProfile {
    pub leader: usize,
    pub policy: Vec<usize>,
}

impl GameTree {
    pub fn parse(text: &str) -> Result<GameTree, GameError> {
        let mut g = GameTree { name: "game".into(), leader_moves: vec![], follower_moves: vec![], costs: vec![] };
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: &str| GameError::Syntax { line, message: message.into() };
            let (key, value) = content.split_once('=').ok_or_else(|| err("expected `move.reply = cost, cost`"))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "name" {
                g.name = value.to_string();
                continue;
            }
            let (a, b) = key.split_once('.').ok_or_else(|| err("leaf must be written `move.reply`"))?;
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() {
                return Err(err("empty move name"));
            }
            let nums: Vec<f64> = value
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err("costs must be two numbers"))?;
            if nums.len() != 2 || nums.iter().any(|v| !v.is_finite()) {
                return Err(err("costs must be two finite numbers"));
            }
            let x = match g.leader_moves.iter().position(|m| m == a) {
                Some(x) => x,
                None => {
                    g.leader_moves.push(a.to_string());
                    g.follower_moves.push(vec![]);
                    g.costs.push(vec![]);
                    g.leader_moves.len() - 1
                }
            };
            if g.follower_moves[x].iter().any(|m| m == b) {
                return Err(err("leaf listed twice"));
            }
            g.follower_moves[x].push(b.to_string());
            g.costs[x].push((nums[0], nums[1]));
        }
        if g.leader_moves.is_empty() {
            return Err(GameError::Empty);
        }
        Ok(g)
    }

    /// Follower replies minimizing the follower cost after leader move `x`.
    pub fn best_replies(&self, x: usize) -> Vec<usize> {
        let best = self.costs[x].iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        (0..self.costs[x].len()).filter(|&y| self.costs[x][y].1 == best).collect()
    }

    pub fn profile_text(&self, p: &StrategyProfile) -> String {
        let replies: Vec<String> = p
            .policy
            .iter()
            .enumerate()
            .map(|(x, &y)| format!("{}->{}", self.leader_moves[x], self.follower_moves[x][y]))
            .collect();
        format!("({}, [{}])", self.leader_moves[p.leader], replies.join(", "))
    }
}

fn product(choices: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for c in choices {
        out = out.iter().flat_map(|p| c.iter().map(move |v| { let mut q: Vec<usize> = p.clone(); q.push(*v); q })).collect();
    }
    out
}

/// All subgame perfect equilibria by backward induction, every follower tie-break included.
pub fn spne_enumerate(g: &GameTree) -> Vec<StrategyProfile> {
    let replies: Vec<Vec<usize>> = (0..g.leader_moves.len()).map(|x| g.best_replies(x)).collect();
    let mut out = Vec::new();
    for policy in product(&replies) {
        let cost: Vec<f64> = policy.iter().enumerate().map(|(x, &y)| g.costs[x][y].0).collect();
        let best = cost.iter().copied().fold(f64::INFINITY, f64::min);
        for (x, c) in cost.iter().enumerate() {
            if *c == best {
                out.push(StrategyProfile { leader: x, policy: policy.clone() });
            }
        }
    }
    out.sort();
    out
}

fn table_expr(g: &GameTree, pick: impl Fn((f64, f64)) -> f64) -> String {
    let mut s = String::from("cases { ");
    for (x, row) in g.costs.iter().enumerate() {
        for (y, c) in row.iter().enumerate() {
            let _ = write!(s, "x = {x} and y = {y} -> {:?}; ", pick(*c));
        }
    }
    s.push_str("else -> 0 }");
    s
}

/// Finite bilevel problem: leader index `x`, reply index `y` in `0..|Y(x)|`,
/// follower cost as the lower objective and leader cost as the upper one.
pub fn to_bilevel(g: &GameTree) -> Result<BilevelInstance<f64>, GameError> {
    let n = g.leader_moves.len();
    let mut hi = String::from("cases { ");
    for (x, ys) in g.follower_moves.iter().enumerate() {
        let _ = write!(hi, "x = {x} -> {}; ", ys.len() - 1);
    }
    hi.push_str("else -> 0 }");
    let e = |s: &str| parse(s).map_err(|source| ModelError::Syntax { line: 0, column: source.span.column, source });
    let spec = ProblemSpec {
        name: g.name.clone(),
        constants: vec![],
        leader: vec![DimSpec {
            name: "x".into(),
            lo: e("0")?,
            hi: e(&(n - 1).to_string())?,
            step: e("1")?,
            include: vec![],
            loc: Loc(0),
        }],
        follower: vec![DimSpec { name: "y".into(), lo: e("0")?, hi: e(&hi)?, step: e("1")?, include: vec![], loc: Loc(0) }],
        feasible: None,
        upper: (e(&table_expr(g, |c| c.0))?, Loc(0)),
        lower: (e(&table_expr(g, |c| c.1))?, Loc(0)),
        psi_mode: PsiMode::Grid,
        psi: vec![],
        tolerance: Some(0.0),
        radii: Some(vec![1.5]),
        grid_cap: None,
        hypotheses: vec![],
        spne_none: false,
        goldens: vec![],
    };
    Ok(BilevelInstance::from_spec(spec)?)
}

/// A bilevel solution and the equilibria sharing its leader move (and reply, for pairs).
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptMatch {
    pub leader: String,
    pub reply: Option<String>,
    pub spne: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub game: String,
    pub spne: Vec<StrategyProfile>,
    pub real_optimistic: Vec<ConceptMatch>,
    pub real_pessimistic: Vec<ConceptMatch>,
    pub standard_optimistic: Vec<ConceptMatch>,
    /// Equilibria whose leader move is neither real optimistic nor real pessimistic.
    pub uncovered: Vec<usize>,
}

pub fn correspondence_report(g: &GameTree) -> Result<Correspondence, GameError> {
    let inst = to_bilevel(g)?;
    let fam = image_family(&inst)?;
    let rep: ConceptReport<f64> = analyze(&inst, &fam)?;
    let spne = spne_enumerate(g);
    let leader_of = |i: usize| rep.xs[i][0] as usize;
    let by_leader = |x: usize| -> Vec<usize> { (0..spne.len()).filter(|&k| spne[k].leader == x).collect() };
    let matches = |idx: &[usize]| -> Vec<ConceptMatch> {
        idx.iter()
            .map(|&i| ConceptMatch { leader: g.leader_moves[leader_of(i)].clone(), reply: None, spne: by_leader(leader_of(i)) })
            .collect()
    };
    let standard_optimistic = rep
        .standard_optimistic
        .iter()
        .map(|p| {
            let x = leader_of(p.index);
            let y = p.y[0] as usize;
            ConceptMatch {
                leader: g.leader_moves[x].clone(),
                reply: Some(g.follower_moves[x][y].clone()),
                spne: by_leader(x).into_iter().filter(|&k| spne[k].policy[x] == y).collect(),
            }
        })
        .collect();
    let covered: Vec<usize> = rep.real_optimistic.iter().chain(&rep.real_pessimistic).map(|&i| leader_of(i)).collect();
    let uncovered = (0..spne.len()).filter(|&k| !covered.contains(&spne[k].leader)).collect();
    Ok(Correspondence {
        game: g.name.clone(),
        real_optimistic: matches(&rep.real_optimistic),
        real_pessimistic: matches(&rep.real_pessimistic),
        standard_optimistic,
        uncovered,
        spne,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = "A.C = 1, 0\nA.D = 4, 0\nB.E = 2, 0\nB.F = 3, 0\n";

    #[test]
    fn indifferent_follower_gives_several_equilibria() {
        let g = GameTree::parse(FIG2).unwrap();
        let texts: Vec<String> = spne_enumerate(&g).iter().map(|p| g.profile_text(p)).collect();
        assert!(texts.contains(&"(A, [A->C, B->E])".to_string()));
        assert!(texts.contains(&"(B, [A->D, B->F])".to_string()));
        assert_eq!(texts.len(), 4);
    }

    #[test]
    fn bilevel_translation_keeps_costs() {
        let g = GameTree::parse(FIG2).unwrap();
        let c = correspondence_report(&g).unwrap();
        assert_eq!(c.standard_optimistic.len(), 1);
        assert_eq!(c.standard_optimistic[0].leader, "A");
        assert_eq!(c.standard_optimistic[0].reply.as_deref(), Some("C"));
        assert_eq!(c.real_pessimistic[0].leader, "B");
        assert!(c.uncovered.is_empty());
    }

    #[test]
    fn single_leaf() {
        let g = GameTree::parse("only.reply = 3, 4\n").unwrap();
        assert_eq!(spne_enumerate(&g), vec![StrategyProfile { leader: 0, policy: vec![0] }]);
        let c = correspondence_report(&g).unwrap();
        assert_eq!(c.standard_optimistic[0].spne, vec![0]);
    }

    #[test]
    fn malformed_games() {
        assert!(matches!(GameTree::parse("A = 1, 2\n"), Err(GameError::Syntax { line: 1, .. })));
        assert!(matches!(GameTree::parse("A.B = 1\n"), Err(GameError::Syntax { .. })));
        assert!(matches!(GameTree::parse("# nothing\n"), Err(GameError::Empty)));
    }
}
