//! Locating the points where a switch function changes branch on an interval.

use crate::expr::{EvalError, SwitchKind};
use crate::scalar::Scalar;

/// Maps the unit parameter `t` in `[0, 1]` onto an interval that may be unbounded.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Chart<S> {
    lo: S,
    hi: S,
}

impl<S: Scalar> Chart<S> {
    pub(crate) fn new(lo: S, hi: S) -> Self {
        Chart { lo, hi }
    }

    pub(crate) fn at(&self, t: S) -> S {
        let one = S::one();
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                if t >= one {
                    self.hi
                } else {
                    self.lo + t * (self.hi - self.lo)
                }
            }
            (true, false) => {
                if t >= one {
                    S::infinity()
                } else {
                    self.lo + t / (one - t)
                }
            }
            (false, true) => {
                if t <= S::zero() {
                    S::neg_infinity()
                } else {
                    self.hi - (one - t) / t
                }
            }
            (false, false) => {
                let s = S::lit(2.0) * t - one;
                if s.abs() >= one {
                    if s > S::zero() { S::infinity() } else { S::neg_infinity() }
                } else {
                    s / (one - s.abs())
                }
            }
        }
    }

    /// `n + 1` parameter values covering the interval, endpoints excluded when infinite.
    pub(crate) fn samples(&self, n: usize) -> Vec<S> {
        (0..=n)
            .map(|k| S::from_usize(k).unwrap() / S::from_usize(n).unwrap())
            .filter(|t| self.at(*t).is_finite())
            .collect()
    }
}

fn class<S: Scalar>(kind: SwitchKind, v: S) -> S {
    match kind {
        SwitchKind::Zero => {
            if v > S::zero() {
                S::one()
            } else if v < S::zero() {
                -S::one()
            } else {
                S::zero()
            }
        }
        SwitchKind::Integer => v.floor(),
    }
}

/// Points of `[lo, hi]` where `g` changes sign (zero kind) or integer part
/// (integer kind), located by sampling then bisection and snapped.
pub(crate) fn breakpoints<S, G>(g: G, kind: SwitchKind, lo: S, hi: S, samples: usize) -> Result<Vec<S>, EvalError>
where
    S: Scalar,
    G: Fn(S) -> Result<S, EvalError>,
{
    let chart = Chart::new(lo, hi);
    let ts = chart.samples(samples);
    let mut out = Vec::new();
    let cls = |t: S| -> Result<Option<S>, EvalError> {
        let v = g(chart.at(t))?;
        Ok(if v.is_nan() { None } else { Some(class(kind, v)) })
    };
    for w in ts.windows(2) {
        let (mut a, b) = (w[0], w[1]);
        let (Some(mut ca), Some(cb)) = (cls(a)?, cls(b)?) else { continue };
        let mut guard = 0;
        while ca != cb && guard < 64 {
            guard += 1;
            let (mut l, mut r) = (a, b);
            for _ in 0..200 {
                let m = (l + r) / S::lit(2.0);
                if m <= l || m >= r {
                    break;
                }
                if cls(m)? == Some(ca) {
                    l = m;
                } else {
                    r = m;
                }
            }
            out.push(settle(&g, &chart, kind, l, r)?);
            let Some(cr) = cls(r)? else { break };
            a = r;
            ca = cr;
        }
    }
    out.sort_by(|p, q| p.partial_cmp(q).unwrap());
    out.dedup();
    Ok(out)
}

fn settle<S, G>(g: &G, chart: &Chart<S>, kind: SwitchKind, l: S, r: S) -> Result<S, EvalError>
where
    S: Scalar,
    G: Fn(S) -> Result<S, EvalError>,
{
    let (yl, yr) = (chart.at(l), chart.at(r));
    let raw = match kind {
        SwitchKind::Zero => {
            if g(yl)?.abs() <= g(yr)?.abs() { yl } else { yr }
        }
        SwitchKind::Integer => yr,
    };
    let snapped = raw.snap();
    if kind == SwitchKind::Zero && g(snapped)? != S::zero() && g(raw)? == S::zero() {
        Ok(raw)
    } else {
        Ok(snapped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sign_changes_and_integer_crossings() {
        let b = breakpoints(|y: f64| Ok(y - 0.5), SwitchKind::Zero, 0.0, 1.0, 257).unwrap();
        assert_eq!(b, vec![0.5]);
        let b = breakpoints(|y: f64| Ok(0.3 + y), SwitchKind::Integer, 0.0, 2.0, 257).unwrap();
        assert_eq!(b, vec![0.7, 1.7]);
        let b = breakpoints(|y: f64| Ok(y * y - 2.0), SwitchKind::Zero, -3.0, 3.0, 257).unwrap();
        assert_eq!(b, vec![-1.41421356237, 1.41421356237]);
    }

    #[test]
    fn unbounded_intervals_are_charted() {
        let b = breakpoints(|y: f64| Ok(y - 40.0), SwitchKind::Zero, 0.0, f64::INFINITY, 513).unwrap();
        assert_eq!(b, vec![40.0]);
        let c = Chart::new(f64::NEG_INFINITY, f64::INFINITY);
        assert_eq!(c.at(0.5), 0.0);
        assert!(c.samples(8).iter().all(|t| c.at(*t).is_finite()));
    }

    #[test]
    fn exact_zero_at_sample_is_one_breakpoint() {
        let b = breakpoints(|y: f64| Ok(y), SwitchKind::Zero, -1.0, 1.0, 256).unwrap();
        assert_eq!(b, vec![0.0]);
    }
}
