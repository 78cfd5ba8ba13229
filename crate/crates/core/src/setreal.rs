//! Finite unions of real intervals with per-endpoint closure, and the two set
//! order relations induced by the cone of nonnegative reals.
//!
//! For `C = [0, inf)`:
//!
//! * `A <=l B` iff `A + C` contains `B`, which reduces to a comparison of the
//!   infima together with their attainment;
//! * `A <=u B` iff `B - C` contains `A`, the mirror statement at the suprema.
//!
//! Endpoint comparisons are exact on the stored representation. Any rounding
//! tolerance belongs to the code that builds the sets.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::scalar::{fmt_scalar, parse_scalar, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error("empty set: every set handled here must be nonempty")]
    EmptySet,
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("cannot parse set at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint<S> {
    pub value: S,
    pub closed: bool,
}

impl<S: Scalar> Endpoint<S> {
    pub fn new(value: S, closed: bool) -> Self {
        Endpoint { value: value.unsigned_zero(), closed: closed && value.is_finite() }
    }

    pub fn closed(value: S) -> Self {
        Self::new(value, true)
    }

    pub fn open(value: S) -> Self {
        Self::new(value, false)
    }
}

/// A nonempty interval. Degenerate intervals are points with both ends closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<S> {
    lo: Endpoint<S>,
    hi: Endpoint<S>,
}

impl<S: Scalar> Interval<S> {
    pub fn new(lo: Endpoint<S>, hi: Endpoint<S>) -> Result<Self, SetError> {
        if lo.value.is_nan() || hi.value.is_nan() {
            return Err(SetError::InvalidInterval("NaN endpoint".into()));
        }
        if (lo.value.is_infinite() && lo.closed) || (hi.value.is_infinite() && hi.closed) {
            return Err(SetError::InvalidInterval("infinite endpoints must be open".into()));
        }
        if lo.value == S::infinity() || hi.value == S::neg_infinity() {
            return Err(SetError::InvalidInterval("interval outside the real line".into()));
        }
        let ok = lo.value < hi.value || (lo.value == hi.value && lo.closed && hi.closed);
        if !ok {
            return Err(SetError::InvalidInterval(format!(
                "{}{},{}{}",
                if lo.closed { '[' } else { '(' },
                fmt_scalar(lo.value),
                fmt_scalar(hi.value),
                if hi.closed { ']' } else { ')' }
            )));
        }
        Ok(Interval { lo: Endpoint::new(lo.value, lo.closed), hi: Endpoint::new(hi.value, hi.closed) })
    }

    pub fn point(v: S) -> Result<Self, SetError> {
        Self::new(Endpoint::closed(v), Endpoint::closed(v))
    }

    pub fn closed(lo: S, hi: S) -> Result<Self, SetError> {
        Self::new(Endpoint::closed(lo), Endpoint::closed(hi))
    }

    pub fn open(lo: S, hi: S) -> Result<Self, SetError> {
        Self::new(Endpoint::open(lo), Endpoint::open(hi))
    }

    pub fn lo(&self) -> Endpoint<S> {
        self.lo
    }

    pub fn hi(&self) -> Endpoint<S> {
        self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo.value == self.hi.value
    }

    pub fn contains(&self, v: S) -> bool {
        let above = v > self.lo.value || (v == self.lo.value && self.lo.closed);
        let below = v < self.hi.value || (v == self.hi.value && self.hi.closed);
        above && below
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = tighter_lo(self.lo, other.lo);
        let hi = tighter_hi(self.hi, other.hi);
        Interval::new(lo, hi).ok()
    }

    fn negate(&self) -> Self {
        Interval {
            lo: Endpoint::new(-self.hi.value, self.hi.closed),
            hi: Endpoint::new(-self.lo.value, self.lo.closed),
        }
    }
}

fn tighter_lo<S: Scalar>(a: Endpoint<S>, b: Endpoint<S>) -> Endpoint<S> {
    if a.value > b.value {
        a
    } else if b.value > a.value {
        b
    } else {
        Endpoint::new(a.value, a.closed && b.closed)
    }
}

fn tighter_hi<S: Scalar>(a: Endpoint<S>, b: Endpoint<S>) -> Endpoint<S> {
    if a.value < b.value {
        a
    } else if b.value < a.value {
        b
    } else {
        Endpoint::new(a.value, a.closed && b.closed)
    }
}

impl<S: Scalar> fmt::Display for Interval<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            return write!(f, "{{{}}}", fmt_scalar(self.lo.value));
        }
        write!(
            f,
            "{}{},{}{}",
            if self.lo.closed { '[' } else { '(' },
            fmt_scalar(self.lo.value),
            fmt_scalar(self.hi.value),
            if self.hi.closed { ']' } else { ')' }
        )
    }
}

/// Nonempty finite union of intervals in canonical form: sorted, pairwise
/// disjoint and non-adjacent, so equal sets have identical representations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedRealSet<S> {
    intervals: Vec<Interval<S>>,
}

/// Infimum or supremum together with whether the set contains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum<S> {
    pub value: S,
    pub attained: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct OrderVerdict {
    pub leq_l: bool,
    pub leq_u: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOrder {
    Lower,
    Upper,
}

impl<S: Scalar> ExtendedRealSet<S> {
    pub fn canonicalize(raw: Vec<Interval<S>>) -> Result<Self, SetError> {
        if raw.is_empty() {
            return Err(SetError::EmptySet);
        }
        let mut raw = raw;
        raw.sort_by(|a, b| {
            a.lo.value
                .partial_cmp(&b.lo.value)
                .expect("interval endpoints are never NaN")
                .then_with(|| b.lo.closed.cmp(&a.lo.closed))
        });
        let mut merged: Vec<Interval<S>> = Vec::with_capacity(raw.len());
        for iv in raw {
            if let Some(last) = merged.last_mut() {
                let touches = iv.lo.value < last.hi.value
                    || (iv.lo.value == last.hi.value && (iv.lo.closed || last.hi.closed));
                if touches {
                    if iv.hi.value > last.hi.value {
                        last.hi = iv.hi;
                    } else if iv.hi.value == last.hi.value {
                        last.hi.closed |= iv.hi.closed;
                    }
                    if iv.lo.value == last.lo.value {
                        last.lo.closed |= iv.lo.closed;
                    }
                    continue;
                }
            }
            merged.push(iv);
        }
        Ok(ExtendedRealSet { intervals: merged })
    }

    pub fn from_interval(iv: Interval<S>) -> Self {
        ExtendedRealSet { intervals: vec![iv] }
    }

    pub fn singleton(v: S) -> Result<Self, SetError> {
        Ok(Self::from_interval(Interval::point(v)?))
    }

    /// Finite point set.
    pub fn from_points(points: impl IntoIterator<Item = S>) -> Result<Self, SetError> {
        let raw = points.into_iter().map(Interval::point).collect::<Result<Vec<_>, _>>()?;
        Self::canonicalize(raw)
    }

    pub fn intervals(&self) -> &[Interval<S>] {
        &self.intervals
    }

    pub fn inf_of(&self) -> Extremum<S> {
        let lo = self.intervals[0].lo;
        Extremum { value: lo.value, attained: lo.closed }
    }

    pub fn sup_of(&self) -> Extremum<S> {
        let hi = self.intervals[self.intervals.len() - 1].hi;
        Extremum { value: hi.value, attained: hi.closed }
    }

    /// True when every finite endpoint belongs to the set.
    pub fn is_closed(&self) -> bool {
        self.intervals.iter().all(|iv| {
            (iv.lo.closed || iv.lo.value.is_infinite()) && (iv.hi.closed || iv.hi.value.is_infinite())
        })
    }

    pub fn contains(&self, v: S) -> bool {
        self.intervals.iter().any(|iv| iv.contains(v))
    }

    /// Membership up to an absolute slack on the endpoints.
    pub fn contains_within(&self, v: S, tol: S) -> bool {
        self.intervals.iter().any(|iv| v >= iv.lo.value - tol && v <= iv.hi.value + tol)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut raw = self.intervals.clone();
        raw.extend_from_slice(&other.intervals);
        Self::canonicalize(raw).expect("union of nonempty sets is nonempty")
    }

    /// Intersection, `None` when empty.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let raw: Vec<_> = self
            .intervals
            .iter()
            .flat_map(|a| other.intervals.iter().filter_map(move |b| a.intersect(b)))
            .collect();
        Self::canonicalize(raw).ok()
    }

    pub fn negate(&self) -> Self {
        let raw = self.intervals.iter().rev().map(Interval::negate).collect();
        Self::canonicalize(raw).expect("negation keeps the set nonempty")
    }

    pub fn leq_l(&self, other: &Self) -> bool {
        let a = self.inf_of();
        let b = other.inf_of();
        a.value < b.value || (a.value == b.value && (a.attained || !b.attained))
    }

    pub fn leq_u(&self, other: &Self) -> bool {
        let a = self.sup_of();
        let b = other.sup_of();
        a.value < b.value || (a.value == b.value && (b.attained || !a.attained))
    }

    pub fn leq(&self, other: &Self, order: SetOrder) -> bool {
        match order {
            SetOrder::Lower => self.leq_l(other),
            SetOrder::Upper => self.leq_u(other),
        }
    }

    pub fn compare(&self, other: &Self) -> OrderVerdict {
        OrderVerdict { leq_l: self.leq_l(other), leq_u: self.leq_u(other) }
    }
}

/// Indices `i` such that every member dominating `family[i]` is dominated back.
/// Mutually dominating members are co-minimal.
pub fn minimal_members<S: Scalar>(family: &[ExtendedRealSet<S>], order: SetOrder) -> Vec<usize> {
    (0..family.len())
        .filter(|&i| {
            family
                .iter()
                .all(|b| !b.leq(&family[i], order) || family[i].leq(b, order))
        })
        .collect()
}

impl<S: Scalar> fmt::Display for ExtendedRealSet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, iv) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(" u ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

impl<S: Scalar> FromStr for ExtendedRealSet<S> {
    type Err = SetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = split_set_literals(s)?
            .into_iter()
            .map(|lit| {
                let parse = |text: &str, at: usize| {
                    parse_scalar::<S>(text).ok_or_else(|| SetError::Parse {
                        offset: at,
                        message: format!("bad number {:?}", text.trim()),
                    })
                };
                match lit.open {
                    '{' => {
                        if lit.parts.len() != 1 {
                            return Err(SetError::Parse {
                                offset: lit.offset,
                                message: "point literal takes one value".into(),
                            });
                        }
                        Interval::point(parse(&lit.parts[0], lit.offset)?)
                    }
                    _ => {
                        if lit.parts.len() != 2 {
                            return Err(SetError::Parse {
                                offset: lit.offset,
                                message: "interval literal takes two values".into(),
                            });
                        }
                        let lo = parse(&lit.parts[0], lit.offset)?;
                        let hi = parse(&lit.parts[1], lit.offset)?;
                        Interval::new(Endpoint::new(lo, lit.open == '['), Endpoint::new(hi, lit.close == ']'))
                    }
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::canonicalize(raw)
    }
}

/// One bracketed literal of the set grammar with its comma-separated contents.
#[derive(Debug, Clone, PartialEq)]
pub struct SetLiteral {
    pub open: char,
    pub close: char,
    pub parts: Vec<String>,
    pub offset: usize,
}

/// Splits `[a,b) u {c} u ...` into literals. Parentheses inside a literal nest,
/// so endpoint expressions such as `max(1, x)` are kept whole.
pub fn split_set_literals(s: &str) -> Result<Vec<SetLiteral>, SetError> {
    let bytes: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut k = 0;
    let err = |offset: usize, message: &str| SetError::Parse { offset, message: message.to_string() };
    loop {
        while k < bytes.len() && bytes[k].1.is_whitespace() {
            k += 1;
        }
        if k >= bytes.len() {
            break;
        }
        if !out.is_empty() {
            match bytes[k].1 {
                'u' | '∪' => {
                    k += 1;
                    while k < bytes.len() && bytes[k].1.is_whitespace() {
                        k += 1;
                    }
                }
                _ => return Err(err(bytes[k].0, "expected `u` between intervals")),
            }
        }
        if k >= bytes.len() {
            return Err(err(s.len(), "dangling union"));
        }
        let (offset, open) = bytes[k];
        if !matches!(open, '[' | '(' | '{') {
            return Err(err(offset, "expected `[`, `(` or `{`"));
        }
        k += 1;
        let mut depth = 0usize;
        let mut parts = vec![String::new()];
        let close = loop {
            let Some(&(_, c)) = bytes.get(k) else {
                return Err(err(s.len(), "unterminated interval"));
            };
            k += 1;
            match c {
                '(' => {
                    depth += 1;
                    parts.last_mut().unwrap().push(c);
                }
                ')' if depth > 0 => {
                    depth -= 1;
                    parts.last_mut().unwrap().push(c);
                }
                ']' | ')' | '}' if depth == 0 => break c,
                ',' if depth == 0 => parts.push(String::new()),
                _ => parts.last_mut().unwrap().push(c),
            }
        };
        if (open == '{') != (close == '}') {
            return Err(err(offset, "mismatched brackets"));
        }
        out.push(SetLiteral { open, close, parts, offset });
    }
    if out.is_empty() {
        return Err(SetError::EmptySet);
    }
    Ok(out)
}
