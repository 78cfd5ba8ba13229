use std::collections::HashMap;

use crate::expr::{parse, parse_condition, Compiled, Cond, Expr, ExprKind, ParseError};
use crate::setreal::split_set_literals;

use super::{DimSpec, GoldenLine, Hypothesis, IntervalTemplate, Loc, ModelError, ProblemSpec, PsiMode, PsiPieceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Constants,
    Leader,
    Follower,
    Objectives,
    Psi,
    Analysis,
    Golden,
}

impl Section {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "constants" => Section::Constants,
            "leader" => Section::Leader,
            "follower" => Section::Follower,
            "objectives" => Section::Objectives,
            "psi" => Section::Psi,
            "analysis" => Section::Analysis,
            "golden" => Section::Golden,
            _ => return None,
        })
    }
}

/// A value string with its position in the file, for error reporting.
pub(crate) struct Value<'a> {
    pub(crate) text: &'a str,
    pub(crate) line: usize,
    pub(crate) column: usize,
}

impl Value<'_> {
    fn syntax(&self, offset: usize, e: ParseError) -> ModelError {
        let column = self.column + offset + e.span.column.saturating_sub(1);
        ModelError::Syntax { line: self.line, column, source: e }
    }

    fn expr_at(&self, offset: usize, src: &str) -> Result<Expr, ModelError> {
        parse(src).map_err(|e| self.syntax(offset, e))
    }

    pub(crate) fn expr(&self) -> Result<Expr, ModelError> {
        self.expr_at(0, self.text)
    }

    pub(crate) fn schema(&self, message: impl Into<String>) -> ModelError {
        ModelError::Schema { line: self.line, message: message.into() }
    }

    /// Splits on commas outside parentheses and braces, keeping byte offsets.
    fn fields(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        for (k, c) in self.text.char_indices() {
            match c {
                '(' | '{' | '[' => depth += 1,
                ')' | '}' | ']' => depth -= 1,
                ',' if depth == 0 => {
                    out.push((start, &self.text[start..k]));
                    start = k + 1;
                }
                _ => {}
            }
        }
        out.push((start, &self.text[start..]));
        out.into_iter()
            .map(|(o, s)| {
                let lead = s.len() - s.trim_start().len();
                (o + lead, s.trim())
            })
            .collect()
    }

    pub(crate) fn number(&self, constants: &HashMap<String, f64>, offset: usize, src: &str) -> Result<f64, ModelError> {
        let e = self.expr_at(offset, src)?;
        let c = Compiled::<f64>::compile(&e, &[], constants).map_err(|source| ModelError::Bind { line: self.line, source })?;
        c.eval(&[]).map_err(|source| ModelError::Bind { line: self.line, source })
    }
}

fn endpoint(v: &Value<'_>, offset: usize, src: &str) -> Result<Expr, ModelError> {
    let t = src.trim();
    let inf = match t {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    };
    match inf {
        Some(x) => Ok(Expr::new(ExprKind::Num(x), Default::default())),
        None => v.expr_at(offset + (src.len() - src.trim_start().len()), t),
    }
}

fn templates(v: &Value<'_>, set_off: usize) -> Result<Vec<IntervalTemplate>, ModelError> {
    let set_src = &v.text[set_off..];
    let literals = split_set_literals(set_src).map_err(|e| v.schema(format!("set: {e}")))?;
    let mut set = Vec::new();
    for lit in literals {
        let base = set_off + lit.offset + 1;
        if lit.open == '{' {
            let mut off = base;
            for p in &lit.parts {
                let e = endpoint(v, off, p)?;
                set.push(IntervalTemplate { lo: e.clone(), hi: e, lo_closed: true, hi_closed: true, point: true });
                off += p.len() + 1;
            }
        } else {
            if lit.parts.len() != 2 {
                return Err(v.schema("an interval needs exactly two endpoints"));
            }
            set.push(IntervalTemplate {
                lo: endpoint(v, base, &lit.parts[0])?,
                hi: endpoint(v, base + lit.parts[0].len() + 1, &lit.parts[1])?,
                lo_closed: lit.open == '[',
                hi_closed: lit.close == ']',
                point: false,
            });
        }
    }
    Ok(set)
}

/// Interval templates from set-literal text outside a file.
pub(crate) fn set_templates(text: &str) -> Result<Vec<IntervalTemplate>, ModelError> {
    templates(&Value { text, line: 0, column: 1 }, 0)
}

fn psi_piece(v: &Value<'_>) -> Result<PsiPieceSpec, ModelError> {
    let Some(arrow) = v.text.find("->") else {
        return Err(v.schema("psi piece must read `condition -> set`"));
    };
    let when: Cond = parse_condition(v.text[..arrow].trim()).map_err(|e| v.syntax(0, e))?;
    let set = templates(v, arrow + 2)?;
    Ok(PsiPieceSpec { when, set, loc: Loc(v.line) })
}

pub(crate) fn dim(v: &Value<'_>, name: &str) -> Result<DimSpec, ModelError> {
    let f = v.fields();
    if f.len() != 3 {
        return Err(v.schema(format!("`{name}` needs `lower, upper, step`")));
    }
    Ok(DimSpec {
        name: name.to_string(),
        lo: v.expr_at(f[0].0, f[0].1)?,
        hi: v.expr_at(f[1].0, f[1].1)?,
        step: v.expr_at(f[2].0, f[2].1)?,
        include: Vec::new(),
        loc: Loc(v.line),
    })
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn include(dims: &mut [DimSpec], v: &Value<'_>, key: &str) -> Result<bool, ModelError> {
    let Some(name) = key.strip_suffix(".include") else { return Ok(false) };
    let Some(d) = dims.iter_mut().find(|d| d.name == name) else {
        return Err(v.schema(format!("`{name}` must be declared before its include list")));
    };
    for (o, s) in v.fields() {
        d.include.push(v.expr_at(o, s)?);
    }
    Ok(true)
}

pub(crate) enum Entry<'a> {
    Section { line: usize, name: &'a str },
    Pair { key: &'a str, value: Value<'a> },
}

/// Non-blank lines of a sectioned `key = value` file, comments removed.
pub(crate) fn entries(text: &str) -> impl Iterator<Item = Result<Entry<'_>, ModelError>> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            return None;
        }
        if let Some(inner) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            return Some(Ok(Entry::Section { line, name: inner.trim() }));
        }
        let Some(eq) = content.find('=') else {
            return Some(Err(ModelError::Schema { line, message: "expected `key = value`".into() }));
        };
        let after = &content[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let value = Value { text: after.trim(), line, column: eq + 2 + lead };
        Some(Ok(Entry::Pair { key: content[..eq].trim(), value }))
    })
}

/// Parses problem-file text into an uncompiled spec. Expressions are
/// syntax-checked here; variable binding happens when the instance is built.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, ModelError> {
    let mut section = Section::Top;
    let mut name = None;
    let mut constants: Vec<(String, f64)> = Vec::new();
    let mut const_map = HashMap::new();
    let mut leader = Vec::new();
    let mut follower = Vec::new();
    let mut feasible = None;
    let mut upper = None;
    let mut lower = None;
    let mut psi_mode = None;
    let mut psi = Vec::new();
    let mut tolerance = None;
    let mut radii = None;
    let mut grid_cap = None;
    let mut hypotheses = Vec::new();
    let mut spne_none = false;
    let mut goldens = Vec::new();

    for entry in entries(text) {
        let (line, key, v) = match entry? {
            Entry::Section { line, name } => {
                section = Section::from_name(name)
                    .ok_or_else(|| ModelError::Schema { line, message: format!("unknown section `[{name}]`") })?;
                continue;
            }
            Entry::Pair { key, value } => (value.line, key, value),
        };
        let unknown = || ModelError::Schema { line, message: format!("unknown key `{key}` in this section") };
        match section {
            Section::Top => match key {
                "name" => name = Some(v.text.to_string()),
                _ => return Err(unknown()),
            },
            Section::Constants => {
                if !is_ident(key) {
                    return Err(v.schema(format!("`{key}` is not a valid name")));
                }
                let value = v.number(&const_map, 0, v.text)?;
                const_map.insert(key.to_string(), value);
                constants.push((key.to_string(), value));
            }
            Section::Leader => {
                if !include(&mut leader, &v, key)? {
                    if !is_ident(key) {
                        return Err(v.schema(format!("`{key}` is not a valid name")));
                    }
                    leader.push(dim(&v, key)?);
                }
            }
            Section::Follower => {
                if key == "where" {
                    let c = parse_condition(v.text).map_err(|e| v.syntax(0, e))?;
                    feasible = Some((c, Loc(line)));
                } else if !include(&mut follower, &v, key)? {
                    if !is_ident(key) {
                        return Err(v.schema(format!("`{key}` is not a valid name")));
                    }
                    follower.push(dim(&v, key)?);
                }
            }
            Section::Objectives => match key {
                "upper" => upper = Some((v.expr()?, Loc(line))),
                "lower" => lower = Some((v.expr()?, Loc(line))),
                _ => return Err(unknown()),
            },
            Section::Psi => match key {
                "mode" => {
                    psi_mode = Some(match v.text {
                        "grid" => PsiMode::Grid,
                        "symbolic" => PsiMode::Symbolic,
                        other => return Err(v.schema(format!("psi mode must be grid or symbolic, not `{other}`"))),
                    })
                }
                "piece" => psi.push(psi_piece(&v)?),
                _ => return Err(unknown()),
            },
            Section::Analysis => match key {
                "tolerance" => tolerance = Some(v.number(&const_map, 0, v.text)?),
                "radii" => {
                    let mut r = Vec::new();
                    for (o, s) in v.fields() {
                        r.push(v.number(&const_map, o, s)?);
                    }
                    radii = Some(r);
                }
                "grid_cap" => {
                    grid_cap = Some(v.text.parse().map_err(|_| v.schema("grid_cap must be a positive integer"))?)
                }
                "assert" => {
                    for (_, s) in v.fields() {
                        let h = Hypothesis::from_name(s).ok_or_else(|| v.schema(format!("unknown hypothesis `{s}`")))?;
                        if !hypotheses.contains(&h) {
                            hypotheses.push(h);
                        }
                    }
                }
                "spne" => match v.text {
                    "none" => spne_none = true,
                    _ => return Err(v.schema("only `spne = none` can be asserted")),
                },
                _ => return Err(unknown()),
            },
            Section::Golden => match key {
                "expect" => goldens.push(GoldenLine { text: v.text.to_string(), loc: Loc(line) }),
                _ => return Err(unknown()),
            },
        }
    }

    let missing = |what: &str| ModelError::Schema { line: 0, message: format!("missing {what}") };
    let spec = ProblemSpec {
        name: name.unwrap_or_else(|| "unnamed".into()),
        constants,
        leader,
        follower,
        feasible,
        upper: upper.ok_or_else(|| missing("`upper` objective"))?,
        lower: lower.ok_or_else(|| missing("`lower` objective"))?,
        psi_mode: psi_mode.unwrap_or(PsiMode::Grid),
        psi,
        tolerance,
        radii,
        grid_cap,
        hypotheses,
        spne_none,
        goldens,
    };
    if spec.leader.is_empty() {
        return Err(missing("leader variable"));
    }
    if spec.follower.is_empty() {
        return Err(missing("follower variable"));
    }
    Ok(spec)
}
