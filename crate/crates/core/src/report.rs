//! Rendering of reports as JSON, CSV and plain text.
//!
//! JSON field order follows the struct declarations below and never depends on
//! hashing or thread scheduling. Finite numbers use the shortest decimal that
//! round-trips; infinities are the strings `"inf"` and `"-inf"`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::games::{Correspondence, GameTree};
use crate::lower::ImageFamily;
use crate::model::{point_text, BilevelInstance};
use crate::robust::RobustVerdict;
use crate::scalar::{fmt_scalar, Scalar};
use crate::setreal::{Extremum, OrderVerdict};
use crate::solutions::{relation_table, Concept, ConceptReport, LocalPoint};
use crate::verify::{FileVerdict, GoldenOutcome, ImplicationMatrix, Scope, SuiteReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            _ => Err(format!("unknown format `{s}` (json, csv, text)")),
        }
    }
}

/// A number in JSON output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Num {
    /// Widens through the shortest decimal so that `0.1f32` becomes `0.1`.
    fn of<S: Scalar>(v: S) -> Num {
        let v = v.unsigned_zero();
        Num(if v.is_finite() { v.to_string().parse().unwrap_or_else(|_| v.as_f64()) } else { v.as_f64() })
    }
}

impl Serialize for Num {
    fn serialize<Z: Serializer>(&self, s: Z) -> Result<Z::Ok, Z::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

fn nums<S: Scalar>(v: &[S]) -> Vec<Num> {
    v.iter().map(|x| Num::of(*x)).collect()
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ExtremumDto {
    value: Num,
    attained: bool,
}

impl<S: Scalar> From<Extremum<S>> for ExtremumDto {
    fn from(e: Extremum<S>) -> Self {
        ExtremumDto { value: Num::of(e.value), attained: e.attained }
    }
}

#[derive(Serialize)]
struct PointRow {
    x: Vec<Num>,
    psi: String,
    image: String,
    f_o: ExtremumDto,
    f_p: ExtremumDto,
}

#[derive(Serialize)]
struct LocalDto {
    x: Vec<Num>,
    radius: Num,
    reach: Num,
}

#[derive(Serialize)]
struct PairDto {
    x: Vec<Num>,
    y: Vec<Num>,
    value: Num,
    strict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reach: Option<Num>,
}

#[derive(Serialize)]
struct VectorDto {
    x: Vec<Num>,
    z: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reach: Option<Num>,
}

#[derive(Serialize, Default)]
struct ConceptsDto {
    #[serde(skip_serializing_if = "Option::is_none")]
    real_optimistic: Option<Vec<Vec<Num>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_real_optimistic: Option<Vec<LocalDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    real_pessimistic: Option<Vec<Vec<Num>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_real_pessimistic: Option<Vec<LocalDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    standard_optimistic: Option<Vec<PairDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_standard_optimistic: Option<Vec<PairDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l_minimal: Option<Vec<Vec<Num>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_l_minimal: Option<Vec<LocalDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_minimal: Option<Vec<Vec<Num>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_u_minimal: Option<Vec<LocalDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vector: Option<Vec<VectorDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_vector: Option<Vec<VectorDto>>,
}

#[derive(Serialize)]
struct DiagnosticDto<'a> {
    concept: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct SolveDto<'a> {
    instance: &'a str,
    leader: &'a [String],
    follower: &'a [String],
    psi_mode: &'a str,
    radii: Vec<Num>,
    points: Vec<PointRow>,
    concepts: ConceptsDto,
    q: Vec<Vec<Num>>,
    t: Vec<Vec<Num>>,
    q_hat: Vec<Vec<Num>>,
    t_hat: Vec<Vec<Num>>,
    diagnostics: Vec<DiagnosticDto<'a>>,
}

fn xs_of<S: Scalar>(rep: &ConceptReport<S>, idx: &[usize]) -> Vec<Vec<Num>> {
    idx.iter().map(|&i| nums(&rep.xs[i])).collect()
}

fn locals<S: Scalar>(rep: &ConceptReport<S>, pts: &[LocalPoint<S>]) -> Vec<LocalDto> {
    pts.iter().map(|p| LocalDto { x: nums(&rep.xs[p.index]), radius: Num::of(p.radius), reach: Num::of(p.reach) }).collect()
}

fn concepts_dto<S: Scalar>(rep: &ConceptReport<S>, wanted: &[Concept]) -> ConceptsDto {
    let mut d = ConceptsDto::default();
    let pairs = |ps: &[crate::solutions::PairSolution<S>]| -> Vec<PairDto> {
        ps.iter()
            .map(|p| PairDto {
                x: nums(&rep.xs[p.index]),
                y: nums(&p.y),
                value: Num::of(p.value),
                strict: p.strict,
                radius: p.radius.map(Num::of),
                reach: p.reach.map(Num::of),
            })
            .collect()
    };
    let vectors = |vs: &[crate::solutions::VectorSolution<S>]| -> Vec<VectorDto> {
        vs.iter()
            .map(|v| VectorDto { x: nums(&rep.xs[v.index]), z: Num::of(v.z), radius: v.radius.map(Num::of), reach: v.reach.map(Num::of) })
            .collect()
    };
    for c in wanted {
        match c {
            Concept::RealOptimistic => {
                d.real_optimistic = Some(xs_of(rep, &rep.real_optimistic));
                d.local_real_optimistic = Some(locals(rep, &rep.local_real_optimistic));
            }
            Concept::RealPessimistic => {
                d.real_pessimistic = Some(xs_of(rep, &rep.real_pessimistic));
                d.local_real_pessimistic = Some(locals(rep, &rep.local_real_pessimistic));
            }
            Concept::StandardOptimistic => {
                d.standard_optimistic = Some(pairs(&rep.standard_optimistic));
                d.local_standard_optimistic = Some(pairs(&rep.local_standard_optimistic));
            }
            Concept::LMinimal => {
                d.l_minimal = Some(xs_of(rep, &rep.l_minimal));
                d.local_l_minimal = Some(locals(rep, &rep.local_l_minimal));
            }
            Concept::UMinimal => {
                d.u_minimal = Some(xs_of(rep, &rep.u_minimal));
                d.local_u_minimal = Some(locals(rep, &rep.local_u_minimal));
            }
            Concept::Vector => {
                d.vector = Some(vectors(&rep.vector));
                d.local_vector = Some(vectors(&rep.local_vector));
            }
        }
    }
    d
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn coords<S: Scalar>(x: &[S]) -> String {
    x.iter().map(|v| fmt_scalar(*v)).collect::<Vec<_>>().join(" ")
}

/// Per-point table of the image family.
pub fn family_csv<S: Scalar>(fam: &ImageFamily<S>) -> String {
    let mut s = String::from("x,psi,image,f_o,f_o_attained,f_p,f_p_attained\n");
    for r in &fam.results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            csv_field(&coords(&r.x)),
            csv_field(&r.psi.to_string()),
            csv_field(&r.image.to_string()),
            fmt_scalar(r.inf.value),
            r.inf.attained,
            fmt_scalar(r.sup.value),
            r.sup.attained
        );
    }
    s
}

fn local_text<S: Scalar>(rep: &ConceptReport<S>, pts: &[LocalPoint<S>]) -> String {
    let parts: Vec<String> = pts
        .iter()
        .map(|p| format!("{} @ [{}, {}]", point_text(&rep.xs[p.index]), fmt_scalar(p.radius), fmt_scalar(p.reach)))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

fn x_text<S: Scalar>(rep: &ConceptReport<S>, idx: &[usize]) -> String {
    let parts: Vec<String> = idx.iter().map(|&i| point_text(&rep.xs[i])).collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn render_solve<S: Scalar>(
    inst: &BilevelInstance<S>,
    fam: &ImageFamily<S>,
    rep: &ConceptReport<S>,
    wanted: &[Concept],
    format: Format,
) -> String {
    match format {
        Format::Json => json(&SolveDto {
            instance: inst.name(),
            leader: inst.leader_names(),
            follower: inst.follower_names(),
            psi_mode: fam.mode.name(),
            radii: nums(&rep.radii),
            points: fam
                .results
                .iter()
                .map(|r| PointRow {
                    x: nums(&r.x),
                    psi: r.psi.to_string(),
                    image: r.image.to_string(),
                    f_o: r.inf.into(),
                    f_p: r.sup.into(),
                })
                .collect(),
            concepts: concepts_dto(rep, wanted),
            q: xs_of(rep, &rep.q),
            t: xs_of(rep, &rep.t),
            q_hat: xs_of(rep, &rep.q_hat),
            t_hat: xs_of(rep, &rep.t_hat),
            diagnostics: rep.diagnostics.iter().map(|d| DiagnosticDto { concept: &d.concept, message: &d.message }).collect(),
        }),
        Format::Csv => family_csv(fam),
        Format::Text => {
            let mut s = format!("instance: {}\npsi mode: {}\nradii: {}\n", inst.name(), fam.mode.name(), coords(&rep.radii));
            for c in wanted {
                let (global, local) = match c {
                    Concept::RealOptimistic => (x_text(rep, &rep.real_optimistic), local_text(rep, &rep.local_real_optimistic)),
                    Concept::RealPessimistic => (x_text(rep, &rep.real_pessimistic), local_text(rep, &rep.local_real_pessimistic)),
                    Concept::LMinimal => (x_text(rep, &rep.l_minimal), local_text(rep, &rep.local_l_minimal)),
                    Concept::UMinimal => (x_text(rep, &rep.u_minimal), local_text(rep, &rep.local_u_minimal)),
                    Concept::StandardOptimistic => {
                        let f = |ps: &[crate::solutions::PairSolution<S>]| {
                            let parts: Vec<String> =
                                ps.iter().map(|p| format!("({}, {})", point_text(&rep.xs[p.index]), point_text(&p.y))).collect();
                            format!("{{{}}}", parts.join(", "))
                        };
                        (f(&rep.standard_optimistic), f(&rep.local_standard_optimistic))
                    }
                    Concept::Vector => {
                        let f = |vs: &[crate::solutions::VectorSolution<S>]| {
                            let parts: Vec<String> =
                                vs.iter().map(|v| format!("({}, {})", point_text(&rep.xs[v.index]), fmt_scalar(v.z))).collect();
                            format!("{{{}}}", parts.join(", "))
                        };
                        (f(&rep.vector), f(&rep.local_vector))
                    }
                };
                let _ = writeln!(s, "{c}: {global}\nlocal {c}: {local}");
            }
            let _ = writeln!(s, "Q: {}\nT: {}\nQ_hat: {}\nT_hat: {}", x_text(rep, &rep.q), x_text(rep, &rep.t), x_text(rep, &rep.q_hat), x_text(rep, &rep.t_hat));
            for d in &rep.diagnostics {
                let _ = writeln!(s, "diagnostic {}: {}", d.concept, d.message);
            }
            s
        }
    }
}

#[derive(Serialize)]
struct RelationsDto<'a> {
    points: Vec<Vec<Num>>,
    images: Vec<String>,
    table: &'a [Vec<OrderVerdict>],
}

pub fn render_relations<S: Scalar>(fam: &ImageFamily<S>, format: Format) -> String {
    let table = relation_table(fam);
    match format {
        Format::Json => json(&RelationsDto {
            points: fam.results.iter().map(|r| nums(&r.x)).collect(),
            images: fam.results.iter().map(|r| r.image.to_string()).collect(),
            table: &table,
        }),
        Format::Csv => {
            let mut s = String::from("x_i,x_j,leq_l,leq_u\n");
            for (i, row) in table.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let (a, b) = (&fam.results[i].x, &fam.results[j].x);
                    let _ = writeln!(s, "{},{},{},{}", csv_field(&coords(a)), csv_field(&coords(b)), v.leq_l, v.leq_u);
                }
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for (i, row) in table.iter().enumerate() {
                let marks: String = row
                    .iter()
                    .map(|v| match (v.leq_l, v.leq_u) {
                        (true, true) => 'B',
                        (true, false) => 'l',
                        (false, true) => 'u',
                        (false, false) => '.',
                    })
                    .collect();
                let _ = writeln!(s, "{:>12} {}  {}", point_text(&fam.results[i].x), marks, fam.results[i].image);
            }
            s
        }
    }
}

#[derive(Serialize)]
struct ClaimDto<'a> {
    id: &'a str,
    scope: String,
    hypothesis: &'a str,
    conclusion: &'a str,
    violated: bool,
    details: &'a [String],
}

#[derive(Serialize)]
struct MatrixDto<'a> {
    instance: &'a str,
    radii: Vec<Num>,
    claims: Vec<ClaimDto<'a>>,
}

fn matrix_dto<S: Scalar>(m: &ImplicationMatrix<S>) -> MatrixDto<'_> {
    MatrixDto {
        instance: &m.instance,
        radii: nums(&m.radii),
        claims: m
            .claims
            .iter()
            .map(|c| ClaimDto {
                id: c.id,
                scope: scope_text(c.scope),
                hypothesis: c.hypothesis.name(),
                conclusion: if c.conclusion { "pass" } else { "fail" },
                violated: c.violated(),
                details: &c.details,
            })
            .collect(),
    }
}

fn scope_text<S: Scalar>(s: Scope<S>) -> String {
    s.to_string()
}

#[derive(Serialize)]
struct GoldenDto<'a> {
    line: usize,
    statement: &'a str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    actual: Option<&'a str>,
}

#[derive(Serialize)]
struct FileDto<'a> {
    path: String,
    kind: &'a str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<MatrixDto<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    goldens: Option<Vec<GoldenDto<'a>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    equilibria: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uncovered: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    triangle_holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct SuiteDto<'a> {
    passed: bool,
    files: Vec<FileDto<'a>>,
}

fn goldens_dto(g: &[GoldenOutcome]) -> Vec<GoldenDto<'_>> {
    g.iter().map(|o| GoldenDto { line: o.line, statement: &o.statement, passed: o.passed, actual: o.actual.as_deref() }).collect()
}

pub fn render_suite(suite: &SuiteReport, format: Format) -> String {
    match format {
        Format::Json => {
            let files = suite
                .files
                .iter()
                .map(|f| {
                    let mut d = FileDto {
                        path: f.path.display().to_string(),
                        kind: "",
                        passed: f.passed(),
                        matrix: None,
                        goldens: None,
                        equilibria: None,
                        uncovered: None,
                        triangle_holds: None,
                        error: None,
                    };
                    match &f.verdict {
                        FileVerdict::Bilevel { matrix, goldens } => {
                            d.kind = "bilevel";
                            d.matrix = Some(matrix_dto(matrix));
                            d.goldens = Some(goldens_dto(goldens));
                        }
                        FileVerdict::Game { equilibria, uncovered } => {
                            d.kind = "game";
                            d.equilibria = Some(*equilibria);
                            d.uncovered = Some(*uncovered);
                        }
                        FileVerdict::Robust { holds } => {
                            d.kind = "robust";
                            d.triangle_holds = Some(*holds);
                        }
                        FileVerdict::Error(e) => {
                            d.kind = "error";
                            d.error = Some(e);
                        }
                    }
                    d
                })
                .collect();
            json(&SuiteDto { passed: suite.passed(), files })
        }
        Format::Csv => {
            let mut s = String::from("file,item,scope,hypothesis,result,violated\n");
            for f in &suite.files {
                let path = csv_field(&f.path.display().to_string());
                match &f.verdict {
                    FileVerdict::Bilevel { matrix, goldens } => {
                        for c in &matrix.claims {
                            let result = if c.conclusion { "pass" } else { "fail" };
                            let _ = writeln!(s, "{path},{},{},{},{result},{}", c.id, scope_text(c.scope), c.hypothesis.name(), c.violated());
                        }
                        for g in goldens {
                            let result = if g.passed { "pass" } else { "fail" };
                            let _ = writeln!(s, "{path},{},golden,,{result},{}", csv_field(&g.statement), !g.passed);
                        }
                    }
                    FileVerdict::Game { .. } | FileVerdict::Robust { .. } => {
                        let result = if f.passed() { "pass" } else { "fail" };
                        let _ = writeln!(s, "{path},bridge,global,,{result},{}", !f.passed());
                    }
                    FileVerdict::Error(e) => {
                        let _ = writeln!(s, "{path},{},,,error,true", csv_field(e));
                    }
                }
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for f in &suite.files {
                let mark = if f.passed() { "ok  " } else { "FAIL" };
                let _ = writeln!(s, "{mark} {}", f.path.display());
                match &f.verdict {
                    FileVerdict::Bilevel { matrix, goldens } => {
                        let applicable = matrix.claims.iter().filter(|c| c.hypothesis.name() != "not-checked").count();
                        let _ = writeln!(s, "     {} claims checked, {} violated; radii {}", applicable, matrix.violations().count(), coords(&matrix.radii));
                        for c in matrix.violations() {
                            let _ = writeln!(s, "     violation {} ({}): {}", c.id, c.scope, c.details.join("; "));
                        }
                        for g in goldens.iter().filter(|g| !g.passed) {
                            let _ = writeln!(s, "     line {}: `{}` got {}", g.line, g.statement, g.actual.as_deref().unwrap_or(""));
                        }
                    }
                    FileVerdict::Game { equilibria, uncovered } => {
                        let _ = writeln!(s, "     {equilibria} equilibria, {uncovered} outside both real solution sets");
                    }
                    FileVerdict::Robust { holds } => {
                        let _ = writeln!(s, "     reformulations agree: {holds}");
                    }
                    FileVerdict::Error(e) => {
                        let _ = writeln!(s, "     error: {e}");
                    }
                }
            }
            let _ = writeln!(s, "{}", if suite.passed() { "all files passed" } else { "failures present" });
            s
        }
    }
}

#[derive(Serialize)]
struct MatchDto {
    leader: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    reply: Option<String>,
    spne: Vec<String>,
}

#[derive(Serialize)]
struct GameDto<'a> {
    game: &'a str,
    spne: Vec<String>,
    spne_exists: bool,
    real_optimistic: Vec<MatchDto>,
    real_pessimistic: Vec<MatchDto>,
    standard_optimistic: Vec<MatchDto>,
    uncovered: Vec<String>,
}

pub fn render_game(g: &GameTree, c: &Correspondence, format: Format) -> String {
    let profile = |k: usize| g.profile_text(&c.spne[k]);
    let matches = |ms: &[crate::games::ConceptMatch]| -> Vec<MatchDto> {
        ms.iter().map(|m| MatchDto { leader: m.leader.clone(), reply: m.reply.clone(), spne: m.spne.iter().map(|&k| profile(k)).collect() }).collect()
    };
    let dto = GameDto {
        game: &c.game,
        spne: (0..c.spne.len()).map(profile).collect(),
        spne_exists: !c.spne.is_empty(),
        real_optimistic: matches(&c.real_optimistic),
        real_pessimistic: matches(&c.real_pessimistic),
        standard_optimistic: matches(&c.standard_optimistic),
        uncovered: c.uncovered.iter().map(|&k| profile(k)).collect(),
    };
    match format {
        Format::Json => json(&dto),
        Format::Csv => {
            let mut s = String::from("concept,leader,reply,spne\n");
            for (name, ms) in [("real_optimistic", &dto.real_optimistic), ("real_pessimistic", &dto.real_pessimistic), ("standard_optimistic", &dto.standard_optimistic)] {
                for m in ms {
                    let _ = writeln!(s, "{name},{},{},{}", csv_field(&m.leader), csv_field(m.reply.as_deref().unwrap_or("")), csv_field(&m.spne.join("; ")));
                }
            }
            s
        }
        Format::Text => {
            let mut s = format!("game: {}\nequilibria:\n", dto.game);
            for p in &dto.spne {
                let _ = writeln!(s, "  {p}");
            }
            for (name, ms) in [("real optimistic", &dto.real_optimistic), ("real pessimistic", &dto.real_pessimistic), ("standard optimistic", &dto.standard_optimistic)] {
                let parts: Vec<String> = ms
                    .iter()
                    .map(|m| match &m.reply {
                        Some(r) => format!("{}.{} ({} equilibria)", m.leader, r, m.spne.len()),
                        None => format!("{} ({} equilibria)", m.leader, m.spne.len()),
                    })
                    .collect();
                let _ = writeln!(s, "{name}: {}", parts.join(", "));
            }
            let _ = writeln!(s, "outside both real solution sets: {}", dto.uncovered.len());
            s
        }
    }
}

/// Report for a continuous game given as a bilevel file, where equilibria are not enumerable.
#[derive(Serialize)]
struct SymbolicGameDto<'a> {
    game: &'a str,
    spne_exists: Option<bool>,
    real_optimistic: Vec<Vec<Num>>,
    real_pessimistic: Vec<Vec<Num>>,
    standard_optimistic: Vec<Vec<Num>>,
    diagnostics: Vec<DiagnosticDto<'a>>,
}

pub fn render_symbolic_game<S: Scalar>(inst: &BilevelInstance<S>, fam: &ImageFamily<S>, rep: &ConceptReport<S>, format: Format) -> String {
    let spne_exists = inst.spne_none().then_some(false);
    let so: Vec<Vec<Num>> = rep.standard_optimistic.iter().map(|p| nums(&rep.xs[p.index].iter().chain(&p.y).copied().collect::<Vec<_>>())).collect();
    match format {
        Format::Json => json(&SymbolicGameDto {
            game: inst.name(),
            spne_exists,
            real_optimistic: xs_of(rep, &rep.real_optimistic),
            real_pessimistic: xs_of(rep, &rep.real_pessimistic),
            standard_optimistic: so,
            diagnostics: rep.diagnostics.iter().map(|d| DiagnosticDto { concept: &d.concept, message: &d.message }).collect(),
        }),
        Format::Csv => family_csv(fam),
        Format::Text => {
            let spne = match spne_exists {
                Some(false) => "none (asserted in the problem file)",
                _ => "not enumerated for continuous games",
            };
            let mut s = format!("game: {}\nequilibria: {spne}\n", inst.name());
            let _ = writeln!(s, "real optimistic: {}\nreal pessimistic: {}", x_text(rep, &rep.real_optimistic), x_text(rep, &rep.real_pessimistic));
            for d in &rep.diagnostics {
                let _ = writeln!(s, "diagnostic {}: {}", d.concept, d.message);
            }
            s
        }
    }
}

#[derive(Serialize)]
struct RobustRowDto {
    x: Vec<Num>,
    phi_p: Num,
    phi_o: Num,
}

#[derive(Serialize)]
struct AgreementDto {
    direct: Vec<Vec<Num>>,
    dummy: Vec<Vec<Num>>,
    signed: Vec<Vec<Num>>,
    agrees: bool,
}

#[derive(Serialize)]
struct TriangleDto {
    dummy_psi_is_uncertainty: bool,
    minmax: AgreementDto,
    optimistic: AgreementDto,
    holds: bool,
}

#[derive(Serialize)]
struct RobustDto<'a> {
    problem: &'a str,
    uncertainty: Vec<Vec<Num>>,
    table: Vec<RobustRowDto>,
    minmax_solutions: Vec<Vec<Num>>,
    optimistic_solutions: Vec<Vec<Num>>,
    triangle: TriangleDto,
}

pub fn render_robust<S: Scalar>(v: &RobustVerdict<S>, format: Format) -> String {
    let r = &v.report;
    let pts = |idx: &[usize]| -> Vec<Vec<Num>> { idx.iter().map(|&i| nums(&r.xs[i])).collect() };
    match format {
        Format::Json => json(&RobustDto {
            problem: &r.name,
            uncertainty: r.uncertainty.iter().map(|u| nums(u)).collect(),
            table: (0..r.xs.len()).map(|i| RobustRowDto { x: nums(&r.xs[i]), phi_p: Num::of(r.phi_p[i]), phi_o: Num::of(r.phi_o[i]) }).collect(),
            minmax_solutions: pts(&r.minmax_solutions),
            optimistic_solutions: pts(&r.optimistic_solutions),
            triangle: TriangleDto {
                dummy_psi_is_uncertainty: v.dummy_psi_is_uncertainty,
                minmax: AgreementDto {
                    direct: pts(&r.minmax_solutions),
                    dummy: pts(&v.dummy_pessimistic),
                    signed: pts(&v.signed_pessimistic),
                    agrees: v.minmax_agrees(),
                },
                optimistic: AgreementDto {
                    direct: pts(&r.optimistic_solutions),
                    dummy: pts(&v.dummy_optimistic),
                    signed: pts(&v.signed_optimistic),
                    agrees: v.optimistic_agrees(),
                },
                holds: v.holds(),
            },
        }),
        Format::Csv => {
            let mut s = String::from("x,phi_p,phi_o,minmax,optimistic\n");
            for i in 0..r.xs.len() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    csv_field(&coords(&r.xs[i])),
                    fmt_scalar(r.phi_p[i]),
                    fmt_scalar(r.phi_o[i]),
                    r.minmax_solutions.contains(&i),
                    r.optimistic_solutions.contains(&i)
                );
            }
            s
        }
        Format::Text => {
            let set = |idx: &[usize]| {
                let parts: Vec<String> = idx.iter().map(|&i| point_text(&r.xs[i])).collect();
                format!("{{{}}}", parts.join(", "))
            };
            format!(
                "problem: {}\nmin-max robust: {}\noptimistic robust: {}\ndummy lower level returns U: {}\nmin-max = real pessimistic (dummy, signed): {}\noptimistic = real optimistic (dummy, signed): {}\n",
                r.name,
                set(&r.minmax_solutions),
                set(&r.optimistic_solutions),
                v.dummy_psi_is_uncertainty,
                v.minmax_agrees(),
                v.optimistic_agrees()
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_and_infinities_are_strings() {
        let v = serde_json::to_string(&[Num(0.1), Num(1.0), Num(f64::INFINITY), Num(f64::NEG_INFINITY), Num(-0.0)]).unwrap();
        assert_eq!(v, r#"[0.1,1.0,"inf","-inf",-0.0]"#);
        assert_eq!(serde_json::to_string(&Num::of(-0.0f64)).unwrap(), "0.0");
        assert_eq!(serde_json::to_string(&Num::of(0.1f32)).unwrap(), "0.1");
    }

    #[test]
    fn csv_quotes_fields_with_commas() {
        assert_eq!(csv_field("[0,1)"), "\"[0,1)\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
