use thiserror::Error;

use super::{BinOp, CmpOp, Cond, Expr, ExprKind, Func, SourceSpan};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at {span}: found {found}, expected one of: {}", expected.join(", "))]
pub struct ParseError {
    pub span: SourceSpan,
    pub found: String,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::End => "end of input".into(),
        }
    }
}

const SYMBOLS: [&str; 18] =
    ["->", "<=", ">=", "==", "+", "-", "*", "/", "^", "(", ")", ",", "{", "}", ";", "<", ">", "="];

fn lex(src: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    let span = |start: usize, end: usize, line: usize, line_start: usize| SourceSpan {
        line,
        column: start - line_start + 1,
        start,
        end,
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let sp = span(start, i, line, line_start);
            let v: f64 = text.parse().map_err(|_| ParseError {
                span: sp,
                found: format!("malformed number {text:?}"),
                expected: vec!["number".into()],
            })?;
            out.push((Tok::Num(v), sp));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), span(start, i, line, line_start)));
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                i += s.len();
                out.push((Tok::Sym(s), span(start, i, line, line_start)));
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    span: span(start, start + ch.len_utf8(), line, line_start),
                    found: format!("character {ch:?}"),
                    expected: vec!["expression".into()],
                });
            }
        }
    }
    out.push((Tok::End, span(src.len(), src.len(), line, line_start)));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 { 0 } else { self.toks[self.pos - 1].1.end }
    }

    fn join(&self, start: SourceSpan) -> SourceSpan {
        SourceSpan { end: self.prev_end().max(start.start), ..start }
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError {
            span: self.span(),
            found: self.peek().describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(s) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(s) if s == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> PResult<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{sym}`")]))
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat("+") {
                BinOp::Add
            } else if self.eat("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.product()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), self.join(start));
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                BinOp::Mul
            } else if self.eat("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), self.join(start));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.eat("-") {
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), self.join(start)));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let start = self.span();
        let base = self.atom()?;
        if self.eat("^") {
            let exp = self.unary()?;
            return Ok(Expr::new(ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exp)), self.join(start)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Num(v), start))
            }
            Tok::Ident(name) if name == "cases" => {
                self.pos += 1;
                self.cases(start)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if self.eat("(") {
                    let func = Func::from_name(&name).ok_or_else(|| ParseError {
                        span: start,
                        found: format!("unknown function `{name}`"),
                        expected: vec!["abs".into(), "exp".into(), "floor".into(), "max".into(), "min".into()],
                    })?;
                    let mut args = vec![self.expr()?];
                    while self.eat(",") {
                        args.push(self.expr()?);
                    }
                    self.expect(")")?;
                    let arity_ok = match func {
                        Func::Max | Func::Min => args.len() >= 2,
                        _ => args.len() == 1,
                    };
                    if !arity_ok {
                        return Err(ParseError {
                            span: self.join(start),
                            found: format!("{} argument(s) to `{name}`", args.len()),
                            expected: vec![match func {
                                Func::Max | Func::Min => "at least two arguments".into(),
                                _ => "one argument".into(),
                            }],
                        });
                    }
                    Ok(Expr::new(ExprKind::Call(func, args), self.join(start)))
                } else {
                    if matches!(name.as_str(), "and" | "or" | "else") {
                        return Err(ParseError {
                            span: start,
                            found: format!("keyword `{name}`"),
                            expected: vec!["expression".into()],
                        });
                    }
                    Ok(Expr::new(ExprKind::Var(name), start))
                }
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(self.error(&["number", "variable", "function call", "`(`", "`-`", "`cases`"])),
        }
    }

    fn cases(&mut self, start: SourceSpan) -> PResult<Expr> {
        self.expect("{")?;
        let mut arms = Vec::new();
        loop {
            if self.eat_word("else") {
                self.expect("->")?;
                let other = self.expr()?;
                self.eat(";");
                self.expect("}")?;
                return Ok(Expr::new(ExprKind::Cases(arms, Box::new(other)), self.join(start)));
            }
            if matches!(self.peek(), Tok::Sym("}")) {
                return Err(self.error(&["`else` arm"]));
            }
            let cond = self.cond()?;
            self.expect("->")?;
            let value = self.expr()?;
            if !self.eat(";") {
                return Err(self.error(&["`;`"]));
            }
            arms.push((cond, value));
        }
    }

    fn cond(&mut self) -> PResult<Cond> {
        let mut lhs = self.conj()?;
        while self.eat_word("or") {
            let rhs = self.conj()?;
            lhs = Cond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> PResult<Cond> {
        let mut lhs = self.catom()?;
        while self.eat_word("and") {
            let rhs = self.catom()?;
            lhs = Cond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn catom(&mut self) -> PResult<Cond> {
        let save = self.pos;
        let first = self.comparison();
        if first.is_ok() || !matches!(self.toks[save].0, Tok::Sym("(")) {
            return first;
        }
        self.pos = save + 1;
        let inner = self.cond();
        match inner {
            Ok(c) if self.eat(")") => Ok(c),
            _ => {
                self.pos = save;
                first
            }
        }
    }

    fn comparison(&mut self) -> PResult<Cond> {
        let lhs = self.expr()?;
        let op = if self.eat("<=") {
            CmpOp::Le
        } else if self.eat(">=") {
            CmpOp::Ge
        } else if self.eat("==") || self.eat("=") {
            CmpOp::Eq
        } else if self.eat("<") {
            CmpOp::Lt
        } else if self.eat(">") {
            CmpOp::Gt
        } else {
            return Err(self.error(&["`<`", "`<=`", "`=`", "`>=`", "`>`"]));
        };
        let rhs = self.expr()?;
        Ok(Cond::Cmp(op, lhs, rhs))
    }

    fn finish(&self) -> PResult<()> {
        if matches!(self.peek(), Tok::End) {
            Ok(())
        } else {
            Err(self.error(&["end of input", "operator"]))
        }
    }
}

pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(source)?, pos: 0 };
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a boolean condition such as `x < 1 and y >= 0`.
pub fn parse_condition(source: &str) -> Result<Cond, ParseError> {
    let mut p = Parser { toks: lex(source)?, pos: 0 };
    let c = p.cond()?;
    p.finish()?;
    Ok(c)
}
