//! Theory files: a small block language for signatures, axioms, spaces and named terms.
//!
//! ```text
//! theory Comp {
//!   arity N = geometric(ratio = 1/2, scale = 1)
//!   op lim : N
//!   axiom [N over x] |- lim(x...) =[ (1/2)^n ] x[n]
//! }
//! space X { a b : d(a,b) = 1 }
//! term t = lim(; 'a)
//! sequent phi = { x =[1] y } |- x =[0] y
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use metriq::error::TheoryError;
use metriq::extreal::{parse_rational, rational_to_string};
use metriq::metric::FinMetric;
use metriq::syntax::{Args, Arity, Context, Hyp, Preterm, Sequent, Signature};
use metriq::theories::{AxiomSchema, BoundExpr, FamilySchema, ScaledHyp, ScaledSchema, Template, Theory};
use metriq::{ExtReal, Rational};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A parsed theory file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TheoryFile {
    pub theory: Theory,
    pub spaces: BTreeMap<String, FinMetric>,
    pub terms: BTreeMap<String, Preterm>,
    pub sequents: BTreeMap<String, Sequent>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Num(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const SYMBOLS: [&str; 17] = ["|-", "...", "{", "}", "(", ")", "[", "]", ",", ";", ":", "=", "'", "*", "^", "-", "/"];

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < chars.len() && (chars[j] == '.' || chars[j] == '/') && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            out.push((Tok::Num(chars[i..j].iter().collect()), start.0, start.1));
            advance(j - i, &mut i);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            while j < chars.len() && chars[j] == '\'' {
                j += 1;
            }
            out.push((Tok::Ident(chars[i..j].iter().collect()), start.0, start.1));
            advance(j - i, &mut i);
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push((Tok::Sym(s), start.0, start.1));
                advance(s.len(), &mut i);
            }
            None => {
                return Err(ParseError { line, column: col, message: format!("unexpected character `{c}`") });
            }
        }
    }
    out.push((Tok::Eof, line, col));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    arities: BTreeMap<String, Arity>,
    sig: Signature,
    /// Terms are checked against `sig` only inside a theory block.
    checked: bool,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Parser> {
        Ok(Parser { toks: lex(src)?, pos: 0, arities: BTreeMap::new(), sig: Signature::new(), checked: true })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn here(&self) -> (usize, usize) {
        let (_, l, c) = &self.toks[self.pos];
        (*l, *c)
    }

    fn error_at(&self, at: (usize, usize), message: String) -> ParseError {
        ParseError { line: at.0, column: at.1, message }
    }

    fn expected(&self, what: &str) -> ParseError {
        self.error_at(self.here(), format!("expected {what}, found {}", self.peek()))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{s}`")))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.expected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.expected(what)),
        }
    }

    /// Point names may be identifiers or plain numbers.
    fn point_name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            Tok::Num(s) if s.chars().all(|c| c.is_ascii_digit()) => {
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.expected("a point name")),
        }
    }

    fn rational(&mut self) -> PResult<Rational> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Num(s) => {
                self.pos += 1;
                parse_rational(&s).map_err(|e| self.error_at(at, e.to_string()))
            }
            _ => Err(self.expected("a rational number")),
        }
    }

    fn extreal(&mut self) -> PResult<ExtReal> {
        if self.is_kw("inf") {
            self.pos += 1;
            return Ok(ExtReal::Inf);
        }
        let at = self.here();
        let r = self.rational()?;
        ExtReal::try_from_rational(r).ok_or_else(|| self.error_at(at, "distances must be nonnegative".into()))
    }

    fn usize_lit(&mut self) -> PResult<usize> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Num(s) => {
                self.pos += 1;
                s.parse().map_err(|_| self.error_at(at, format!("`{s}` is not a whole number")))
            }
            _ => Err(self.expected("a whole number")),
        }
    }

    fn separators(&mut self) {
        while self.eat(";") {}
    }

    // ---- spaces and arities ----

    /// `{ p q r : d(p,q) = 1, d(q,r) = inf }`; missing distances are `inf`.
    fn space_block(&mut self) -> PResult<FinMetric> {
        let at = self.here();
        self.expect("{")?;
        let mut points = Vec::new();
        while !self.is_sym(":") && !self.is_sym("}") {
            let p = self.point_name()?;
            if points.contains(&p) {
                return Err(self.error_at(at, format!("duplicate point `{p}`")));
            }
            points.push(p);
            self.eat(",");
        }
        let n = points.len();
        let mut dist = vec![vec![ExtReal::Inf; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = ExtReal::ZERO;
        }
        if self.eat(":") {
            loop {
                if self.is_sym("}") {
                    break;
                }
                let at = self.here();
                self.keyword("d")?;
                self.expect("(")?;
                let a = self.point_name()?;
                self.expect(",")?;
                let b = self.point_name()?;
                self.expect(")")?;
                self.expect("=")?;
                let v = self.extreal()?;
                let idx = |p: &str| points.iter().position(|q| q == p);
                let (Some(i), Some(j)) = (idx(&a), idx(&b)) else {
                    return Err(self.error_at(at, format!("unknown point in d({a},{b})")));
                };
                dist[i][j] = v;
                dist[j][i] = v;
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect("}")?;
        FinMetric::new(points, dist).map_err(|e| self.error_at(at, e.to_string()))
    }

    fn arity_expr(&mut self) -> PResult<Arity> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Sym("{") => Ok(Arity::Finite(self.space_block()?)),
            Tok::Num(_) => Ok(Arity::discrete(self.usize_lit()?)),
            Tok::Ident(name) if name == "discrete" && self.peek_at(1) == &Tok::Sym("(") => {
                self.pos += 2;
                let n = self.usize_lit()?;
                self.expect(")")?;
                Ok(Arity::discrete(n))
            }
            Tok::Ident(name) if name == "geometric" && self.peek_at(1) == &Tok::Sym("(") => {
                self.pos += 2;
                self.keyword("ratio")?;
                self.expect("=")?;
                let ratio = self.rational()?;
                self.expect(",")?;
                self.keyword("scale")?;
                self.expect("=")?;
                let scale = self.rational()?;
                self.expect(")")?;
                Arity::geometric(ratio, scale).map_err(|e| self.error_at(at, e.to_string()))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                self.arities.get(&name).cloned().ok_or_else(|| self.error_at(at, format!("undeclared arity `{name}`")))
            }
            _ => Err(self.expected("an arity")),
        }
    }

    // ---- terms and sequents ----

    fn term(&mut self) -> PResult<Preterm> {
        let at = self.here();
        if self.eat("'") {
            let name = self.ident("a constant name")?;
            let t = Preterm::constant(&name);
            self.check_term(&t, at)?;
            return Ok(t);
        }
        let name = self.ident("a term")?;
        if !self.eat("(") {
            return Ok(Preterm::var(&name));
        }
        let mut items = Vec::new();
        let mut tail = None;
        if !self.eat(")") {
            loop {
                if self.eat(";") {
                    tail = Some(self.term()?);
                    self.expect(")")?;
                    break;
                }
                items.push(self.term()?);
                if self.eat(")") {
                    break;
                }
                if !self.is_sym(";") {
                    self.expect(",")?;
                }
            }
        }
        let t = match tail {
            Some(tail) => Preterm::stream(&name, items, tail),
            None => Preterm::app(&name, items),
        };
        self.check_term(&t, at)?;
        Ok(t)
    }

    fn check_term(&self, t: &Preterm, at: (usize, usize)) -> PResult<()> {
        if !self.checked {
            return Ok(());
        }
        // Only the outermost symbol: arguments were checked when they were parsed.
        // Distinct placeholders keep the shape of the argument list.
        let Preterm::App { op, args } = t else { return Ok(()) };
        let hole = |i: usize| Preterm::var(&format!("_{i}"));
        let shallow = Preterm::App {
            op: op.clone(),
            args: match args {
                Args::Tuple(ts) => Args::Tuple((0..ts.len()).map(hole).collect()),
                Args::Stream { prefix, tail } => {
                    let shape: Vec<Preterm> = prefix.iter().chain([tail.as_ref()]).cloned().collect();
                    let mut ids: Vec<&Preterm> = Vec::new();
                    let mut holes: Vec<Preterm> = shape
                        .iter()
                        .map(|t| {
                            let i = ids.iter().position(|u| *u == t).unwrap_or_else(|| {
                                ids.push(t);
                                ids.len() - 1
                            });
                            hole(i)
                        })
                        .collect();
                    let tail = holes.pop().expect("a tail");
                    Args::Stream { prefix: holes, tail: Box::new(tail) }
                }
            },
        };
        self.sig.check_term(&shallow).map_err(|e| self.error_at(at, e.to_string()))
    }

    fn bound(&mut self) -> PResult<ExtReal> {
        self.expect("=")?;
        self.expect("[")?;
        let e = self.extreal()?;
        self.expect("]")?;
        Ok(e)
    }

    fn context(&mut self) -> PResult<Context> {
        self.expect("{")?;
        let mut hyps = Vec::new();
        while !self.eat("}") {
            let x = self.ident("a variable")?;
            let e = self.bound()?;
            let y = self.ident("a variable")?;
            hyps.push(Hyp::new(&x, &y, e));
            if !self.eat(",") {
                self.expect("}")?;
                break;
            }
        }
        Ok(Context(hyps))
    }

    fn sequent(&mut self) -> PResult<Sequent> {
        let context = if self.is_sym("{") { self.context()? } else { Context::empty() };
        self.expect("|-")?;
        let s = self.term()?;
        if self.is_kw("ok") {
            self.pos += 1;
            return Ok(Sequent::ok(context, s));
        }
        let e = self.bound()?;
        let t = self.term()?;
        Ok(Sequent::eq(context, s, t, e))
    }

    // ---- axioms ----

    fn template(&mut self, var: &str) -> PResult<Template> {
        let at = self.here();
        let name = self.ident("a template")?;
        if name == var {
            self.expect("[")?;
            let t = if self.is_kw("n") {
                self.pos += 1;
                Template::Index
            } else {
                Template::At(self.usize_lit()?)
            };
            self.expect("]")?;
            return Ok(t);
        }
        self.expect("(")?;
        if self.is_kw(var) && self.peek_at(1) == &Tok::Sym("...") {
            self.pos += 2;
            self.expect(")")?;
            return Ok(Template::Whole(name));
        }
        let mut args = Vec::new();
        if !self.eat(")") {
            loop {
                args.push(self.template(var)?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        if self.sig.arity(&name).is_none() {
            return Err(self.error_at(at, format!("unknown operation symbol `{name}`")));
        }
        Ok(Template::App { op: name, args })
    }

    /// `c`, `inf`, `(r)^n` or `c * (r)^n`.
    fn bound_expr(&mut self) -> PResult<BoundExpr> {
        let scale = if self.is_sym("(") {
            Rational::from_integer(1)
        } else {
            let e = self.extreal()?;
            if !self.eat("*") {
                return Ok(BoundExpr::Const(e));
            }
            e.finite().ok_or_else(|| self.expected("a finite scale"))?
        };
        self.expect("(")?;
        let ratio = self.rational()?;
        self.expect(")")?;
        self.expect("^")?;
        self.keyword("n")?;
        Ok(BoundExpr::Geometric { scale, ratio })
    }

    /// `eps`, `c * eps`, or `0`.
    fn coeff(&mut self) -> PResult<Rational> {
        if self.is_kw("eps") {
            self.pos += 1;
            return Ok(Rational::from_integer(1));
        }
        let c = self.rational()?;
        if self.eat("*") {
            self.keyword("eps")?;
        } else if c != Rational::from_integer(0) {
            return Err(self.expected("`*`"));
        }
        Ok(c)
    }

    fn axiom(&mut self) -> PResult<AxiomSchema> {
        if self.eat("[") {
            let arity = self.arity_expr()?;
            self.keyword("over")?;
            let var = self.ident("the family variable")?;
            self.expect("]")?;
            self.expect("|-")?;
            let lhs = self.template(&var)?;
            self.expect("=")?;
            self.expect("[")?;
            let bound = self.bound_expr()?;
            self.expect("]")?;
            let rhs = self.template(&var)?;
            return Ok(AxiomSchema::Family(FamilySchema { arity, var, lhs, rhs, bound }));
        }
        if self.is_kw("scaled") {
            self.pos += 1;
            self.expect("{")?;
            let mut hyps = Vec::new();
            while !self.eat("}") {
                let x = self.ident("a variable")?;
                self.expect("=")?;
                self.expect("[")?;
                let coeff = self.coeff()?;
                self.expect("]")?;
                let y = self.ident("a variable")?;
                hyps.push(ScaledHyp { x, y, coeff });
                if !self.eat(",") {
                    self.expect("}")?;
                    break;
                }
            }
            self.expect("|-")?;
            let lhs = self.term()?;
            self.expect("=")?;
            self.expect("[")?;
            let coeff = self.coeff()?;
            self.expect("]")?;
            let rhs = self.term()?;
            return Ok(AxiomSchema::Scaled(ScaledSchema { hyps, lhs, rhs, coeff }));
        }
        let at = self.here();
        let seq = self.sequent()?;
        if seq.as_eq().is_none() {
            return Err(self.error_at(at, "axioms must be equations".into()));
        }
        Ok(AxiomSchema::Concrete(seq))
    }

    fn theory(&mut self) -> PResult<Theory> {
        self.keyword("theory")?;
        let name = self.ident("a theory name")?;
        self.expect("{")?;
        let mut axioms = Vec::new();
        let mut axiom_at = Vec::new();
        loop {
            self.separators();
            if self.eat("}") {
                break;
            }
            let at = self.here();
            match self.ident("`arity`, `op`, `axiom` or `}`")?.as_str() {
                "arity" => {
                    let name = self.ident("an arity name")?;
                    self.expect("=")?;
                    let a = self.arity_expr()?;
                    if self.arities.insert(name.clone(), a).is_some() {
                        return Err(self.error_at(at, format!("duplicate arity `{name}`")));
                    }
                }
                "op" => {
                    let name = self.ident("an operation name")?;
                    self.expect(":")?;
                    let a = self.arity_expr()?;
                    self.sig.add(&name, a).map_err(|e| self.error_at(at, e.to_string()))?;
                }
                "axiom" => {
                    axiom_at.push(self.here());
                    axioms.push(self.axiom()?);
                }
                other => {
                    return Err(self.error_at(at, format!("expected `arity`, `op`, `axiom` or `}}`, found `{other}`")))
                }
            }
        }
        let theory = Theory::new(&name, self.sig.clone(), axioms);
        if let Err(e) = theory.validate() {
            let at = match &e {
                TheoryError::MalformedAxiom { index, .. } => axiom_at[*index],
                _ => self.here(),
            };
            return Err(self.error_at(at, e.to_string()));
        }
        Ok(theory)
    }

    fn file(&mut self) -> PResult<TheoryFile> {
        self.separators();
        let theory = self.theory()?;
        // Named terms may mention generators of any space, so they are checked on use.
        self.checked = false;
        let mut spaces = BTreeMap::new();
        let mut terms = BTreeMap::new();
        let mut sequents = BTreeMap::new();
        loop {
            self.separators();
            if *self.peek() == Tok::Eof {
                break;
            }
            let at = self.here();
            let kind = self.ident("`space`, `term`, `sequent` or end of input")?;
            let name = self.ident("a name")?;
            let fresh = match kind.as_str() {
                "space" => spaces.insert(name.clone(), self.space_block()?).is_none(),
                "term" => {
                    self.expect("=")?;
                    terms.insert(name.clone(), self.term()?).is_none()
                }
                "sequent" => {
                    self.expect("=")?;
                    sequents.insert(name.clone(), self.sequent()?).is_none()
                }
                other => {
                    return Err(self.error_at(at, format!("expected `space`, `term` or `sequent`, found `{other}`")))
                }
            };
            if !fresh {
                return Err(self.error_at(at, format!("duplicate {kind} `{name}`")));
            }
        }
        Ok(TheoryFile { theory, spaces, terms, sequents })
    }

    fn finish<T>(&mut self, v: T) -> PResult<T> {
        if *self.peek() == Tok::Eof {
            Ok(v)
        } else {
            Err(self.expected("end of input"))
        }
    }
}

pub fn parse_theory(src: &str) -> Result<TheoryFile, ParseError> {
    Parser::new(src)?.file()
}

fn with_signature(sig: &Signature, src: &str) -> PResult<Parser> {
    let mut p = Parser::new(src)?;
    p.sig = sig.clone();
    Ok(p)
}

/// Parses without a signature check, for terms over generators not yet in scope.
pub fn parse_term_unchecked(src: &str) -> Result<Preterm, ParseError> {
    let mut p = Parser::new(src)?;
    p.checked = false;
    let t = p.term()?;
    p.finish(t)
}

pub fn parse_sequent_unchecked(src: &str) -> Result<Sequent, ParseError> {
    let mut p = Parser::new(src)?;
    p.checked = false;
    let s = p.sequent()?;
    p.finish(s)
}

pub fn parse_term(sig: &Signature, src: &str) -> Result<Preterm, ParseError> {
    let mut p = with_signature(sig, src)?;
    let t = p.term()?;
    p.finish(t)
}

pub fn parse_sequent(sig: &Signature, src: &str) -> Result<Sequent, ParseError> {
    let mut p = with_signature(sig, src)?;
    let s = p.sequent()?;
    p.finish(s)
}

/// A context, with or without the surrounding braces.
pub fn parse_context(src: &str) -> Result<Context, ParseError> {
    let trimmed = src.trim();
    let braced = if trimmed.starts_with('{') { trimmed.to_string() } else { format!("{{{trimmed}}}") };
    let mut p = Parser::new(&braced)?;
    let c = p.context()?;
    p.finish(c)
}

/// A space block such as `{ a b : d(a,b) = 1 }`.
pub fn parse_space(src: &str) -> Result<FinMetric, ParseError> {
    let mut p = Parser::new(src)?;
    let m = p.space_block()?;
    p.finish(m)
}

// ---- printing ----

fn print_space(m: &FinMetric) -> String {
    let mut s = String::from("{");
    for p in m.points() {
        write!(s, " {p}").unwrap();
    }
    let mut first = true;
    for i in 0..m.len() {
        for j in (i + 1)..m.len() {
            if m.d(i, j).is_finite() {
                s.push_str(if first { " : " } else { ", " });
                first = false;
                write!(s, "d({},{}) = {}", m.point(i), m.point(j), m.d(i, j)).unwrap();
            }
        }
    }
    s.push_str(" }");
    s
}

pub fn print_arity(a: &Arity) -> String {
    match a {
        Arity::Finite(m) if *m == FinMetric::discrete(m.len()) => format!("discrete({})", m.len()),
        Arity::Finite(m) => print_space(m),
        Arity::Geometric { ratio, scale } => {
            format!("geometric(ratio = {}, scale = {})", rational_to_string(ratio), rational_to_string(scale))
        }
    }
}

fn print_template(t: &Template, var: &str) -> String {
    match t {
        Template::Whole(op) => format!("{op}({var}...)"),
        Template::Index => format!("{var}[n]"),
        Template::At(i) => format!("{var}[{i}]"),
        Template::App { op, args } => {
            let inner: Vec<String> = args.iter().map(|a| print_template(a, var)).collect();
            format!("{op}({})", inner.join(", "))
        }
    }
}

fn print_coeff(c: &Rational) -> String {
    if *c == Rational::from_integer(1) {
        "eps".into()
    } else {
        format!("{}*eps", rational_to_string(c))
    }
}

fn print_axiom(ax: &AxiomSchema) -> String {
    match ax {
        AxiomSchema::Concrete(s) => s.to_string(),
        AxiomSchema::Family(f) => {
            let bound = match &f.bound {
                BoundExpr::Const(e) => e.to_string(),
                BoundExpr::Geometric { scale, ratio } => {
                    format!("{}*({})^n", rational_to_string(scale), rational_to_string(ratio))
                }
            };
            format!(
                "[{} over {}] |- {} =[{bound}] {}",
                print_arity(&f.arity),
                f.var,
                print_template(&f.lhs, &f.var),
                print_template(&f.rhs, &f.var)
            )
        }
        AxiomSchema::Scaled(s) => {
            let hyps: Vec<String> =
                s.hyps.iter().map(|h| format!("{} =[{}] {}", h.x, print_coeff(&h.coeff), h.y)).collect();
            format!("scaled {{ {} }} |- {} =[{}] {}", hyps.join(", "), s.lhs, print_coeff(&s.coeff), s.rhs)
        }
    }
}

pub fn print_theory(t: &Theory) -> String {
    let mut s = format!("theory {} {{\n", t.name);
    for (name, arity) in t.signature.symbols() {
        writeln!(s, "  op {name} : {}", print_arity(arity)).unwrap();
    }
    for ax in &t.axioms {
        writeln!(s, "  axiom {}", print_axiom(ax)).unwrap();
    }
    s.push_str("}\n");
    s
}

pub fn print_theory_file(f: &TheoryFile) -> String {
    let mut s = print_theory(&f.theory);
    for (name, m) in &f.spaces {
        writeln!(s, "space {name} {}", print_space(m)).unwrap();
    }
    for (name, t) in &f.terms {
        writeln!(s, "term {name} = {t}").unwrap();
    }
    for (name, q) in &f.sequents {
        writeln!(s, "sequent {name} = {q}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use metriq::theories::{builtin, BUILTINS};

    const COMP: &str = "theory Comp {
        arity N = geometric(ratio = 1/2, scale = 1)
        op lim : N
        axiom [N over x] |- lim(x...) =[ (1/2)^n ] x[n]
    }";

    #[test]
    fn comp_source_matches_builtin() {
        let f = parse_theory(COMP).unwrap();
        assert_eq!(f.theory.signature, builtin("comp").unwrap().signature);
        assert_eq!(f.theory.axioms, builtin("comp").unwrap().axioms);
    }

    #[test]
    fn t1_and_t2_sources() {
        let t1 = parse_theory("theory T1 { arity P = { 0 1 : d(0,1)=1 } ; op f : P }").unwrap();
        assert_eq!(t1.theory.signature, builtin("t1").unwrap().signature);
        let t2 = parse_theory("theory T2 { axiom { x =[1] y } |- x =[0] y }").unwrap();
        assert!(t2.theory.signature.is_empty());
        assert_eq!(t2.theory.axioms, builtin("t2").unwrap().axioms);
    }

    #[test]
    fn undeclared_arity_is_positioned() {
        let err = parse_theory("theory T {\n  op f : P\n}").unwrap_err();
        assert_eq!((err.line, err.column), (2, 10));
        assert!(err.message.contains("undeclared arity `P`"));
    }

    #[test]
    fn decimals_are_exact() {
        let f = parse_theory("theory T { axiom { x =[0.5] y } |- x =[0.25] y }").unwrap();
        let AxiomSchema::Concrete(s) = &f.theory.axioms[0] else { panic!() };
        assert_eq!(s.as_eq().unwrap().2, ExtReal::new(1, 4));
        assert_eq!(s.context.hyps()[0].bound, ExtReal::new(1, 2));
    }

    #[test]
    fn arity_mismatch_in_terms() {
        let err = parse_theory("theory T { op f : 2\n axiom |- f(x) =[0] x }").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("expects"));
    }

    #[test]
    fn builtins_round_trip() {
        for name in BUILTINS {
            let theory = builtin(name).unwrap();
            let text = print_theory(&theory);
            let back = parse_theory(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert_eq!(back.theory, theory, "{text}");
        }
    }

    #[test]
    fn named_items() {
        let src = "theory S { op f : 2; op g : 1 }
            space X { x1 x2 x3 : d(x1,x2) = 1 }
            term s = f('x1, g('x3))
            sequent phi = { x =[1] y } |- f(x, y) ok";
        let f = parse_theory(src).unwrap();
        assert_eq!(f.spaces["X"].d(0, 1), ExtReal::ONE);
        assert_eq!(f.spaces["X"].d(0, 2), ExtReal::Inf);
        assert_eq!(f.terms["s"].to_string(), "f('x1, g('x3))");
        assert_eq!(parse_theory(&print_theory_file(&f)).unwrap(), f);
        let err = parse_theory("theory S { op f : 2 }\nterm s = 'a\nterm s = 'b").unwrap_err();
        assert_eq!(err.line, 3);
    }
}
