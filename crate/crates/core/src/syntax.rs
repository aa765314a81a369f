//! Signatures with metric arities, preterms, contexts and sequents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MetricError, SyntaxError};
use crate::extreal::{geometric, rational_serde, ExtReal, Rational};
use crate::metric::{closure, metric_quotient, FinMetric, FinPseudoMetric};

/// The metric on an operation's argument positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arity {
    /// Positions `0..n` carrying a finite metric.
    Finite(FinMetric),
    /// Positions `1, 2, …` with `d(n, m) = scale · ratio^min(n, m)` for `n ≠ m`.
    Geometric {
        #[serde(with = "rational_serde")]
        ratio: Rational,
        #[serde(with = "rational_serde")]
        scale: Rational,
    },
}

impl Arity {
    /// Discrete arity with `n` positions.
    pub fn discrete(n: usize) -> Arity {
        Arity::Finite(FinMetric::discrete(n))
    }

    pub fn geometric(ratio: Rational, scale: Rational) -> Result<Arity, SyntaxError> {
        let zero = Rational::from_integer(0);
        let one = Rational::from_integer(1);
        if !(ratio > zero && ratio < one) {
            return Err(SyntaxError::InvalidArity(format!("ratio {ratio} not in (0,1)")));
        }
        if scale <= zero {
            return Err(SyntaxError::InvalidArity(format!("scale {scale} not positive")));
        }
        Ok(Arity::Geometric { ratio, scale })
    }

    pub fn is_stream(&self) -> bool {
        matches!(self, Arity::Geometric { .. })
    }

    /// Whether every pair of distinct positions sits at `INF`.
    pub fn is_discrete(&self) -> bool {
        match self {
            Arity::Finite(m) => (0..m.len()).all(|i| (0..m.len()).all(|j| i == j || m.d(i, j).is_inf())),
            Arity::Geometric { .. } => false,
        }
    }

    /// Stream distance between 1-based positions.
    pub fn stream_distance(ratio: Rational, scale: Rational, i: usize, j: usize) -> ExtReal {
        if i == j {
            ExtReal::ZERO
        } else {
            ExtReal::Fin(geometric(scale, ratio, i.min(j) as u64))
        }
    }

    fn describe(&self) -> String {
        match self {
            Arity::Finite(m) => format!("{} arguments", m.len()),
            Arity::Geometric { .. } => "a stream argument".to_string(),
        }
    }
}

/// Operation symbols with their arities, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    symbols: Vec<(String, Arity)>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn with(mut self, name: &str, arity: Arity) -> Result<Signature, SyntaxError> {
        self.add(name, arity)?;
        Ok(self)
    }

    pub fn add(&mut self, name: &str, arity: Arity) -> Result<(), SyntaxError> {
        if self.arity(name).is_some() {
            return Err(SyntaxError::DuplicateSymbol(name.to_string()));
        }
        self.symbols.push((name.to_string(), arity));
        Ok(())
    }

    pub fn arity(&self, name: &str) -> Option<&Arity> {
        self.symbols.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn symbols(&self) -> impl Iterator<Item = (&str, &Arity)> {
        self.symbols.iter().map(|(n, a)| (n.as_str(), a))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Nullary symbols, in declaration order.
    pub fn constants(&self) -> Vec<&str> {
        self.symbols
            .iter()
            .filter(|(_, a)| matches!(a, Arity::Finite(m) if m.is_empty()))
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Checks that every application matches its symbol's arity.
    pub fn check_term(&self, t: &Preterm) -> Result<(), SyntaxError> {
        match t {
            Preterm::Var(_) => Ok(()),
            Preterm::App { op, args } => {
                let arity = self.arity(op).ok_or_else(|| SyntaxError::UnknownSymbol(op.clone()))?;
                let mismatch = |found: String| SyntaxError::ArityMismatch {
                    symbol: op.clone(),
                    expected: arity.describe(),
                    found,
                };
                match (arity, args) {
                    (Arity::Finite(m), Args::Tuple(ts)) if ts.len() == m.len() => {}
                    (Arity::Finite(_), Args::Tuple(ts)) => return Err(mismatch(format!("{} arguments", ts.len()))),
                    (Arity::Finite(_), Args::Stream { .. }) => return Err(mismatch("a stream argument".into())),
                    (Arity::Geometric { .. }, Args::Tuple(ts)) => {
                        return Err(mismatch(format!("{} arguments", ts.len())))
                    }
                    (Arity::Geometric { .. }, Args::Stream { prefix, tail }) => {
                        if prefix.last() == Some(tail.as_ref()) {
                            return Err(mismatch("a stream whose prefix ends in its tail".into()));
                        }
                    }
                }
                args.positions().into_iter().try_for_each(|a| self.check_term(a))
            }
        }
    }

    pub fn check_sequent(&self, s: &Sequent) -> Result<(), SyntaxError> {
        match &s.body {
            Judgment::Ok(t) => self.check_term(t),
            Judgment::Eq(a, b, _) => {
                self.check_term(a)?;
                self.check_term(b)
            }
        }
    }
}

/// Arguments of an application.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Args {
    Tuple(Vec<Preterm>),
    /// The eventually-constant stream `prefix · tail^ω`, kept in normal form:
    /// the prefix never ends with a copy of the tail.
    Stream {
        prefix: Vec<Preterm>,
        tail: Box<Preterm>,
    },
}

impl Args {
    pub fn stream(mut prefix: Vec<Preterm>, tail: Preterm) -> Args {
        while prefix.last() == Some(&tail) {
            prefix.pop();
        }
        Args::Stream { prefix, tail: Box::new(tail) }
    }

    /// Distinct argument slots: every tuple entry, or the prefix followed by the tail.
    pub fn positions(&self) -> Vec<&Preterm> {
        match self {
            Args::Tuple(ts) => ts.iter().collect(),
            Args::Stream { prefix, tail } => prefix.iter().chain(std::iter::once(tail.as_ref())).collect(),
        }
    }

    fn map(&self, f: &mut impl FnMut(&Preterm) -> Preterm) -> Args {
        match self {
            Args::Tuple(ts) => Args::Tuple(ts.iter().map(&mut *f).collect()),
            Args::Stream { prefix, tail } => {
                let prefix = prefix.iter().map(&mut *f).collect();
                Args::stream(prefix, f(tail))
            }
        }
    }
}

/// Terms before any well-formedness judgement.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preterm {
    Var(String),
    App { op: String, args: Args },
}

impl Preterm {
    pub fn var(name: &str) -> Preterm {
        Preterm::Var(name.to_string())
    }

    pub fn constant(op: &str) -> Preterm {
        Preterm::App { op: op.to_string(), args: Args::Tuple(Vec::new()) }
    }

    pub fn app(op: &str, args: Vec<Preterm>) -> Preterm {
        Preterm::App { op: op.to_string(), args: Args::Tuple(args) }
    }

    pub fn stream(op: &str, prefix: Vec<Preterm>, tail: Preterm) -> Preterm {
        Preterm::App { op: op.to_string(), args: Args::stream(prefix, tail) }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Preterm::Var(_))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Preterm::Var(v) => Some(v),
            Preterm::App { .. } => None,
        }
    }

    /// Variables and nullary applications have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Preterm::Var(_) => 0,
            Preterm::App { args, .. } => {
                let pos = args.positions();
                if pos.is_empty() {
                    0
                } else {
                    1 + pos.iter().map(|t| t.depth()).max().unwrap_or(0)
                }
            }
        }
    }

    /// Free variables in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Preterm::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Preterm::App { args, .. } => {
                for a in args.positions() {
                    a.collect_vars(out);
                }
            }
        }
    }

    /// Operation symbols occurring in the term.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        if let Preterm::App { op, args } = self {
            out.insert(op.clone());
            for a in args.positions() {
                a.collect_symbols(out);
            }
        }
    }

    /// Bottom-up rewrite of every node.
    pub fn rewrite(&self, f: &mut impl FnMut(Preterm) -> Preterm) -> Preterm {
        let rebuilt = match self {
            Preterm::Var(_) => self.clone(),
            Preterm::App { op, args } => Preterm::App { op: op.clone(), args: args.map(&mut |t| t.rewrite(f)) },
        };
        f(rebuilt)
    }

    /// Renames operation symbols; symbols missing from `map` are kept.
    pub fn rename_ops(&self, map: &BTreeMap<String, String>) -> Preterm {
        self.rewrite(&mut |t| match t {
            Preterm::App { op, args } => Preterm::App { op: map.get(&op).cloned().unwrap_or(op), args },
            v => v,
        })
    }

    /// Replaces nullary applications of the listed constants by terms.
    pub fn replace_constants(&self, map: &BTreeMap<String, Preterm>) -> Preterm {
        self.rewrite(&mut |t| match &t {
            Preterm::App { op, args } if args.positions().is_empty() => map.get(op).cloned().unwrap_or(t),
            _ => t,
        })
    }
}

/// Simultaneous substitution; variables absent from `sigma` are unchanged.
pub fn substitute(t: &Preterm, sigma: &BTreeMap<String, Preterm>) -> Preterm {
    match t {
        Preterm::Var(v) => sigma.get(v).cloned().unwrap_or_else(|| t.clone()),
        Preterm::App { op, args } => Preterm::App { op: op.clone(), args: args.map(&mut |a| substitute(a, sigma)) },
    }
}

/// One hypothesis `x =_ε y` of a context.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hyp {
    pub x: String,
    pub y: String,
    pub bound: ExtReal,
}

impl Hyp {
    pub fn new(x: &str, y: &str, bound: ExtReal) -> Hyp {
        Hyp { x: x.to_string(), y: y.to_string(), bound }
    }
}

/// A finite list of quantitative hypotheses on variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Context(pub Vec<Hyp>);

impl Context {
    pub fn empty() -> Context {
        Context(Vec::new())
    }

    pub fn from_triples(triples: &[(&str, &str, ExtReal)]) -> Context {
        Context(triples.iter().map(|(x, y, e)| Hyp::new(x, y, *e)).collect())
    }

    pub fn hyps(&self) -> &[Hyp] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for h in &self.0 {
            for v in [&h.x, &h.y] {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    pub fn contains(&self, x: &str, y: &str, bound: ExtReal) -> bool {
        self.0.iter().any(|h| h.x == x && h.y == y && h.bound == bound)
    }

    pub fn as_triples(&self) -> Vec<(String, String, ExtReal)> {
        self.0.iter().map(|h| (h.x.clone(), h.y.clone(), h.bound)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgment {
    Ok(Preterm),
    Eq(Preterm, Preterm, ExtReal),
}

/// `Γ ⊢ t ok` or `Γ ⊢ s =_ε t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sequent {
    pub context: Context,
    pub body: Judgment,
}

impl Sequent {
    pub fn ok(context: Context, t: Preterm) -> Sequent {
        Sequent { context, body: Judgment::Ok(t) }
    }

    pub fn eq(context: Context, s: Preterm, t: Preterm, bound: ExtReal) -> Sequent {
        Sequent { context, body: Judgment::Eq(s, t, bound) }
    }

    /// Context variables followed by the body's remaining variables.
    pub fn vars(&self) -> Vec<String> {
        let mut out = self.context.vars();
        let body_vars = match &self.body {
            Judgment::Ok(t) => t.vars(),
            Judgment::Eq(s, t, _) => {
                let mut v = s.vars();
                for x in t.vars() {
                    if !v.contains(&x) {
                        v.push(x);
                    }
                }
                v
            }
        };
        for v in body_vars {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    pub fn terms(&self) -> Vec<&Preterm> {
        match &self.body {
            Judgment::Ok(t) => vec![t],
            Judgment::Eq(s, t, _) => vec![s, t],
        }
    }

    pub fn as_eq(&self) -> Option<(&Preterm, &Preterm, ExtReal)> {
        match &self.body {
            Judgment::Eq(s, t, e) => Some((s, t, *e)),
            Judgment::Ok(_) => None,
        }
    }
}

/// `X̂_Γ`, its metric reflection `X_Γ` and the projection between them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextSpace {
    pub pseudo: FinPseudoMetric,
    pub metric: FinMetric,
    pub projection: Vec<usize>,
}

pub fn context_space(ctx: &Context, vars: &[String]) -> Result<ContextSpace, MetricError> {
    let pseudo = closure(vars, &ctx.as_triples())?;
    let q = metric_quotient(&pseudo);
    Ok(ContextSpace { pseudo, metric: q.space, projection: q.projection })
}

/// `Γ(C)`: the context `{x_i =_{d(i,j)} x_j}` over variables named by `var`.
pub fn arity_context(space: &FinMetric, var: impl Fn(usize) -> String) -> Context {
    let mut hyps = Vec::new();
    for i in 0..space.len() {
        for j in (i + 1)..space.len() {
            if space.d(i, j).is_finite() {
                hyps.push(Hyp { x: var(i), y: var(j), bound: space.d(i, j) });
            }
        }
    }
    Context(hyps)
}

/// Finite family of bounds `(t_i, t_j, d(i,j))` that an application requires.
///
/// For finite arities these are the pairs `i < j` at finite distance. For a
/// geometric stream with prefix `t_1 … t_k` and tail `u` they are `(t_i, t_j)`
/// for `i < j ≤ k`, `(t_i, u)` for `i ≤ k`, and `(u, u, 0)`; every other
/// instance follows from these by reflexivity and weakening.
pub fn reduced_app_constraints(arity: &Arity, args: &Args) -> Vec<(Preterm, Preterm, ExtReal)> {
    match (arity, args) {
        (Arity::Finite(m), Args::Tuple(ts)) => {
            let mut out = Vec::new();
            for i in 0..ts.len() {
                for j in (i + 1)..ts.len() {
                    let d = m.d(i, j);
                    if d.is_finite() {
                        out.push((ts[i].clone(), ts[j].clone(), d));
                    }
                }
            }
            out
        }
        (Arity::Geometric { ratio, scale }, Args::Stream { prefix, tail }) => {
            let k = prefix.len();
            let mut out = Vec::new();
            for i in 1..=k {
                for j in (i + 1)..=k {
                    let d = Arity::stream_distance(*ratio, *scale, i, j);
                    out.push((prefix[i - 1].clone(), prefix[j - 1].clone(), d));
                }
                let d = ExtReal::Fin(geometric(*scale, *ratio, i as u64));
                out.push((prefix[i - 1].clone(), (**tail).clone(), d));
            }
            out.push(((**tail).clone(), (**tail).clone(), ExtReal::ZERO));
            out
        }
        _ => Vec::new(),
    }
}

/// Position-by-position argument pairs compared by the nonexpansiveness rule.
///
/// Streams are aligned on `1..=max(k, k')` followed by the two tails.
/// Returns `None` when the shapes are incompatible.
pub fn aligned_args<'a>(a: &'a Args, b: &'a Args) -> Option<Vec<(&'a Preterm, &'a Preterm)>> {
    match (a, b) {
        (Args::Tuple(xs), Args::Tuple(ys)) if xs.len() == ys.len() => Some(xs.iter().zip(ys).collect()),
        (Args::Stream { prefix: p, tail: u }, Args::Stream { prefix: q, tail: v }) => {
            let len = p.len().max(q.len());
            let at = |pre: &'a [Preterm], tail: &'a Preterm, i: usize| pre.get(i).unwrap_or(tail);
            let mut out: Vec<(&Preterm, &Preterm)> = (0..len).map(|i| (at(p, u, i), at(q, v, i))).collect();
            out.push((u.as_ref(), v.as_ref()));
            Some(out)
        }
        _ => None,
    }
}

impl fmt::Display for Preterm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preterm::Var(v) => f.write_str(v),
            Preterm::App { op, args: Args::Tuple(ts) } if ts.is_empty() => write!(f, "'{op}"),
            Preterm::App { op, args: Args::Tuple(ts) } => {
                write!(f, "{op}(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
            Preterm::App { op, args: Args::Stream { prefix, tail } } => {
                write!(f, "{op}(")?;
                for (i, t) in prefix.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "; {tail})")
            }
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, h) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, " {} =[{}] {}", h.x, h.bound, h.y)?;
        }
        if !self.0.is_empty() {
            f.write_str(" ")?;
        }
        f.write_str("}")
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.context.is_empty() {
            write!(f, "{} ", self.context)?;
        }
        match &self.body {
            Judgment::Ok(t) => write!(f, "|- {t} ok"),
            Judgment::Eq(s, t, e) => write!(f, "|- {s} =[{e}] {t}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn v(x: &str) -> Preterm {
        Preterm::var(x)
    }

    #[test]
    fn substitution_examples() {
        let mut s = BTreeMap::new();
        s.insert("x".to_string(), Preterm::app("f", vec![v("y"), v("z")]));
        assert_eq!(substitute(&v("x"), &s), Preterm::app("f", vec![v("y"), v("z")]));

        let mut s = BTreeMap::new();
        s.insert("x".to_string(), Preterm::app("g", vec![v("y")]));
        let t = Preterm::app("f", vec![v("x"), v("x")]);
        let g = Preterm::app("g", vec![v("y")]);
        assert_eq!(substitute(&t, &s), Preterm::app("f", vec![g.clone(), g]));

        let mut s = BTreeMap::new();
        s.insert("y".to_string(), Preterm::constant("c"));
        let t = Preterm::stream("lim", vec![v("x")], v("y"));
        assert_eq!(substitute(&t, &s), Preterm::stream("lim", vec![v("x")], Preterm::constant("c")));
    }

    #[test]
    fn substitution_renormalizes_streams() {
        let mut s = BTreeMap::new();
        s.insert("x".to_string(), v("y"));
        let t = Preterm::stream("lim", vec![v("x")], v("y"));
        assert_eq!(substitute(&t, &s), Preterm::stream("lim", vec![], v("y")));
    }

    #[test]
    fn context_space_examples() {
        let half = ExtReal::new(1, 1);
        let ctx = Context::from_triples(&[("x", "y", half), ("y", "z", ExtReal::new(2, 1))]);
        let vars = ctx.vars();
        let cs = context_space(&ctx, &vars).unwrap();
        assert_eq!(cs.pseudo.dist_by_name("x", "z").unwrap(), ExtReal::new(3, 1));

        let ctx = Context::from_triples(&[("x", "y", ExtReal::ZERO)]);
        let cs = context_space(&ctx, &ctx.vars()).unwrap();
        assert_eq!(cs.metric.len(), 1);
        assert_eq!(cs.projection, vec![0, 0]);

        let c = FinMetric::pair("0", "1", ExtReal::ONE).unwrap();
        let gamma = arity_context(&c, |i| format!("x{i}"));
        let cs = context_space(&gamma, &gamma.vars()).unwrap();
        assert_eq!(cs.metric.matrix(), c.matrix());
    }

    #[test]
    fn reduced_constraints_finite() {
        let a = Arity::Finite(FinMetric::pair("0", "1", ExtReal::ONE).unwrap());
        let args = Args::Tuple(vec![v("s"), v("t")]);
        assert_eq!(reduced_app_constraints(&a, &args), vec![(v("s"), v("t"), ExtReal::ONE)]);
        let discrete = Arity::discrete(2);
        assert!(reduced_app_constraints(&discrete, &args).is_empty());
    }

    #[test]
    fn reduced_constraints_stream() {
        let a = Arity::geometric(Ratio::new(1, 2), Ratio::from_integer(1)).unwrap();
        let args = Args::stream(vec![v("t1"), v("t2")], v("u"));
        let half = ExtReal::new(1, 2);
        let quarter = ExtReal::new(1, 4);
        assert_eq!(
            reduced_app_constraints(&a, &args),
            vec![
                (v("t1"), v("t2"), half),
                (v("t1"), v("u"), half),
                (v("t2"), v("u"), quarter),
                (v("u"), v("u"), ExtReal::ZERO),
            ]
        );
        let constant = Args::stream(vec![], v("u"));
        assert_eq!(reduced_app_constraints(&a, &constant), vec![(v("u"), v("u"), ExtReal::ZERO)]);
    }

    #[test]
    fn stream_constraints_dominate_every_instance() {
        // Index i of a stream with prefix length k is the prefix entry for i <= k
        // and the tail otherwise.
        let (ratio, scale) = (Ratio::new(1, 3), Ratio::new(3, 2));
        let a = Arity::geometric(ratio, scale).unwrap();
        for k in 0..=4usize {
            let prefix: Vec<Preterm> = (1..=k).map(|i| v(&format!("t{i}"))).collect();
            let args = Args::stream(prefix, v("u"));
            let reduced = reduced_app_constraints(&a, &args);
            let at = |i: usize| if i <= k { v(&format!("t{i}")) } else { v("u") };
            for i in 1..=8 {
                for j in 1..=8 {
                    let need = Arity::stream_distance(ratio, scale, i, j);
                    let (si, sj) = (at(i), at(j));
                    let implied = si == sj
                        || reduced
                            .iter()
                            .any(|(p, q, d)| ((p == &si && q == &sj) || (p == &sj && q == &si)) && *d <= need);
                    assert!(implied, "k={k} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn signature_checks_shapes() {
        let mut sig = Signature::new()
            .with("f", Arity::Finite(FinMetric::pair("0", "1", ExtReal::ONE).unwrap()))
            .unwrap()
            .with("lim", Arity::geometric(Ratio::new(1, 2), Ratio::from_integer(1)).unwrap())
            .unwrap();
        assert!(sig.check_term(&Preterm::app("f", vec![v("x"), v("y")])).is_ok());
        assert!(sig.check_term(&Preterm::app("f", vec![v("x")])).is_err());
        assert!(sig.check_term(&Preterm::app("g", vec![])).is_err());
        assert!(sig.check_term(&Preterm::stream("lim", vec![v("x")], v("y"))).is_ok());
        assert!(sig.check_term(&Preterm::app("lim", vec![v("x")])).is_err());
        assert!(sig.add("f", Arity::discrete(1)).is_err());
    }

    #[test]
    fn display_forms() {
        let t = Preterm::app("f", vec![Preterm::constant("a"), Preterm::stream("lim", vec![v("x")], v("y"))]);
        assert_eq!(t.to_string(), "f('a, lim(x; y))");
        let s = Sequent::eq(Context::from_triples(&[("x", "y", ExtReal::ONE)]), v("x"), v("y"), ExtReal::ZERO);
        assert_eq!(s.to_string(), "{ x =[1] y } |- x =[0] y");
        assert_eq!(t.depth(), 2);
        assert_eq!(Preterm::constant("a").depth(), 0);
    }
}
