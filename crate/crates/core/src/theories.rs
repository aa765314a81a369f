//! Theory presentations, combinators and the built-in library.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{SyntaxError, TheoryError};
use crate::extreal::{geometric, rational_serde, ExtReal, Rational};
use crate::kernel::Proof;
use crate::metric::FinMetric;
use crate::prover::{prove_ok, ProverConfig};
use crate::syntax::{Args, Arity, Context, Hyp, Preterm, Sequent, Signature};

/// Term template of an arity-indexed axiom family over the family variable `x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    /// `op(x...)`: the operation applied to the whole family.
    Whole(String),
    /// `x[n]`: the family member at the schema index.
    Index,
    /// `x[i]` for a fixed position.
    At(usize),
    App {
        op: String,
        args: Vec<Template>,
    },
}

/// Bound of an indexed family: a constant or `scale · ratio^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundExpr {
    Const(ExtReal),
    Geometric {
        #[serde(with = "rational_serde")]
        scale: Rational,
        #[serde(with = "rational_serde")]
        ratio: Rational,
    },
}

impl BoundExpr {
    pub fn at(&self, n: u64) -> ExtReal {
        match self {
            BoundExpr::Const(e) => *e,
            BoundExpr::Geometric { scale, ratio } => ExtReal::Fin(geometric(*scale, *ratio, n)),
        }
    }
}

/// `Γ(C) ⊢ lhs[n] =_{β(n)} rhs[n]` for every position `n` of the arity `C`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FamilySchema {
    pub arity: Arity,
    pub var: String,
    pub lhs: Template,
    pub rhs: Template,
    pub bound: BoundExpr,
}

/// `{x_h =_{a_h·ε} y_h} ⊢ lhs =_{b·ε} rhs` for every `ε ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScaledSchema {
    pub hyps: Vec<ScaledHyp>,
    pub lhs: Preterm,
    pub rhs: Preterm,
    #[serde(with = "rational_serde")]
    pub coeff: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScaledHyp {
    pub x: String,
    pub y: String,
    #[serde(with = "rational_serde")]
    pub coeff: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxiomSchema {
    Concrete(Sequent),
    Family(FamilySchema),
    Scaled(ScaledSchema),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theory {
    pub name: String,
    pub signature: Signature,
    pub axioms: Vec<AxiomSchema>,
}

/// Argument at position `n` (1-based for streams, 0-based for tuples).
pub fn family_arg(args: &Args, n: u64) -> Option<&Preterm> {
    match args {
        Args::Tuple(ts) => ts.get(n as usize),
        Args::Stream { prefix, tail } => {
            if n == 0 {
                None
            } else {
                Some(prefix.get(n as usize - 1).unwrap_or(tail))
            }
        }
    }
}

impl Template {
    pub fn instantiate(&self, n: u64, args: &Args) -> Option<Preterm> {
        Some(match self {
            Template::Whole(op) => Preterm::App { op: op.clone(), args: args.clone() },
            Template::Index => family_arg(args, n)?.clone(),
            Template::At(i) => family_arg(args, *i as u64)?.clone(),
            Template::App { op, args: ts } => {
                let inner = ts.iter().map(|t| t.instantiate(n, args)).collect::<Option<Vec<_>>>()?;
                Preterm::app(op, inner)
            }
        })
    }

    fn rename_ops(&self, map: &BTreeMap<String, String>) -> Template {
        let rn = |s: &String| map.get(s).cloned().unwrap_or_else(|| s.clone());
        match self {
            Template::Whole(op) => Template::Whole(rn(op)),
            Template::App { op, args } => {
                Template::App { op: rn(op), args: args.iter().map(|t| t.rename_ops(map)).collect() }
            }
            t => t.clone(),
        }
    }

    fn check(&self, sig: &Signature, family: &Arity) -> Result<(), String> {
        match self {
            Template::Whole(op) => match sig.arity(op) {
                Some(a) if a == family => Ok(()),
                Some(_) => Err(format!("`{op}` does not have the family's arity")),
                None => Err(format!("unknown operation symbol `{op}`")),
            },
            Template::Index => Ok(()),
            Template::At(i) => match family {
                Arity::Finite(m) if *i < m.len() => Ok(()),
                Arity::Geometric { .. } if *i >= 1 => Ok(()),
                _ => Err(format!("position {i} is outside the family")),
            },
            Template::App { op, args } => {
                match sig.arity(op) {
                    Some(Arity::Finite(m)) if m.len() == args.len() => {}
                    Some(_) => return Err(format!("`{op}` applied to {} arguments", args.len())),
                    None => return Err(format!("unknown operation symbol `{op}`")),
                }
                args.iter().try_for_each(|t| t.check(sig, family))
            }
        }
    }
}

impl FamilySchema {
    /// Valid schema indices: `0..len` for finite arities, `1..` for streams.
    pub fn first_index(&self) -> u64 {
        if self.arity.is_stream() {
            1
        } else {
            0
        }
    }

    /// Instance at index `n` with the family variables replaced by `args`.
    pub fn instance(&self, n: u64, args: &Args) -> Option<(Preterm, Preterm, ExtReal)> {
        let lhs = self.lhs.instantiate(n, args)?;
        let rhs = self.rhs.instantiate(n, args)?;
        Some((lhs, rhs, self.bound.at(n)))
    }
}

impl ScaledSchema {
    /// The concrete sequent at `ε`.
    pub fn instance(&self, eps: Rational) -> Sequent {
        let hyps = self.hyps.iter().map(|h| Hyp::new(&h.x, &h.y, ExtReal::from_rational(h.coeff * eps))).collect();
        let bound = ExtReal::from_rational(self.coeff * eps);
        Sequent::eq(Context(hyps), self.lhs.clone(), self.rhs.clone(), bound)
    }

    /// Recovers `ε` from a candidate instance, if it is one.
    pub fn match_instance(&self, seq: &Sequent) -> Option<Rational> {
        let (_, _, bound) = seq.as_eq()?;
        let b = bound.finite()?;
        let eps = if self.coeff == Rational::from_integer(0) {
            if b != self.coeff {
                return None;
            }
            // The conclusion does not pin ε down; the hypotheses must.
            self.hyps
                .iter()
                .zip(seq.context.hyps())
                .find(|(h, _)| h.coeff != Rational::from_integer(0))
                .and_then(|(h, c)| c.bound.finite().map(|v| v / h.coeff))
                .unwrap_or_else(|| Rational::from_integer(0))
        } else {
            b / self.coeff
        };
        (self.instance(eps) == *seq).then_some(eps)
    }
}

impl Theory {
    pub fn new(name: &str, signature: Signature, axioms: Vec<AxiomSchema>) -> Theory {
        Theory { name: name.to_string(), signature, axioms }
    }

    /// Checks that every axiom is expressed over the signature.
    pub fn validate(&self) -> Result<(), TheoryError> {
        for (index, ax) in self.axioms.iter().enumerate() {
            let bad = |reason: String| TheoryError::MalformedAxiom { index, reason };
            match ax {
                AxiomSchema::Concrete(s) => {
                    self.signature.check_sequent(s).map_err(|e| bad(e.to_string()))?;
                    if s.as_eq().is_none() {
                        return Err(bad("axioms must be equations".into()));
                    }
                    if s.as_eq().is_some_and(|(_, _, e)| e.is_inf()) {
                        return Err(bad("axiom bound must be finite".into()));
                    }
                }
                AxiomSchema::Family(f) => {
                    f.lhs.check(&self.signature, &f.arity).map_err(bad)?;
                    f.rhs.check(&self.signature, &f.arity).map_err(bad)?;
                    if let BoundExpr::Geometric { scale, ratio } = &f.bound {
                        let zero = Rational::from_integer(0);
                        if *scale < zero || *ratio <= zero || *ratio >= Rational::from_integer(1) {
                            return Err(bad("geometric bound needs scale >= 0 and 0 < ratio < 1".into()));
                        }
                    }
                    if f.bound == BoundExpr::Const(ExtReal::Inf) {
                        return Err(bad("axiom bound must be finite".into()));
                    }
                }
                AxiomSchema::Scaled(s) => {
                    self.signature.check_term(&s.lhs).map_err(|e| bad(e.to_string()))?;
                    self.signature.check_term(&s.rhs).map_err(|e| bad(e.to_string()))?;
                    let zero = Rational::from_integer(0);
                    if s.coeff < zero || s.hyps.iter().any(|h| h.coeff < zero) {
                        return Err(bad("coefficients must be nonnegative".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn rename_ops(&self, map: &BTreeMap<String, String>) -> Theory {
        let mut signature = Signature::new();
        for (name, arity) in self.signature.symbols() {
            let new = map.get(name).map(String::as_str).unwrap_or(name);
            signature.add(new, arity.clone()).expect("renaming must stay injective");
        }
        let rename_seq = |s: &Sequent| -> Sequent {
            let mut s = s.clone();
            s.body = match s.body {
                crate::syntax::Judgment::Ok(t) => crate::syntax::Judgment::Ok(t.rename_ops(map)),
                crate::syntax::Judgment::Eq(a, b, e) => {
                    crate::syntax::Judgment::Eq(a.rename_ops(map), b.rename_ops(map), e)
                }
            };
            s
        };
        let axioms = self
            .axioms
            .iter()
            .map(|ax| match ax {
                AxiomSchema::Concrete(s) => AxiomSchema::Concrete(rename_seq(s)),
                AxiomSchema::Family(f) => AxiomSchema::Family(FamilySchema {
                    lhs: f.lhs.rename_ops(map),
                    rhs: f.rhs.rename_ops(map),
                    ..f.clone()
                }),
                AxiomSchema::Scaled(s) => AxiomSchema::Scaled(ScaledSchema {
                    lhs: s.lhs.rename_ops(map),
                    rhs: s.rhs.rename_ops(map),
                    ..s.clone()
                }),
            })
            .collect();
        Theory { name: self.name.clone(), signature, axioms }
    }
}

/// Outcome of [`check_axioms`].
#[derive(Clone, Debug)]
pub enum AxiomVerdict {
    /// Ok-derivations for both sides of every sampled axiom instance.
    WellFormed(Vec<Arc<Proof>>),
    Failed {
        axiom: usize,
        side: String,
    },
}

impl AxiomVerdict {
    pub fn is_well_formed(&self) -> bool {
        matches!(self, AxiomVerdict::WellFormed(_))
    }
}

/// Sample instances of an axiom as ordinary sequents, used to check well-formedness.
pub fn sample_instances(ax: &AxiomSchema) -> Vec<Sequent> {
    match ax {
        AxiomSchema::Concrete(s) => vec![s.clone()],
        AxiomSchema::Scaled(s) => {
            vec![s.instance(Rational::from_integer(1)), s.instance(Rational::from_integer(0))]
        }
        AxiomSchema::Family(f) => {
            let var = |i: &dyn std::fmt::Display| Preterm::var(&format!("{}{i}", f.var));
            let (args, indices): (Args, Vec<u64>) = match &f.arity {
                Arity::Finite(m) => {
                    (Args::Tuple((0..m.len()).map(|i| var(&i)).collect()), (0..m.len() as u64).collect())
                }
                Arity::Geometric { .. } => (Args::stream(vec![var(&1), var(&2)], var(&"_tail")), vec![1, 2, 3]),
            };
            let ctx = family_context(&f.arity, &args);
            indices
                .into_iter()
                .filter_map(|n| f.instance(n, &args))
                .map(|(l, r, b)| Sequent::eq(ctx.clone(), l, r, b))
                .collect()
        }
    }
}

/// Context carrying the arity constraints among variable arguments.
pub fn family_context(arity: &Arity, args: &Args) -> Context {
    let hyps = crate::syntax::reduced_app_constraints(arity, args)
        .into_iter()
        .filter(|(a, b, _)| a != b)
        .filter_map(|(a, b, e)| Some(Hyp::new(a.as_var()?, b.as_var()?, e)))
        .collect();
    Context(hyps)
}

/// Derives `Γ ⊢ s ok` and `Γ ⊢ t ok` for every axiom using the axioms themselves.
pub fn check_axioms(theory: &Theory, cfg: &ProverConfig) -> AxiomVerdict {
    let mut witnesses = Vec::new();
    for (i, ax) in theory.axioms.iter().enumerate() {
        for seq in sample_instances(ax) {
            for t in seq.terms() {
                match prove_ok(theory, &seq.context, t, cfg) {
                    Some(p) => witnesses.push(p),
                    None => return AxiomVerdict::Failed { axiom: i, side: t.to_string() },
                }
            }
        }
    }
    AxiomVerdict::WellFormed(witnesses)
}

/// `T(A)`: one constant per point and `⊢ a =_{d(a,a')} a'` for every finite distance.
pub fn theory_of_space(a: &FinMetric) -> Theory {
    let mut signature = Signature::new();
    for p in a.points() {
        signature.add(p, Arity::discrete(0)).expect("points are distinct");
    }
    let mut axioms = Vec::new();
    for i in 0..a.len() {
        for j in 0..a.len() {
            let d = a.d(i, j);
            if d.is_finite() {
                axioms.push(AxiomSchema::Concrete(Sequent::eq(
                    Context::empty(),
                    Preterm::constant(a.point(i)),
                    Preterm::constant(a.point(j)),
                    d,
                )));
            }
        }
    }
    Theory::new("Space", signature, axioms)
}

/// Result of [`disjoint_union_with_maps`]: the union and the renamings applied to each side.
#[derive(Clone, Debug)]
pub struct Union {
    pub theory: Theory,
    pub left: BTreeMap<String, String>,
    pub right: BTreeMap<String, String>,
}

/// Union of signatures and axioms; colliding symbols become `l_f` and `r_f`.
pub fn disjoint_union_with_maps(t: &Theory, u: &Theory) -> Union {
    let taken: Vec<&str> = t.signature.symbols().map(|(n, _)| n).chain(u.signature.symbols().map(|(n, _)| n)).collect();
    let fresh = |base: String| {
        let mut name = base;
        while taken.contains(&name.as_str()) {
            name.push('\'');
        }
        name
    };
    let mut left = BTreeMap::new();
    let mut right = BTreeMap::new();
    for (name, _) in u.signature.symbols() {
        if t.signature.arity(name).is_some() {
            left.insert(name.to_string(), fresh(format!("l_{name}")));
            right.insert(name.to_string(), fresh(format!("r_{name}")));
        }
    }
    let lt = t.rename_ops(&left);
    let rt = u.rename_ops(&right);
    let mut signature = lt.signature.clone();
    for (name, arity) in rt.signature.symbols() {
        signature.add(name, arity.clone()).expect("collisions were renamed");
    }
    let mut axioms = lt.axioms;
    axioms.extend(rt.axioms);
    let theory = Theory::new(&format!("{}+{}", t.name, u.name), signature, axioms);
    Union { theory, left, right }
}

pub fn disjoint_union(t: &Theory, u: &Theory) -> Theory {
    disjoint_union_with_maps(t, u).theory
}

pub const BUILTINS: [&str; 6] = ["comp", "t1", "t2", "contraction", "strongfinit", "semilattice"];

pub fn builtin(name: &str) -> Result<Theory, TheoryError> {
    let x = || Preterm::var("x");
    let y = || Preterm::var("y");
    let z = || Preterm::var("z");
    let theory = match name {
        "comp" => {
            let half = Ratio::new(1, 2);
            let one = Rational::from_integer(1);
            let n = Arity::geometric(half, one)?;
            let signature = Signature::new().with("lim", n.clone())?;
            let axiom = AxiomSchema::Family(FamilySchema {
                arity: n,
                var: "x".into(),
                lhs: Template::Whole("lim".into()),
                rhs: Template::Index,
                bound: BoundExpr::Geometric { scale: one, ratio: half },
            });
            Theory::new("Comp", signature, vec![axiom])
        }
        "t1" => {
            let p = FinMetric::pair("0", "1", ExtReal::ONE).map_err(|e| SyntaxError::InvalidArity(e.to_string()))?;
            Theory::new("T1", Signature::new().with("f", Arity::Finite(p))?, vec![])
        }
        "t2" => {
            let ax = Sequent::eq(Context::from_triples(&[("x", "y", ExtReal::ONE)]), x(), y(), ExtReal::ZERO);
            Theory::new("T2", Signature::new(), vec![AxiomSchema::Concrete(ax)])
        }
        "contraction" => {
            let signature = Signature::new().with("s", Arity::discrete(1))?;
            let ax = ScaledSchema {
                hyps: vec![ScaledHyp { x: "x".into(), y: "y".into(), coeff: Rational::from_integer(2) }],
                lhs: Preterm::app("s", vec![x()]),
                rhs: Preterm::app("s", vec![y()]),
                coeff: Rational::from_integer(1),
            };
            Theory::new("Contraction", signature, vec![AxiomSchema::Scaled(ax)])
        }
        "strongfinit" => {
            let signature = Signature::new()
                .with("f", Arity::discrete(2))?
                .with("g", Arity::discrete(1))?
                .with("g'", Arity::discrete(1))?;
            let ax = Sequent::eq(
                Context::empty(),
                Preterm::app("g", vec![x()]),
                Preterm::app("g'", vec![x()]),
                ExtReal::ONE,
            );
            Theory::new("StrongFinit", signature, vec![AxiomSchema::Concrete(ax)])
        }
        "semilattice" => {
            let j = |a: Preterm, b: Preterm| Preterm::app("join", vec![a, b]);
            let eq0 = |a, b| AxiomSchema::Concrete(Sequent::eq(Context::empty(), a, b, ExtReal::ZERO));
            let signature = Signature::new().with("join", Arity::discrete(2))?;
            let axioms = vec![
                eq0(j(x(), x()), x()),
                eq0(j(x(), y()), j(y(), x())),
                eq0(j(j(x(), y()), z()), j(x(), j(y(), z()))),
            ];
            Theory::new("Semilattice", signature, axioms)
        }
        other => return Err(TheoryError::UnknownBuiltin(other.to_string())),
    };
    Ok(theory)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shapes() {
        let comp = builtin("comp").unwrap();
        assert_eq!(comp.signature.len(), 1);
        assert!(comp.signature.arity("lim").unwrap().is_stream());
        let t2 = builtin("t2").unwrap();
        assert!(t2.signature.is_empty());
        assert_eq!(t2.axioms.len(), 1);
        for name in BUILTINS {
            builtin(name).unwrap().validate().unwrap();
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn space_theory_axioms() {
        let single = theory_of_space(&FinMetric::singleton("a"));
        assert_eq!(single.signature.len(), 1);
        assert_eq!(single.axioms.len(), 1);
        let pair = theory_of_space(&FinMetric::pair("a", "b", ExtReal::ONE).unwrap());
        assert_eq!(pair.axioms.len(), 4);
        let disc = theory_of_space(&FinMetric::discrete(2));
        assert_eq!(disc.axioms.len(), 2);
    }

    #[test]
    fn union_renames_collisions() {
        let t1 = builtin("t1").unwrap();
        let u = disjoint_union(&t1, &t1);
        let names: Vec<&str> = u.signature.symbols().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["l_f", "r_f"]);
        let sf = builtin("strongfinit").unwrap();
        let u = disjoint_union(&t1, &builtin("t2").unwrap());
        assert_eq!(u.signature.len(), 1);
        assert_eq!(u.axioms.len(), 1);
        let u = disjoint_union(&sf, &t1);
        assert!(u.signature.arity("l_f").is_some() && u.signature.arity("g'").is_some());
    }

    #[test]
    fn family_instances_follow_the_stream() {
        let comp = builtin("comp").unwrap();
        let AxiomSchema::Family(f) = &comp.axioms[0] else { panic!() };
        let args = Args::stream(vec![Preterm::var("a")], Preterm::var("b"));
        let (l, r, b) = f.instance(1, &args).unwrap();
        assert_eq!(l, Preterm::stream("lim", vec![Preterm::var("a")], Preterm::var("b")));
        assert_eq!(r, Preterm::var("a"));
        assert_eq!(b, ExtReal::new(1, 2));
        let (_, r, b) = f.instance(3, &args).unwrap();
        assert_eq!(r, Preterm::var("b"));
        assert_eq!(b, ExtReal::new(1, 8));
    }

    #[test]
    fn scaled_instances_round_trip() {
        let c = builtin("contraction").unwrap();
        let AxiomSchema::Scaled(s) = &c.axioms[0] else { panic!() };
        let inst = s.instance(Ratio::new(1, 4));
        assert_eq!(inst.context.hyps()[0].bound, ExtReal::new(1, 2));
        assert_eq!(s.match_instance(&inst), Some(Ratio::new(1, 4)));
    }

    #[test]
    fn axiom_well_formedness() {
        let cfg = ProverConfig::default().with_depth(2);
        for name in BUILTINS {
            let t = builtin(name).unwrap();
            match check_axioms(&t, &cfg) {
                AxiomVerdict::WellFormed(proofs) => {
                    assert!(proofs.iter().all(|p| crate::kernel::check_proof(&t, p).is_valid()), "{name}")
                }
                AxiomVerdict::Failed { axiom, side } => panic!("{name}: axiom {axiom}, {side}"),
            }
        }
        // `f(x, y)` needs `x =_1 y`, which the empty context does not give.
        let mut bad = builtin("t1").unwrap();
        let fxy = Preterm::app("f", vec![Preterm::var("x"), Preterm::var("y")]);
        bad.axioms.push(AxiomSchema::Concrete(Sequent::eq(Context::empty(), fxy, Preterm::var("x"), ExtReal::ZERO)));
        assert!(matches!(check_axioms(&bad, &cfg), AxiomVerdict::Failed { axiom: 0, .. }));
    }
}
