//! Proof objects for the deduction system and the trusted checker.
//!
//! Besides the ten structural rules there is an `Axiom` rule. Concrete and
//! ε-scaled axioms are leaves; an instance of an arity-indexed family is the
//! family axiom composed with substitution, because the family's context is
//! infinite for stream arities and cannot be written down as a [`Context`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::extreal::{rational_serde, ExtReal, Rational};
use crate::syntax::{
    aligned_args, reduced_app_constraints, substitute, Args, Arity, Context, Judgment, Preterm, Sequent,
};
use crate::theories::{AxiomSchema, Theory};

/// Number of consecutive indices at which a [`ParametricBoundFamily`] template is checked.
pub const CONT_SAMPLES: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    Var,
    Assum,
    Refl,
    Symm,
    Triang,
    Max,
    Cont,
    Nexp,
    Subst,
    App,
    Axiom,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Index of an arity-indexed axiom instance: a number, or the free parameter of a template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaIndex {
    Fixed(u64),
    Param,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxiomInstance {
    Concrete,
    Scaled {
        #[serde(with = "rational_serde")]
        eps: Rational,
    },
    /// The family at index `n` with its variables bound to `args`.
    Family {
        n: SchemaIndex,
        args: Args,
    },
}

/// Finite stand-in for the premises `s =_{ε'} t` for all `ε' > 0`: a proof
/// template, valid for every `n ≥ k0`, of `s =_{scale · ratio^n} t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParametricBoundFamily {
    pub lhs: Preterm,
    pub rhs: Preterm,
    #[serde(with = "rational_serde")]
    pub scale: Rational,
    #[serde(with = "rational_serde")]
    pub ratio: Rational,
    pub k0: u64,
    pub template: Arc<Proof>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RuleData {
    #[default]
    None,
    /// Simultaneous substitution and the matrix `δ` read off the inner context.
    Subst {
        sigma: Vec<(String, Preterm)>,
        delta: Vec<Vec<ExtReal>>,
    },
    Cont(ParametricBoundFamily),
    Axiom {
        index: usize,
        instance: AxiomInstance,
    },
}

impl RuleData {
    pub fn is_none(&self) -> bool {
        matches!(self, RuleData::None)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Proof {
    pub rule: Rule,
    pub conclusion: Sequent,
    #[serde(default)]
    pub premises: Vec<Arc<Proof>>,
    #[serde(default, skip_serializing_if = "RuleData::is_none")]
    pub data: RuleData,
}

pub fn proof_conclusion(p: &Proof) -> &Sequent {
    &p.conclusion
}

fn leaf(rule: Rule, conclusion: Sequent) -> Proof {
    Proof { rule, conclusion, premises: Vec::new(), data: RuleData::None }
}

fn eq_parts(p: &Proof) -> (&Preterm, &Preterm, ExtReal) {
    p.conclusion.as_eq().expect("premise must be an equation")
}

impl Proof {
    pub fn var(ctx: &Context, x: &str) -> Proof {
        leaf(Rule::Var, Sequent::ok(ctx.clone(), Preterm::var(x)))
    }

    pub fn assum(ctx: &Context, x: &str, y: &str, bound: ExtReal) -> Proof {
        leaf(Rule::Assum, Sequent::eq(ctx.clone(), Preterm::var(x), Preterm::var(y), bound))
    }

    pub fn refl(ok: Arc<Proof>) -> Proof {
        let Judgment::Ok(t) = &ok.conclusion.body else { panic!("Refl needs an ok premise") };
        let conclusion = Sequent::eq(ok.conclusion.context.clone(), t.clone(), t.clone(), ExtReal::ZERO);
        Proof { rule: Rule::Refl, conclusion, premises: vec![ok], data: RuleData::None }
    }

    pub fn symm(p: Arc<Proof>) -> Proof {
        let (a, b, e) = eq_parts(&p);
        let conclusion = Sequent::eq(p.conclusion.context.clone(), b.clone(), a.clone(), e);
        Proof { rule: Rule::Symm, conclusion, premises: vec![p], data: RuleData::None }
    }

    pub fn triang(p: Arc<Proof>, q: Arc<Proof>) -> Proof {
        let (a, _, e1) = eq_parts(&p);
        let (_, c, e2) = eq_parts(&q);
        let conclusion = Sequent::eq(p.conclusion.context.clone(), a.clone(), c.clone(), e1 + e2);
        Proof { rule: Rule::Triang, conclusion, premises: vec![p, q], data: RuleData::None }
    }

    pub fn max(p: Arc<Proof>, bound: ExtReal) -> Proof {
        let (a, b, _) = eq_parts(&p);
        let conclusion = Sequent::eq(p.conclusion.context.clone(), a.clone(), b.clone(), bound);
        Proof { rule: Rule::Max, conclusion, premises: vec![p], data: RuleData::None }
    }

    pub fn cont(ctx: &Context, family: ParametricBoundFamily) -> Proof {
        let conclusion = Sequent::eq(ctx.clone(), family.lhs.clone(), family.rhs.clone(), ExtReal::ZERO);
        Proof { rule: Rule::Cont, conclusion, premises: Vec::new(), data: RuleData::Cont(family) }
    }

    pub fn nexp(ctx: &Context, op: &str, s: Args, t: Args, bound: ExtReal, premises: Vec<Arc<Proof>>) -> Proof {
        let lhs = Preterm::App { op: op.to_string(), args: s };
        let rhs = Preterm::App { op: op.to_string(), args: t };
        let conclusion = Sequent::eq(ctx.clone(), lhs, rhs, bound);
        Proof { rule: Rule::Nexp, conclusion, premises, data: RuleData::None }
    }

    pub fn app(ctx: &Context, op: &str, args: Args, premises: Vec<Arc<Proof>>) -> Proof {
        let conclusion = Sequent::ok(ctx.clone(), Preterm::App { op: op.to_string(), args });
        Proof { rule: Rule::App, conclusion, premises, data: RuleData::None }
    }

    /// `inner` proves `{x_i =_{δij} x_j} ⊢ s =_ε t`; `outer` proves the premises listed by [`subst_premises`].
    pub fn subst(ctx: &Context, inner: Arc<Proof>, sigma: Vec<(String, Preterm)>, outer: Vec<Arc<Proof>>) -> Proof {
        let (s, t, e) = eq_parts(&inner);
        let map: BTreeMap<String, Preterm> = sigma.iter().cloned().collect();
        let conclusion = Sequent::eq(ctx.clone(), substitute(s, &map), substitute(t, &map), e);
        let vars: Vec<String> = sigma.iter().map(|(v, _)| v.clone()).collect();
        let delta = delta_matrix(&inner.conclusion.context, &vars);
        let mut premises = vec![inner];
        premises.extend(outer);
        Proof { rule: Rule::Subst, conclusion, premises, data: RuleData::Subst { sigma, delta } }
    }

    pub fn axiom(conclusion: Sequent, index: usize, instance: AxiomInstance, premises: Vec<Arc<Proof>>) -> Proof {
        Proof { rule: Rule::Axiom, conclusion, premises, data: RuleData::Axiom { index, instance } }
    }

    /// Number of distinct nodes, counting shared subproofs once.
    pub fn dag_size(&self) -> usize {
        fn go(p: &Proof, seen: &mut HashSet<*const Proof>) {
            if seen.insert(p as *const Proof) {
                for q in &p.premises {
                    go(q, seen);
                }
            }
        }
        let mut seen = HashSet::new();
        go(self, &mut seen);
        seen.len()
    }
}

/// `δ_ij`: the least bound the context lists between `vars[i]` and `vars[j]`, `0` on the diagonal.
pub fn delta_matrix(ctx: &Context, vars: &[String]) -> Vec<Vec<ExtReal>> {
    let index: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let n = vars.len();
    let mut d = vec![vec![ExtReal::Inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = ExtReal::ZERO;
    }
    for h in ctx.hyps() {
        if let (Some(&i), Some(&j)) = (index.get(h.x.as_str()), index.get(h.y.as_str())) {
            if h.bound < d[i][j] {
                d[i][j] = h.bound;
                d[j][i] = h.bound;
            }
        }
    }
    d
}

/// Outer premises of a substitution: `u_i =_{δij} u_j` for `i ≤ j` with `δij` finite.
pub fn subst_premises(sigma: &[(String, Preterm)], delta: &[Vec<ExtReal>]) -> Vec<(Preterm, Preterm, ExtReal)> {
    let mut out = Vec::new();
    for i in 0..sigma.len() {
        for j in i..sigma.len() {
            if delta[i][j].is_finite() {
                out.push((sigma[i].1.clone(), sigma[j].1.clone(), delta[i][j]));
            }
        }
    }
    out
}

/// Premises of a family instance: `u =_0 u` for every argument slot, then the
/// arity constraints among the arguments.
pub fn family_premises(arity: &Arity, args: &Args) -> Vec<(Preterm, Preterm, ExtReal)> {
    let mut out: Vec<(Preterm, Preterm, ExtReal)> =
        args.positions().into_iter().map(|p| (p.clone(), p.clone(), ExtReal::ZERO)).collect();
    let mut reduced = reduced_app_constraints(arity, args);
    if arity.is_stream() {
        reduced.pop();
    }
    out.extend(reduced);
    out
}

/// Premises of `Nexp` for `f(s̄) =_ε f(t̄)`, in the order the checker expects.
pub fn nexp_premises(arity: &Arity, s: &Args, t: &Args, bound: ExtReal) -> Option<Vec<(Preterm, Preterm, ExtReal)>> {
    let mut out = reduced_app_constraints(arity, s);
    out.extend(reduced_app_constraints(arity, t));
    let aligned = aligned_args(s, t)?;
    out.extend(aligned.into_iter().map(|(a, b)| (a.clone(), b.clone(), bound)));
    Some(out)
}

fn args_fit(arity: &Arity, args: &Args) -> bool {
    match (arity, args) {
        (Arity::Finite(m), Args::Tuple(ts)) => ts.len() == m.len(),
        (Arity::Geometric { .. }, Args::Stream { prefix, tail }) => prefix.last() != Some(tail.as_ref()),
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// `path` lists premise indices from the root to the offending node.
    Invalid {
        path: Vec<usize>,
        rule: Rule,
        reason: String,
    },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid => f.write_str("valid"),
            Verdict::Invalid { path, rule, reason } => {
                write!(f, "invalid {rule} node at {path:?}: {reason}")
            }
        }
    }
}

pub fn check_proof(theory: &Theory, p: &Proof) -> Verdict {
    let mut checker = Checker { theory, valid: HashSet::new(), keep: Vec::new() };
    let mut path = Vec::new();
    match checker.check(p, &mut path) {
        Ok(()) => Verdict::Valid,
        Err((path, rule, reason)) => Verdict::Invalid { path, rule, reason },
    }
}

type Failure = (Vec<usize>, Rule, String);

struct Checker<'a> {
    theory: &'a Theory,
    valid: HashSet<*const Proof>,
    // Instantiated templates stay alive so that pointers in `valid` are never reused.
    keep: Vec<Arc<Proof>>,
}

impl Checker<'_> {
    fn check(&mut self, p: &Proof, path: &mut Vec<usize>) -> Result<(), Failure> {
        if self.valid.contains(&(p as *const Proof)) {
            return Ok(());
        }
        for (i, q) in p.premises.iter().enumerate() {
            path.push(i);
            self.check(q, path)?;
            path.pop();
        }
        self.node(p).map_err(|reason| (path.clone(), p.rule, reason))?;
        self.valid.insert(p as *const Proof);
        Ok(())
    }

    fn node(&mut self, p: &Proof) -> Result<(), String> {
        let sig = &self.theory.signature;
        sig.check_sequent(&p.conclusion).map_err(|e| e.to_string())?;
        if let Some((_, _, e)) = p.conclusion.as_eq() {
            if e.is_inf() {
                return Err("equations must carry a finite bound".into());
            }
        }
        let ctx = &p.conclusion.context;
        if p.rule != Rule::Cont && p.rule != Rule::Subst && p.rule != Rule::Axiom && !p.data.is_none() {
            return Err("unexpected rule data".into());
        }
        let same_ctx = |qs: &[Arc<Proof>]| -> Result<(), String> {
            match qs.iter().position(|q| &q.conclusion.context != ctx) {
                Some(i) => Err(format!("premise {i} has a different context")),
                None => Ok(()),
            }
        };
        let arity_count = |n: usize| -> Result<(), String> {
            if p.premises.len() == n {
                Ok(())
            } else {
                Err(format!("expected {n} premises, found {}", p.premises.len()))
            }
        };
        match p.rule {
            Rule::Var => {
                arity_count(0)?;
                match &p.conclusion.body {
                    Judgment::Ok(Preterm::Var(_)) => Ok(()),
                    _ => Err("conclusion must be `x ok` for a variable".into()),
                }
            }
            Rule::Assum => {
                arity_count(0)?;
                match p.conclusion.as_eq() {
                    Some((Preterm::Var(x), Preterm::Var(y), e)) if ctx.contains(x, y, e) => Ok(()),
                    Some((Preterm::Var(_), Preterm::Var(_), _)) => Err("equation is not in the context".into()),
                    _ => Err("conclusion must relate two variables".into()),
                }
            }
            Rule::Refl => {
                arity_count(1)?;
                same_ctx(&p.premises)?;
                let Judgment::Ok(t) = &p.premises[0].conclusion.body else {
                    return Err("premise must be an ok judgment".into());
                };
                expect_eq(p, t, t, ExtReal::ZERO)
            }
            Rule::Symm => {
                arity_count(1)?;
                same_ctx(&p.premises)?;
                let (a, b, e) = premise_eq(p, 0)?;
                expect_eq(p, b, a, e)
            }
            Rule::Triang => {
                arity_count(2)?;
                same_ctx(&p.premises)?;
                let (a, b, e1) = premise_eq(p, 0)?;
                let (b2, c, e2) = premise_eq(p, 1)?;
                if b != b2 {
                    return Err("middle terms differ".into());
                }
                expect_eq(p, a, c, e1 + e2)
            }
            Rule::Max => {
                arity_count(1)?;
                same_ctx(&p.premises)?;
                let (a, b, e1) = premise_eq(p, 0)?;
                let (_, _, e) = p.conclusion.as_eq().ok_or("conclusion must be an equation")?;
                if e1 >= e {
                    return Err(format!("premise bound {e1} is not below {e}"));
                }
                expect_eq(p, a, b, e)
            }
            Rule::Cont => {
                arity_count(0)?;
                let RuleData::Cont(fam) = &p.data else { return Err("missing family".into()) };
                self.family(ctx, fam)?;
                expect_eq(p, &fam.lhs, &fam.rhs, ExtReal::ZERO)
            }
            Rule::Nexp => {
                same_ctx(&p.premises)?;
                let Some((Preterm::App { op, args: s }, Preterm::App { op: op2, args: t }, e)) = p.conclusion.as_eq()
                else {
                    return Err("conclusion must relate two applications".into());
                };
                if op != op2 {
                    return Err("operations differ".into());
                }
                let arity = sig.arity(op).ok_or("unknown operation")?;
                let want = nexp_premises(arity, s, t, e).ok_or("argument shapes differ")?;
                expect_premises(p, 0, &want)
            }
            Rule::App => {
                same_ctx(&p.premises)?;
                let Judgment::Ok(Preterm::App { op, args }) = &p.conclusion.body else {
                    return Err("conclusion must be `f(...) ok`".into());
                };
                let arity = sig.arity(op).ok_or("unknown operation")?;
                let positions = args.positions();
                if p.premises.len() < positions.len() {
                    return Err("missing ok premises".into());
                }
                for (i, t) in positions.iter().enumerate() {
                    if p.premises[i].conclusion.body != Judgment::Ok((*t).clone()) {
                        return Err(format!("premise {i} must be `{t} ok`"));
                    }
                }
                expect_premises(p, positions.len(), &reduced_app_constraints(arity, args))
            }
            Rule::Subst => self.subst(p),
            Rule::Axiom => self.axiom(p),
        }
    }

    fn subst(&mut self, p: &Proof) -> Result<(), String> {
        let RuleData::Subst { sigma, delta } = &p.data else { return Err("missing substitution".into()) };
        let inner = p.premises.first().ok_or("missing inner premise")?;
        let (s, t, e) = inner.conclusion.as_eq().ok_or("inner premise must be an equation")?;
        let vars: Vec<String> = sigma.iter().map(|(v, _)| v.clone()).collect();
        if vars.iter().collect::<HashSet<_>>().len() != vars.len() {
            return Err("substitution binds a variable twice".into());
        }
        if let Some(v) = inner.conclusion.vars().into_iter().find(|v| !vars.contains(v)) {
            return Err(format!("substitution is not total: `{v}` is unbound"));
        }
        if *delta != delta_matrix(&inner.conclusion.context, &vars) {
            return Err("δ does not match the inner context".into());
        }
        let outer = &p.premises[1..];
        let ctx = &p.conclusion.context;
        if let Some(i) = outer.iter().position(|q| &q.conclusion.context != ctx) {
            return Err(format!("premise {} has a different context", i + 1));
        }
        expect_premises(p, 1, &subst_premises(sigma, delta))?;
        let map: BTreeMap<String, Preterm> = sigma.iter().cloned().collect();
        expect_eq(p, &substitute(s, &map), &substitute(t, &map), e)
    }

    fn axiom(&mut self, p: &Proof) -> Result<(), String> {
        let RuleData::Axiom { index, instance } = &p.data else { return Err("missing axiom reference".into()) };
        let schema = self.theory.axioms.get(*index).ok_or_else(|| format!("no axiom {index}"))?;
        match (schema, instance) {
            (AxiomSchema::Concrete(seq), AxiomInstance::Concrete) => {
                if !p.premises.is_empty() {
                    return Err("concrete axioms have no premises".into());
                }
                if &p.conclusion != seq {
                    return Err("conclusion differs from the axiom".into());
                }
                Ok(())
            }
            (AxiomSchema::Scaled(s), AxiomInstance::Scaled { eps }) => {
                if !p.premises.is_empty() {
                    return Err("axiom instances have no premises".into());
                }
                if *eps < Rational::from_integer(0) {
                    return Err("ε must be nonnegative".into());
                }
                if p.conclusion != s.instance(*eps) {
                    return Err("conclusion is not the instance at ε".into());
                }
                Ok(())
            }
            (AxiomSchema::Family(f), AxiomInstance::Family { n, args }) => {
                let SchemaIndex::Fixed(n) = *n else { return Err("unbound schema index".into()) };
                if !args_fit(&f.arity, args) {
                    return Err("arguments do not fit the family's arity".into());
                }
                let in_range = match &f.arity {
                    Arity::Finite(m) => (n as usize) < m.len(),
                    Arity::Geometric { .. } => n >= 1,
                };
                if !in_range {
                    return Err(format!("index {n} outside the family"));
                }
                let ctx = &p.conclusion.context;
                if let Some(i) = p.premises.iter().position(|q| &q.conclusion.context != ctx) {
                    return Err(format!("premise {i} has a different context"));
                }
                expect_premises(p, 0, &family_premises(&f.arity, args))?;
                let (l, r, b) = f.instance(n, args).ok_or("instance is undefined")?;
                expect_eq(p, &l, &r, b)
            }
            _ => Err("instance does not match the axiom's form".into()),
        }
    }

    fn family(&mut self, ctx: &Context, fam: &ParametricBoundFamily) -> Result<(), String> {
        let zero = Rational::from_integer(0);
        if !(fam.ratio > zero && fam.ratio < Rational::from_integer(1)) {
            return Err("family ratio must lie in (0,1)".into());
        }
        if fam.scale < zero {
            return Err("family scale must be nonnegative".into());
        }
        for n in fam.k0..fam.k0 + CONT_SAMPLES {
            let inst = instantiate_template(self.theory, &fam.template, n);
            let want = Sequent::eq(
                ctx.clone(),
                fam.lhs.clone(),
                fam.rhs.clone(),
                ExtReal::Fin(crate::extreal::geometric(fam.scale, fam.ratio, n)),
            );
            if inst.conclusion != want {
                return Err(format!("template at n={n} concludes `{}` instead of `{want}`", inst.conclusion));
            }
            self.keep.push(inst.clone());
            let mut path = Vec::new();
            if let Err((path, rule, reason)) = self.check(&inst, &mut path) {
                return Err(format!("template at n={n}: {rule} node at {path:?}: {reason}"));
            }
        }
        Ok(())
    }
}

fn premise_eq(p: &Proof, i: usize) -> Result<(&Preterm, &Preterm, ExtReal), String> {
    p.premises[i].conclusion.as_eq().ok_or_else(|| format!("premise {i} must be an equation"))
}

fn expect_eq(p: &Proof, a: &Preterm, b: &Preterm, e: ExtReal) -> Result<(), String> {
    match p.conclusion.as_eq() {
        Some((x, y, f)) if x == a && y == b && f == e => Ok(()),
        _ => Err(format!("conclusion should be `{a} =[{e}] {b}`")),
    }
}

fn expect_premises(p: &Proof, offset: usize, want: &[(Preterm, Preterm, ExtReal)]) -> Result<(), String> {
    let have = &p.premises[offset.min(p.premises.len())..];
    if have.len() != want.len() {
        return Err(format!("expected {} premises, found {}", offset + want.len(), p.premises.len()));
    }
    for (i, (q, (a, b, e))) in have.iter().zip(want).enumerate() {
        match q.conclusion.as_eq() {
            Some((x, y, f)) if x == a && y == b && f == *e => {}
            _ => return Err(format!("premise {} should be `{a} =[{e}] {b}`", i + offset)),
        }
    }
    Ok(())
}

/// Replaces the template parameter by `n` and recomputes the conclusions that
/// are functions of premises and data (Refl, Symm, Triang, Max, Subst, Axiom).
/// Other nodes keep their stored conclusion.
pub fn instantiate_template(theory: &Theory, p: &Arc<Proof>, n: u64) -> Arc<Proof> {
    let mut memo = HashMap::new();
    instantiate_node(theory, p, n, &mut memo)
}

fn instantiate_node(
    theory: &Theory,
    p: &Arc<Proof>,
    n: u64,
    memo: &mut HashMap<*const Proof, Arc<Proof>>,
) -> Arc<Proof> {
    if let Some(q) = memo.get(&Arc::as_ptr(p)) {
        return q.clone();
    }
    let premises: Vec<Arc<Proof>> = p.premises.iter().map(|q| instantiate_node(theory, q, n, memo)).collect();
    let param = matches!(p.data, RuleData::Axiom { instance: AxiomInstance::Family { n: SchemaIndex::Param, .. }, .. });
    let changed = param || premises.iter().zip(&p.premises).any(|(a, b)| !Arc::ptr_eq(a, b));
    let out = if !changed {
        p.clone()
    } else {
        let data = match &p.data {
            RuleData::Axiom { index, instance: AxiomInstance::Family { n: SchemaIndex::Param, args } } => {
                RuleData::Axiom {
                    index: *index,
                    instance: AxiomInstance::Family { n: SchemaIndex::Fixed(n), args: args.clone() },
                }
            }
            d => d.clone(),
        };
        let conclusion = recompute(theory, p, &premises, &data).unwrap_or_else(|| p.conclusion.clone());
        Arc::new(Proof { rule: p.rule, conclusion, premises, data })
    };
    memo.insert(Arc::as_ptr(p), out.clone());
    out
}

fn recompute(theory: &Theory, p: &Proof, premises: &[Arc<Proof>], data: &RuleData) -> Option<Sequent> {
    let ctx = p.conclusion.context.clone();
    let eq = |i: usize| premises.get(i).and_then(|q| q.conclusion.as_eq());
    Some(match p.rule {
        Rule::Refl => match &premises.first()?.conclusion.body {
            Judgment::Ok(t) => Sequent::eq(ctx, t.clone(), t.clone(), ExtReal::ZERO),
            _ => return None,
        },
        Rule::Symm => {
            let (a, b, e) = eq(0)?;
            Sequent::eq(ctx, b.clone(), a.clone(), e)
        }
        Rule::Triang => {
            let ((a, _, e1), (_, c, e2)) = (eq(0)?, eq(1)?);
            Sequent::eq(ctx, a.clone(), c.clone(), e1 + e2)
        }
        Rule::Max => {
            let ((a, b, _), (_, _, e)) = (eq(0)?, p.conclusion.as_eq()?);
            Sequent::eq(ctx, a.clone(), b.clone(), e)
        }
        Rule::Subst => {
            let (s, t, e) = eq(0)?;
            let RuleData::Subst { sigma, .. } = data else { return None };
            let map: BTreeMap<String, Preterm> = sigma.iter().cloned().collect();
            Sequent::eq(ctx, substitute(s, &map), substitute(t, &map), e)
        }
        Rule::Axiom => {
            let RuleData::Axiom { index, instance: AxiomInstance::Family { n: SchemaIndex::Fixed(n), args } } = data
            else {
                return None;
            };
            let AxiomSchema::Family(f) = theory.axioms.get(*index)? else { return None };
            let (l, r, b) = f.instance(*n, args)?;
            Sequent::eq(ctx, l, r, b)
        }
        _ => return None,
    })
}
