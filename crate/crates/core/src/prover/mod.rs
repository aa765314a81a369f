//! Resource-bounded proof search: saturation for upper bounds, finite models for lower bounds.

mod countermodel;
mod saturation;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ProverError;
use crate::extreal::ExtReal;
use crate::kernel::Proof;
use crate::metric::FinMetric;
use crate::syntax::{Context, Hyp, Judgment, Preterm, Sequent};
use crate::theories::{disjoint_union_with_maps, theory_of_space, Theory};

pub use countermodel::{carriers, countermodel_search, find_violation, separating_model, Countermodel, SearchResult};
pub use saturation::{Class, SaturationState, Universe};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProverConfig {
    /// Maximum term depth.
    pub depth: usize,
    /// Maximum number of saturation rounds.
    pub iterations: usize,
    /// Longest stream prefix generated for stream operations.
    pub k_max: usize,
    /// Largest carrier tried by countermodel search.
    pub size: usize,
    /// Distances available to countermodel carriers.
    pub grid: Vec<ExtReal>,
    /// Cap on interned terms.
    pub max_terms: usize,
    /// Search nodes per countermodel query.
    pub budget: usize,
    /// Free models with more points are not certified pair by pair.
    pub certify_max_points: usize,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            depth: 3,
            iterations: 1000,
            k_max: 2,
            size: 4,
            grid: vec![
                ExtReal::ZERO,
                ExtReal::new(1, 4),
                ExtReal::new(1, 2),
                ExtReal::ONE,
                ExtReal::from_int(2),
                ExtReal::Inf,
            ],
            max_terms: 5000,
            budget: 200_000,
            certify_max_points: 64,
        }
    }
}

impl ProverConfig {
    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let caps = [
            ("depth", self.depth),
            ("iterations", self.iterations),
            ("k_max", self.k_max),
            ("size", self.size),
            ("max_terms", self.max_terms),
            ("budget", self.budget),
        ];
        match caps.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(format!("{name} must be at least 1")),
            None if self.grid.is_empty() => Err("grid must not be empty".into()),
            None => Ok(()),
        }
    }
}

fn build(
    theory: &Theory,
    ctx: &Context,
    goals: &[&Preterm],
    cfg: &ProverConfig,
    universe: Universe,
) -> Result<SaturationState, Preterm> {
    let mut extra = Vec::new();
    let known = ctx.vars();
    for g in goals {
        for v in g.vars() {
            if !known.contains(&v) && !extra.contains(&v) {
                extra.push(v);
            }
        }
    }
    let mut state = SaturationState::new(theory, ctx, cfg, universe);
    let goals: Vec<Preterm> = goals.iter().map(|g| (*g).clone()).collect();
    state.seed(&extra, &goals)?;
    state.run();
    Ok(state)
}

/// `T ⊔ T(A)` with the generator constants keeping their point names.
pub fn with_generators(theory: &Theory, gens: &FinMetric) -> Theory {
    let space = theory_of_space(gens);
    let union = disjoint_union_with_maps(theory, &space);
    if union.right.is_empty() {
        return union.theory;
    }
    // A point clashes with a symbol of the theory: rename the theory side only.
    let renamed = theory.rename_ops(&union.left);
    disjoint_union_with_maps(&renamed, &space).theory
}

/// Saturates over every term up to the depth cap built from the context
/// variables and constants (plus the points of `gens`).
pub fn saturate(theory: &Theory, ctx: &Context, gens: Option<&FinMetric>, cfg: &ProverConfig) -> SaturationState {
    let theory = match gens {
        Some(a) => with_generators(theory, a),
        None => theory.clone(),
    };
    build(&theory, ctx, &[], cfg, Universe::Full).expect("no goal terms")
}

/// A proof of `Γ ⊢ t ok`, if saturation finds one.
pub fn prove_ok(theory: &Theory, ctx: &Context, t: &Preterm, cfg: &ProverConfig) -> Option<Arc<Proof>> {
    let state = build(theory, ctx, &[t], cfg, Universe::Goal).ok()?;
    state.ok_proof(t)
}

/// Outcome of [`min_distance`].
#[derive(Clone, Debug)]
pub struct Distance {
    /// Least derived bound; `INF` when none was derived.
    pub upper: ExtReal,
    pub witness: Option<Arc<Proof>>,
    /// A model separates the terms by `upper`, so no smaller bound is derivable.
    pub exact: bool,
    pub truncated: bool,
}

fn check_depth(t: &Preterm, cfg: &ProverConfig) -> Result<(), ProverError> {
    if t.depth() > cfg.depth {
        return Err(ProverError::TooDeep(t.to_string(), cfg.depth));
    }
    Ok(())
}

/// Best derivable bound between `s` and `t` under `ctx`, with a proof and an exactness certificate.
pub fn min_distance(
    theory: &Theory,
    ctx: &Context,
    s: &Preterm,
    t: &Preterm,
    cfg: &ProverConfig,
) -> Result<Distance, ProverError> {
    theory.signature.check_term(s)?;
    theory.signature.check_term(t)?;
    check_depth(s, cfg)?;
    check_depth(t, cfg)?;
    let state = build(theory, ctx, &[s, t], cfg, Universe::Goal)
        .map_err(|g| ProverError::NotWellFormed(g.to_string(), cfg.depth))?;
    for u in [s, t] {
        if !state.is_ok(u) {
            return Err(ProverError::NotWellFormed(u.to_string(), cfg.depth));
        }
    }
    let (upper, witness) = match state.eq_proof(s, t) {
        Some((b, p)) => (b, Some(p)),
        None => (ExtReal::Inf, None),
    };
    let exact = upper.is_zero() || separating_model(theory, ctx, s, t, upper, cfg).found().is_some();
    Ok(Distance { upper, witness, exact, truncated: state.truncated() })
}

/// Outcome of [`prove`].
#[derive(Clone, Debug)]
pub enum ProveOutcome {
    Proved(Arc<Proof>),
    /// Not derived; `best` is the least bound found for equations.
    NotDerived {
        best: Option<ExtReal>,
        truncated: bool,
    },
}

/// Tries to derive a sequent and returns a kernel proof of exactly that sequent.
pub fn prove(theory: &Theory, seq: &Sequent, cfg: &ProverConfig) -> Result<ProveOutcome, ProverError> {
    theory.signature.check_sequent(seq)?;
    for t in seq.terms() {
        check_depth(t, cfg)?;
    }
    let state = build(theory, &seq.context, &seq.terms(), cfg, Universe::Goal)
        .map_err(|g| ProverError::NotWellFormed(g.to_string(), cfg.depth))?;
    let truncated = state.truncated();
    match &seq.body {
        Judgment::Ok(t) => Ok(match state.ok_proof(t) {
            Some(p) => ProveOutcome::Proved(p),
            None => ProveOutcome::NotDerived { best: None, truncated },
        }),
        Judgment::Eq(s, t, e) => {
            let Some((b, p)) = state.eq_proof(s, t) else {
                return Ok(ProveOutcome::NotDerived { best: Some(ExtReal::Inf), truncated });
            };
            if e.is_inf() || b > *e {
                return Ok(ProveOutcome::NotDerived { best: Some(b), truncated });
            }
            let p = if b < *e { Arc::new(Proof::max(p, *e)) } else { p };
            Ok(ProveOutcome::Proved(p))
        }
    }
}

/// Replaces generator constants by fresh variables and adds the generator distances to the context.
///
/// Only points of `a` that are not symbols of `theory` count as generator constants.
pub fn translate_sequent(theory: &Theory, a: &FinMetric, seq: &Sequent) -> Sequent {
    let mut taken: Vec<String> = seq.vars();
    let mut map: BTreeMap<String, Preterm> = BTreeMap::new();
    let mut names = Vec::new();
    for p in a.points() {
        let mut name = format!("x_{p}");
        while taken.contains(&name) {
            name.push('\'');
        }
        taken.push(name.clone());
        names.push(name.clone());
        if theory.signature.arity(p).is_none() {
            map.insert(p.clone(), Preterm::var(&name));
        }
    }
    let mut hyps = seq.context.hyps().to_vec();
    for name in &names {
        hyps.push(Hyp::new(name, name, ExtReal::ZERO));
    }
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            if a.d(i, j).is_finite() {
                hyps.push(Hyp::new(&names[i], &names[j], a.d(i, j)));
            }
        }
    }
    let context = Context(hyps);
    let body = match &seq.body {
        Judgment::Ok(t) => Judgment::Ok(t.replace_constants(&map)),
        Judgment::Eq(s, t, e) => Judgment::Eq(s.replace_constants(&map), t.replace_constants(&map), *e),
    };
    Sequent { context, body }
}
