//! Saturation engine: interned terms, 0-classes and best bounds between them.
//!
//! Every derived judgment is an immutable fact whose justification refers to
//! earlier facts only. Proofs are rebuilt from justifications on demand.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::extreal::{geometric, ExtReal, Rational};
use crate::kernel::{delta_matrix, AxiomInstance, ParametricBoundFamily, Proof, SchemaIndex};
use crate::syntax::{substitute, Args, Arity, Context, Preterm, Sequent};
use crate::theories::{AxiomSchema, BoundExpr, Theory};

use super::ProverConfig;

pub(crate) type NodeId = usize;
type FactId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Key {
    Var(String),
    App { op: usize, kids: Vec<NodeId>, stream: bool },
}

#[derive(Clone, Debug)]
struct Node {
    key: Key,
    term: Preterm,
    depth: usize,
}

/// A fact between two classes, oriented from `from` to `to`.
#[derive(Clone, Copy, Debug)]
struct Edge {
    from: NodeId,
    to: NodeId,
    fact: FactId,
    bound: ExtReal,
}

impl Edge {
    fn rev(self) -> Edge {
        Edge { from: self.to, to: self.from, ..self }
    }
}

/// `a =_need b`, read off the state at the time it was captured.
#[derive(Clone, Debug)]
struct Prem {
    a: NodeId,
    b: NodeId,
    need: ExtReal,
    /// `None` when `a` and `b` were already identified.
    via: Option<Edge>,
}

#[derive(Clone, Debug)]
enum Kind {
    Ok(NodeId),
    Eq(NodeId, NodeId, ExtReal),
}

#[derive(Clone, Debug)]
enum Just {
    Var,
    App(Vec<Prem>),
    Assum,
    Triang(Prem, Prem),
    Nexp(Vec<Prem>),
    Concrete { axiom: usize, sigma: Vec<(String, NodeId)>, outer: Vec<Prem> },
    Scaled { axiom: usize, eps: Rational, sigma: Vec<(String, NodeId)>, outer: Vec<Prem> },
    Family { axiom: usize, n: u64, args: Args, prems: Vec<Prem> },
    Cont { axiom: usize, k0: u64, args: Args, prems: Vec<Prem> },
}

#[derive(Clone, Debug)]
struct Fact {
    kind: Kind,
    just: Just,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum InstKey {
    Concrete(usize, Vec<NodeId>),
    Scaled(usize, Vec<NodeId>, Rational),
    Family(usize, Vec<NodeId>, u64),
}

/// Whether to enumerate every application over class representatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Universe {
    /// Atoms, the requested terms and whatever axiom instances produce.
    Goal,
    /// Additionally every application of every operation up to the depth cap.
    Full,
}

/// A 0-class of well-formed terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Class {
    pub rep: Preterm,
    pub members: Vec<Preterm>,
}

/// Result of saturating the deduction rules over a finite term universe.
#[derive(Debug)]
pub struct SaturationState {
    theory: Theory,
    context: Context,
    cfg: ProverConfig,
    universe: Universe,
    op_index: HashMap<String, usize>,
    ops: Vec<(String, Arity)>,
    nodes: Vec<Node>,
    index: HashMap<Key, NodeId>,
    ok: Vec<Option<FactId>>,
    facts: Vec<Fact>,
    class: Vec<NodeId>,
    members: Vec<Vec<NodeId>>,
    adj: Vec<BTreeMap<NodeId, Edge>>,
    forest: Vec<Vec<(NodeId, FactId)>>,
    worklist: VecDeque<(NodeId, NodeId)>,
    pending: Vec<NodeId>,
    applied: HashSet<InstKey>,
    instantiations: usize,
    truncated: bool,
    converged: bool,
    rounds: usize,
    proofs: RefCell<HashMap<FactId, Arc<Proof>>>,
    symm: RefCell<HashMap<FactId, Arc<Proof>>>,
}

impl SaturationState {
    pub(crate) fn new(theory: &Theory, context: &Context, cfg: &ProverConfig, universe: Universe) -> Self {
        let ops: Vec<(String, Arity)> = theory.signature.symbols().map(|(n, a)| (n.to_string(), a.clone())).collect();
        let op_index = ops.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
        SaturationState {
            theory: theory.clone(),
            context: context.clone(),
            cfg: cfg.clone(),
            universe,
            op_index,
            ops,
            nodes: Vec::new(),
            index: HashMap::new(),
            ok: Vec::new(),
            facts: Vec::new(),
            class: Vec::new(),
            members: Vec::new(),
            adj: Vec::new(),
            forest: Vec::new(),
            worklist: VecDeque::new(),
            pending: Vec::new(),
            applied: HashSet::new(),
            instantiations: 0,
            truncated: false,
            converged: false,
            rounds: 0,
            proofs: RefCell::new(HashMap::new()),
            symm: RefCell::new(HashMap::new()),
        }
    }

    /// Atoms in a fixed order: context variables, constants, then `extra` variables.
    pub(crate) fn seed(&mut self, extra_vars: &[String], goals: &[Preterm]) -> Result<(), Preterm> {
        for v in self.context.vars() {
            self.intern(&Preterm::Var(v), false);
        }
        for (name, arity) in self.ops.clone() {
            if matches!(&arity, Arity::Finite(m) if m.is_empty()) {
                self.intern(&Preterm::constant(&name), false);
            }
        }
        for v in extra_vars {
            self.intern(&Preterm::var(v), false);
        }
        for g in goals {
            if self.intern(g, false).is_none() {
                return Err(g.clone());
            }
        }
        let hyps = self.context.hyps().to_vec();
        for h in hyps {
            if h.x == h.y || h.bound.is_inf() {
                continue;
            }
            let x = self.intern(&Preterm::var(&h.x), false).expect("variable");
            let y = self.intern(&Preterm::var(&h.y), false).expect("variable");
            self.add_eq(x, y, h.bound, Just::Assum);
        }
        Ok(())
    }

    pub(crate) fn run(&mut self) {
        for round in 0..self.cfg.iterations {
            self.rounds = round + 1;
            let (facts, nodes) = (self.facts.len(), self.nodes.len());
            if self.universe == Universe::Full {
                self.generate();
            }
            self.derive_ok();
            self.apply_axioms();
            self.derive_ok();
            self.congruence();
            if self.facts.len() == facts && self.nodes.len() == nodes {
                self.converged = true;
                return;
            }
        }
        self.truncated = true;
    }

    // ---- terms and classes ----

    fn intern(&mut self, t: &Preterm, capped: bool) -> Option<NodeId> {
        if t.depth() > self.cfg.depth {
            return None;
        }
        self.intern_rec(t, capped)
    }

    fn intern_rec(&mut self, t: &Preterm, capped: bool) -> Option<NodeId> {
        let key = match t {
            Preterm::Var(v) => Key::Var(v.clone()),
            Preterm::App { op, args } => {
                let &o = self.op_index.get(op)?;
                let mut kids = Vec::new();
                for p in args.positions() {
                    kids.push(self.intern_rec(p, capped)?);
                }
                Key::App { op: o, kids, stream: matches!(args, Args::Stream { .. }) }
            }
        };
        if let Some(&id) = self.index.get(&key) {
            return Some(id);
        }
        if capped && self.nodes.len() >= self.cfg.max_terms {
            self.truncated = true;
            return None;
        }
        let id = self.nodes.len();
        let depth = match &key {
            Key::Var(_) => 0,
            Key::App { kids, .. } => kids.iter().map(|&k| self.nodes[k].depth + 1).max().unwrap_or(0),
        };
        self.nodes.push(Node { key: key.clone(), term: t.clone(), depth });
        self.index.insert(key.clone(), id);
        self.ok.push(None);
        self.class.push(id);
        self.members.push(vec![id]);
        self.adj.push(BTreeMap::new());
        self.forest.push(Vec::new());
        if let Key::Var(_) = key {
            let f = self.push_fact(Kind::Ok(id), Just::Var);
            self.ok[id] = Some(f);
        } else {
            self.pending.push(id);
        }
        Some(id)
    }

    fn push_fact(&mut self, kind: Kind, just: Just) -> FactId {
        self.facts.push(Fact { kind, just });
        self.facts.len() - 1
    }

    fn dist(&self, a: NodeId, b: NodeId) -> ExtReal {
        let (x, y) = (self.class[a], self.class[b]);
        if x == y {
            return ExtReal::ZERO;
        }
        self.adj[x].get(&y).map_or(ExtReal::Inf, |e| e.bound)
    }

    /// Edge between the classes of `a` and `b`, oriented from `a`'s class.
    fn edge(&self, a: NodeId, b: NodeId) -> Option<Edge> {
        let (x, y) = (self.class[a], self.class[b]);
        let e = *self.adj[x].get(&y)?;
        Some(if self.class[e.from] == x { e } else { e.rev() })
    }

    fn prem(&self, a: NodeId, b: NodeId, need: ExtReal) -> Option<Prem> {
        if self.class[a] == self.class[b] {
            return Some(Prem { a, b, need, via: None });
        }
        let e = self.edge(a, b)?;
        (e.bound <= need).then_some(Prem { a, b, need, via: Some(e) })
    }

    fn add_eq(&mut self, a: NodeId, b: NodeId, e: ExtReal, just: Just) -> bool {
        if e.is_inf() || self.dist(a, b) <= e {
            return false;
        }
        let f = self.push_fact(Kind::Eq(a, b, e), just);
        if e.is_zero() {
            self.merge(a, b, f);
        } else {
            self.set_edge(Edge { from: a, to: b, fact: f, bound: e });
        }
        self.close();
        true
    }

    fn set_edge(&mut self, e: Edge) {
        let (x, y) = (self.class[e.from], self.class[e.to]);
        self.adj[x].insert(y, e);
        self.adj[y].insert(x, e);
        self.worklist.push_back((x, y));
    }

    fn merge(&mut self, a: NodeId, b: NodeId, f: FactId) {
        let (mut x, mut y) = (self.class[a], self.class[b]);
        if self.members[x].len() < self.members[y].len() {
            std::mem::swap(&mut x, &mut y);
        }
        self.forest[a].push((b, f));
        self.forest[b].push((a, f));
        let moved = std::mem::take(&mut self.members[y]);
        for &m in &moved {
            self.class[m] = x;
        }
        self.members[x].extend(moved);
        self.adj[x].remove(&y);
        let old = std::mem::take(&mut self.adj[y]);
        for (z, e) in old {
            self.adj[z].remove(&y);
            if z == x {
                continue;
            }
            let better = self.adj[x].get(&z).is_none_or(|cur| e.bound < cur.bound);
            if better {
                self.adj[x].insert(z, e);
                self.adj[z].insert(x, e);
            }
        }
        let neighbours: Vec<NodeId> = self.adj[x].keys().copied().collect();
        for z in neighbours {
            self.worklist.push_back((x, z));
        }
    }

    /// Restores the triangle inequality between classes after edges improved.
    fn close(&mut self) {
        while let Some((x, y)) = self.worklist.pop_front() {
            let (x, y) = (self.class[x], self.class[y]);
            if x == y {
                continue;
            }
            let Some(exy) = self.adj[x].get(&y).copied() else { continue };
            let exy = if self.class[exy.from] == x { exy } else { exy.rev() };
            // Paths x -> y -> z.
            let through_y: Vec<Edge> = self.adj[y].values().copied().collect();
            for eyz in through_y {
                let eyz = if self.class[eyz.from] == y { eyz } else { eyz.rev() };
                let z = self.class[eyz.to];
                self.relax(exy, eyz, x, z);
            }
            // Paths w -> x -> y.
            let through_x: Vec<Edge> = self.adj[x].values().copied().collect();
            for ewx in through_x {
                let ewx = if self.class[ewx.to] == x { ewx } else { ewx.rev() };
                let w = self.class[ewx.from];
                self.relax(ewx, exy, w, y);
            }
        }
    }

    fn relax(&mut self, first: Edge, second: Edge, from: NodeId, to: NodeId) {
        if from == to {
            return;
        }
        let cur = self.adj[from].get(&to).map_or(ExtReal::Inf, |e| e.bound);
        if cur <= first.bound || cur <= second.bound {
            return;
        }
        let sum = first.bound + second.bound;
        if sum >= cur {
            return;
        }
        let p = Prem { a: first.from, b: first.to, need: first.bound, via: Some(first) };
        let q = Prem { a: first.to, b: second.to, need: second.bound, via: Some(second) };
        let f = self.push_fact(Kind::Eq(first.from, second.to, sum), Just::Triang(p, q));
        self.set_edge(Edge { from: first.from, to: second.to, fact: f, bound: sum });
    }

    /// Class representatives (shallowest, then oldest member), by node id.
    fn reps(&self) -> Vec<NodeId> {
        let mut best: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for id in 0..self.nodes.len() {
            if self.ok[id].is_none() {
                continue;
            }
            let root = self.class[id];
            let entry = best.entry(root).or_insert(id);
            if self.nodes[id].depth < self.nodes[*entry].depth {
                *entry = id;
            }
        }
        let mut reps: Vec<NodeId> = best.into_values().collect();
        reps.sort_unstable();
        reps
    }

    // ---- rules ----

    fn constraints(&self, op: usize, node: NodeId) -> Vec<(NodeId, NodeId, ExtReal)> {
        let Key::App { kids, .. } = &self.nodes[node].key else { return Vec::new() };
        constraint_positions(&self.ops[op].1, kids.len()).into_iter().map(|(i, j, e)| (kids[i], kids[j], e)).collect()
    }

    fn derive_ok(&mut self) {
        let pending = std::mem::take(&mut self.pending);
        let mut left = Vec::new();
        for id in pending {
            if !self.try_ok(id) {
                left.push(id);
            }
        }
        left.extend(std::mem::take(&mut self.pending));
        self.pending = left;
    }

    fn try_ok(&mut self, id: NodeId) -> bool {
        let Key::App { op, kids, .. } = self.nodes[id].key.clone() else { return true };
        if kids.iter().any(|&k| self.ok[k].is_none()) {
            return false;
        }
        let mut prems = Vec::new();
        for (a, b, e) in self.constraints(op, id) {
            match self.prem(a, b, e) {
                Some(p) => prems.push(p),
                None => return false,
            }
        }
        let f = self.push_fact(Kind::Ok(id), Just::App(prems));
        self.ok[id] = Some(f);
        true
    }

    fn generate(&mut self) {
        let reps: Vec<NodeId> = self.reps().into_iter().filter(|&r| self.nodes[r].depth < self.cfg.depth).collect();
        for (op, (name, arity)) in self.ops.clone().into_iter().enumerate() {
            let shapes: Vec<usize> = match &arity {
                Arity::Finite(m) if m.is_empty() => continue,
                Arity::Finite(m) => vec![m.len()],
                Arity::Geometric { .. } => (1..=self.cfg.k_max + 1).collect(),
            };
            for len in shapes {
                let checks = constraint_positions(&arity, len);
                let mut stop = false;
                for_each_tuple(reps.len(), len, |t| {
                    let kids: Vec<NodeId> = t.iter().map(|&i| reps[i]).collect();
                    if arity.is_stream() && len >= 2 && kids[len - 2] == kids[len - 1] {
                        return true;
                    }
                    if checks.iter().any(|&(i, j, e)| self.dist(kids[i], kids[j]) > e) {
                        return true;
                    }
                    let key = Key::App { op, kids: kids.clone(), stream: arity.is_stream() };
                    if self.index.contains_key(&key) {
                        return true;
                    }
                    let terms: Vec<Preterm> = kids.iter().map(|&k| self.nodes[k].term.clone()).collect();
                    let term = if arity.is_stream() {
                        let (prefix, tail) = terms.split_at(len - 1);
                        Preterm::stream(&name, prefix.to_vec(), tail[0].clone())
                    } else {
                        Preterm::app(&name, terms)
                    };
                    if self.intern(&term, true).is_none() && self.truncated {
                        stop = true;
                    }
                    !stop
                });
                if stop {
                    return;
                }
            }
        }
    }

    fn apply_axioms(&mut self) {
        for (i, ax) in self.theory.axioms.clone().iter().enumerate() {
            match ax {
                AxiomSchema::Concrete(seq) => self.apply_concrete(i, seq),
                AxiomSchema::Scaled(s) => {
                    let vars = s.instance(Rational::from_integer(0)).vars();
                    let reps = self.reps();
                    for_each_tuple(reps.len(), vars.len(), |t| {
                        let sigma: Vec<NodeId> = t.iter().map(|&i| reps[i]).collect();
                        self.apply_scaled(i, s, &vars, &sigma);
                        true
                    });
                }
                AxiomSchema::Family(f) => match &f.arity {
                    Arity::Finite(m) => {
                        let reps = self.reps();
                        let checks = constraint_positions(&f.arity, m.len());
                        for_each_tuple(reps.len(), m.len(), |t| {
                            let kids: Vec<NodeId> = t.iter().map(|&i| reps[i]).collect();
                            if checks.iter().all(|&(a, b, e)| self.dist(kids[a], kids[b]) <= e) {
                                self.apply_family(i, &kids, false);
                            }
                            true
                        });
                    }
                    Arity::Geometric { .. } => {
                        let heads: Vec<NodeId> = (0..self.nodes.len())
                            .filter(|&id| match &self.nodes[id].key {
                                Key::App { op, stream: true, .. } => {
                                    self.ok[id].is_some() && self.ops[*op].1 == f.arity
                                }
                                _ => false,
                            })
                            .collect();
                        for id in heads {
                            let Key::App { kids, .. } = self.nodes[id].key.clone() else { unreachable!() };
                            self.apply_family(i, &kids, true);
                        }
                    }
                },
            }
        }
    }

    fn apply_concrete(&mut self, axiom: usize, seq: &Sequent) {
        let vars = seq.vars();
        let pos = |v: &str| vars.iter().position(|w| w == v).expect("context variable");
        let hyps: Vec<(usize, usize, ExtReal)> =
            seq.context.hyps().iter().map(|h| (pos(&h.x), pos(&h.y), h.bound)).collect();
        let reps = self.reps();
        let mut sigma = Vec::with_capacity(vars.len());
        self.sigma_search(&reps, &hyps, vars.len(), &mut sigma, &mut |st, sigma| {
            let key = InstKey::Concrete(axiom, sigma.to_vec());
            if st.applied.contains(&key) {
                return;
            }
            let (s, t, e) = seq.as_eq().expect("axioms are equations");
            let map: BTreeMap<String, Preterm> =
                vars.iter().cloned().zip(sigma.iter().map(|&n| st.nodes[n].term.clone())).collect();
            let (Some(l), Some(r)) = (st.intern(&substitute(s, &map), true), st.intern(&substitute(t, &map), true))
            else {
                st.applied.insert(key);
                return;
            };
            st.derive_ok();
            if st.ok[l].is_none() || st.ok[r].is_none() {
                return;
            }
            let delta = delta_matrix(&seq.context, &vars);
            let Some(outer) = st.outer_prems(sigma, &delta) else { return };
            st.applied.insert(key);
            st.instantiations += 1;
            let named = vars.iter().cloned().zip(sigma.iter().copied()).collect();
            st.add_eq(l, r, e, Just::Concrete { axiom, sigma: named, outer });
        });
    }

    fn sigma_search(
        &mut self,
        reps: &[NodeId],
        hyps: &[(usize, usize, ExtReal)],
        n: usize,
        sigma: &mut Vec<NodeId>,
        visit: &mut dyn FnMut(&mut Self, &[NodeId]),
    ) {
        let k = sigma.len();
        if k == n {
            visit(self, sigma);
            return;
        }
        for &r in reps {
            sigma.push(r);
            let fits =
                hyps.iter().filter(|&&(x, y, _)| x.max(y) == k).all(|&(x, y, e)| self.dist(sigma[x], sigma[y]) <= e);
            if fits {
                self.sigma_search(reps, hyps, n, sigma, visit);
            }
            sigma.pop();
        }
    }

    fn outer_prems(&self, sigma: &[NodeId], delta: &[Vec<ExtReal>]) -> Option<Vec<Prem>> {
        let mut out = Vec::new();
        for i in 0..sigma.len() {
            for j in i..sigma.len() {
                if delta[i][j].is_finite() {
                    out.push(self.prem(sigma[i], sigma[j], delta[i][j])?);
                }
            }
        }
        Some(out)
    }

    fn apply_scaled(&mut self, axiom: usize, s: &crate::theories::ScaledSchema, vars: &[String], sigma: &[NodeId]) {
        let pos = |v: &str| vars.iter().position(|w| w == v).expect("schema variable");
        let mut eps = Rational::from_integer(0);
        for h in &s.hyps {
            let d = self.dist(sigma[pos(&h.x)], sigma[pos(&h.y)]);
            if h.coeff == Rational::from_integer(0) {
                if !d.is_zero() {
                    return;
                }
                continue;
            }
            let Some(d) = d.finite() else { return };
            eps = eps.max(d / h.coeff);
        }
        let key = InstKey::Scaled(axiom, sigma.to_vec(), eps);
        if self.applied.contains(&key) {
            return;
        }
        let inst = s.instance(eps);
        let (l, r, e) = inst.as_eq().expect("instance is an equation");
        let map: BTreeMap<String, Preterm> =
            vars.iter().cloned().zip(sigma.iter().map(|&n| self.nodes[n].term.clone())).collect();
        let (Some(ln), Some(rn)) = (self.intern(&substitute(l, &map), true), self.intern(&substitute(r, &map), true))
        else {
            self.applied.insert(key);
            return;
        };
        self.derive_ok();
        if self.ok[ln].is_none() || self.ok[rn].is_none() {
            return;
        }
        let delta = delta_matrix(&inst.context, vars);
        let Some(outer) = self.outer_prems(sigma, &delta) else { return };
        self.applied.insert(key);
        self.instantiations += 1;
        let named = vars.iter().cloned().zip(sigma.iter().copied()).collect();
        self.add_eq(ln, rn, e, Just::Scaled { axiom, eps, sigma: named, outer });
    }

    /// Instances of a family axiom at the arguments `kids`: every index, with
    /// the stream tail handled by one continuity step when the bound is geometric.
    fn apply_family(&mut self, axiom: usize, kids: &[NodeId], stream: bool) {
        let AxiomSchema::Family(f) = self.theory.axioms[axiom].clone() else { unreachable!() };
        let terms: Vec<Preterm> = kids.iter().map(|&k| self.nodes[k].term.clone()).collect();
        let args = if stream {
            let (prefix, tail) = terms.split_at(terms.len() - 1);
            Args::stream(prefix.to_vec(), tail[0].clone())
        } else {
            Args::Tuple(terms)
        };
        let mut prems = Vec::new();
        for &k in kids {
            prems.push(Prem { a: k, b: k, need: ExtReal::ZERO, via: None });
        }
        let mut checks = constraint_positions(&f.arity, kids.len());
        if stream {
            checks.pop();
        }
        for (i, j, e) in checks {
            match self.prem(kids[i], kids[j], e) {
                Some(p) => prems.push(p),
                None => return,
            }
        }
        let indices: Vec<u64> =
            if stream { (1..=kids.len() as u64).collect() } else { (0..kids.len() as u64).collect() };
        let tail = if stream { Some(kids.len() as u64) } else { None };
        for n in indices {
            let key = InstKey::Family(axiom, kids.to_vec(), n);
            if self.applied.contains(&key) {
                continue;
            }
            let Some((l, r, b)) = f.instance(n, &args) else {
                self.applied.insert(key);
                continue;
            };
            let (Some(ln), Some(rn)) = (self.intern(&l, true), self.intern(&r, true)) else {
                self.applied.insert(key);
                continue;
            };
            self.derive_ok();
            if self.ok[ln].is_none() || self.ok[rn].is_none() {
                continue;
            }
            self.applied.insert(key);
            self.instantiations += 1;
            let cont = Some(n) == tail && matches!(f.bound, BoundExpr::Geometric { .. });
            let just = if cont {
                Just::Cont { axiom, k0: n, args: args.clone(), prems: prems.clone() }
            } else {
                Just::Family { axiom, n, args: args.clone(), prems: prems.clone() }
            };
            let bound = if cont { ExtReal::ZERO } else { b };
            self.add_eq(ln, rn, bound, just);
        }
    }

    /// Nonexpansiveness between applications of the same operation.
    fn congruence(&mut self) {
        for op in 0..self.ops.len() {
            let mut groups: BTreeMap<(usize, Vec<NodeId>), Vec<NodeId>> = BTreeMap::new();
            for id in 0..self.nodes.len() {
                if self.ok[id].is_none() {
                    continue;
                }
                if let Key::App { op: o, kids, .. } = &self.nodes[id].key {
                    if *o == op && !kids.is_empty() {
                        let sig = kids.iter().map(|&k| self.class[k]).collect();
                        groups.entry((kids.len(), sig)).or_default().push(id);
                    }
                }
            }
            let leaders: Vec<NodeId> = groups.values().map(|g| g[0]).collect();
            for g in groups.into_values() {
                for &other in &g[1..] {
                    self.nexp(op, g[0], other);
                }
            }
            for (i, &a) in leaders.iter().enumerate() {
                for &b in &leaders[i + 1..] {
                    self.nexp(op, a, b);
                }
            }
        }
    }

    fn aligned(&self, a: NodeId, b: NodeId) -> Vec<(NodeId, NodeId)> {
        let (Key::App { kids: s, stream, .. }, Key::App { kids: t, .. }) = (&self.nodes[a].key, &self.nodes[b].key)
        else {
            return Vec::new();
        };
        if !*stream {
            return s.iter().copied().zip(t.iter().copied()).collect();
        }
        let (ks, kt) = (s.len() - 1, t.len() - 1);
        let mut out: Vec<(NodeId, NodeId)> = (0..ks.max(kt)).map(|i| (s[i.min(ks)], t[i.min(kt)])).collect();
        out.push((s[ks], t[kt]));
        out
    }

    fn nexp(&mut self, op: usize, a: NodeId, b: NodeId) {
        if self.class[a] == self.class[b] {
            return;
        }
        let pairs = self.aligned(a, b);
        let eps = pairs.iter().map(|&(p, q)| self.dist(p, q)).fold(ExtReal::ZERO, ExtReal::max);
        if eps.is_inf() || self.dist(a, b) <= eps {
            return;
        }
        let mut prems = Vec::new();
        for (p, q, e) in self.constraints(op, a).into_iter().chain(self.constraints(op, b)) {
            prems.push(self.prem(p, q, e).expect("ok terms meet their constraints"));
        }
        for (p, q) in pairs {
            prems.push(self.prem(p, q, eps).expect("aligned within eps"));
        }
        self.add_eq(a, b, eps, Just::Nexp(prems));
    }

    // ---- queries ----

    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    /// The iteration cap or the term cap was hit before a fixpoint.
    pub fn truncated(&self) -> bool {
        self.truncated || !self.converged
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Number of axiom instances that were applied.
    pub fn instantiations(&self) -> usize {
        self.instantiations
    }

    pub fn universe(&self) -> Vec<&Preterm> {
        self.nodes.iter().map(|n| &n.term).collect()
    }

    pub fn ok_terms(&self) -> Vec<&Preterm> {
        (0..self.nodes.len()).filter(|&i| self.ok[i].is_some()).map(|i| &self.nodes[i].term).collect()
    }

    fn lookup(&self, t: &Preterm) -> Option<NodeId> {
        let key = match t {
            Preterm::Var(v) => Key::Var(v.clone()),
            Preterm::App { op, args } => {
                let &o = self.op_index.get(op)?;
                let kids = args.positions().into_iter().map(|p| self.lookup(p)).collect::<Option<Vec<_>>>()?;
                Key::App { op: o, kids, stream: matches!(args, Args::Stream { .. }) }
            }
        };
        self.index.get(&key).copied()
    }

    /// Class of a well-formed term, also for terms outside the universe whose
    /// arguments are known: an application lands in the class of any known
    /// application of the same operation to the same argument classes.
    fn class_of(&self, t: &Preterm) -> Option<NodeId> {
        if let Some(id) = self.lookup(t) {
            return self.ok[id].map(|_| self.class[id]);
        }
        let Preterm::App { op, args } = t else { return None };
        let &o = self.op_index.get(op)?;
        let want: Vec<NodeId> = args.positions().into_iter().map(|p| self.class_of(p)).collect::<Option<_>>()?;
        let stream = matches!(args, Args::Stream { .. });
        (0..self.nodes.len())
            .find(|&id| {
                self.ok[id].is_some()
                    && matches!(&self.nodes[id].key, Key::App { op: o2, kids, stream: s2 }
                        if *o2 == o && *s2 == stream && kids.len() == want.len()
                            && kids.iter().zip(&want).all(|(&k, &c)| self.class[k] == c))
            })
            .map(|id| self.class[id])
    }

    pub fn is_ok(&self, t: &Preterm) -> bool {
        self.lookup(t).is_some_and(|id| self.ok[id].is_some())
    }

    /// Best derived bound; `INF` when none was derived or a side is not well-formed.
    pub fn bound(&self, s: &Preterm, t: &Preterm) -> ExtReal {
        match (self.lookup(s), self.lookup(t)) {
            (Some(a), Some(b)) if self.ok[a].is_some() && self.ok[b].is_some() => self.dist(a, b),
            _ => ExtReal::Inf,
        }
    }

    pub fn ok_proof(&self, t: &Preterm) -> Option<Arc<Proof>> {
        let id = self.lookup(t)?;
        Some(self.fact_proof(self.ok[id]?))
    }

    /// Proof of `s =_b t` at the best bound `b`.
    pub fn eq_proof(&self, s: &Preterm, t: &Preterm) -> Option<(ExtReal, Arc<Proof>)> {
        let (a, b) = (self.lookup(s)?, self.lookup(t)?);
        self.ok[a]?;
        self.ok[b]?;
        let bound = self.dist(a, b);
        if bound.is_inf() {
            return None;
        }
        let via = if self.class[a] == self.class[b] { None } else { self.edge(a, b) };
        let p = Prem { a, b, need: bound, via };
        for f in self.prem_deps(&p) {
            self.fact_proof(f);
        }
        Some((bound, self.prem_proof(&p)))
    }

    /// Ok classes ordered by representative.
    pub fn classes(&self) -> Vec<Class> {
        let reps = self.reps();
        reps.iter()
            .map(|&r| {
                let mut members: Vec<NodeId> =
                    self.members[self.class[r]].iter().copied().filter(|&m| self.ok[m].is_some()).collect();
                members.sort_unstable();
                Class {
                    rep: self.nodes[r].term.clone(),
                    members: members.iter().map(|&m| self.nodes[m].term.clone()).collect(),
                }
            })
            .collect()
    }

    /// Position in [`Self::classes`] of the class a term falls into, if known.
    pub fn class_index(&self, t: &Preterm) -> Option<usize> {
        let root = self.class_of(t)?;
        self.reps().iter().position(|&r| self.class[r] == root)
    }

    // ---- proof reconstruction ----

    fn path(&self, a: NodeId, b: NodeId) -> Vec<(FactId, NodeId, NodeId)> {
        if a == b {
            return Vec::new();
        }
        let mut prev: HashMap<NodeId, (NodeId, FactId)> = HashMap::new();
        let mut queue = VecDeque::from([a]);
        prev.insert(a, (a, usize::MAX));
        while let Some(u) = queue.pop_front() {
            if u == b {
                break;
            }
            for &(v, f) in &self.forest[u] {
                if let std::collections::hash_map::Entry::Vacant(e) = prev.entry(v) {
                    e.insert((u, f));
                    queue.push_back(v);
                }
            }
        }
        let mut out = Vec::new();
        let mut cur = b;
        while cur != a {
            let (p, f) = prev[&cur];
            out.push((f, p, cur));
            cur = p;
        }
        out.reverse();
        out
    }

    fn prem_steps(&self, p: &Prem) -> Vec<(FactId, NodeId, NodeId)> {
        match p.via {
            None => self.path(p.a, p.b),
            Some(e) => {
                let mut steps = self.path(p.a, e.from);
                steps.push((e.fact, e.from, e.to));
                steps.extend(self.path(e.to, p.b));
                steps
            }
        }
    }

    fn prem_deps(&self, p: &Prem) -> Vec<FactId> {
        if p.a == p.b {
            return vec![self.ok[p.a].expect("ok node")];
        }
        self.prem_steps(p).into_iter().map(|(f, _, _)| f).collect()
    }

    fn deps(&self, f: FactId) -> Vec<FactId> {
        let prems: Vec<&Prem> = match &self.facts[f].just {
            Just::Var | Just::Assum => Vec::new(),
            Just::App(ps) => {
                let Kind::Ok(id) = self.facts[f].kind else { unreachable!() };
                let Key::App { kids, .. } = &self.nodes[id].key else { unreachable!() };
                let mut out: Vec<FactId> = kids.iter().map(|&k| self.ok[k].expect("ok kid")).collect();
                for p in ps {
                    out.extend(self.prem_deps(p));
                }
                return out;
            }
            Just::Triang(p, q) => vec![p, q],
            Just::Nexp(ps) => ps.iter().collect(),
            Just::Concrete { outer, .. } | Just::Scaled { outer, .. } => outer.iter().collect(),
            Just::Family { prems, .. } | Just::Cont { prems, .. } => prems.iter().collect(),
        };
        prems.into_iter().flat_map(|p| self.prem_deps(p)).collect()
    }

    fn fact_proof(&self, root: FactId) -> Arc<Proof> {
        if let Some(p) = self.proofs.borrow().get(&root) {
            return p.clone();
        }
        // Post-order over the dependency DAG without recursion.
        let mut stack = vec![(root, false)];
        while let Some((f, expanded)) = stack.pop() {
            if self.proofs.borrow().contains_key(&f) {
                continue;
            }
            if expanded {
                let p = Arc::new(self.build(f));
                self.proofs.borrow_mut().insert(f, p);
            } else {
                stack.push((f, true));
                for d in self.deps(f) {
                    if !self.proofs.borrow().contains_key(&d) {
                        stack.push((d, false));
                    }
                }
            }
        }
        self.proofs.borrow()[&root].clone()
    }

    fn memo(&self, f: FactId) -> Arc<Proof> {
        self.proofs.borrow()[&f].clone()
    }

    fn oriented(&self, f: FactId, from: NodeId) -> Arc<Proof> {
        let Kind::Eq(a, _, _) = self.facts[f].kind else { unreachable!("equation fact") };
        if a == from {
            return self.memo(f);
        }
        if let Some(p) = self.symm.borrow().get(&f) {
            return p.clone();
        }
        let p = Arc::new(Proof::symm(self.memo(f)));
        self.symm.borrow_mut().insert(f, p.clone());
        p
    }

    fn prem_proof(&self, p: &Prem) -> Arc<Proof> {
        let (proof, bound) = if p.a == p.b {
            (Arc::new(Proof::refl(self.memo(self.ok[p.a].expect("ok node")))), ExtReal::ZERO)
        } else {
            let mut acc: Option<Arc<Proof>> = None;
            for (f, from, _) in self.prem_steps(p) {
                let step = self.oriented(f, from);
                acc = Some(match acc {
                    None => step,
                    Some(prev) => Arc::new(Proof::triang(prev, step)),
                });
            }
            (acc.expect("distinct nodes are connected"), p.via.map_or(ExtReal::ZERO, |e| e.bound))
        };
        if bound < p.need {
            Arc::new(Proof::max(proof, p.need))
        } else {
            proof
        }
    }

    fn build(&self, f: FactId) -> Proof {
        let ctx = &self.context;
        let fact = &self.facts[f];
        let prems = |ps: &[Prem]| -> Vec<Arc<Proof>> { ps.iter().map(|p| self.prem_proof(p)).collect() };
        let sigma_terms = |sigma: &[(String, NodeId)]| -> Vec<(String, Preterm)> {
            sigma.iter().map(|(v, n)| (v.clone(), self.nodes[*n].term.clone())).collect()
        };
        match (&fact.kind, &fact.just) {
            (Kind::Ok(id), Just::Var) => {
                let Preterm::Var(x) = &self.nodes[*id].term else { unreachable!() };
                Proof::var(ctx, x)
            }
            (Kind::Ok(id), Just::App(ps)) => {
                let Preterm::App { op, args } = &self.nodes[*id].term else { unreachable!() };
                let Key::App { kids, .. } = &self.nodes[*id].key else { unreachable!() };
                let mut premises: Vec<Arc<Proof>> = kids.iter().map(|&k| self.memo(self.ok[k].expect("ok"))).collect();
                premises.extend(prems(ps));
                Proof::app(ctx, op, args.clone(), premises)
            }
            (Kind::Eq(a, b, e), Just::Assum) => {
                let (Preterm::Var(x), Preterm::Var(y)) = (&self.nodes[*a].term, &self.nodes[*b].term) else {
                    unreachable!()
                };
                Proof::assum(ctx, x, y, *e)
            }
            (Kind::Eq(..), Just::Triang(p, q)) => Proof::triang(self.prem_proof(p), self.prem_proof(q)),
            (Kind::Eq(a, b, e), Just::Nexp(ps)) => {
                let (Preterm::App { op, args: s }, Preterm::App { args: t, .. }) =
                    (&self.nodes[*a].term, &self.nodes[*b].term)
                else {
                    unreachable!()
                };
                Proof::nexp(ctx, op, s.clone(), t.clone(), *e, prems(ps))
            }
            (Kind::Eq(..), Just::Concrete { axiom, sigma, outer }) => {
                let AxiomSchema::Concrete(seq) = &self.theory.axioms[*axiom] else { unreachable!() };
                let inner = Arc::new(Proof::axiom(seq.clone(), *axiom, AxiomInstance::Concrete, Vec::new()));
                Proof::subst(ctx, inner, sigma_terms(sigma), prems(outer))
            }
            (Kind::Eq(..), Just::Scaled { axiom, eps, sigma, outer }) => {
                let AxiomSchema::Scaled(s) = &self.theory.axioms[*axiom] else { unreachable!() };
                let inst = s.instance(*eps);
                let inner = Arc::new(Proof::axiom(inst, *axiom, AxiomInstance::Scaled { eps: *eps }, Vec::new()));
                Proof::subst(ctx, inner, sigma_terms(sigma), prems(outer))
            }
            (Kind::Eq(a, b, e), Just::Family { axiom, n, args, prems: ps }) => {
                let conclusion = Sequent::eq(ctx.clone(), self.nodes[*a].term.clone(), self.nodes[*b].term.clone(), *e);
                let instance = AxiomInstance::Family { n: SchemaIndex::Fixed(*n), args: args.clone() };
                Proof::axiom(conclusion, *axiom, instance, prems(ps))
            }
            (Kind::Eq(a, b, _), Just::Cont { axiom, k0, args, prems: ps }) => {
                let AxiomSchema::Family(fam) = &self.theory.axioms[*axiom] else { unreachable!() };
                let BoundExpr::Geometric { scale, ratio } = fam.bound else { unreachable!() };
                let (lhs, rhs) = (self.nodes[*a].term.clone(), self.nodes[*b].term.clone());
                let at_k0 = ExtReal::Fin(geometric(scale, ratio, *k0));
                let conclusion = Sequent::eq(ctx.clone(), lhs.clone(), rhs.clone(), at_k0);
                let instance = AxiomInstance::Family { n: SchemaIndex::Param, args: args.clone() };
                let template = Arc::new(Proof::axiom(conclusion, *axiom, instance, prems(ps)));
                Proof::cont(ctx, ParametricBoundFamily { lhs, rhs, scale, ratio, k0: *k0, template })
            }
            (kind, just) => unreachable!("fact {kind:?} cannot carry {just:?}"),
        }
    }
}

/// Index form of `reduced_app_constraints` for an application with `len` argument slots.
fn constraint_positions(arity: &Arity, len: usize) -> Vec<(usize, usize, ExtReal)> {
    let mut out = Vec::new();
    match arity {
        Arity::Finite(m) => {
            for i in 0..len {
                for j in (i + 1)..len {
                    if m.d(i, j).is_finite() {
                        out.push((i, j, m.d(i, j)));
                    }
                }
            }
        }
        Arity::Geometric { ratio, scale } => {
            let k = len - 1;
            for i in 1..=k {
                for j in (i + 1)..=k {
                    out.push((i - 1, j - 1, Arity::stream_distance(*ratio, *scale, i, j)));
                }
                out.push((i - 1, k, ExtReal::Fin(geometric(*scale, *ratio, i as u64))));
            }
            out.push((k, k, ExtReal::ZERO));
        }
    }
    out
}

/// Calls `f` on every tuple over `0..n` of length `k` until it returns `false`.
fn for_each_tuple(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    crate::algebra::for_each_tuple(n, k, &mut f)
}
