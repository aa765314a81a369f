//! Finite models of metric signatures, satisfaction and homomorphisms.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::extreal::{geometric, ExtReal, Rational};
use crate::metric::{nonexpansive_maps, FinMetric};
use crate::syntax::{Args, Arity, Judgment, Preterm, Sequent, Signature};
use crate::theories::{AxiomSchema, FamilySchema, ScaledSchema, Template, Theory};

/// Variable assignment into a carrier, by point index.
pub type Assignment = BTreeMap<String, usize>;

/// Smallest `n ≥ 1` with `scale · ratio^n` below every nonzero distance of the carrier.
///
/// A nonexpansive sequence for the stream arity is constant from position `n`
/// on, so it is determined by its first `n` entries.
pub fn stream_cutoff(carrier: &FinMetric, ratio: Rational, scale: Rational) -> usize {
    let ExtReal::Fin(delta) = carrier.min_positive_distance() else { return 1 };
    let mut n = 1;
    while geometric(scale, ratio, n as u64) >= delta {
        n += 1;
    }
    n
}

/// The admissible argument tuples of one operation over a carrier.
///
/// For finite arities these are the nonexpansive maps `A → M`; for streams the
/// first `cutoff` entries of every nonexpansive sequence.
#[derive(Clone, Debug)]
pub struct CellSpace {
    pub cells: Vec<Vec<usize>>,
    pub stream_cutoff: Option<usize>,
    index: HashMap<Vec<usize>, usize>,
    dist: Vec<Vec<ExtReal>>,
}

impl CellSpace {
    pub fn new(carrier: &FinMetric, arity: &Arity) -> CellSpace {
        let (cells, stream_cutoff) = match arity {
            Arity::Finite(a) => (nonexpansive_maps(a, carrier), None),
            Arity::Geometric { ratio, scale } => {
                let k = stream_cutoff(carrier, *ratio, *scale);
                (stream_cells(carrier, *ratio, *scale, k), Some(k))
            }
        };
        let index = cells.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        let sup = |f: &[usize], g: &[usize]| {
            f.iter().zip(g).map(|(&x, &y)| carrier.d(x, y)).fold(ExtReal::ZERO, ExtReal::max)
        };
        let dist = cells.iter().map(|f| cells.iter().map(|g| sup(f, g)).collect()).collect();
        CellSpace { cells, stream_cutoff, index, dist }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn lookup(&self, key: &[usize]) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Supremum distance between two cells.
    pub fn dist(&self, i: usize, j: usize) -> ExtReal {
        self.dist[i][j]
    }
}

fn stream_cells(carrier: &FinMetric, ratio: Rational, scale: Rational, k: usize) -> Vec<Vec<usize>> {
    let bounds: Vec<ExtReal> = (0..=k).map(|i| ExtReal::Fin(geometric(scale, ratio, i as u64))).collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(m: &FinMetric, bounds: &[ExtReal], k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let j = cur.len();
        if j == k {
            out.push(cur.clone());
            return;
        }
        for v in 0..m.len() {
            // Positions are 1-based: entry i (0-based) is position i + 1.
            if (0..j).all(|i| m.d(cur[i], v) <= bounds[i + 1]) {
                cur.push(v);
                go(m, bounds, k, cur, out);
                cur.pop();
            }
        }
    }
    go(carrier, &bounds, k, &mut cur, &mut out);
    out
}

/// Why a term has no value under an assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Undefined {
    UnboundVariable(String),
    UnknownSymbol(String),
    Constraint(Box<Violation>),
}

/// Arguments `i` and `j` of `op` lie at `found`, above the arity's bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub op: String,
    pub i: usize,
    pub j: usize,
    pub bound: ExtReal,
    pub found: ExtReal,
}

impl fmt::Display for Undefined {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Undefined::UnboundVariable(v) => write!(f, "variable `{v}` is unassigned"),
            Undefined::UnknownSymbol(s) => write!(f, "`{s}` is not interpreted"),
            Undefined::Constraint(v) => {
                write!(f, "arguments {} and {} of `{}` are at distance {} > {}", v.i, v.j, v.op, v.found, v.bound)
            }
        }
    }
}

/// A term compiled against a signature and a variable list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum CTerm {
    Var(usize),
    /// For stream applications the last argument is the tail.
    App {
        op: usize,
        args: Vec<CTerm>,
    },
}

impl CTerm {
    pub(crate) fn compile(
        t: &Preterm,
        ops: &HashMap<String, usize>,
        vars: &mut Vec<String>,
    ) -> Result<CTerm, Undefined> {
        Ok(match t {
            Preterm::Var(v) => match vars.iter().position(|w| w == v) {
                Some(i) => CTerm::Var(i),
                None => {
                    vars.push(v.clone());
                    CTerm::Var(vars.len() - 1)
                }
            },
            Preterm::App { op, args } => {
                let idx = *ops.get(op).ok_or_else(|| Undefined::UnknownSymbol(op.clone()))?;
                let args =
                    args.positions().into_iter().map(|a| CTerm::compile(a, ops, vars)).collect::<Result<_, _>>()?;
                CTerm::App { op: idx, args }
            }
        })
    }
}

pub(crate) enum Eval {
    Val(usize),
    /// The value depends on a table entry that is not assigned yet.
    Need(usize, usize),
    Undef(Undefined),
}

/// Table access shared by complete models and the partial tables of model search.
pub(crate) trait Tables {
    fn get(&self, op: usize, cell: usize) -> Option<usize>;
}

impl Tables for Vec<Vec<usize>> {
    fn get(&self, op: usize, cell: usize) -> Option<usize> {
        Some(self[op][cell])
    }
}

impl Tables for Vec<Vec<Option<usize>>> {
    fn get(&self, op: usize, cell: usize) -> Option<usize> {
        self[op][cell]
    }
}

/// Carrier plus per-operation cell spaces: everything needed to evaluate terms.
#[derive(Clone, Debug)]
pub(crate) struct Frame {
    pub carrier: FinMetric,
    pub names: Vec<String>,
    pub arities: Vec<Arity>,
    pub spaces: Vec<CellSpace>,
    pub index: HashMap<String, usize>,
}

impl Frame {
    pub fn new(sig: &Signature, carrier: &FinMetric) -> Frame {
        let names: Vec<String> = sig.symbols().map(|(n, _)| n.to_string()).collect();
        let arities: Vec<Arity> = sig.symbols().map(|(_, a)| a.clone()).collect();
        let spaces = arities.iter().map(|a| CellSpace::new(carrier, a)).collect();
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Frame { carrier: carrier.clone(), names, arities, spaces, index }
    }

    /// Checks the arity constraints on argument values and returns the cell.
    pub fn cell(&self, op: usize, vals: &[usize]) -> Result<usize, Undefined> {
        let m = &self.carrier;
        let violated = |i: usize, j: usize, bound: ExtReal| {
            Undefined::Constraint(Box::new(Violation {
                op: self.names[op].clone(),
                i,
                j,
                bound,
                found: m.d(vals[i], vals[j]),
            }))
        };
        match &self.arities[op] {
            Arity::Finite(a) => {
                for i in 0..vals.len() {
                    for j in (i + 1)..vals.len() {
                        if m.d(vals[i], vals[j]) > a.d(i, j) {
                            return Err(violated(i, j, a.d(i, j)));
                        }
                    }
                }
                Ok(self.spaces[op].lookup(vals).expect("nonexpansive tuples are cells"))
            }
            Arity::Geometric { ratio, scale } => {
                let (prefix, tail) = vals.split_at(vals.len() - 1);
                let tail = tail[0];
                let k = prefix.len();
                for i in 0..k {
                    let bound = ExtReal::Fin(geometric(*scale, *ratio, i as u64 + 1));
                    for j in (i + 1)..k {
                        if m.d(prefix[i], prefix[j]) > bound {
                            return Err(violated(i, j, bound));
                        }
                    }
                    if m.d(prefix[i], tail) > bound {
                        return Err(violated(i, k, bound));
                    }
                }
                let cutoff = self.spaces[op].stream_cutoff.expect("stream space");
                let key: Vec<usize> = (0..cutoff).map(|i| prefix.get(i).copied().unwrap_or(tail)).collect();
                Ok(self.spaces[op].lookup(&key).expect("nonexpansive sequences are cells"))
            }
        }
    }

    pub fn eval(&self, tables: &impl Tables, t: &CTerm, alpha: &[usize]) -> Eval {
        match t {
            CTerm::Var(i) => Eval::Val(alpha[*i]),
            CTerm::App { op, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    match self.eval(tables, a, alpha) {
                        Eval::Val(v) => vals.push(v),
                        other => return other,
                    }
                }
                match self.cell(*op, &vals) {
                    Ok(c) => match tables.get(*op, c) {
                        Some(v) => Eval::Val(v),
                        None => Eval::Need(*op, c),
                    },
                    Err(u) => Eval::Undef(u),
                }
            }
        }
    }
}

/// Interpretation of one operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpInterp {
    /// Values indexed by the operation's cells in enumeration order.
    Table(Vec<usize>),
    /// Streams only: a sequence goes to its eventual value.
    EventualValue,
}

/// A finite model: a carrier with one nonexpansive map `M^A → M` per symbol.
#[derive(Clone, Debug)]
pub struct Model {
    pub signature: Signature,
    frame: Frame,
    tables: Vec<Vec<usize>>,
    eventual: Vec<bool>,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.signature == other.signature && self.frame.carrier == other.frame.carrier && self.tables == other.tables
    }
}

impl Model {
    pub fn new(sig: &Signature, carrier: &FinMetric, ops: &BTreeMap<String, OpInterp>) -> Result<Model, ModelError> {
        if let Some(extra) = ops.keys().find(|k| sig.arity(k).is_none()) {
            return Err(ModelError::UnknownSymbol(extra.clone()));
        }
        let frame = Frame::new(sig, carrier);
        let mut tables = Vec::new();
        let mut eventual = Vec::new();
        for (i, name) in frame.names.iter().enumerate() {
            let space = &frame.spaces[i];
            let interp = ops.get(name).ok_or_else(|| ModelError::MissingOp(name.clone()))?;
            let table = match interp {
                OpInterp::Table(t) => {
                    if t.len() != space.len() {
                        return Err(ModelError::TableSize { op: name.clone(), expected: space.len(), found: t.len() });
                    }
                    if t.iter().any(|&v| v >= carrier.len()) {
                        return Err(ModelError::OutOfRange(name.clone()));
                    }
                    t.clone()
                }
                OpInterp::EventualValue => {
                    if space.stream_cutoff.is_none() {
                        return Err(ModelError::NotStream(name.clone()));
                    }
                    space.cells.iter().map(|c| *c.last().expect("cutoff is positive")).collect()
                }
            };
            for a in 0..space.len() {
                for b in (a + 1)..space.len() {
                    if carrier.d(table[a], table[b]) > space.dist(a, b) {
                        return Err(ModelError::Expanding(name.clone()));
                    }
                }
            }
            eventual.push(matches!(interp, OpInterp::EventualValue));
            tables.push(table);
        }
        Ok(Model { signature: sig.clone(), frame, tables, eventual })
    }

    /// Assembles a model from already validated parts.
    pub(crate) fn from_parts(sig: &Signature, frame: Frame, tables: Vec<Vec<usize>>) -> Model {
        let eventual = vec![false; tables.len()];
        Model { signature: sig.clone(), frame, tables, eventual }
    }

    pub fn carrier(&self) -> &FinMetric {
        &self.frame.carrier
    }

    pub fn cells(&self, op: &str) -> Option<&CellSpace> {
        self.frame.index.get(op).map(|&i| &self.frame.spaces[i])
    }

    pub fn table(&self, op: &str) -> Option<&[usize]> {
        self.frame.index.get(op).map(|&i| self.tables[i].as_slice())
    }

    pub fn interp(&self, op: &str) -> Option<OpInterp> {
        let &i = self.frame.index.get(op)?;
        Some(if self.eventual[i] { OpInterp::EventualValue } else { OpInterp::Table(self.tables[i].clone()) })
    }

    /// `M[f]` on an argument tuple (for streams: prefix followed by tail).
    pub fn apply(&self, op: &str, args: &[usize]) -> Result<usize, Undefined> {
        let &i = self.frame.index.get(op).ok_or_else(|| Undefined::UnknownSymbol(op.to_string()))?;
        let cell = self.frame.cell(i, args)?;
        Ok(self.tables[i][cell])
    }

    pub fn to_json(&self) -> serde_json::Value {
        let ops: BTreeMap<String, OpJson> = self
            .frame
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let v = if self.eventual[i] {
                    OpJson::Mode { mode: "eventual-value".into() }
                } else {
                    OpJson::Table(self.tables[i].clone())
                };
                (n.clone(), v)
            })
            .collect();
        serde_json::to_value(ModelJson { carrier: self.frame.carrier.clone(), ops }).expect("serializable")
    }

    pub fn from_json(sig: &Signature, value: &serde_json::Value) -> Result<Model, String> {
        let raw: ModelJson = serde_json::from_value(value.clone()).map_err(|e| e.to_string())?;
        let mut ops = BTreeMap::new();
        for (name, v) in raw.ops {
            let interp = match v {
                OpJson::Table(t) => OpInterp::Table(t),
                OpJson::Mode { mode } if mode == "eventual-value" => OpInterp::EventualValue,
                OpJson::Mode { mode } => return Err(ModelError::Mode(mode).to_string()),
            };
            ops.insert(name, interp);
        }
        Model::new(sig, &raw.carrier, &ops).map_err(|e| e.to_string())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    carrier: FinMetric,
    ops: BTreeMap<String, OpJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OpJson {
    Table(Vec<usize>),
    Mode { mode: String },
}

fn compile(model: &Model, t: &Preterm, vars: &mut Vec<String>) -> Result<CTerm, Undefined> {
    CTerm::compile(t, &model.frame.index, vars)
}

pub fn evaluate(model: &Model, t: &Preterm, alpha: &Assignment) -> Result<usize, Undefined> {
    let mut vars = Vec::new();
    let ct = compile(model, t, &mut vars)?;
    let vals = vars
        .iter()
        .map(|v| alpha.get(v).copied().ok_or_else(|| Undefined::UnboundVariable(v.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    match model.frame.eval(&model.tables, &ct, &vals) {
        Eval::Val(v) => Ok(v),
        Eval::Undef(u) => Err(u),
        Eval::Need(..) => unreachable!("complete tables"),
    }
}

/// Calls `f` on every tuple in `0..n` of length `k`, in lexicographic order.
pub(crate) fn for_each_tuple(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if k > 0 && n == 0 {
        return;
    }
    let mut cur = vec![0usize; k];
    loop {
        if !f(&cur) {
            return;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < n {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// Context hypotheses compiled to variable indices.
pub(crate) fn compile_context(seq: &Sequent, vars: &mut Vec<String>) -> Vec<(usize, usize, ExtReal)> {
    let mut out = Vec::new();
    for h in seq.context.hyps() {
        let CTerm::Var(x) = CTerm::compile(&Preterm::Var(h.x.clone()), &HashMap::new(), vars).expect("variable") else {
            unreachable!()
        };
        let CTerm::Var(y) = CTerm::compile(&Preterm::Var(h.y.clone()), &HashMap::new(), vars).expect("variable") else {
            unreachable!()
        };
        out.push((x, y, h.bound));
    }
    out
}

/// A sequent compiled against a frame.
#[derive(Clone, Debug)]
pub(crate) struct CSequent {
    pub nvars: usize,
    pub ctx: Vec<(usize, usize, ExtReal)>,
    pub lhs: CTerm,
    /// `None` for ok judgments.
    pub rhs: Option<(CTerm, ExtReal)>,
}

impl CSequent {
    pub fn compile(frame: &Frame, seq: &Sequent) -> Result<CSequent, Undefined> {
        let mut vars = Vec::new();
        let ctx = compile_context(seq, &mut vars);
        let (lhs, rhs) = match &seq.body {
            Judgment::Ok(t) => (CTerm::compile(t, &frame.index, &mut vars)?, None),
            Judgment::Eq(s, t, e) => {
                let s = CTerm::compile(s, &frame.index, &mut vars)?;
                let t = CTerm::compile(t, &frame.index, &mut vars)?;
                (s, Some((t, *e)))
            }
        };
        Ok(CSequent { nvars: vars.len(), ctx, lhs, rhs })
    }

    pub fn admits(&self, m: &FinMetric, alpha: &[usize]) -> bool {
        self.ctx.iter().all(|&(x, y, e)| m.d(alpha[x], alpha[y]) <= e)
    }
}

/// Outcome of checking one assignment against a sequent.
pub(crate) enum Check {
    Holds,
    Fails,
    Need(usize, usize),
}

pub(crate) fn check_assignment(frame: &Frame, tables: &impl Tables, seq: &CSequent, alpha: &[usize]) -> Check {
    let l = match frame.eval(tables, &seq.lhs, alpha) {
        Eval::Val(v) => v,
        Eval::Need(o, c) => return Check::Need(o, c),
        Eval::Undef(_) => return Check::Fails,
    };
    match &seq.rhs {
        None => Check::Holds,
        Some((t, e)) => match frame.eval(tables, t, alpha) {
            Eval::Val(r) if frame.carrier.d(l, r) <= *e => Check::Holds,
            Eval::Val(_) | Eval::Undef(_) => Check::Fails,
            Eval::Need(o, c) => Check::Need(o, c),
        },
    }
}

/// `Γ ⊨_M φ`: every Γ-satisfying assignment makes φ hold.
pub fn satisfies(model: &Model, seq: &Sequent) -> bool {
    let Ok(cs) = CSequent::compile(&model.frame, seq) else { return false };
    let m = &model.frame.carrier;
    let mut ok = true;
    for_each_tuple(m.len(), cs.nvars, |alpha| {
        if cs.admits(m, alpha) && matches!(check_assignment(&model.frame, &model.tables, &cs, alpha), Check::Fails) {
            ok = false;
        }
        ok
    });
    ok
}

/// Checks an axiom schema, quantifying over every instance.
pub fn satisfies_axiom(model: &Model, axiom: &AxiomSchema) -> bool {
    match axiom {
        AxiomSchema::Concrete(s) => satisfies(model, s),
        AxiomSchema::Family(f) => {
            AxiomCheck::family(&model.frame, f).map(|c| c.all(&model.frame, &model.tables, |_| true)).unwrap_or(false)
        }
        AxiomSchema::Scaled(s) => {
            AxiomCheck::scaled(&model.frame, s).map(|c| c.all(&model.frame, &model.tables, |_| true)).unwrap_or(false)
        }
    }
}

pub fn is_model(model: &Model, theory: &Theory) -> bool {
    theory.axioms.iter().all(|a| satisfies_axiom(model, a))
}

/// A compiled axiom whose instances can be checked one at a time, also against partial tables.
#[derive(Clone, Debug)]
pub(crate) enum AxiomCheck {
    /// Ordinary sequent: every admissible assignment.
    Plain(CSequent),
    /// Family: every cell of the family arity and every index.
    Family { terms: Vec<(FTerm, FTerm, ExtReal)>, cells: Vec<Vec<usize>> },
    /// ε-scaled: every assignment, at the least ε its context allows.
    Scaled { nvars: usize, hyps: Vec<(usize, usize, Rational)>, lhs: CTerm, rhs: CTerm, coeff: Rational },
}

/// A family template with the members as leaves.
#[derive(Clone, Debug)]
pub(crate) enum FTerm {
    /// Member at a 0-based entry of the cell.
    Member(usize),
    /// The operation applied to the whole family.
    Whole(usize),
    App(usize, Vec<FTerm>),
}

pub(crate) enum Verdict3 {
    Holds,
    Fails,
    Need(usize, usize),
}

impl AxiomCheck {
    pub fn compile(frame: &Frame, axiom: &AxiomSchema) -> Option<AxiomCheck> {
        match axiom {
            AxiomSchema::Concrete(s) => CSequent::compile(frame, s).ok().map(AxiomCheck::Plain),
            AxiomSchema::Family(f) => AxiomCheck::family(frame, f),
            AxiomSchema::Scaled(s) => AxiomCheck::scaled(frame, s),
        }
    }

    fn family(frame: &Frame, f: &FamilySchema) -> Option<AxiomCheck> {
        // Cells of the family arity; for streams entries past the cutoff repeat the last.
        let space = CellSpace::new(&frame.carrier, &f.arity);
        let mut terms = Vec::new();
        let ft = |t: &Template, n: u64| -> Option<FTerm> { ftemplate(frame, t, n, &f.arity, space.stream_cutoff) };
        match &f.arity {
            Arity::Finite(a) => {
                for n in 0..a.len() as u64 {
                    terms.push((ft(&f.lhs, n)?, ft(&f.rhs, n)?, f.bound.at(n)));
                }
            }
            Arity::Geometric { .. } => {
                let k = space.stream_cutoff.expect("stream space") as u64;
                for n in 1..=k {
                    terms.push((ft(&f.lhs, n)?, ft(&f.rhs, n)?, f.bound.at(n)));
                }
                // Every index past the cutoff reads the same member; the bound is the infimum.
                let tail_bound = match &f.bound {
                    crate::theories::BoundExpr::Const(e) => *e,
                    crate::theories::BoundExpr::Geometric { .. } => ExtReal::ZERO,
                };
                terms.push((ft(&f.lhs, k + 1)?, ft(&f.rhs, k + 1)?, tail_bound));
            }
        }
        Some(AxiomCheck::Family { terms, cells: space.cells })
    }

    fn scaled(frame: &Frame, s: &ScaledSchema) -> Option<AxiomCheck> {
        let mut vars = Vec::new();
        let mut hyps = Vec::new();
        for h in &s.hyps {
            let x = var_index(&mut vars, &h.x);
            let y = var_index(&mut vars, &h.y);
            hyps.push((x, y, h.coeff));
        }
        let lhs = CTerm::compile(&s.lhs, &frame.index, &mut vars).ok()?;
        let rhs = CTerm::compile(&s.rhs, &frame.index, &mut vars).ok()?;
        Some(AxiomCheck::Scaled { nvars: vars.len(), hyps, lhs, rhs, coeff: s.coeff })
    }

    /// Checks every instance; `on_need` sees unresolved table entries and may stop the scan.
    pub fn scan(
        &self,
        frame: &Frame,
        tables: &impl Tables,
        mut on_need: impl FnMut((usize, usize)) -> bool,
    ) -> Verdict3 {
        let m = &frame.carrier;
        let mut failed = false;
        let mut need = None;
        match self {
            AxiomCheck::Plain(cs) => for_each_tuple(m.len(), cs.nvars, |alpha| {
                if !cs.admits(m, alpha) {
                    return true;
                }
                match check_assignment(frame, tables, cs, alpha) {
                    Check::Holds => true,
                    Check::Fails => {
                        failed = true;
                        false
                    }
                    Check::Need(o, c) => {
                        need.get_or_insert((o, c));
                        on_need((o, c))
                    }
                }
            }),
            AxiomCheck::Family { terms, cells } => {
                'cells: for cell in cells {
                    for (l, r, e) in terms {
                        match (feval(frame, tables, l, cell), feval(frame, tables, r, cell)) {
                            (Eval::Undef(_), _) | (_, Eval::Undef(_)) => {
                                failed = true;
                                break 'cells;
                            }
                            (Eval::Need(o, c), _) | (_, Eval::Need(o, c)) => {
                                need.get_or_insert((o, c));
                                if !on_need((o, c)) {
                                    break 'cells;
                                }
                            }
                            (Eval::Val(a), Eval::Val(b)) => {
                                if m.d(a, b) > *e {
                                    failed = true;
                                    break 'cells;
                                }
                            }
                        }
                    }
                }
            }
            AxiomCheck::Scaled { nvars, hyps, lhs, rhs, coeff } => for_each_tuple(m.len(), *nvars, |alpha| {
                let Some(eps) = least_eps(m, hyps, alpha) else { return true };
                let bound = match eps {
                    ExtReal::Fin(e) => ExtReal::Fin(e * coeff),
                    ExtReal::Inf => return true,
                };
                match (frame.eval(tables, lhs, alpha), frame.eval(tables, rhs, alpha)) {
                    (Eval::Undef(_), _) | (_, Eval::Undef(_)) => {
                        failed = true;
                        false
                    }
                    (Eval::Need(o, c), _) | (_, Eval::Need(o, c)) => {
                        need.get_or_insert((o, c));
                        on_need((o, c))
                    }
                    (Eval::Val(a), Eval::Val(b)) => {
                        if m.d(a, b) > bound {
                            failed = true;
                            false
                        } else {
                            true
                        }
                    }
                }
            }),
        }
        if failed {
            Verdict3::Fails
        } else if let Some((o, c)) = need {
            Verdict3::Need(o, c)
        } else {
            Verdict3::Holds
        }
    }

    fn all(&self, frame: &Frame, tables: &impl Tables, on_need: impl FnMut((usize, usize)) -> bool) -> bool {
        matches!(self.scan(frame, tables, on_need), Verdict3::Holds)
    }
}

fn var_index(vars: &mut Vec<String>, v: &str) -> usize {
    match vars.iter().position(|w| w == v) {
        Some(i) => i,
        None => {
            vars.push(v.to_string());
            vars.len() - 1
        }
    }
}

/// Least `ε` whose scaled context the assignment satisfies; `None` when no real `ε` does.
fn least_eps(m: &FinMetric, hyps: &[(usize, usize, Rational)], alpha: &[usize]) -> Option<ExtReal> {
    let mut eps = Rational::from_integer(0);
    for &(x, y, a) in hyps {
        let d = m.d(alpha[x], alpha[y]);
        if a == Rational::from_integer(0) {
            if !d.is_zero() {
                return None;
            }
            continue;
        }
        let need = d.finite()? / a;
        if need > eps {
            eps = need;
        }
    }
    Some(ExtReal::Fin(eps))
}

fn ftemplate(frame: &Frame, t: &Template, n: u64, arity: &Arity, cutoff: Option<usize>) -> Option<FTerm> {
    let member = |i: u64| -> Option<FTerm> {
        match (arity, cutoff) {
            (Arity::Finite(a), _) => ((i as usize) < a.len()).then_some(FTerm::Member(i as usize)),
            (Arity::Geometric { .. }, Some(k)) => (i >= 1).then(|| FTerm::Member((i as usize).min(k) - 1)),
            _ => None,
        }
    };
    Some(match t {
        Template::Whole(op) => FTerm::Whole(*frame.index.get(op)?),
        Template::Index => member(n)?,
        Template::At(i) => member(*i as u64)?,
        Template::App { op, args } => FTerm::App(
            *frame.index.get(op)?,
            args.iter().map(|a| ftemplate(frame, a, n, arity, cutoff)).collect::<Option<_>>()?,
        ),
    })
}

fn feval(frame: &Frame, tables: &impl Tables, t: &FTerm, cell: &[usize]) -> Eval {
    match t {
        FTerm::Member(i) => Eval::Val(cell[*i]),
        FTerm::Whole(op) => {
            // The family cell is expressed over the family's own cutoff; re-key it for the op.
            let vals: Vec<usize> = match frame.spaces[*op].stream_cutoff {
                Some(_) => {
                    let mut v = cell.to_vec();
                    let tail = *v.last().expect("nonempty stream cell");
                    v.push(tail);
                    v
                }
                None => cell.to_vec(),
            };
            match frame.cell(*op, &vals) {
                Ok(c) => match tables.get(*op, c) {
                    Some(v) => Eval::Val(v),
                    None => Eval::Need(*op, c),
                },
                Err(u) => Eval::Undef(u),
            }
        }
        FTerm::App(op, args) => {
            let mut vals = Vec::new();
            for a in args {
                match feval(frame, tables, a, cell) {
                    Eval::Val(v) => vals.push(v),
                    other => return other,
                }
            }
            match frame.cell(*op, &vals) {
                Ok(c) => match tables.get(*op, c) {
                    Some(v) => Eval::Val(v),
                    None => Eval::Need(*op, c),
                },
                Err(u) => Eval::Undef(u),
            }
        }
    }
}

/// Whether `phi` (by point index) is a homomorphism `m → n`.
pub fn is_homomorphism(m: &Model, n: &Model, phi: &[usize]) -> bool {
    if m.signature != n.signature || phi.len() != m.carrier().len() {
        return false;
    }
    if crate::metric::check_nonexpansive(m.carrier(), n.carrier(), phi).is_err() {
        return false;
    }
    for (op, name) in m.frame.names.iter().enumerate() {
        let space = &m.frame.spaces[op];
        for (c, cell) in space.cells.iter().enumerate() {
            let mut image: Vec<usize> = cell.iter().map(|&x| phi[x]).collect();
            if space.stream_cutoff.is_some() {
                // Prefix entries followed by the tail, which repeats the last entry.
                let tail = *image.last().expect("nonempty stream cell");
                image.push(tail);
            }
            match n.apply(name, &image) {
                Ok(v) if v == phi[m.tables[op][c]] => {}
                _ => return false,
            }
        }
    }
    true
}

/// Every interpretation of the signature on the carrier, in a fixed order.
pub fn enumerate_models(sig: &Signature, carrier: &FinMetric) -> ModelIter {
    let frame = Frame::new(sig, carrier);
    let slots: Vec<(usize, usize)> =
        frame.spaces.iter().enumerate().flat_map(|(o, s)| (0..s.len()).map(move |c| (o, c))).collect();
    let tables = frame.spaces.iter().map(|s| vec![None; s.len()]).collect();
    ModelIter { sig: sig.clone(), frame, slots, tables, pos: 0, started: false, done: false }
}

/// Depth-first enumeration of nonexpansive tables, one entry at a time.
pub struct ModelIter {
    sig: Signature,
    frame: Frame,
    slots: Vec<(usize, usize)>,
    tables: Vec<Vec<Option<usize>>>,
    pos: usize,
    started: bool,
    done: bool,
}

impl ModelIter {
    fn consistent(&self, op: usize, cell: usize, v: usize) -> bool {
        let space = &self.frame.spaces[op];
        let m = &self.frame.carrier;
        self.tables[op].iter().enumerate().all(|(c, w)| match w {
            Some(w) if c != cell => m.d(v, *w) <= space.dist(c, cell),
            _ => true,
        })
    }

    /// Advances slot `pos` to its next consistent value, starting after the current one.
    fn bump(&mut self) -> bool {
        let (op, cell) = self.slots[self.pos];
        let start = self.tables[op][cell].map_or(0, |v| v + 1);
        self.tables[op][cell] = None;
        for v in start..self.frame.carrier.len() {
            if self.consistent(op, cell, v) {
                self.tables[op][cell] = Some(v);
                return true;
            }
        }
        false
    }
}

impl Iterator for ModelIter {
    type Item = Model;

    fn next(&mut self) -> Option<Model> {
        if self.done {
            return None;
        }
        if self.started {
            // Step back into the last slot to move past the model just produced.
            if self.slots.is_empty() {
                self.done = true;
                return None;
            }
            self.pos = self.slots.len() - 1;
        } else {
            self.started = true;
            if self.slots.is_empty() {
                let frame = self.frame.clone();
                let tables = frame.spaces.iter().map(|_| Vec::new()).collect();
                return Some(Model::from_parts(&self.sig, frame, tables));
            }
            self.pos = 0;
        }
        loop {
            if self.bump() {
                if self.pos + 1 == self.slots.len() {
                    let tables: Vec<Vec<usize>> =
                        self.tables.iter().map(|t| t.iter().map(|v| v.expect("filled")).collect()).collect();
                    return Some(Model::from_parts(&self.sig, self.frame.clone(), tables));
                }
                self.pos += 1;
            } else {
                if self.pos == 0 {
                    self.done = true;
                    return None;
                }
                self.pos -= 1;
            }
        }
    }
}

/// Argument tuple for `apply` from a stream given as prefix and tail.
pub fn stream_args(prefix: &[usize], tail: usize) -> Vec<usize> {
    let mut v = prefix.to_vec();
    v.push(tail);
    v
}

/// Shape of an application's arguments, for callers building tuples for [`Model::apply`].
pub fn arg_count(args: &Args) -> usize {
    args.positions().len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Context;
    use crate::theories::builtin;

    fn two(d: ExtReal) -> FinMetric {
        FinMetric::pair("p", "q", d).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        let sig = Signature::new().with("c", Arity::discrete(0)).unwrap();
        assert_eq!(enumerate_models(&sig, &FinMetric::discrete(3)).count(), 3);

        let sig = Signature::new().with("a", Arity::discrete(0)).unwrap().with("b", Arity::discrete(0)).unwrap();
        assert_eq!(enumerate_models(&sig, &two(ExtReal::ONE)).count(), 4);

        let sig = Signature::new().with("s", Arity::discrete(1)).unwrap();
        assert_eq!(enumerate_models(&sig, &two(ExtReal::ONE)).count(), 4);
    }

    #[test]
    fn enumeration_respects_nonexpansiveness() {
        // A unary op on {p,q} at distance 1 into a carrier: every table works, but
        // on a three-point carrier with distances 1, 2, 3 some tables expand.
        let m = FinMetric::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![ExtReal::ZERO, ExtReal::ONE, ExtReal::from_int(2)],
                vec![ExtReal::ONE, ExtReal::ZERO, ExtReal::from_int(3)],
                vec![ExtReal::from_int(2), ExtReal::from_int(3), ExtReal::ZERO],
            ],
        )
        .unwrap();
        let sig = Signature::new().with("s", Arity::discrete(1)).unwrap();
        let brute = {
            let mut n = 0;
            for_each_tuple(3, 3, |t| {
                if (0..3).all(|i| (0..3).all(|j| m.d(t[i], t[j]) <= m.d(i, j))) {
                    n += 1;
                }
                true
            });
            n
        };
        assert_eq!(enumerate_models(&sig, &m).count(), brute);
    }

    #[test]
    fn satisfaction_examples() {
        let sig = Signature::new();
        let m = Model::new(&sig, &two(ExtReal::from_int(2)), &BTreeMap::new()).unwrap();
        let seq = Sequent::eq(
            Context::from_triples(&[("x", "y", ExtReal::from_int(3))]),
            Preterm::var("x"),
            Preterm::var("y"),
            ExtReal::ONE,
        );
        assert!(!satisfies(&m, &seq));
        assert!(satisfies(&m, &Sequent::ok(Context::empty(), Preterm::var("x"))));
    }

    #[test]
    fn t1_application_outside_the_arity_is_undefined() {
        let t1 = builtin("t1").unwrap();
        let m = two(ExtReal::from_int(2));
        let model = enumerate_models(&t1.signature, &m).next().unwrap();
        let mut alpha = Assignment::new();
        alpha.insert("x".into(), 0);
        alpha.insert("y".into(), 1);
        let t = Preterm::app("f", vec![Preterm::var("x"), Preterm::var("y")]);
        assert!(matches!(evaluate(&model, &t, &alpha), Err(Undefined::Constraint(_))));
        alpha.insert("y".into(), 0);
        assert!(evaluate(&model, &t, &alpha).is_ok());
    }

    #[test]
    fn comp_limit_is_eventual_value() {
        let comp = builtin("comp").unwrap();
        let m = FinMetric::new(
            vec!["a".into(), "b".into()],
            vec![vec![ExtReal::ZERO, ExtReal::new(1, 4)], vec![ExtReal::new(1, 4), ExtReal::ZERO]],
        )
        .unwrap();
        let mut ops = BTreeMap::new();
        ops.insert("lim".to_string(), OpInterp::EventualValue);
        let model = Model::new(&comp.signature, &m, &ops).unwrap();
        assert!(is_model(&model, &comp));
        assert_eq!(model.apply("lim", &[0, 1]), Ok(1));
        assert_eq!(model.apply("lim", &[0, 0, 1]), Ok(1));
        // The third entry must lie within 1/8 of the tail.
        assert!(matches!(model.apply("lim", &[0, 0, 0, 1]), Err(Undefined::Constraint(_))));
        assert_eq!(model.apply("lim", &[1, 0]), Ok(0));
        // A table sending every sequence to its first entry is nonexpansive but not a model.
        let first: Vec<usize> = model.cells("lim").unwrap().cells.iter().map(|c| c[0]).collect();
        ops.insert("lim".to_string(), OpInterp::Table(first));
        let bad = Model::new(&comp.signature, &m, &ops).unwrap();
        assert!(!is_model(&bad, &comp));
    }

    #[test]
    fn identity_is_a_homomorphism() {
        let sig = Signature::new().with("s", Arity::discrete(1)).unwrap();
        for model in enumerate_models(&sig, &two(ExtReal::ONE)) {
            assert!(is_homomorphism(&model, &model, &[0, 1]));
        }
        let m = Model::new(&Signature::new(), &two(ExtReal::ONE), &BTreeMap::new()).unwrap();
        let n = Model::new(&Signature::new(), &two(ExtReal::new(1, 2)), &BTreeMap::new()).unwrap();
        assert!(!is_homomorphism(&n, &m, &[0, 1]));
        assert!(is_homomorphism(&m, &n, &[0, 1]));
    }

    #[test]
    fn model_json_round_trip() {
        let comp = builtin("comp").unwrap();
        let mut ops = BTreeMap::new();
        ops.insert("lim".to_string(), OpInterp::EventualValue);
        let model = Model::new(&comp.signature, &two(ExtReal::ONE), &ops).unwrap();
        let json = model.to_json();
        assert_eq!(json["ops"]["lim"]["mode"], "eventual-value");
        let back = Model::from_json(&comp.signature, &json).unwrap();
        assert_eq!(back, model);
    }
}
