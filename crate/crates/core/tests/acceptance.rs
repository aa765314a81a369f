//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. Exits
//! nonzero when a criterion fails that is not listed in `KNOWN_FAILURES`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use metriq::algebra::{enumerate_models, evaluate, is_model, satisfies, Assignment, CellSpace, Model, OpInterp};
use metriq::freemodel::{check_surjection_preservation, free_model, FreeModelApprox, SurjectionReport};
use metriq::kernel::{check_proof, Proof};
use metriq::metric::{closure, find_isometry, FinMetric};
use metriq::prover::{
    carriers, countermodel_search, min_distance, prove, saturate, translate_sequent, with_generators, ProveOutcome,
    ProverConfig,
};
use metriq::syntax::{context_space, Arity, Context, Hyp, Preterm, Sequent, Signature};
use metriq::theories::{builtin, disjoint_union_with_maps, theory_of_space, Theory, BUILTINS};
use metriq::{ExtReal, Rational, INF};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot be met as stated; they are still run and reported.
///
/// 1: `f(a, a)` and `f(b, b)` are well formed (arguments at distance 0) and no
/// rule identifies them with a generator, so the free T1 model on two points
/// is infinite and the depth-3 approximation has 8 classes, not 2.
const KNOWN_FAILURES: [usize; 1] = [1];

// ---------------------------------------------------------------------------
// Kernel ledger for criterion 10.

#[derive(Default)]
struct Kernel {
    checked: usize,
    failures: Vec<String>,
}

impl Kernel {
    fn check(&mut self, theory: &Theory, p: &Proof, label: &str) -> bool {
        self.checked += 1;
        let v = check_proof(theory, p);
        if !v.is_valid() {
            self.failures.push(format!("{label}: {} ({v})", p.conclusion));
        }
        v.is_valid()
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// Shared helpers.

fn c(name: &str) -> Preterm {
    Preterm::constant(name)
}

fn pair(d: ExtReal) -> FinMetric {
    FinMetric::pair("a", "b", d).unwrap()
}

const DIST_GRID: [(i128, i128); 6] = [(1, 4), (1, 2), (3, 4), (1, 1), (3, 2), (2, 1)];

/// A random metric: random edge weights (or none) closed under shortest paths.
fn random_space(rng: &mut ChaCha8Rng, n: usize, names: &str) -> FinMetric {
    let points: Vec<String> = (0..n).map(|i| format!("{names}{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(0.8) {
                let (p, q) = *DIST_GRID.choose(rng).unwrap();
                edges.push((points[i].clone(), points[j].clone(), ExtReal::new(p, q)));
            }
        }
    }
    closure(&points, &edges).unwrap().to_metric().unwrap()
}

/// Saturates over the generators again and kernel-checks a proof of every
/// finite distance and every well-formedness judgment of the free model.
fn certify_free(
    theory: &Theory,
    gens: &FinMetric,
    cfg: &ProverConfig,
    m: &FreeModelApprox,
    k: &mut Kernel,
    label: &str,
) -> bool {
    let state = saturate(theory, &Context::empty(), Some(gens), cfg);
    let full = with_generators(theory, gens);
    let mut ok = true;
    for r in &m.reps {
        match state.ok_proof(r) {
            Some(p) => ok &= k.check(&full, &p, label),
            None => {
                k.failures.push(format!("{label}: no ok proof for {r}"));
                ok = false;
            }
        }
    }
    for i in 0..m.len() {
        for j in (i + 1)..m.len() {
            if m.d(i, j).is_inf() {
                continue;
            }
            match state.eq_proof(&m.reps[i], &m.reps[j]) {
                Some((b, p)) if b == m.d(i, j) => ok &= k.check(&full, &p, label),
                _ => {
                    k.failures.push(format!("{label}: no proof at d({}, {})", m.reps[i], m.reps[j]));
                    ok = false;
                }
            }
        }
    }
    ok
}

// ---------------------------------------------------------------------------
// 1. T1 free models.

fn criterion_1(k: &mut Kernel) -> Outcome {
    let t1 = builtin("t1").unwrap();
    let cfg = ProverConfig::default();
    let mut notes = Vec::new();
    let mut pass = true;
    for i in [1, 2, 10] {
        let a = pair(ExtReal::new(i + 1, i));
        let m = free_model(&t1, &a, &cfg);
        let iso = find_isometry(&m.space, &a).is_some();
        pass &= m.len() == 2 && iso;
        pass &= certify_free(&t1, &a, &cfg, &m, k, "C1");
        notes.push(format!("d={}: {} points", ExtReal::new(i + 1, i), m.len()));
    }
    let a = pair(ExtReal::ONE);
    let m = free_model(&t1, &a, &cfg);
    let (ia, ib) = (m.unit["a"], m.unit["b"]);
    let dab = m.d(ia, ib);
    pass &= m.len() == 3 && dab == ExtReal::ONE && m.is_exact(ia, ib);
    pass &= certify_free(&t1, &a, &cfg, &m, k, "C1");
    notes.push(format!(
        "d=1: {} points, d([a],[b]) = {dab} ({})",
        m.len(),
        if m.is_exact(ia, ib) { "exact" } else { "upper" }
    ));
    outcome(pass, format!("{}; expected 2, 2, 2 and 3 points", notes.join("; ")))
}

// 2. T2 free models.

fn criterion_2(k: &mut Kernel) -> Outcome {
    let t2 = builtin("t2").unwrap();
    let cfg = ProverConfig::default().with_depth(2);
    let a = pair(ExtReal::new(11, 10));
    let far = free_model(&t2, &a, &cfg);
    let b = pair(ExtReal::ONE);
    let near = free_model(&t2, &b, &cfg);
    let mut pass = far.len() == 2 && far.d(0, 1) == ExtReal::new(11, 10) && far.is_exact(0, 1) && near.len() == 1;
    pass &= certify_free(&t2, &a, &cfg, &far, k, "C2");
    pass &= certify_free(&t2, &b, &cfg, &near, k, "C2");
    let d = if far.len() == 2 { far.d(0, 1).to_string() } else { "-".into() };
    outcome(pass, format!("d=11/10: {} points at {d}; d=1: {} point(s)", far.len(), near.len()))
}

// 3. Completion theory.

/// Every stream `x_1, …, x_k, y, y, …` over the carrier; the oracle decides
/// nonexpansiveness directly from `d(x_i, x_j) ≤ scale · ratio^min(i, j)`.
fn streams(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..=k {
        out = out.into_iter().flat_map(|s| (0..n).map(move |v| [s.clone(), vec![v]].concat())).collect();
    }
    out
}

fn stream_is_nonexpansive(m: &FinMetric, s: &[usize], ratio: Rational, scale: Rational) -> bool {
    // Positions 1..=len, with the last value repeated forever after.
    let len = s.len();
    (0..len).all(|i| {
        (0..len).all(|j| {
            if i == j {
                return true;
            }
            let pos = i.min(j) as u32 + 1;
            let bound = scale * num_pow(ratio, pos);
            m.d(s[i], s[j]) <= ExtReal::Fin(bound)
        })
    })
}

fn num_pow(r: Rational, e: u32) -> Rational {
    (0..e).fold(Rational::from_integer(1), |acc, _| acc * r)
}

fn criterion_3(k: &mut Kernel, rng: &mut ChaCha8Rng) -> Outcome {
    let comp = builtin("comp").unwrap();
    let cfg = ProverConfig::default();
    let Arity::Geometric { ratio, scale } = comp.signature.arity("lim").unwrap().clone() else { unreachable!() };
    let mut iso = 0;
    let mut sizes = Vec::new();
    let mut evals = 0usize;
    let mut bad_evals = 0usize;
    for _ in 0..10 {
        let n = rng.gen_range(1..=5);
        let x = random_space(rng, n, "p");
        sizes.push(n);
        let m = free_model(&comp, &x, &cfg);
        if find_isometry(&m.space, &x).is_some() && certify_free(&comp, &x, &cfg, &m, k, "C3") {
            iso += 1;
        }
        let mut ops = BTreeMap::new();
        ops.insert("lim".to_string(), OpInterp::EventualValue);
        let model = Model::new(&comp.signature, &x, &ops).unwrap();
        for k_len in 0..=3 {
            let vars: Vec<String> = (0..=k_len).map(|i| format!("v{i}")).collect();
            let prefix: Vec<Preterm> = vars[..k_len].iter().map(|v| Preterm::var(v)).collect();
            let term = Preterm::App {
                op: "lim".into(),
                args: metriq::syntax::Args::Stream { prefix, tail: Box::new(Preterm::var(&vars[k_len])) },
            };
            for s in streams(n, k_len) {
                if !stream_is_nonexpansive(&x, &s, ratio, scale) {
                    continue;
                }
                evals += 1;
                let alpha: Assignment = vars.iter().cloned().zip(s.iter().copied()).collect();
                if evaluate(&model, &term, &alpha) != Ok(s[k_len]) {
                    bad_evals += 1;
                }
            }
        }
    }
    outcome(
        iso == 10 && bad_evals == 0 && evals > 0,
        format!("{iso}/10 free models isometric (sizes {sizes:?}); {evals} eventually-constant streams, {bad_evals} wrong limits"),
    )
}

// 4. Strong finitarity.

fn criterion_4(k: &mut Kernel) -> Outcome {
    let gens = FinMetric::new(
        vec!["x1".into(), "x2".into(), "x3".into()],
        vec![
            vec![ExtReal::ZERO, ExtReal::ONE, INF],
            vec![ExtReal::ONE, ExtReal::ZERO, INF],
            vec![INF, INF, ExtReal::ZERO],
        ],
    )
    .unwrap();
    let theory = with_generators(&builtin("strongfinit").unwrap(), &gens);
    let s = Preterm::app("f", vec![c("x1"), Preterm::app("g", vec![c("x3")])]);
    let t = Preterm::app("f", vec![c("x2"), Preterm::app("g'", vec![c("x3")])]);
    let cfg = ProverConfig {
        size: 4,
        grid: vec![ExtReal::ZERO, ExtReal::new(1, 2), ExtReal::ONE, INF],
        ..Default::default()
    };
    let d = match min_distance(&theory, &Context::empty(), &s, &t, &cfg) {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let proof_ok = d.witness.as_ref().is_some_and(|w| k.check(&theory, w, "C4"));
    let cm = countermodel_search(&theory, &Context::empty(), &s, &t, ExtReal::new(1, 2), &cfg);
    let found = cm.found().is_some();
    let separation = cm.found().and_then(|cm| {
        let v = |u: &Preterm| evaluate(&cm.model, u, &cm.assignment).ok();
        Some(cm.model.carrier().d(v(&s)?, v(&t)?))
    });
    outcome(
        d.upper == ExtReal::ONE && proof_ok && found && d.exact,
        format!(
            "upper bound {}; countermodel at 1/2: {}; exact: {}",
            d.upper,
            separation.map_or("none".to_string(), |x| format!("found, d = {x}")),
            d.exact
        ),
    )
}

// 5. Surjection preservation.

fn criterion_5(k: &mut Kernel) -> Outcome {
    let cfg = ProverConfig::default();
    let semi = builtin("semilattice").unwrap();
    let spaces = carriers(3, &[ExtReal::ZERO, ExtReal::ONE, INF]);
    let mut checked = 0;
    let mut preserved = 0;
    for a in &spaces {
        for b in spaces.iter().filter(|b| b.len() <= a.len()) {
            for f in metriq::metric::nonexpansive_maps(a, b) {
                if f.iter().collect::<BTreeSet<_>>().len() != b.len() {
                    continue;
                }
                checked += 1;
                if check_surjection_preservation(&semi, a, b, &f, &cfg) == Ok(SurjectionReport::Preserved) {
                    preserved += 1;
                }
            }
        }
    }
    // Kernel witnesses for a two-point target; three points cost most of the budget.
    let two = pair(ExtReal::ONE);
    let m = free_model(&semi, &two, &cfg);
    let certified = certify_free(&semi, &two, &cfg, &m, k, "C5");

    let t1 = builtin("t1").unwrap();
    let a = pair(ExtReal::ONE);
    let r = check_surjection_preservation(&t1, &a.discretized(), &a, &[0, 1], &cfg);
    let violated = matches!(&r, Ok(SurjectionReport::Violated(missed)) if !missed.is_empty());
    let missed = match &r {
        Ok(SurjectionReport::Violated(m)) => m.iter().take(3).map(ToString::to_string).collect::<Vec<_>>().join(", "),
        _ => "-".into(),
    };
    outcome(
        checked > 0 && preserved == checked && violated && certified,
        format!("semilattice: {preserved}/{checked} surjections preserved; t1 A^d -> A violated: {violated} (missed e.g. {missed})"),
    )
}

// 6. Contraction theory.

/// `s^n(x)` as `(x, n)`.
fn level(t: &Preterm) -> Option<(String, usize)> {
    match t {
        Preterm::App { op, args } if op == "s" => {
            let inner = args.positions()[0];
            level(inner).map(|(x, n)| (x, n + 1))
        }
        Preterm::App { op, .. } => Some((op.clone(), 0)),
        Preterm::Var(_) => None,
    }
}

fn criterion_6(k: &mut Kernel, rng: &mut ChaCha8Rng) -> Outcome {
    let con = builtin("contraction").unwrap();
    let cfg = ProverConfig::default();
    let spaces = [FinMetric::singleton("a"), pair(ExtReal::ONE), random_space(rng, 3, "q")];
    let mut pass = true;
    let mut cross = BTreeMap::new();
    let mut sizes = Vec::new();
    let (mut same, mut certified) = (0, 0);
    for x in &spaces {
        let m = free_model(&con, x, &cfg);
        sizes.push(format!("{}x4 -> {}", x.len(), m.len()));
        let levels: Vec<Option<(String, usize)>> = m.reps.iter().map(level).collect();
        let want: BTreeSet<(String, usize)> =
            x.points().iter().flat_map(|p| (0..=cfg.depth).map(move |n| (p.clone(), n))).collect();
        let have: BTreeSet<(String, usize)> = levels.iter().flatten().cloned().collect();
        pass &= m.len() == want.len() && have == want;
        for i in 0..m.len() {
            for j in (i + 1)..m.len() {
                let (Some((p, n)), Some((q, l))) = (&levels[i], &levels[j]) else { continue };
                if n == l {
                    let dx = x.d(x.index_of(p).unwrap(), x.index_of(q).unwrap());
                    let want = dx.div(Rational::from_integer(1i128 << n));
                    pass &= m.d(i, j) == want;
                    same += 1;
                    certified += usize::from(m.is_exact(i, j));
                } else {
                    let tag = if m.is_exact(i, j) { "exact" } else { "upper" };
                    *cross.entry(format!("{} ({tag})", m.d(i, j))).or_insert(0) += 1;
                }
            }
        }
        pass &= certify_free(&con, x, &cfg, &m, k, "C6");
    }
    let cross: Vec<String> = cross.iter().map(|(v, n)| format!("{n} at {v}")).collect();
    outcome(
        pass,
        format!(
            "carriers {}; same-level distances 2^-n d ({certified}/{same} certified exact); cross-level pairs: {}",
            sizes.join(", "),
            cross.join(", ")
        ),
    )
}

// 7. Soundness on random proofs.

const MODEL_GRID: [(i128, i128); 3] = [(0, 1), (1, 2), (1, 1)];
/// Enumeration beyond this many candidates per carrier switches to sampling.
const ENUM_LIMIT: usize = 20_000;
const PER_CARRIER: usize = 400;

fn model_grid() -> Vec<ExtReal> {
    MODEL_GRID.iter().map(|&(p, q)| ExtReal::new(p, q)).chain([INF]).collect()
}

/// Operation tables of a model split into the two halves of a disjoint union.
type Tables = Vec<Vec<usize>>;

/// Random nonexpansive tables, chosen cell by cell among consistent values.
fn random_model(sig: &Signature, carrier: &FinMetric, rng: &mut ChaCha8Rng) -> Option<Model> {
    let mut ops = BTreeMap::new();
    for (name, arity) in sig.symbols() {
        let cells = CellSpace::new(carrier, arity);
        let mut table: Vec<usize> = Vec::with_capacity(cells.len());
        for c in 0..cells.len() {
            let options: Vec<usize> = (0..carrier.len())
                .filter(|&v| table.iter().enumerate().all(|(c2, &w)| carrier.d(v, w) <= cells.dist(c, c2)))
                .collect();
            table.push(*options.choose(rng)?);
        }
        ops.insert(name.to_string(), OpInterp::Table(table));
    }
    Model::new(sig, carrier, &ops).ok()
}

/// Models of the theory on every carrier of at most three points over the grid.
/// Returns the models and whether any carrier was sampled rather than exhausted.
fn models_of(theory: &Theory, rng: &mut ChaCha8Rng) -> (Vec<Model>, bool) {
    let mut out = Vec::new();
    let mut sampled = false;
    for carrier in carriers(3, &model_grid()) {
        let all: Vec<Model> = enumerate_models(&theory.signature, &carrier).take(ENUM_LIMIT + 1).collect();
        let mut models: Vec<Model> = if all.len() <= ENUM_LIMIT {
            all.into_iter().filter(|m| is_model(m, theory)).collect()
        } else {
            sampled = true;
            (0..20 * PER_CARRIER)
                .filter_map(|_| random_model(&theory.signature, &carrier, rng))
                .filter(|m| is_model(m, theory))
                .collect()
        };
        if models.len() > PER_CARRIER {
            sampled = true;
            models.shuffle(rng);
            models.truncate(PER_CARRIER);
        }
        out.extend(models);
    }
    (out, sampled)
}

fn random_context(rng: &mut ChaCha8Rng, vars: &[&str]) -> Context {
    let grid = model_grid();
    let hyps = (0..rng.gen_range(0..=3))
        .map(|_| {
            let x = vars.choose(rng).unwrap();
            let y = vars.choose(rng).unwrap();
            Hyp::new(x, y, *grid[..3].choose(rng).unwrap())
        })
        .collect();
    Context(hyps)
}

/// Valid proofs: saturation witnesses and random compositions of them.
fn random_proofs(theory: &Theory, rng: &mut ChaCha8Rng, want: usize, k: &mut Kernel) -> Vec<Arc<Proof>> {
    let cfg = ProverConfig::default().with_depth(2);
    let vars = ["x", "y", "z"];
    let mut out: Vec<Arc<Proof>> = Vec::new();
    let mut attempts = 0;
    while out.len() < want && attempts < 50 {
        attempts += 1;
        let ctx = random_context(rng, &vars);
        let state = saturate(theory, &ctx, None, &cfg);
        let ok: Vec<Preterm> = state.ok_terms().into_iter().cloned().collect();
        if ok.is_empty() {
            continue;
        }
        let mut local: Vec<Arc<Proof>> = Vec::new();
        for _ in 0..40 {
            let s = ok.choose(rng).unwrap();
            if rng.gen_bool(0.2) {
                local.extend(state.ok_proof(s));
                continue;
            }
            let t = ok.choose(rng).unwrap();
            if let Some((_, p)) = state.eq_proof(s, t) {
                local.push(p);
            }
        }
        // Compose: symmetry, weakening and chaining of equations.
        let eqs: Vec<Arc<Proof>> = local.iter().filter(|p| p.conclusion.as_eq().is_some()).cloned().collect();
        for _ in 0..10 {
            let Some(p) = eqs.choose(rng) else { break };
            let (_, b, e) = p.conclusion.as_eq().unwrap();
            match rng.gen_range(0..3) {
                0 => local.push(Arc::new(Proof::symm(p.clone()))),
                1 => local.push(Arc::new(Proof::max(p.clone(), e + ExtReal::new(1, 3)))),
                _ => {
                    if let Some(q) = eqs.iter().find(|q| q.conclusion.as_eq().unwrap().0 == b) {
                        local.push(Arc::new(Proof::triang(p.clone(), q.clone())));
                    }
                }
            }
        }
        for p in local {
            if out.len() < want && k.check(theory, &p, "C7") {
                out.push(p);
            }
        }
    }
    out
}

fn criterion_7(k: &mut Kernel, rng: &mut ChaCha8Rng) -> Outcome {
    let per = 500usize.div_ceil(BUILTINS.len());
    let mut total = 0;
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    for name in BUILTINS {
        let theory = builtin(name).unwrap();
        let proofs = random_proofs(&theory, rng, per, k);
        let (models, sampled) = models_of(&theory, rng);
        for p in &proofs {
            for m in &models {
                if !satisfies(m, &p.conclusion) {
                    violations.push(format!("{name}: {}", p.conclusion));
                    break;
                }
            }
        }
        total += proofs.len();
        notes.push(format!("{name} {}x{}{}", proofs.len(), models.len(), if sampled { "*" } else { "" }));
    }
    let detail = format!(
        "{total} valid proofs, {} violations; proofs x models: {} (* = some carriers sampled)",
        violations.len(),
        notes.join(", ")
    );
    outcome(total >= 500 && violations.is_empty(), detail)
}

// 8. Translation round trip.

fn random_term(rng: &mut ChaCha8Rng, sig: &Signature, leaves: &[Preterm], depth: usize) -> Preterm {
    let ops: Vec<(&str, &Arity)> =
        sig.symbols().filter(|(_, a)| !matches!(a, Arity::Finite(m) if m.is_empty())).collect();
    if depth == 0 || ops.is_empty() || rng.gen_bool(0.4) {
        return leaves.choose(rng).unwrap().clone();
    }
    let (op, a) = *ops.choose(rng).unwrap();
    match a {
        Arity::Finite(m) => Preterm::app(op, (0..m.len()).map(|_| random_term(rng, sig, leaves, depth - 1)).collect()),
        Arity::Geometric { .. } => {
            let prefix = (0..rng.gen_range(0..=1)).map(|_| random_term(rng, sig, leaves, depth - 1)).collect();
            Preterm::stream(op, prefix, random_term(rng, sig, leaves, depth - 1))
        }
    }
}

fn verdict(r: Result<ProveOutcome, metriq::error::ProverError>) -> String {
    match r {
        Ok(ProveOutcome::Proved(_)) => "derivable".into(),
        Ok(ProveOutcome::NotDerived { best, .. }) => {
            format!("not derived, best {}", best.map_or("-".into(), |b| b.to_string()))
        }
        Err(e) => format!("error: {}", e.to_string().split(':').next().unwrap_or("")),
    }
}

fn best_bound(theory: &Theory, seq: &Sequent, cfg: &ProverConfig, k: &mut Kernel) -> Option<ExtReal> {
    let (s, t, _) = seq.as_eq()?;
    let d = min_distance(theory, &seq.context, s, t, cfg).ok()?;
    if let Some(w) = &d.witness {
        k.check(theory, w, "C8");
    }
    Some(d.upper)
}

fn criterion_8(k: &mut Kernel, rng: &mut ChaCha8Rng) -> Outcome {
    let cfg = ProverConfig::default().with_depth(2);
    let mut mismatches = Vec::new();
    let mut derivable = 0;
    let mut total = 0;
    for name in BUILTINS {
        let theory = builtin(name).unwrap();
        for _ in 0..50 {
            let n = rng.gen_range(1..=3);
            let a = random_space(rng, n, "a");
            let union = with_generators(&theory, &a);
            let mut leaves: Vec<Preterm> = a.points().iter().map(|p| c(p)).collect();
            leaves.push(Preterm::var("x"));
            let s = random_term(rng, &union.signature, &leaves, 2);
            let t = random_term(rng, &union.signature, &leaves, 2);
            let e = *model_grid()[..3].choose(rng).unwrap();
            let ctx = random_context(rng, &["x"]);
            let seq = if rng.gen_bool(0.2) { Sequent::ok(ctx, s) } else { Sequent::eq(ctx, s, t, e) };
            let tr = translate_sequent(&theory, &a, &seq);
            let before = prove(&union, &seq, &cfg);
            let after = prove(&theory, &tr, &cfg);
            for (th, r) in [(&union, &before), (&theory, &after)] {
                if let Ok(ProveOutcome::Proved(p)) = r {
                    k.check(th, p, "C8");
                }
            }
            let (vb, va) = (verdict(before), verdict(after));
            if vb == "derivable" {
                derivable += 1;
            }
            let bounds = (best_bound(&union, &seq, &cfg, k), best_bound(&theory, &tr, &cfg, k));
            total += 1;
            if vb != va || bounds.0 != bounds.1 {
                mismatches.push(format!("{name}: {seq} [{vb} / {va}; {:?} / {:?}]", bounds.0, bounds.1));
            }
        }
    }
    let first = mismatches.first().cloned().unwrap_or_default();
    outcome(
        mismatches.is_empty(),
        format!("{total} sequents ({derivable} derivable), {} mismatches {first}", mismatches.len()),
    )
}

// 9. Model correspondences by double enumeration.

fn all_maps(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out.into_iter().flat_map(|f| (0..m).map(move |v| [f.clone(), vec![v]].concat())).collect();
    }
    out
}

fn criterion_9(rng: &mut ChaCha8Rng) -> Outcome {
    let mut mismatches = 0;
    let mut pairs_checked = 0;
    for round in 0..20 {
        let (na, nm) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let a = random_space(rng, na, "g");
        let m = random_space(rng, nm, "m");
        // Models of T(A) on M versus nonexpansive maps A -> M.
        let ta = theory_of_space(&a);
        let from_models: Vec<Vec<usize>> = enumerate_models(&ta.signature, &m)
            .filter(|model| is_model(model, &ta))
            .map(|model| a.points().iter().map(|p| model.apply(p, &[]).unwrap()).collect())
            .collect();
        let oracle: BTreeSet<Vec<usize>> = all_maps(a.len(), m.len())
            .into_iter()
            .filter(|f| (0..a.len()).all(|i| (0..a.len()).all(|j| m.d(f[i], f[j]) <= a.d(i, j))))
            .collect();
        let distinct: BTreeSet<Vec<usize>> = from_models.iter().cloned().collect();
        if distinct.len() != from_models.len() || distinct != oracle {
            mismatches += 1;
        }
        // Models of T ⊔ T(A) on M versus pairs of models.
        let t = builtin(if round % 2 == 0 { "contraction" } else { "t1" }).unwrap();
        let u = disjoint_union_with_maps(&t, &ta);
        let name = |map: &BTreeMap<String, String>, n: &str| map.get(n).cloned().unwrap_or_else(|| n.to_string());
        let split = |model: &Model| {
            let left: Tables =
                t.signature.symbols().map(|(n, _)| model.table(&name(&u.left, n)).unwrap().to_vec()).collect();
            let right: Tables =
                ta.signature.symbols().map(|(n, _)| model.table(&name(&u.right, n)).unwrap().to_vec()).collect();
            (left, right)
        };
        let joint: Vec<(Tables, Tables)> =
            enumerate_models(&u.theory.signature, &m).filter(|x| is_model(x, &u.theory)).map(|x| split(&x)).collect();
        let tables = |th: &Theory| -> BTreeSet<Tables> {
            enumerate_models(&th.signature, &m)
                .filter(|x| is_model(x, th))
                .map(|x| th.signature.symbols().map(|(n, _)| x.table(n).unwrap().to_vec()).collect())
                .collect()
        };
        let (lt, rt) = (tables(&t), tables(&ta));
        let product: BTreeSet<(Tables, Tables)> =
            lt.iter().flat_map(|l| rt.iter().map(move |r| (l.clone(), r.clone()))).collect();
        let joint_set: BTreeSet<_> = joint.iter().cloned().collect();
        if joint_set.len() != joint.len() || joint_set != product {
            mismatches += 1;
        }
        pairs_checked += oracle.len() + product.len();
    }
    outcome(mismatches == 0, format!("20 spaces, {pairs_checked} correspondences, {mismatches} mismatches"))
}

// 11. Context closure against an independent shortest-path oracle.

/// Distances in units of 1/12, `None` for infinity.
fn floyd_warshall(n: usize, edges: &[(usize, usize, u64)]) -> Vec<Vec<Option<u64>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(i, j, w) in edges {
        let cur = d[i][j].unwrap_or(u64::MAX);
        if w < cur {
            d[i][j] = Some(w);
            d[j][i] = Some(w);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

fn criterion_11(rng: &mut ChaCha8Rng) -> Outcome {
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let vars: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let mut edges = Vec::new();
        let mut hyps = Vec::new();
        for _ in 0..rng.gen_range(0..=2 * n) {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let w: u64 = rng.gen_range(0..=24);
            edges.push((i, j, w));
            hyps.push(Hyp::new(&vars[i], &vars[j], ExtReal::new(w as i128, 12)));
        }
        let want = floyd_warshall(n, &edges);
        let got = context_space(&Context(hyps), &vars).unwrap();
        let same = (0..n).all(|i| {
            (0..n).all(|j| match want[i][j] {
                Some(w) => got.pseudo.d(i, j) == ExtReal::new(w as i128, 12),
                None => got.pseudo.d(i, j).is_inf(),
            })
        });
        // The metric reflection identifies exactly the zero-distance pairs.
        let proj = (0..n).all(|i| (0..n).all(|j| (got.projection[i] == got.projection[j]) == (want[i][j] == Some(0))));
        if !same || !proj {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("100 contexts, {mismatches} mismatches"))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut k = Kernel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7472_6971);
    let budgets = [1, 1, 10, 10, 20, 10, 0, 0, 0, 0, 0];
    let mut results: Vec<(usize, Outcome, Duration)> = Vec::new();
    macro_rules! run {
        ($n:expr, $e:expr) => {{
            let start = Instant::now();
            let o = $e;
            results.push(($n, o, start.elapsed()));
        }};
    }
    run!(1, criterion_1(&mut k));
    run!(2, criterion_2(&mut k));
    run!(3, criterion_3(&mut k, &mut rng));
    run!(4, criterion_4(&mut k));
    run!(5, criterion_5(&mut k));
    run!(6, criterion_6(&mut k, &mut rng));
    run!(7, criterion_7(&mut k, &mut rng));
    run!(8, criterion_8(&mut k, &mut rng));
    run!(9, criterion_9(&mut rng));
    let first = k.failures.first().cloned().unwrap_or_default();
    results.push((
        10,
        outcome(
            k.failures.is_empty(),
            format!("{} proofs re-checked, {} rejected {first}", k.checked, k.failures.len()),
        ),
        Duration::ZERO,
    ));
    run!(11, criterion_11(&mut rng));
    results.sort_by_key(|r| r.0);

    let mut unexpected = Vec::new();
    for (n, o, t) in &results {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_FAILURES.contains(n) { " [known]" } else { "" };
        let budget = budgets[n - 1];
        let time = if budget > 0 { format!("{:.2}s/{budget}s", t.as_secs_f64()) } else { "-".into() };
        println!("criterion {n:>2}: {status}{note} ({time}) {}", o.detail);
        if !o.pass && !KNOWN_FAILURES.contains(n) {
            unexpected.push(*n);
        }
    }
    let total: Duration = results.iter().map(|r| r.2).sum();
    println!("total {:.1}s", total.as_secs_f64());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
