//! Subcommand implementations. Each returns a [`Report`] carrying an exit code,
//! human-readable text and a JSON value.

use std::collections::BTreeMap;
use std::path::Path;

use metriq::algebra::{satisfies_axiom, Model};
use metriq::extreal::parse_rational;
use metriq::freemodel::{check_surjection_preservation, free_model, initial_model, SurjectionReport};
use metriq::kernel::{check_proof, Proof};
use metriq::metric::{find_isometry, FinMetric};
use metriq::prover::{find_violation, min_distance, prove, with_generators, ProveOutcome, ProverConfig, SearchResult};
use metriq::syntax::{Context, Preterm, Sequent};
use metriq::theories::{builtin, check_axioms, AxiomVerdict, Theory};
use metriq::{ExtReal, INF};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dsl::{self, ParseError, TheoryFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_TRUNCATED: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{err}")]
    Parse { path: String, err: ParseError },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => EXIT_FAILED,
            _ => EXIT_USAGE,
        }
    }

    pub fn to_json(&self) -> Value {
        let kind = match self {
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Failed(_) => "failed",
        };
        let mut err = json!({ "kind": kind, "message": self.to_string(), "code": self.exit_code() });
        if let CliError::Parse { path, err: e } = self {
            err["file"] = json!(path);
            err["line"] = json!(e.line);
            err["column"] = json!(e.column);
        }
        json!({ "error": err })
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub code: i32,
    pub text: String,
    pub json: Value,
}

fn read(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.into(), message: e.to_string() })
}

fn parse_in<T>(what: &str, r: Result<T, ParseError>) -> Result<T, CliError> {
    r.map_err(|err| CliError::Parse { path: what.into(), err })
}

/// Loads a theory file, or a builtin theory written `builtin:NAME`.
pub fn load(spec: &str) -> Result<TheoryFile, CliError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let theory = builtin(name).map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok(TheoryFile { theory, spaces: BTreeMap::new(), terms: BTreeMap::new(), sequents: BTreeMap::new() });
    }
    parse_in(spec, dsl::parse_theory(&read(spec)?))
}

/// `--gens`: a named space of the file, an inline `{ ... }` block, or a JSON file.
pub fn resolve_space(file: &TheoryFile, arg: &str) -> Result<FinMetric, CliError> {
    if let Some(m) = file.spaces.get(arg) {
        return Ok(m.clone());
    }
    if arg.trim_start().starts_with('{') && !Path::new(arg).exists() {
        return parse_in("--gens", dsl::parse_space(arg));
    }
    let text = read(arg)?;
    serde_json::from_str(&text).map_err(|e| CliError::Io { path: arg.into(), message: e.to_string() })
}

fn theory_with(file: &TheoryFile, gens: Option<&FinMetric>) -> Theory {
    match gens {
        Some(a) => with_generators(&file.theory, a),
        None => file.theory.clone(),
    }
}

fn resolve_term(file: &TheoryFile, theory: &Theory, arg: &str) -> Result<Preterm, CliError> {
    let t = match file.terms.get(arg) {
        Some(t) => t.clone(),
        None => parse_in(arg, dsl::parse_term_unchecked(arg))?,
    };
    theory.signature.check_term(&t).map_err(|e| CliError::Usage(format!("{t}: {e}")))?;
    Ok(t)
}

fn resolve_sequent(file: &TheoryFile, theory: &Theory, ctx: Option<&str>, goal: &str) -> Result<Sequent, CliError> {
    let mut seq = match file.sequents.get(goal) {
        Some(s) => s.clone(),
        None => parse_in("--goal", dsl::parse_sequent_unchecked(goal))?,
    };
    if let Some(ctx) = ctx {
        let mut hyps = parse_in("--ctx", dsl::parse_context(ctx))?.0;
        hyps.extend(seq.context.0);
        seq.context = Context(hyps);
    }
    theory.signature.check_sequent(&seq).map_err(|e| CliError::Usage(format!("{seq}: {e}")))?;
    Ok(seq)
}

pub fn parse_grid(arg: &str) -> Result<Vec<ExtReal>, CliError> {
    arg.split(',')
        .map(|s| {
            let s = s.trim();
            if s == "inf" {
                return Ok(INF);
            }
            parse_rational(s)
                .ok()
                .and_then(ExtReal::try_from_rational)
                .ok_or_else(|| CliError::Usage(format!("bad grid value `{s}`")))
        })
        .collect()
}

fn proof_json(p: &Proof) -> Value {
    serde_json::to_value(p).expect("proofs serialize")
}

fn write_out(path: &str, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io { path: path.into(), message: e.to_string() })
}

// ---- check ----

pub fn check(file: &TheoryFile, cfg: &ProverConfig) -> Report {
    let theory = &file.theory;
    match check_axioms(theory, cfg) {
        AxiomVerdict::WellFormed(proofs) => {
            let failures: Vec<String> = proofs
                .iter()
                .map(|p| check_proof(theory, p))
                .filter(|v| !v.is_valid())
                .map(|v| v.to_string())
                .collect();
            let ok = failures.is_empty();
            Report {
                code: if ok { EXIT_OK } else { EXIT_FAILED },
                text: if ok {
                    format!("{}: well-formed ({} ok-derivations checked)", theory.name, proofs.len())
                } else {
                    format!("{}: kernel rejected a derivation: {}", theory.name, failures[0])
                },
                json: json!({
                    "theory": theory.name,
                    "well_formed": ok,
                    "derivations": proofs.len(),
                    "kernel_failures": failures,
                }),
            }
        }
        AxiomVerdict::Failed { axiom, side } => Report {
            code: EXIT_FAILED,
            text: format!("{}: axiom {axiom}: could not derive `{side} ok` at depth {}", theory.name, cfg.depth),
            json: json!({ "theory": theory.name, "well_formed": false, "axiom": axiom, "term": side }),
        },
    }
}

// ---- prove ----

pub struct ProveArgs<'a> {
    pub ctx: Option<&'a str>,
    pub goal: &'a str,
    pub gens: Option<&'a str>,
    pub out: Option<&'a str>,
}

pub fn prove_cmd(file: &TheoryFile, args: &ProveArgs, cfg: &ProverConfig) -> Result<Report, CliError> {
    let gens = args.gens.map(|g| resolve_space(file, g)).transpose()?;
    let theory = theory_with(file, gens.as_ref());
    let seq = resolve_sequent(file, &theory, args.ctx, args.goal)?;
    let outcome = prove(&theory, &seq, cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    match outcome {
        ProveOutcome::Proved(p) => {
            let verdict = check_proof(&theory, &p);
            if !verdict.is_valid() {
                return Err(CliError::Failed(format!("kernel rejected the prover's proof: {verdict}")));
            }
            let pj = proof_json(&p);
            if let Some(out) = args.out {
                write_out(out, &pj)?;
            }
            let mut text = format!("derivable: {seq}\nproof: {} nodes, kernel-checked", p.dag_size());
            if let Some(out) = args.out {
                text.push_str(&format!("\nwritten to {out}"));
            }
            Ok(Report {
                code: EXIT_OK,
                text,
                json: json!({ "sequent": seq.to_string(), "derivable": true, "proof": pj }),
            })
        }
        ProveOutcome::NotDerived { best, truncated } => {
            let mut text = format!("not derived: {seq}");
            if let Some(b) = best {
                text.push_str(&format!("\nbest bound found: {b}"));
            }
            if truncated {
                text.push_str("\nsearch was truncated; result is inconclusive");
            }
            Ok(Report {
                code: if truncated { EXIT_TRUNCATED } else { EXIT_FAILED },
                text,
                json: json!({
                    "sequent": seq.to_string(),
                    "derivable": false,
                    "best": best.map(|b| b.to_string()),
                    "truncated": truncated,
                }),
            })
        }
    }
}

// ---- check-proof ----

/// Deserializes a proof tree; deep proofs need the recursion limit lifted.
pub fn read_proof(text: &str) -> Result<Proof, serde_json::Error> {
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    serde::Deserialize::deserialize(&mut de)
}

pub fn check_proof_cmd(file: &TheoryFile, proof_path: &str, gens: Option<&str>) -> Result<Report, CliError> {
    let gens = gens.map(|g| resolve_space(file, g)).transpose()?;
    let theory = theory_with(file, gens.as_ref());
    let p =
        read_proof(&read(proof_path)?).map_err(|e| CliError::Io { path: proof_path.into(), message: e.to_string() })?;
    let verdict = check_proof(&theory, &p);
    let valid = verdict.is_valid();
    Ok(Report {
        code: if valid { EXIT_OK } else { EXIT_FAILED },
        text: format!("{}: {verdict}", p.conclusion),
        json: json!({ "conclusion": p.conclusion.to_string(), "valid": valid, "verdict": verdict.to_string() }),
    })
}

// ---- dist ----

pub fn dist(file: &TheoryFile, gens: Option<&str>, t1: &str, t2: &str, cfg: &ProverConfig) -> Result<Report, CliError> {
    let gens = gens.map(|g| resolve_space(file, g)).transpose()?;
    let theory = theory_with(file, gens.as_ref());
    let s = resolve_term(file, &theory, t1)?;
    let t = resolve_term(file, &theory, t2)?;
    let d = min_distance(&theory, &Context::empty(), &s, &t, cfg).map_err(|e| CliError::Failed(e.to_string()))?;
    if let Some(w) = &d.witness {
        let v = check_proof(&theory, w);
        if !v.is_valid() {
            return Err(CliError::Failed(format!("kernel rejected the distance proof: {v}")));
        }
    }
    let status = if d.exact { "exact" } else { "upper bound" };
    let code = if !d.exact && d.truncated { EXIT_TRUNCATED } else { EXIT_OK };
    Ok(Report {
        code,
        text: format!("d({s}, {t}) = {} ({status})", d.upper),
        json: json!({
            "lhs": s.to_string(),
            "rhs": t.to_string(),
            "bound": d.upper.to_string(),
            "exact": d.exact,
            "truncated": d.truncated,
            "proof": d.witness.as_deref().map(proof_json),
        }),
    })
}

// ---- free ----

pub fn free(file: &TheoryFile, gens: Option<&str>, out: Option<&str>, cfg: &ProverConfig) -> Result<Report, CliError> {
    let gens = gens.map(|g| resolve_space(file, g)).transpose()?;
    let m = match &gens {
        Some(a) => free_model(&file.theory, a, cfg),
        None => initial_model(&file.theory, cfg),
    };
    let j = m.to_json();
    if let Some(out) = out {
        write_out(out, &j)?;
    }
    let mut text = format!("{} classes (stabilized: {}, truncated: {})", m.len(), m.stabilized, m.truncated);
    const SHOWN: usize = 12;
    for (i, r) in m.reps.iter().enumerate().take(SHOWN) {
        text.push_str(&format!("\n  [{i}] {r}"));
    }
    if m.len() > SHOWN {
        text.push_str(&format!("\n  ... {} more", m.len() - SHOWN));
    }
    for i in 0..m.len().min(SHOWN) {
        for k in (i + 1)..m.len().min(SHOWN) {
            let tag = if m.is_exact(i, k) { "exact" } else { "upper" };
            text.push_str(&format!("\n  d[{i},{k}] = {} ({tag})", m.d(i, k)));
        }
    }
    Ok(Report { code: if m.truncated { EXIT_TRUNCATED } else { EXIT_OK }, text, json: j })
}

// ---- satisfy ----

pub fn satisfy(file: &TheoryFile, model_path: &str) -> Result<Report, CliError> {
    let value: Value = serde_json::from_str(&read(model_path)?)
        .map_err(|e| CliError::Io { path: model_path.into(), message: e.to_string() })?;
    let model = Model::from_json(&file.theory.signature, &value)
        .map_err(|e| CliError::Io { path: model_path.into(), message: e })?;
    let results: Vec<bool> = file.theory.axioms.iter().map(|ax| satisfies_axiom(&model, ax)).collect();
    let all = results.iter().all(|&b| b);
    let mut text = String::new();
    for (i, ok) in results.iter().enumerate() {
        text.push_str(&format!("axiom {i}: {}\n", if *ok { "satisfied" } else { "violated" }));
    }
    text.push_str(if all { "model of the theory" } else { "not a model of the theory" });
    Ok(Report { code: if all { EXIT_OK } else { EXIT_FAILED }, text, json: json!({ "axioms": results, "model": all }) })
}

// ---- countermodel ----

pub fn countermodel(file: &TheoryFile, ctx: Option<&str>, goal: &str, cfg: &ProverConfig) -> Result<Report, CliError> {
    let seq = resolve_sequent(file, &file.theory, ctx, goal)?;
    Ok(match find_violation(&file.theory, &seq, cfg) {
        SearchResult::Found(cm) => {
            let model = cm.model.to_json();
            Report {
                code: EXIT_OK,
                text: format!(
                    "countermodel for {seq}\n{}\nassignment: {}",
                    serde_json::to_string_pretty(&model).expect("json"),
                    json!(cm.assignment)
                ),
                json: json!({ "found": true, "model": model, "assignment": cm.assignment }),
            }
        }
        SearchResult::NoneFound { truncated } => Report {
            code: if truncated { EXIT_TRUNCATED } else { EXIT_FAILED },
            text: format!(
                "none found (carriers up to {} points{})",
                cfg.size,
                if truncated { ", search truncated" } else { "" }
            ),
            json: json!({ "found": false, "truncated": truncated }),
        },
    })
}

// ---- demo ----

pub const DEMOS: [&str; 6] = ["t1", "t2", "comp", "contraction", "strongfinit", "surj"];

struct Row {
    quantity: String,
    expected: String,
    computed: String,
    /// `None` when there is nothing to compare against.
    matches: Option<bool>,
}

fn row(quantity: impl Into<String>, expected: impl ToString, computed: impl ToString) -> Row {
    let (expected, computed) = (expected.to_string(), computed.to_string());
    let matches = Some(expected == computed);
    Row { quantity: quantity.into(), expected, computed, matches }
}

fn info(quantity: impl Into<String>, computed: impl ToString) -> Row {
    Row { quantity: quantity.into(), expected: "-".into(), computed: computed.to_string(), matches: None }
}

fn pair(d: ExtReal) -> FinMetric {
    FinMetric::pair("a", "b", d).expect("valid pair")
}

fn c(name: &str) -> Preterm {
    Preterm::constant(name)
}

fn demo_rows(name: &str, cfg: &ProverConfig) -> Result<Vec<Row>, CliError> {
    let th = |n: &str| builtin(n).expect("builtin");
    let mut rows = Vec::new();
    match name {
        "t1" => {
            let t1 = th("t1");
            for i in [1, 2, 10] {
                let d = ExtReal::new(i + 1, i);
                let m = free_model(&t1, &pair(d), cfg);
                rows.push(row(format!("points, d(a,b) = {d}"), 2, m.len()));
            }
            let m = free_model(&t1, &pair(ExtReal::ONE), cfg);
            rows.push(row("points, d(a,b) = 1", 3, m.len()));
            rows.push(row("d([a],[b]), d(a,b) = 1", "1", m.d(m.unit["a"], m.unit["b"])));
            let fab = Preterm::app("f", vec![c("a"), c("b")]);
            rows.push(row("f('a,'b) is a point, d(a,b) = 1", true, m.reps.contains(&fab)));
        }
        "t2" => {
            let t2 = th("t2");
            let cfg2 = cfg.clone().with_depth(2);
            let far = free_model(&t2, &pair(ExtReal::new(11, 10)), &cfg2);
            rows.push(row("points, d(a,b) = 11/10", 2, far.len()));
            if far.len() == 2 {
                rows.push(row("distance, d(a,b) = 11/10", "11/10", far.d(0, 1)));
            }
            let near = free_model(&t2, &pair(ExtReal::ONE), &cfg2);
            rows.push(row("points, d(a,b) = 1 (colimit)", 1, near.len()));
        }
        "comp" => {
            let comp = th("comp");
            let a = FinMetric::new(
                vec!["a".into(), "b".into(), "c".into()],
                vec![
                    vec![ExtReal::ZERO, ExtReal::new(1, 4), ExtReal::ONE],
                    vec![ExtReal::new(1, 4), ExtReal::ZERO, ExtReal::ONE],
                    vec![ExtReal::ONE, ExtReal::ONE, ExtReal::ZERO],
                ],
            )
            .expect("valid space");
            let m = free_model(&comp, &a, cfg);
            rows.push(row("free model isometric to X", true, find_isometry(&m.space, &a).is_some()));
            let lim = Preterm::stream("lim", vec![], c("a"));
            let theory = with_generators(&comp, &a);
            let d = min_distance(&theory, &Context::empty(), &lim, &c("a"), cfg)
                .map_err(|e| CliError::Failed(e.to_string()))?;
            rows.push(row("d(lim(; 'a), 'a)", "0", d.upper));
        }
        "contraction" => {
            let con = th("contraction");
            let m = free_model(&con, &pair(ExtReal::ONE), cfg);
            let mut sa = c("a");
            let mut sb = c("b");
            for n in 0..=3u32 {
                let (Some(i), Some(j)) = (m.reps.iter().position(|r| *r == sa), m.reps.iter().position(|r| *r == sb))
                else {
                    break;
                };
                rows.push(row(format!("d(s^{n} a, s^{n} b)"), ExtReal::new(1, 1 << n), m.d(i, j)));
                sa = Preterm::app("s", vec![sa]);
                sb = Preterm::app("s", vec![sb]);
            }
            let sa = Preterm::app("s", vec![c("a")]);
            if let (Some(i), Some(j)) = (m.reps.iter().position(|r| *r == sa), m.reps.iter().position(|r| *r == c("a")))
            {
                let tag = if m.is_exact(i, j) { "exact" } else { "upper" };
                rows.push(info("d(s a, a), cross-level", format!("{} ({tag})", m.d(i, j))));
            }
            rows.push(info("points", m.len()));
        }
        "strongfinit" => {
            let gens = FinMetric::new(
                vec!["x1".into(), "x2".into(), "x3".into()],
                vec![
                    vec![ExtReal::ZERO, ExtReal::ONE, INF],
                    vec![ExtReal::ONE, ExtReal::ZERO, INF],
                    vec![INF, INF, ExtReal::ZERO],
                ],
            )
            .expect("valid space");
            let theory = with_generators(&th("strongfinit"), &gens);
            let s = Preterm::app("f", vec![c("x1"), Preterm::app("g", vec![c("x3")])]);
            let t = Preterm::app("f", vec![c("x2"), Preterm::app("g'", vec![c("x3")])]);
            let mut cfg = cfg.clone();
            cfg.grid = vec![ExtReal::ZERO, ExtReal::new(1, 2), ExtReal::ONE, INF];
            let d =
                min_distance(&theory, &Context::empty(), &s, &t, &cfg).map_err(|e| CliError::Failed(e.to_string()))?;
            rows.push(row(
                "d(f(x1, g x3), f(x2, g' x3))",
                "1 (exact)",
                format!("{} ({})", d.upper, if d.exact { "exact" } else { "upper" }),
            ));
        }
        "surj" => {
            let semi = th("semilattice");
            let three = FinMetric::discrete_named(vec!["a".into(), "b".into(), "c".into()]);
            let two = FinMetric::discrete_named(vec!["p".into(), "q".into()]);
            let r = check_surjection_preservation(&semi, &three, &two, &[0, 1, 1], cfg)
                .map_err(|e| CliError::Failed(e.to_string()))?;
            rows.push(row("semilattice, 3 -> 2", "preserved", surj_word(&r)));
            let a = pair(ExtReal::ONE);
            let r = check_surjection_preservation(&th("t1"), &a.discretized(), &a, &[0, 1], cfg)
                .map_err(|e| CliError::Failed(e.to_string()))?;
            rows.push(row("t1, A^d -> A", "violated", surj_word(&r)));
        }
        other => return Err(CliError::Usage(format!("unknown demo `{other}`; expected one of {}", DEMOS.join(", ")))),
    }
    Ok(rows)
}

fn surj_word(r: &SurjectionReport) -> &'static str {
    match r {
        SurjectionReport::Preserved => "preserved",
        SurjectionReport::Violated(_) => "violated",
    }
}

pub fn demo(name: &str, cfg: &ProverConfig) -> Result<Report, CliError> {
    let rows = demo_rows(name, cfg)?;
    let headers = ["quantity", "expected", "computed", "match"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            let m = match r.matches {
                Some(true) => "yes",
                Some(false) => "NO",
                None => "-",
            };
            [r.quantity.clone(), r.expected.clone(), r.computed.clone(), m.to_string()]
        })
        .collect();
    let widths: Vec<usize> =
        (0..4).map(|k| cells.iter().map(|c| c[k].len()).chain([headers[k].len()]).max().unwrap_or(0)).collect();
    let line = |c: [&str; 4]| -> String {
        c.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut text = line(headers);
    text.push('\n');
    let dashes: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    text.push_str(&line([&dashes[0], &dashes[1], &dashes[2], &dashes[3]]));
    for c in &cells {
        text.push('\n');
        text.push_str(&line([&c[0], &c[1], &c[2], &c[3]]));
    }
    let all = rows.iter().all(|r| r.matches != Some(false));
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "quantity": r.quantity, "expected": r.expected, "computed": r.computed, "match": r.matches }))
        .collect();
    Ok(Report {
        code: if all { EXIT_OK } else { EXIT_FAILED },
        text,
        json: json!({ "demo": name, "rows": json_rows, "all_match": all }),
    })
}
