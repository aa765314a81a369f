//! Depth-bounded free and initial models, induced maps and surjection preservation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::algebra::{evaluate, Assignment};
use crate::error::MapError;
use crate::extreal::ExtReal;
use crate::metric::{check_nonexpansive, FinMetric};
use crate::prover::{saturate, separating_model, with_generators, ProverConfig, SaturationState};
use crate::syntax::{Context, Preterm};
use crate::theories::Theory;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Exactness {
    /// A finite model of the theory realizes the distance.
    Exact,
    /// Only the derived upper bound is known.
    Upper,
}

/// Classes of closed well-formed terms up to the depth cap, at their derived distances.
#[derive(Clone, Debug)]
pub struct FreeModelApprox {
    /// Points are named by their representatives.
    pub space: FinMetric,
    pub reps: Vec<Preterm>,
    /// Generator name to class.
    pub unit: BTreeMap<String, usize>,
    /// Known applications: argument classes (prefix then tail for streams) to result class.
    pub ops: BTreeMap<String, BTreeMap<Vec<usize>, usize>>,
    /// Status of every off-diagonal pair `i < j`.
    pub exactness: BTreeMap<(usize, usize), Exactness>,
    pub stabilized: bool,
    pub truncated: bool,
}

impl FreeModelApprox {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn d(&self, i: usize, j: usize) -> ExtReal {
        self.space.d(i, j)
    }

    pub fn is_exact(&self, i: usize, j: usize) -> bool {
        i == j || self.exactness.get(&(i.min(j), i.max(j))) == Some(&Exactness::Exact)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let exactness: Vec<serde_json::Value> =
            self.exactness.iter().map(|(&(i, j), e)| serde_json::json!([[i, j], e])).collect();
        let ops: BTreeMap<&String, Vec<serde_json::Value>> = self
            .ops
            .iter()
            .map(|(op, table)| (op, table.iter().map(|(args, v)| serde_json::json!([args, v])).collect()))
            .collect();
        serde_json::json!({
            "points": self.space.points(),
            "dist": self.space.matrix(),
            "reps": self.reps.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "unit": self.unit,
            "ops": ops,
            "exactness": exactness,
            "stabilized": self.stabilized,
            "truncated": self.truncated,
        })
    }
}

struct Built {
    theory: Theory,
    state: SaturationState,
    model: FreeModelApprox,
}

fn build(theory: &Theory, gens: &FinMetric, cfg: &ProverConfig) -> Built {
    let state = saturate(theory, &Context::empty(), Some(gens), cfg);
    let theory = with_generators(theory, gens);
    let classes = state.classes();
    let reps: Vec<Preterm> = classes.iter().map(|c| c.rep.clone()).collect();
    let n = reps.len();
    let dist: Vec<Vec<ExtReal>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { ExtReal::ZERO } else { state.bound(&reps[i], &reps[j]) }).collect())
        .collect();
    let space = FinMetric::new(reps.iter().map(ToString::to_string).collect(), dist)
        .expect("saturated bounds form a metric on classes");
    let member_class: HashMap<&Preterm, usize> =
        classes.iter().enumerate().flat_map(|(i, c)| c.members.iter().map(move |m| (m, i))).collect();
    let unit = gens.points().iter().map(|p| (p.clone(), member_class[&Preterm::constant(p)])).collect();
    let mut ops: BTreeMap<String, BTreeMap<Vec<usize>, usize>> = BTreeMap::new();
    for (&t, &class) in &member_class {
        if let Preterm::App { op, args } = t {
            let key = args.positions().into_iter().map(|p| member_class[p]).collect();
            ops.entry(op.clone()).or_default().insert(key, class);
        }
    }
    let truncated = state.truncated();
    let model = FreeModelApprox { space, reps, unit, ops, exactness: BTreeMap::new(), stabilized: false, truncated };
    Built { theory, state, model }
}

/// Marks pairs whose distance is realized by a finite model of the theory.
fn certify(theory: &Theory, m: &mut FreeModelApprox, cfg: &ProverConfig) {
    let n = m.len();
    let mut status: BTreeMap<(usize, usize), Exactness> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| ((i, j), Exactness::Upper))).collect();
    if n > cfg.certify_max_points {
        m.exactness = status;
        return;
    }
    let empty = Assignment::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if status[&(i, j)] == Exactness::Exact {
                continue;
            }
            let d = m.d(i, j);
            let Some(cm) = separating_model(theory, &Context::empty(), &m.reps[i], &m.reps[j], d, cfg).found().cloned()
            else {
                continue;
            };
            // One model usually separates many pairs at once.
            let vals: Vec<Option<usize>> = m.reps.iter().map(|r| evaluate(&cm.model, r, &empty).ok()).collect();
            for k in 0..n {
                for l in (k + 1)..n {
                    if let (Some(a), Some(b)) = (vals[k], vals[l]) {
                        if cm.model.carrier().d(a, b) >= m.d(k, l) {
                            status.insert((k, l), Exactness::Exact);
                        }
                    }
                }
            }
        }
    }
    m.exactness = status;
}

/// Whether the classes at depth `D` map isometrically onto the classes at `D + 1`.
fn stable(small: &Built, theory: &Theory, gens: &FinMetric, cfg: &ProverConfig) -> bool {
    let mut deeper = cfg.clone();
    deeper.depth += 1;
    let next = build(theory, gens, &deeper);
    if next.model.len() != small.model.len() || next.model.truncated {
        return false;
    }
    let image: Option<Vec<usize>> = small.model.reps.iter().map(|r| next.state.class_index(r)).collect();
    let Some(image) = image else { return false };
    if image.iter().collect::<BTreeSet<_>>().len() != image.len() {
        return false;
    }
    let n = image.len();
    (0..n).all(|i| (0..n).all(|j| small.model.d(i, j) == next.model.d(image[i], image[j])))
}

/// Free model over `gens`: the initial model of the theory extended by one constant per point.
pub fn free_model(theory: &Theory, gens: &FinMetric, cfg: &ProverConfig) -> FreeModelApprox {
    let mut built = build(theory, gens, cfg);
    let extended = built.theory.clone();
    certify(&extended, &mut built.model, cfg);
    if built.model.len() <= cfg.certify_max_points && !built.model.truncated {
        built.model.stabilized = stable(&built, theory, gens, cfg);
    }
    built.model
}

/// Free model over the empty space; empty when the theory has no constants.
pub fn initial_model(theory: &Theory, cfg: &ProverConfig) -> FreeModelApprox {
    free_model(theory, &FinMetric::empty(), cfg)
}

/// Class map `Free(A) → Free(B)` induced by a nonexpansive `f: A → B`.
#[derive(Clone, Debug)]
pub struct InducedMap {
    pub source: FreeModelApprox,
    pub target: FreeModelApprox,
    /// Image class of every source class; `None` when the image term is outside the target universe.
    pub map: Vec<Option<usize>>,
}

impl InducedMap {
    /// Target classes not hit by any source class.
    pub fn missed(&self) -> Vec<usize> {
        let hit: BTreeSet<usize> = self.map.iter().flatten().copied().collect();
        (0..self.target.len()).filter(|c| !hit.contains(c)).collect()
    }
}

pub fn induced_map(
    theory: &Theory,
    a: &FinMetric,
    b: &FinMetric,
    f: &[usize],
    cfg: &ProverConfig,
) -> Result<InducedMap, MapError> {
    check_nonexpansive(a, b, f)?;
    let src = build(theory, a, cfg);
    let dst = build(theory, b, cfg);
    let rename: BTreeMap<String, Preterm> =
        a.points().iter().enumerate().map(|(i, p)| (p.clone(), Preterm::constant(b.point(f[i])))).collect();
    let map = src.model.reps.iter().map(|r| dst.state.class_index(&r.replace_constants(&rename))).collect();
    Ok(InducedMap { source: src.model, target: dst.model, map })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SurjectionReport {
    Preserved,
    /// Representatives of the target classes outside the image.
    Violated(Vec<Preterm>),
}

/// Whether the class map induced by a surjection `f: A → B` is surjective at the depth cap.
pub fn check_surjection_preservation(
    theory: &Theory,
    a: &FinMetric,
    b: &FinMetric,
    f: &[usize],
    cfg: &ProverConfig,
) -> Result<SurjectionReport, MapError> {
    let hit: BTreeSet<usize> = f.iter().copied().collect();
    if hit.len() != b.len() {
        return Err(MapError::NotSurjective);
    }
    let m = induced_map(theory, a, b, f, cfg)?;
    let missed = m.missed();
    Ok(if missed.is_empty() {
        SurjectionReport::Preserved
    } else {
        SurjectionReport::Violated(missed.into_iter().map(|c| m.target.reps[c].clone()).collect())
    })
}
