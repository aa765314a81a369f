use metriq::algebra::{enumerate_models, is_model, satisfies, Model};
use metriq::kernel::{check_proof, Proof};
use metriq::metric::closure;
use metriq::prover::{carriers, saturate, ProverConfig};
use metriq::syntax::{Context, Hyp, Preterm, Sequent};
use metriq::theories::{builtin, Theory};
use metriq::{ExtReal, INF};
use proptest::prelude::*;

fn ext() -> impl Strategy<Value = ExtReal> {
    prop_oneof![
        4 => (0i128..40, 1i128..13).prop_map(|(p, q)| ExtReal::new(p, q)),
        1 => Just(INF),
    ]
}

const GRID: [ExtReal; 4] = [ExtReal::ZERO, ExtReal::Fin(metriq::Rational::new_raw(1, 2)), ExtReal::ONE, INF];
const VARS: [&str; 3] = ["x", "y", "z"];

fn hyps() -> impl Strategy<Value = Context> {
    prop::collection::vec((0..3usize, 0..3usize, 0..3usize), 0..3)
        .prop_map(|hs| Context(hs.into_iter().map(|(i, j, e)| Hyp::new(VARS[i], VARS[j], GRID[e])).collect()))
}

fn models(theory: &Theory) -> Vec<Model> {
    carriers(2, &GRID)
        .iter()
        .flat_map(|c| enumerate_models(&theory.signature, c).filter(|m| is_model(m, theory)).collect::<Vec<_>>())
        .collect()
}

fn theory() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["t2", "contraction", "semilattice", "comp"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn extreal_addition_is_a_monoid(a in ext(), b in ext(), c in ext()) {
        prop_assert_eq!(a + b, b + a);
        prop_assert_eq!((a + b) + c, a + (b + c));
        prop_assert_eq!(a + ExtReal::ZERO, a);
        prop_assert_eq!(a + INF, INF);
    }

    #[test]
    fn extreal_order_respects_addition(a in ext(), b in ext(), c in ext()) {
        if a <= b {
            prop_assert!(a + c <= b + c);
        }
        prop_assert_eq!(a.min(b).max(a), a);
        prop_assert!(a.min(b) <= a.max(b));
    }

    #[test]
    fn extreal_text_round_trips(a in ext()) {
        prop_assert_eq!(a.to_string().parse::<ExtReal>().unwrap(), a);
    }

    #[test]
    fn closure_is_the_largest_metric_below_the_edges(
        n in 1usize..6,
        edges in prop::collection::vec((0..6usize, 0..6usize, ext()), 0..10),
    ) {
        let points: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let triples: Vec<(String, String, ExtReal)> = edges
            .iter()
            .filter(|(i, j, _)| *i < n && *j < n)
            .map(|(i, j, e)| (points[*i].clone(), points[*j].clone(), *e))
            .collect();
        let p = closure(&points, &triples).unwrap();
        for i in 0..n {
            prop_assert_eq!(p.d(i, i), ExtReal::ZERO);
            for j in 0..n {
                prop_assert_eq!(p.d(i, j), p.d(j, i));
                for k in 0..n {
                    prop_assert!(p.d(i, k) <= p.d(i, j) + p.d(j, k));
                }
            }
        }
        for (a, b, e) in &triples {
            prop_assert!(p.d(p.index_of(a).unwrap(), p.index_of(b).unwrap()) <= *e);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn saturation_bounds_hold_in_every_small_model(name in theory(), ctx in hyps()) {
        let t = builtin(name).unwrap();
        let state = saturate(&t, &ctx, None, &ProverConfig::default().with_depth(2));
        let ok: Vec<Preterm> = state.ok_terms().into_iter().cloned().collect();
        let ms = models(&t);
        for s in ok.iter().take(12) {
            for u in ok.iter().take(12) {
                let b = state.bound(s, u);
                if b.is_inf() {
                    continue;
                }
                let seq = Sequent::eq(ctx.clone(), s.clone(), u.clone(), b);
                for m in &ms {
                    prop_assert!(satisfies(m, &seq), "{} fails in a model", seq);
                }
            }
        }
    }

    #[test]
    fn more_hypotheses_never_weaken_bounds(name in theory(), ctx in hyps(), extra in (0..3usize, 0..3usize, 0..3usize)) {
        let t = builtin(name).unwrap();
        let cfg = ProverConfig::default().with_depth(2);
        let small = saturate(&t, &ctx, None, &cfg);
        let mut bigger = ctx.clone();
        bigger.0.push(Hyp::new(VARS[extra.0], VARS[extra.1], GRID[extra.2]));
        let large = saturate(&t, &bigger, None, &cfg);
        // Universes are built over class representatives, so a new zero-distance
        // hypothesis can drop a term; it must still land in a known class.
        let kept: Vec<&Preterm> = small.ok_terms().into_iter().filter(|s| large.is_ok(s)).collect();
        for s in small.ok_terms() {
            prop_assert!(large.class_index(s).is_some(), "{} has no class", s);
        }
        for s in &kept {
            for u in &kept {
                prop_assert!(large.bound(s, u) <= small.bound(s, u), "d({}, {})", s, u);
            }
        }
    }

    #[test]
    fn deeper_saturation_never_weakens_bounds(name in theory(), ctx in hyps()) {
        let t = builtin(name).unwrap();
        let shallow = saturate(&t, &ctx, None, &ProverConfig::default().with_depth(1));
        let deep = saturate(&t, &ctx, None, &ProverConfig::default().with_depth(2));
        for s in shallow.ok_terms() {
            prop_assert!(deep.is_ok(s));
            for u in shallow.ok_terms() {
                prop_assert!(deep.bound(s, u) <= shallow.bound(s, u), "d({}, {})", s, u);
            }
        }
    }

    #[test]
    fn proof_json_is_deterministic_and_round_trips(name in theory(), ctx in hyps(), pick in any::<prop::sample::Index>()) {
        let t = builtin(name).unwrap();
        let cfg = ProverConfig::default().with_depth(2);
        let state = saturate(&t, &ctx, None, &cfg);
        let ok: Vec<Preterm> = state.ok_terms().into_iter().cloned().collect();
        prop_assume!(!ok.is_empty());
        let s = pick.get(&ok);
        let (_, p) = state.eq_proof(s, &ok[0]).unwrap_or_else(|| (ExtReal::ZERO, state.ok_proof(s).unwrap()));
        let text = serde_json::to_string(&*p).unwrap();
        let again = saturate(&t, &ctx, None, &cfg);
        let q = again.eq_proof(s, &ok[0]).map_or_else(|| again.ok_proof(s).unwrap(), |(_, q)| q);
        prop_assert_eq!(&text, &serde_json::to_string(&*q).unwrap());
        let back: Proof = serde_json::from_str(&text).unwrap();
        prop_assert!(check_proof(&t, &back).is_valid());
    }
}
