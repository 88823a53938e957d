mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shapegen::ast::{print_spec, ArithExpr, CmpOp, Constraint, Regex};
use shapegen::automaton::{check_ambiguity, disambiguate, AmbiguityReport};
use shapegen::bench::{make_ring_space, RingSpec};
use shapegen::genfun::{generating_function, taylor_coefficients};
use shapegen::initializer::{pso_iterate, InitMethod, PsoConfig, Swarm};
use shapegen::param_space::ParamSpace;
use shapegen::parser::parse_spec;
use shapegen::pipeline::{run_pipeline, Boltzmann, PipelineConfig};
use shapegen::point_sampler::{run_chain, SamplerConfig, Variant};

const LETTERS: [&str; 3] = ["A", "B", "C"];

fn regex() -> impl Strategy<Value = Regex> {
    let leaf = prop_oneof![
        4 => (0..3usize).prop_map(|i| Regex::atom(LETTERS[i])),
        1 => Just(Regex::Epsilon),
    ];
    leaf.prop_recursive(4, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Regex::concat(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Regex::union(a, b)),
            inner.prop_map(Regex::star),
        ]
    })
}

fn valid_regex() -> impl Strategy<Value = Regex> {
    regex().prop_filter("nullable star", |r| r.find_nullable_star().is_none())
}

fn spec_text(r: &Regex) -> String {
    let mut s = String::new();
    for a in LETTERS {
        let l = a.to_lowercase();
        s.push_str(&format!("shape {a} = lin({l}1, {l}2, {l}3);\n"));
    }
    s.push_str(&format!("expr = {r};\nconstraint = "));
    let bounds: Vec<String> = LETTERS
        .iter()
        .flat_map(|a| {
            let l = a.to_lowercase();
            (1..=3).map(move |k| format!("{l}{k} in (0, 1)"))
        })
        .collect();
    s.push_str(&bounds.join(" && "));
    s.push_str(";\n");
    s
}

fn same_language(a: &Regex, b: &Regex, max_len: usize) -> bool {
    let alphabet: Vec<String> = LETTERS.iter().map(|s| s.to_string()).collect();
    (0..=max_len).all(|n| {
        common::all_words(&alphabet, n)
            .iter()
            .all(|w| (common::derivations(a, w) > 0) == (common::derivations(b, w) > 0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn print_parse_round_trip(r in valid_regex()) {
        let e = parse_spec(&spec_text(&r)).unwrap();
        prop_assert!(same_language(&r, &e.regex, 5));
        let printed = print_spec(&e);
        let again = parse_spec(&printed).unwrap();
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(print_spec(&again), printed);
    }

    #[test]
    fn ambiguity_matches_derivation_counts(r in valid_regex()) {
        match check_ambiguity(&r) {
            AmbiguityReport::Ambiguous { witness } => {
                prop_assert!(common::derivations(&r, &witness) >= 2, "witness {:?} of {}", witness, r);
            }
            AmbiguityReport::Unambiguous => {
                prop_assert_eq!(common::brute_force_ambiguous(&r, 6), None);
            }
        }
    }

    #[test]
    fn disambiguation_preserves_language(r in valid_regex()) {
        let d = disambiguate(&r).unwrap();
        prop_assert!(check_ambiguity(&d).is_unambiguous());
        prop_assert_eq!(common::brute_force_ambiguous(&d, 5), None);
        prop_assert!(same_language(&r, &d, 5), "{} vs {}", r, d);
    }

    #[test]
    fn taylor_coefficients_count_words(r in valid_regex()) {
        let d = if check_ambiguity(&r).is_unambiguous() { r } else { disambiguate(&r).unwrap() };
        let g = generating_function(&d).unwrap();
        let coeffs: Vec<u64> = taylor_coefficients(&g, 6).unwrap().iter().map(|c| u64::try_from(c).unwrap()).collect();
        prop_assert_eq!(coeffs, common::brute_force_counts(&d, 6));
    }

    #[test]
    fn constant_pins_are_exact(c in -5.0f64..5.0, lo in -10.0f64..-6.0, hi in 6.0f64..10.0) {
        let gamma = Constraint::and(
            Constraint::cmp(ArithExpr::param("p"), CmpOp::Eq, ArithExpr::Num(c)),
            Constraint::within("q", lo, hi),
        );
        let space = ParamSpace::compile(&gamma, &["p".into(), "q".into()], 1e-3).unwrap();
        prop_assert_eq!(space.dim(), 1);
        let v = space.full_valuation(&[0.5 * (lo + hi)]);
        prop_assert_eq!(v["p"], c);
        prop_assert!(space.member(&[0.5 * (lo + hi)]));
    }

    #[test]
    fn penalty_zero_iff_member(seed in any::<u64>(), which in 0..3usize) {
        let space = match which {
            0 => ParamSpace::from_spec(&common::load("pulse.sexp"), None).unwrap(),
            1 => ParamSpace::from_spec(&common::load("ecg.sexp"), None).unwrap(),
            _ => make_ring_space(&RingSpec { n: 3, c1: 1.0, c2: 0.5, c: 1.0 }).unwrap(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x: Vec<f64> = space
                .lower()
                .iter()
                .zip(space.upper())
                .map(|(l, u)| rand::Rng::gen_range(&mut rng, *l..*u))
                .collect();
            let p = space.penalty(&x).unwrap();
            prop_assert!(p >= 0.0);
            prop_assert_eq!(p == 0.0, space.contains(&x).unwrap());
        }
    }

    #[test]
    fn pso_gbest_never_worsens(seed in any::<u64>()) {
        let space = make_ring_space(&RingSpec { n: 4, c1: 1.0, c2: 0.95, c: 3.0 }).unwrap();
        let cfg = PsoConfig { seed, ..PsoConfig::default() };
        let mut swarm = Swarm::new(&space, 10, ChaCha8Rng::seed_from_u64(seed));
        let mut last = swarm.gbest_penalty;
        for _ in 0..30 {
            pso_iterate(&mut swarm, &space, &cfg);
            prop_assert!(swarm.gbest_penalty <= last);
            prop_assert_eq!(space.penalty(&swarm.gbest).unwrap(), swarm.gbest_penalty);
            last = swarm.gbest_penalty;
        }
    }
}

#[test]
fn chains_are_deterministic() {
    let space = make_ring_space(&RingSpec { n: 3, c1: 1.0, c2: 0.9, c: 1.0 }).unwrap();
    let x0 = [0.95, 0.0, 0.0];
    for variant in Variant::ALL {
        let cfg = SamplerConfig { variant, burn_in: 10, seed: 77, ..SamplerConfig::default() };
        let a = run_chain(&space, &cfg, &x0, 50).unwrap().0;
        let b = run_chain(&space, &cfg, &x0, 50).unwrap().0;
        assert_eq!(a, b, "{variant}");
        let c = run_chain(&space, &SamplerConfig { seed: 78, ..cfg }, &x0, 50).unwrap().0;
        assert_ne!(a, c, "{variant}");
    }
}

#[test]
fn pipeline_is_deterministic() {
    let e = common::load("pulse.sexp");
    let cfg = PipelineConfig {
        seed: 31,
        count: 4,
        boltzmann: Boltzmann::MeanLength(12.0),
        init: InitMethod::Auto,
        sampler: SamplerConfig { burn_in: 50, ..SamplerConfig::default() },
        ..PipelineConfig::default()
    };
    let a = run_pipeline(&e, &cfg).unwrap();
    let b = run_pipeline(&e, &cfg).unwrap();
    assert_eq!(a.samples, b.samples);
}
