mod common;

use std::collections::BTreeMap;

use shapegen::automaton::check_ambiguity;
use shapegen::param_space::ParamSpace;

fn ecg_valuation() -> BTreeMap<String, f64> {
    [
        ("a1", 0.0),
        ("b1", 0.0175),
        ("c1", 31.0),
        ("d1", 0.0465),
        ("a2", -0.065),
        ("b2", 0.13897305319914782),
        ("c2", -33.5),
        ("d2", 0.1015),
        ("a3", 26.0),
        ("b3", -0.06036317412975453),
        ("d3", 0.0305),
        ("a4", -39.368611849827104),
        ("b4", 0.7326368258702454),
        ("d4", 0.0275),
        ("a5", 29.639999999999997),
        ("b5", -0.35),
        ("d5", 0.0125),
        ("a6", -0.010000000000000002),
        ("b6", 0.0305),
        ("c6", 8.5),
        ("d6", 0.15125),
        ("a7", 0.05981629884024326),
        ("b7", 0.0405),
        ("c7", -34.5),
        ("d7", 0.0465),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[test]
fn ecg_accepts_a_hand_solved_valuation() {
    let e = common::load("ecg.sexp");
    assert!(check_ambiguity(&e.regex).is_unambiguous());
    let space = ParamSpace::from_spec(&e, None).unwrap();
    let val = ecg_valuation();
    assert!(common::holds(&e.constraint, &val, space.epsilon()));
    let x: Vec<f64> = space.dims().iter().map(|d| val[d]).collect();
    assert!(space.contains(&x).unwrap());
    let full = space.full_valuation(&x);
    assert!(common::holds(&e.constraint, &full, space.epsilon()));

    let mut bad = x.clone();
    let i = space.dims().iter().position(|d| d == "a2").unwrap();
    bad[i] = 0.05;
    assert!(!space.contains(&bad).unwrap());
}

#[test]
fn pulse_space_shape() {
    let e = common::load("pulse.sexp");
    let space = ParamSpace::from_spec(&e, None).unwrap();
    assert_eq!(e.parameters().len(), 18);
    assert_eq!(space.dim(), 11);
    assert_eq!(space.relaxed_equalities().len(), 3);
    assert_eq!(space.epsilon(), 1e-3);
    for (name, expected) in [("a1", 0.0), ("a3", 0.0), ("b3", 0.0)] {
        assert!(space.pinned().iter().any(|(p, _)| p == name), "{name} pinned");
        let v = space.full_valuation(space.lower());
        assert_eq!(v[name], expected);
    }
}

#[test]
fn ring_files_parse() {
    for f in ["ring2_thin", "ring3_very_thin", "ring3_big_box", "ball100"] {
        let text = std::fs::read_to_string(common::spec_path(&format!("rings/{f}.json"))).unwrap();
        let r: shapegen::bench::RingSpec = serde_json::from_str(&text).unwrap();
        r.validate().unwrap();
    }
}
