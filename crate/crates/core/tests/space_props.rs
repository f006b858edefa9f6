use gpbo::space::Standardizer;
use gpbo::{Arm, ParamValue, ParameterSpec, SearchSpace};
use proptest::prelude::*;

fn mixed_space() -> SearchSpace {
    SearchSpace::new(vec![
        ParameterSpec::range_float("x", -2.0, 3.0),
        ParameterSpec::log_range("lr", 1e-4, 1e-1),
        ParameterSpec::range_int("layers", 1, 6),
        ParameterSpec::choice("act", vec!["relu".into(), "tanh".into(), "gelu".into()]),
        ParameterSpec::fixed("epochs", 10i64),
    ])
}

proptest! {
    #[test]
    fn decoded_arms_are_valid_and_reencode_into_the_cube(u in prop::collection::vec(0.0..=1.0f64, 4)) {
        let space = mixed_space();
        let arm = space.decode(&u, "a").unwrap();
        for p in space.params() {
            prop_assert!(p.check_value(arm.get(&p.name).unwrap()).is_ok());
        }
        let e = space.encode(&arm).unwrap();
        prop_assert!(e.as_slice().iter().all(|c| (0.0..=1.0).contains(c)));
        // continuous coordinates survive the round trip
        prop_assert!((e.as_slice()[0] - u[0]).abs() < 1e-12);
        prop_assert!((e.as_slice()[1] - u[1]).abs() < 1e-9);
        // snapped coordinates are fixed points
        let again = space.decode(e.as_slice(), "b").unwrap();
        prop_assert_eq!(&again.values, &arm.values);
    }

    #[test]
    fn encoding_is_monotone_in_each_range(a in -2.0..3.0f64, b in -2.0..3.0f64) {
        let space = SearchSpace::new(vec![ParameterSpec::range_float("x", -2.0, 3.0)]);
        let ua = space.encode(&Arm::new("a", [("x", a)])).unwrap().as_slice()[0];
        let ub = space.encode(&Arm::new("b", [("x", b)])).unwrap().as_slice()[0];
        prop_assert_eq!(a < b, ua < ub);
    }

    #[test]
    fn standardizer_round_trips(ys in prop::collection::vec(-1e3..1e3f64, 1..30), z in -5.0..5.0f64) {
        let s = Standardizer::fit(&ys).unwrap();
        for &y in &ys {
            prop_assert!((s.invert(s.apply(y)) - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
        prop_assert!((s.apply(s.invert(z)) - z).abs() <= 1e-9 * (1.0 + z.abs()));
        let zs: Vec<f64> = ys.iter().map(|&y| s.apply(y)).collect();
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!(s.scale() > 0.0);
    }
}

#[test]
fn boundaries_decode_exactly() {
    let space = mixed_space();
    let lo = space.decode(&[0.0; 4], "lo").unwrap();
    let hi = space.decode(&[1.0; 4], "hi").unwrap();
    assert_eq!(lo.get("lr"), Some(&ParamValue::Float(1e-4)));
    assert_eq!(hi.get("lr"), Some(&ParamValue::Float(1e-1)));
    assert_eq!(lo.get("layers"), Some(&ParamValue::Int(1)));
    assert_eq!(hi.get("act"), Some(&ParamValue::Str("gelu".into())));
    assert_eq!(hi.get("epochs"), Some(&ParamValue::Int(10)));
}

#[test]
fn encode_rejects_foreign_arms() {
    let space = mixed_space();
    let mut arm = space.decode(&[0.5; 4], "a").unwrap();
    arm.values.insert("bogus".into(), ParamValue::Int(1));
    assert!(space.encode(&arm).is_err());
    let mut arm = space.decode(&[0.5; 4], "a").unwrap();
    arm.values.insert("x".into(), ParamValue::Float(9.0));
    assert!(space.encode(&arm).is_err());
}

#[test]
fn validation_reports_every_problem() {
    let bad = SearchSpace::new(vec![
        ParameterSpec::range_float("x", 1.0, 0.0),
        ParameterSpec::log_range("y", -1.0, 1.0),
        ParameterSpec::range_float("x", 0.0, 1.0),
    ]);
    assert!(bad.validate().violations.len() >= 3);
    let wide = SearchSpace::new(
        (0..20)
            .map(|i| ParameterSpec::range_float(format!("p{i}"), 0.0, 1.0))
            .collect(),
    );
    let r = wide.validate();
    assert!(r.is_ok() && !r.warnings.is_empty());
}
