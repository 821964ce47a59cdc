use std::collections::BTreeMap;

use statleak::mechanism::{ConstantMechanism, IdentityMechanism};
use statleak::mechanisms::qm::QmFraction;
use statleak::param::CategoricalParam;
use statleak::prob::ratio;
use statleak::tabular::*;
use statleak::label::Label;

const TOY: &str = "race,income\nA,hi\nA,hi\nB,lo\nA,lo\n";

fn toy() -> Dataset {
    ingest_reader(TOY.as_bytes(), None, &IngestOptions::default()).unwrap()
}

fn sel(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn combo(v: &[&str]) -> Combo {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn toy_fixture_shape() {
    let ds = toy();
    assert_eq!(ds.n(), 4);
    let sup = extract_support(&ds);
    assert_eq!(sup.d(), 3);
    let counts: Vec<u64> = sup.gamma.iter().map(|(_, k)| *k).collect();
    assert_eq!(counts, vec![2, 1, 1]);
    assert_eq!(to_param(&sup, None).unwrap(), CategoricalParam::new(4, vec![2, 1, 1]).unwrap());
}

#[test]
fn header_only_is_empty_result() {
    let e = ingest_reader("a,b\n".as_bytes(), None, &IngestOptions::default()).unwrap_err();
    assert_eq!(e.code(), "empty_result");
}

#[test]
fn unknown_column() {
    let cols = vec!["nope".to_string()];
    let e = ingest_reader(TOY.as_bytes(), Some(&cols), &IngestOptions::default()).unwrap_err();
    assert_eq!(e.code(), "unknown_column");
}

#[test]
fn missing_values_dropped_and_trimmed() {
    let src = "a, b\n x ,1\n?,2\ny, \nx,1\n";
    let ds = ingest_reader(src.as_bytes(), None, &IngestOptions::default()).unwrap();
    assert_eq!(ds.columns, vec!["a", "b"]);
    assert_eq!((ds.n(), ds.dropped, ds.n_raw()), (2, 2, 4));
    assert_eq!(extract_support(&ds).d(), 1);
}

#[test]
fn column_selection() {
    let cols = vec!["income".to_string()];
    let ds = ingest_reader(TOY.as_bytes(), Some(&cols), &IngestOptions::default()).unwrap();
    let sup = extract_support(&ds);
    assert_eq!(sup.d(), 2);
    assert_eq!(to_param(&sup, Some(2)).unwrap().counts(), &[1, 1]);
}

#[test]
fn rescaling_must_be_exact() {
    let sup = extract_support(&toy());
    assert_eq!(to_param(&sup, Some(2)).unwrap_err().code(), "non_integral_rescale");
    let src = "c\nu\nu\nv\nv\nv\nv\nw\nw\nw\nw\n";
    let sup = extract_support(&ingest_reader(src.as_bytes(), None, &IngestOptions::default()).unwrap());
    assert_eq!(to_param(&sup, Some(3)).unwrap_err().code(), "non_integral_rescale");
    let src = "c\nu\nu\nv\nv\nv\nv\nw\nw\nw\nw\nx\nx\n";
    let sup = extract_support(&ingest_reader(src.as_bytes(), None, &IngestOptions::default()).unwrap());
    assert_eq!(to_param(&sup, Some(6)).unwrap().counts(), &[1, 2, 2, 1]);
}

#[test]
fn supports_and_scale() {
    let sup = extract_support(&toy())
        .with_supports(
            Some(vec![combo(&["A", "hi"]), combo(&["A", "lo"]), combo(&["B", "lo"]), combo(&["B", "hi"])]),
            Some(vec![combo(&["A", "hi"]), combo(&["A", "lo"]), combo(&["B", "lo"]), combo(&["C", "lo"])]),
        )
        .unwrap();
    assert_eq!(sup.categories.len(), 4);
    assert_eq!(sup.hat0().len(), 3);
    assert_eq!(sup.hat1(), vec![combo(&["C", "lo"])]);
    let sc = sup.scale(4, 5);
    assert_eq!((sc.d0, sc.d1, sc.d_star), (3, 1, 4));
    assert_eq!(sc.d_hat(), sup.estimated().len());
    // observed combos must be feasible
    let e = extract_support(&toy()).with_supports(Some(vec![combo(&["A", "hi"])]), None).unwrap_err();
    assert_eq!(e.code(), "support_violation");
    let p = to_param(&sup, None).unwrap();
    assert_eq!(p.counts(), &[2, 1, 1, 0]);
}

#[test]
fn secrets() {
    let sup = extract_support(&toy());
    let theta = to_param(&sup, None).unwrap();
    let frac = SecretSpec::FractionOfCategory { category: sel(&[("race", "A"), ("income", "hi")]) };
    assert_eq!(secret_value(&theta, &frac, &sup).unwrap().id, "1/2");
    assert_eq!(frac.s_hint(4), Some(5));
    // P(hi | A) − P(hi | B) = 2/3 − 0
    let diff = SecretSpec::DifferenceOfConditionalFractions {
        group_a: sel(&[("race", "A")]),
        target_a: sel(&[("income", "hi")]),
        group_b: sel(&[("race", "B")]),
        target_b: sel(&[("income", "hi")]),
        buckets: None,
    };
    assert_eq!(secret_value(&theta, &diff, &sup).unwrap().id, "2/3");
    let bucketed = SecretSpec::DifferenceOfConditionalFractions {
        group_a: sel(&[("race", "A")]),
        target_a: sel(&[("income", "hi")]),
        group_b: sel(&[("race", "B")]),
        target_b: sel(&[("income", "hi")]),
        buckets: Some(17),
    };
    let v = secret_value(&theta, &bucketed, &sup).unwrap();
    // (2/3 + 1)·17/2 = 14.17, so bucket 14 of 0..16
    assert_eq!(v.rank, Some(15));
    assert_eq!(bucketed.s_hint(4), Some(17));
    let empty_b = CategoricalParam::new(4, vec![3, 1, 0]).unwrap();
    assert_eq!(secret_value(&empty_b, &bucketed, &sup).unwrap_err().code(), "zero_denominator");
}

#[test]
fn release_identity_preserves_multiset() {
    let ds = toy();
    let sup = extract_support(&ds);
    let theta = to_param(&sup, None).unwrap();
    let (out, rel) = release_dataset(&sup, &theta, &IdentityMechanism, 9).unwrap();
    assert_eq!(out, theta);
    let mut a = ds.rows.clone();
    let mut b = rel.rows.clone();
    a.sort();
    b.sort();
    assert_eq!(a, b);
    assert_eq!(to_param(&extract_support(&rel).with_supports(None, Some(sup.categories.clone())).unwrap(), None).unwrap(), out);
    // same seed, same bytes
    let mut x = Vec::new();
    let mut y = Vec::new();
    rel.write_csv(&mut x).unwrap();
    release_dataset(&sup, &theta, &IdentityMechanism, 9).unwrap().1.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn release_constant_point_mass() {
    let sup = extract_support(&toy());
    let theta = to_param(&sup, None).unwrap();
    let pm = CategoricalParam::new(4, vec![0, 4, 0]).unwrap();
    let (_, rel) = release_dataset(&sup, &theta, &ConstantMechanism { output: Label::Param(pm) }, 1).unwrap();
    assert!(rel.rows.iter().all(|r| *r == combo(&["A", "lo"])));
}

#[test]
fn release_qm_unit_interval_keeps_fraction() {
    let ds = toy();
    let sup = extract_support(&ds);
    let theta = to_param(&sup, None).unwrap();
    let q = QmFraction::new(sup.category_names(), 4, 0, 1).unwrap();
    for seed in 0..10 {
        let (out, rel) = release_dataset(&sup, &theta, &q, seed).unwrap();
        assert_eq!(out.count(0), theta.count(0));
        let s = sel(&[("race", "A"), ("income", "hi")]);
        assert_eq!(row_fraction(&rel, &s).unwrap(), row_fraction(&ds, &s).unwrap());
        assert_eq!(row_fraction(&rel, &s).unwrap(), ratio(1, 2));
    }
}

#[test]
fn release_needs_full_precision() {
    let sup = extract_support(&toy());
    let theta = CategoricalParam::new(2, vec![1, 1, 0]).unwrap();
    assert!(release_dataset(&sup, &theta, &IdentityMechanism, 0).is_err());
}
