use std::collections::BTreeMap;

use contrast_core::{
    bootstrap_normal_ci, build_dataset, caspr, ds_multi, ds_pairwise, stub_nli, BuildContext, DatasetName,
    DecompositionConfig, EchoChat, EntityPairRecord, Error, Matcher, NliLabel, ScoreSample, Side, StubNliRule,
    Summary, SummarySet,
};

fn s(side: Side, text: &str) -> Summary {
    Summary::from_text(side, "p", "1", text)
}

#[test]
fn ds_is_zero_for_identical_and_full_for_disjoint_text() {
    let a = s(Side::AMinusB, "Quiet rooms. Big pool.");
    assert_eq!(ds_pairwise(&a, &a).unwrap().score, 0.0);
    let b = s(Side::BMinusA, "Loud bar!");
    assert_eq!(ds_pairwise(&a, &b).unwrap().score, 100.0);
}

#[test]
fn ds_multi_reduces_to_three_way_overlap() {
    let set = SummarySet::new(vec![
        s(Side::AMinusB, "red green"),
        s(Side::BMinusA, "green blue"),
        s(Side::ACommon, "blue red"),
    ])
    .unwrap();
    // Each token sits in exactly two summaries: union 3, pairwise 3, triple 0.
    assert_eq!(ds_multi(&set).unwrap().score, 0.0);
    let disjoint = SummarySet::new(vec![s(Side::AMinusB, "a"), s(Side::BMinusA, "b"), s(Side::ACommon, "c")]).unwrap();
    assert_eq!(ds_multi(&disjoint).unwrap().score, 100.0);
}

#[test]
fn caspr_mixes_sentence_labels() {
    let nli = stub_nli(vec![
        StubNliRule::exact("The pool is warm.", "The pool is cold.", NliLabel::Contradiction, NliLabel::Contradiction),
        StubNliRule {
            left: Matcher::Contains("breakfast".into()),
            right: Matcher::Contains("breakfast".into()),
            forward: NliLabel::Entailment,
            backward: NliLabel::Entailment,
        },
    ]);
    let l = s(Side::AMinusB, "The pool is warm. Breakfast is good.");
    let r = s(Side::BMinusA, "The pool is cold. The breakfast is tasty.");
    // Both pool sentences are contrastive, both breakfast sentences similar.
    let report = caspr(&l, &r, &nli, &EchoChat).unwrap();
    assert_eq!(report.score, 50.0);
    let tallies = report.per_sentence.unwrap();
    assert_eq!(tallies.len(), 4);
    assert_eq!(tallies.iter().map(|t| i32::from(t.label_score)).sum::<i32>(), 0);
}

#[test]
fn bootstrap_is_seeded_and_order_free() {
    let samples: Vec<ScoreSample> = (0..20).map(|i| ScoreSample::new(format!("p{i:02}"), f64::from(i % 7))).collect();
    let mut shuffled = samples.clone();
    shuffled.reverse();
    let a = bootstrap_normal_ci(&samples, 500, 0.9, 1).unwrap();
    assert_eq!(a, bootstrap_normal_ci(&shuffled, 500, 0.9, 1).unwrap());
    assert_ne!(a.se, bootstrap_normal_ci(&samples, 500, 0.9, 2).unwrap().se);
    assert!(a.ci_low < a.mean && a.mean < a.ci_high);
}

#[test]
fn negated_dataset_needs_full_negation_coverage() {
    let base = s(Side::AMinusB, "The pool is warm. The bar is loud.");
    let mut negated = BTreeMap::new();
    negated.insert("s0.0".to_string(), "The pool is not warm.".to_string());
    let record = EntityPairRecord {
        entity_pair_id: "p".into(),
        summaries: vec![base],
        negated: negated.clone(),
        paraphrases: vec![],
    };
    let decomposition = DecompositionConfig::default();
    let ctx = BuildContext {
        chat: Some(&EchoChat),
        decomposition: &decomposition,
    };
    let err = build_dataset(std::slice::from_ref(&record), DatasetName::SyntheticHighContrast, ctx).unwrap_err();
    assert!(matches!(err, Error::NegationCoverage(ref ids) if ids == &["s1.0"]), "{err:?}");

    negated.insert("s1.0".to_string(), "The bar is not loud.".to_string());
    let record = EntityPairRecord { negated, ..record };
    let ds = build_dataset(&[record], DatasetName::SyntheticHighContrast, ctx).unwrap();
    assert_eq!(ds.pairs.len(), 1);
    assert_eq!(ds.pairs[0].right.text(), "The pool is not warm. The bar is not loud.");
}
