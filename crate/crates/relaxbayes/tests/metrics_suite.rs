mod support;

#[test]
fn exact_identities() {
    for (name, ok) in support::metric_identities() {
        assert!(ok, "{name}");
    }
}

#[test]
fn hand_cases_match_oracles() {
    let err = support::metric_hand_cases_error();
    assert!(err < 1e-12, "max deviation {err:e}");
}

#[test]
fn auroc_is_invariant_under_increasing_maps() {
    assert_eq!(support::auroc_invariance(100), 100);
}
