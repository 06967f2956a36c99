mod support;

use proptest::prelude::*;
use relaxbayes::nn::{Activation, Batch, ModelSpec};

#[test]
fn gradients_match_finite_differences_on_100_cases() {
    let err = support::gradient_suite(100);
    assert!(err < 1e-4, "max relative error {err:e}");
}

#[test]
fn diag_ggn_matches_dense_oracle() {
    let (err, min_entry) = support::ggn_suite();
    assert!(err < 1e-8, "max abs error {err:e}");
    assert!(min_entry >= 0.0);
}

#[test]
fn zero_inputs_leave_only_bias_curvature() {
    let model = ModelSpec::mlp(3, &[], 4, Activation::Relu).unwrap();
    let batch = Batch::from_rows(&[vec![0.0; 3], vec![0.0; 3]], vec![0, 3], 4).unwrap();
    let params: Vec<f64> = (0..model.num_params()).map(|i| 0.1 * i as f64 - 0.5).collect();
    let d = model.diag_ggn(&params, &batch).unwrap();
    let weights = 3 * 3;
    assert!(d[..weights].iter().all(|&v| v == 0.0));
    assert!(d[weights..].iter().all(|&v| v > 0.0));
}

#[test]
fn two_point_loss_matches_hand_value() {
    let (got, hand) = support::logreg_two_point_loss();
    assert!((got - hand).abs() < 1e-14);
}

proptest! {
    #[test]
    fn diag_ggn_is_nonnegative(seed in 0u64..10_000) {
        let (model, params, batch) = support::random_case(seed);
        prop_assert!(model.diag_ggn(&params, &batch).unwrap().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn finite_difference_check_holds(seed in 100u64..100_000) {
        let (model, params, batch) = support::random_case(seed);
        let err = support::gradient_rel_error(&model, &params, &batch, seed);
        prop_assert!(err < 1e-4, "relative error {:e}", err);
    }
}
