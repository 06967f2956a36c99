mod support;

use proptest::prelude::*;
use relaxbayes::nn::{Batch, ModelSpec};
use relaxbayes::optim::{step, step_msharp, Noise, OptimizerConfig, OptimizerKind, OptimizerState};

#[test]
fn bsam_single_step_matches_hand_trace() {
    let err = support::bsam_single_step_error();
    assert!(err < 1e-12, "max deviation {err:e}");
}

#[test]
fn two_split_msharp_matches_hand_trace() {
    let err = support::msharp_two_split_error();
    assert!(err < 1e-12, "max deviation {err:e}");
}

#[test]
fn one_split_msharp_is_bit_identical_to_step() {
    assert!(support::m1_identity_holds());
}

#[test]
fn zero_radius_reductions() {
    assert!(support::rho_zero_reductions_hold());
}

#[test]
fn adam_matches_reference_recurrence() {
    let err = support::adam_five_step_error();
    assert!(err < 1e-12, "max deviation {err:e}");
}

#[test]
fn stream_noise_is_reproducible() {
    let (model, params, batch) = support::random_case(7);
    let cfg = OptimizerConfig { n_train: 50, seed: 9, ..OptimizerConfig::new(OptimizerKind::Bsam) };
    let run = || {
        let mut st = OptimizerState::new(cfg.kind, params.clone());
        for _ in 0..5 {
            step(&cfg, &mut st, &model, &batch, &Noise::Stream).unwrap();
        }
        st
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn msharp_averages_split_gradients_without_noise(seed in 0u64..500) {
        // With no noise and no radius, the m-split gradient is the mean of the split gradients,
        // which for equal splits is the full-batch gradient.
        let model = ModelSpec::logreg(3, 3).unwrap();
        let (_, params, _) = support::random_case(seed * 3);
        let params: Vec<f64> = params.iter().cycle().take(model.num_params()).copied().collect();
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64).sin(), (seed as f64 + i as f64).cos(), 0.3]).collect();
        let batch = Batch::from_rows(&rows, (0..8).map(|i| i % 3).collect(), 3).unwrap();
        let cfg = OptimizerConfig {
            noisy_linearization: false,
            rho: 0.0,
            m: 4,
            ..OptimizerConfig::new(OptimizerKind::Bsam)
        };
        let mut st = OptimizerState::new(cfg.kind, params.clone());
        let info = step_msharp(&cfg, &mut st, &model, &batch, &Noise::Stream).unwrap();
        let full = model.grad(&params, &batch).unwrap();
        for (a, b) in info.g.iter().zip(&full) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}
