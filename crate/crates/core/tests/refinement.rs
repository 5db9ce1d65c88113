use orthocp::als::StopReason;
use orthocp::metrics::{relative_error, Matching};
use orthocp::synth::{gaussian_tensor, random_factor_set, structured_tensor};
use orthocp::{approximate, refine, AlsConfig, ApproxConfig, StructuredSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn residual_never_increases(t in 1usize..4, rank in 1usize..4, seed in any::<u64>()) {
        let shape = [5usize, 4, 6];
        let a = gaussian_tensor(&shape, seed).unwrap();
        let init = random_factor_set(&shape, rank, t, seed ^ 7).unwrap();
        let (out, trace) = refine(&a, &init, &AlsConfig::default()).unwrap();
        out.validate().unwrap();
        prop_assert!(trace.residuals.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        prop_assert_eq!(trace.residuals.len(), trace.iterations + 1);
        prop_assert_eq!(trace.changes.len(), trace.iterations);
        let sigma_sq: f64 = out.sigmas().iter().map(|s| s * s).sum();
        let last = *trace.residuals.last().unwrap();
        let coupled = a.fnorm_sq() - sigma_sq;
        prop_assert!((last * last - coupled).abs() <= 1e-8 * a.fnorm_sq());
    }
}

#[test]
fn stopping_rule_is_honored() {
    let a = gaussian_tensor(&[6, 5, 4], 3).unwrap();
    let init = random_factor_set(&[6, 5, 4], 3, 2, 4).unwrap();
    let cfg = AlsConfig::default();
    let (_, trace) = refine(&a, &init, &cfg).unwrap();
    match trace.stop {
        StopReason::Converged => {
            assert!(*trace.changes.last().unwrap() <= cfg.rel_change_tol);
            assert!(trace.changes[..trace.iterations - 1]
                .iter()
                .all(|&c| c > cfg.rel_change_tol));
        }
        StopReason::MaxIters => assert_eq!(trace.iterations, cfg.max_iters),
    }

    let capped = AlsConfig {
        max_iters: 3,
        rel_change_tol: 1e-300,
        ..AlsConfig::default()
    };
    let (_, trace) = refine(&a, &init, &capped).unwrap();
    assert_eq!(trace.iterations, 3);
    assert_eq!(trace.stop, StopReason::MaxIters);
}

#[test]
fn exact_factors_are_a_fixed_point() {
    let spec = StructuredSpec::new(&[6, 6, 6], 3, 2, 0.0, 12).exact();
    let (a, truth) = structured_tensor(&spec).unwrap();
    let (out, trace) = refine(&a, &truth.factors, &AlsConfig::default()).unwrap();
    assert_eq!(trace.iterations, 1);
    assert!(*trace.residuals.last().unwrap() <= 1e-10);
    assert!(relative_error(&truth.factors, &out, Matching::PerMode).unwrap() <= 1e-10);
}

#[test]
fn refinement_improves_noisy_initializers() {
    let mut improved = 0;
    for s in 0..10u64 {
        let spec = StructuredSpec::new(&[8, 8, 8], 3, 3, 0.1, 500 + s);
        let (a, truth) = structured_tensor(&spec).unwrap();
        let init = approximate(&a, &ApproxConfig::new(3, 3).with_seed(s)).unwrap().factors;
        let (out, _) = refine(&a, &init, &AlsConfig::default()).unwrap();
        let before = relative_error(&truth.factors, &init, Matching::PerMode).unwrap();
        let after = relative_error(&truth.factors, &out, Matching::PerMode).unwrap();
        if after <= before {
            improved += 1;
        }
    }
    assert!(improved >= 9, "{improved}/10");
}

#[test]
fn bad_inputs_are_rejected() {
    let a = gaussian_tensor(&[4, 4, 4], 1).unwrap();
    let init = random_factor_set(&[4, 4, 5], 2, 2, 1).unwrap();
    assert!(refine(&a, &init, &AlsConfig::default()).is_err());
    let init = random_factor_set(&[4, 4, 4], 2, 2, 1).unwrap();
    let bad = AlsConfig {
        rel_change_tol: 0.0,
        ..AlsConfig::default()
    };
    assert!(refine(&a, &init, &bad).is_err());
    let bad = AlsConfig {
        max_iters: 0,
        ..AlsConfig::default()
    };
    assert!(refine(&a, &init, &bad).is_err());
}
