use orthocp::rng::SeededRng;
use orthocp::synth::{gaussian_tensor, uniform_tensor};
use orthocp::tensor::{contract_all, contract_except, outer};
use orthocp::{build_cp, DenseMatrix, DenseTensor};
use proptest::prelude::*;
use rand::Rng;

fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refold_inverts_unfold(shape in shape_strategy(), seed in any::<u64>()) {
        let a = gaussian_tensor(&shape, seed).unwrap();
        for mode in 0..shape.len() {
            let m = a.unfold(mode).unwrap();
            prop_assert_eq!(m.nrows(), shape[mode]);
            let back = DenseTensor::refold(&m, mode, &shape).unwrap();
            prop_assert_eq!(&back, &a);
        }
    }

    #[test]
    fn unfolding_preserves_norm(shape in shape_strategy(), seed in any::<u64>()) {
        let a = gaussian_tensor(&shape, seed).unwrap();
        for mode in 0..shape.len() {
            let m = a.unfold(mode).unwrap();
            prop_assert!((m.norm_squared() - a.fnorm_sq()).abs() <= 1e-12 * a.fnorm_sq().max(1.0));
        }
    }

    #[test]
    fn contraction_obeys_cauchy_schwarz(shape in shape_strategy(), seed in any::<u64>()) {
        let a = gaussian_tensor(&shape, seed).unwrap();
        let mut rng = SeededRng::new(seed ^ 0x55);
        for mode in 0..shape.len() {
            let u: Vec<f64> = (0..shape[mode]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c = a.contract(mode, &u).unwrap();
            prop_assert_eq!(c.order(), shape.len() - 1);
            prop_assert!(c.fnorm() <= a.fnorm() * norm * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn inner_with_self_is_norm_squared(shape in shape_strategy(), seed in any::<u64>()) {
        let a = gaussian_tensor(&shape, seed).unwrap();
        let ip = a.inner(&a).unwrap();
        prop_assert!((ip - a.fnorm().powi(2)).abs() <= 1e-12 * ip.max(1.0));
    }
}

#[test]
fn unfolding_is_column_major_over_remaining_modes() {
    let shape = [2, 3, 4];
    let a = DenseTensor::from_fn(&shape, |idx| (idx[0] + 10 * idx[1] + 100 * idx[2]) as f64).unwrap();
    let m = a.unfold(1).unwrap();
    // column index = i0 + 2 * i2
    assert_eq!(m[(2, 1 + 2 * 3)], 1.0 + 20.0 + 300.0);
    let m = a.unfold(2).unwrap();
    assert_eq!(m[(3, 1 + 2 * 2)], 1.0 + 20.0 + 300.0);
}

#[test]
fn full_contraction_matches_outer_inner_product() {
    let mut rng = SeededRng::new(3);
    for d in 1..=4 {
        let shape: Vec<usize> = (0..d).map(|_| rng.random_range(1..=5)).collect();
        let a = uniform_tensor(&shape, &mut rng).unwrap();
        let vs: Vec<Vec<f64>> = shape
            .iter()
            .map(|&n| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        let direct = a.inner(&outer(1.0, &refs).unwrap()).unwrap();
        let fast = contract_all(&a, &refs).unwrap();
        assert!((direct - fast).abs() <= 1e-12 * direct.abs().max(1.0));
        for (keep, v) in vs.iter().enumerate() {
            let w = contract_except(&a, &refs, keep).unwrap();
            let via_keep: f64 = w.iter().zip(v).map(|(x, y)| x * y).sum();
            assert!((via_keep - fast).abs() <= 1e-12 * fast.abs().max(1.0));
        }
    }
}

#[test]
fn build_cp_of_single_component_is_outer_product() {
    let u = DenseMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
    let v = DenseMatrix::from_column_slice(3, 1, &[1.0, 0.0, -1.0]);
    let a = build_cp(&[2.0], &[u, v]).unwrap();
    assert_eq!(a.shape(), &[2, 3]);
    assert_eq!(a.get(&[1, 2]), -4.0);
    assert_eq!(a.get(&[0, 1]), 0.0);
}

#[test]
fn shape_errors_are_reported() {
    let a = gaussian_tensor(&[2, 3], 1).unwrap();
    assert!(a.contract(2, &[1.0]).is_err());
    assert!(a.contract(0, &[1.0]).is_err());
    assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    let b = gaussian_tensor(&[3, 2], 1).unwrap();
    assert!(a.inner(&b).is_err());
}
