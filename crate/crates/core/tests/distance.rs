use laml::analysis::cosine_similarity;
use laml::embedding::artic_distance;
use proptest::prelude::*;

fn nonzero(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, len).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..20).prop_flat_map(|n| (nonzero(n), nonzero(n)))
}

#[test]
fn documented_examples() {
    assert_eq!(artic_distance(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), -1.0);
    assert_eq!(artic_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
    assert_eq!(artic_distance(&[2.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn self_distance_is_minus_one(a in (1usize..20).prop_flat_map(nonzero)) {
        prop_assert!((artic_distance(&a, &a).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_bounded((a, b) in pair()) {
        let ab = artic_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, artic_distance(&b, &a).unwrap());
        prop_assert!(ab >= -1.0 - 1e-12);
    }

    #[test]
    fn scaled_self_distance(a in (1usize..20).prop_flat_map(nonzero), c in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64]) {
        let ca: Vec<f64> = a.iter().map(|x| c * x).collect();
        prop_assert!((artic_distance(&ca, &ca).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_scale_invariant((a, b) in pair(), s in 0.1..10.0f64, t in 0.1..10.0f64) {
        let sa: Vec<f64> = a.iter().map(|x| s * x).collect();
        let tb: Vec<f64> = b.iter().map(|x| t * x).collect();
        let c = cosine_similarity(&a, &b).unwrap();
        prop_assert!((cosine_similarity(&sa, &tb).unwrap() - c).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&c));
    }
}
