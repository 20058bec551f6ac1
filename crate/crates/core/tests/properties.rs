use proptest::prelude::*;
use sbmeter_core::models::beta_relu;
use sbmeter_core::ndnum::{dft2, idft2};
use sbmeter_core::sbmetrics::{argmax, total_variation, PathLogits};
use sbmeter_core::spectral::{band_component, decompose, lambda_grid};
use sbmeter_core::{BandRange, BandSpec, ImageTensor, PairId};

fn image(max_side: usize) -> impl Strategy<Value = ImageTensor> {
    (1usize..=2, 2usize..=max_side, 2usize..=max_side).prop_flat_map(|(c, h, w)| {
        prop::collection::vec(-1.0f64..1.0, c * h * w).prop_map(move |d| ImageTensor::new(c, h, w, d).unwrap())
    })
}

fn image_pair(max_side: usize) -> impl Strategy<Value = (ImageTensor, ImageTensor)> {
    (1usize..=2, 2usize..=max_side, 2usize..=max_side).prop_flat_map(|(c, h, w)| {
        let n = c * h * w;
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
            .prop_map(move |(a, b)| {
                (
                    ImageTensor::new(c, h, w, a).unwrap(),
                    ImageTensor::new(c, h, w, b).unwrap(),
                )
            })
    })
}

fn thresholds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..99, 0..4).prop_map(|s| s.into_iter().map(|v| f64::from(v) / 100.0).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_roundtrip(x in image(12)) {
        let (_, h, w) = x.shape();
        let back = idft2(&dft2(h, w, x.channel(0)).unwrap());
        for (a, b) in back.iter().zip(x.channel(0)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn band_component_is_linear((x, y) in image_pair(10), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let band = BandRange::new(0.25, 0.8).unwrap();
        let lhs = band_component(&x.axpby(a, &y, b).unwrap(), band).unwrap();
        let rhs = band_component(&x, band).unwrap().axpby(a, &band_component(&y, band).unwrap(), b).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-9);
    }

    #[test]
    fn bands_partition_and_are_orthogonal(x in image(12), t in thresholds()) {
        let spec = BandSpec::from_thresholds(&t).unwrap();
        let parts = decompose(&x, &spec).unwrap();
        let mut sum = ImageTensor::zeros(x.channels(), x.height(), x.width());
        for p in &parts {
            sum = sum.add(p).unwrap();
        }
        prop_assert!(sum.max_abs_diff(&x).unwrap() <= 1e-9);
        let scale = x.l2_norm().powi(2).max(1e-300);
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                prop_assert!(parts[i].dot(&parts[j]).unwrap().abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn band_component_is_idempotent(x in image(10), lo in 0.0f64..0.5, width in 0.1f64..0.6) {
        let band = BandRange::new(lo, (lo + width).min(1.0)).unwrap();
        let once = band_component(&x, band).unwrap();
        let twice = band_component(&once, band).unwrap();
        prop_assert!(once.max_abs_diff(&twice).unwrap() <= 1e-9);
    }

    // Refining the λ grid can only increase the total variation of a sampled curve.
    #[test]
    fn tv_grows_under_refinement(coeffs in prop::collection::vec(-2.0f64..2.0, 1..5), n in 2usize..8) {
        let f = |l: f64| coeffs.iter().enumerate().map(|(k, c)| c * (5.0 * l).powi(k as i32).sin()).sum::<f64>();
        let path = |m: usize| {
            let lambdas = lambda_grid(m).unwrap();
            let logits = lambdas.iter().map(|&l| vec![f(l)]).collect();
            PathLogits::new(lambdas, logits, 0, PairId::default(), "full", 1.0).unwrap()
        };
        let coarse = total_variation(&path(n), 0);
        let fine = total_variation(&path(2 * n - 1), 0);
        prop_assert!(fine >= coarse - 1e-12);
    }

    #[test]
    fn tv_is_absolutely_homogeneous(vals in prop::collection::vec(-5.0f64..5.0, 2..10), c in -4.0f64..4.0) {
        let n = vals.len();
        let mk = |s: f64| {
            let logits = vals.iter().map(|v| vec![s * v]).collect();
            PathLogits::new(lambda_grid(n).unwrap(), logits, 0, PairId::default(), "full", 1.0).unwrap()
        };
        let base = total_variation(&mk(1.0), 0);
        prop_assert!((total_variation(&mk(c), 0) - c.abs() * base).abs() <= 1e-9 * (1.0 + base));
    }

    #[test]
    fn argmax_is_scale_invariant(vals in prop::collection::vec(-10.0f64..10.0, 1..8), s in 0.01f64..100.0) {
        let scaled: Vec<f64> = vals.iter().map(|v| v * s).collect();
        prop_assert_eq!(argmax(&vals), argmax(&scaled));
    }

    #[test]
    fn beta_relu_brackets(x in -50.0f64..50.0, beta in 0.05f64..1.0) {
        let y = beta_relu(x, beta).unwrap();
        prop_assert!(y.is_finite());
        prop_assert!(y >= x.min(0.0) - 1e-12);
    }
}
