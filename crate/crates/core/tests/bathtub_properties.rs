use proptest::prelude::*;
use thresholdopt::bathtub::{bathtub_oracle, find_threshold, quantitative_gap, selection_size, ThresholdMode};
use thresholdopt::grid::{build_grid, ControlField, DomainSpec, ScalarField};

fn field(values: Vec<f64>) -> ScalarField {
    let g = build_grid(DomainSpec::interval(0.0, 1.0, values.len())).unwrap();
    ScalarField::new(g, values).unwrap()
}

fn small_field() -> impl Strategy<Value = Vec<f64>> {
    (8usize..=12).prop_flat_map(|n| prop::collection::vec(-2.0f64..2.0, n))
}

fn selected_set(q: &ScalarField, v0: f64) -> Vec<usize> {
    find_threshold(q, v0, ThresholdMode::StrictBinary).unwrap().selected()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn strict_threshold_attains_oracle(values in small_field(), v0 in 0.05f64..0.95) {
        let q = field(values);
        let t = find_threshold(&q, v0, ThresholdMode::StrictBinary).unwrap();
        let oracle = bathtub_oracle(&q, v0).unwrap();
        let h = q.grid().cell_measure();
        let got: f64 = t.selected().iter().map(|&k| q.values()[k]).sum::<f64>() * h;
        prop_assert!((got - oracle.binary).abs() <= 1e-12, "{} vs {}", got, oracle.binary);
        prop_assert_eq!(t.selected().len(), selection_size(v0, q.values().len()));
    }

    #[test]
    fn fractional_threshold_attains_oracle(values in small_field(), v0 in 0.05f64..0.95) {
        let q = field(values);
        let t = find_threshold(&q, v0, ThresholdMode::Fractional).unwrap();
        let oracle = bathtub_oracle(&q, v0).unwrap();
        let h = q.grid().cell_measure();
        let got: f64 = t.indicator.values().iter().zip(q.values()).map(|(f, v)| f * v).sum::<f64>() * h;
        prop_assert!((got - oracle.fractional).abs() <= 1e-12);
        prop_assert!((t.achieved_fraction - v0).abs() <= 1e-14);
    }

    #[test]
    fn selection_is_invariant_under_increasing_maps(values in prop::collection::vec(-3.0f64..3.0, 8..80), v0 in 0.05f64..0.95, a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let base = selected_set(&field(values.clone()), v0);
        let exp = selected_set(&field(values.iter().map(|v| v.exp()).collect()), v0);
        let affine = selected_set(&field(values.iter().map(|v| a * v + b).collect()), v0);
        prop_assert_eq!(&base, &exp);
        prop_assert_eq!(&base, &affine);
    }

    #[test]
    fn gap_is_nonnegative(values in prop::collection::vec(-3.0f64..3.0, 8..40), raw in prop::collection::vec(0.0f64..1.0, 40), v0 in 0.1f64..0.9) {
        let q = field(values);
        let n = q.values().len();
        // rescale raw values to the exact volume without leaving [0, 1]
        let raw = &raw[..n];
        let mean = raw.iter().sum::<f64>() / n as f64;
        let f: Vec<f64> = if mean > v0 {
            raw.iter().map(|r| r * v0 / mean).collect()
        } else {
            raw.iter().map(|r| 1.0 - (1.0 - r) * (1.0 - v0) / (1.0 - mean)).collect()
        };
        let f = ControlField::new(q.grid().clone(), f, v0).unwrap();
        let best = find_threshold(&q, v0, ThresholdMode::Fractional).unwrap();
        let gap = quantitative_gap(&q, &f, &best).unwrap();
        prop_assert!(gap.gap >= -1e-12);
    }

    #[test]
    fn gap_vanishes_only_at_the_threshold_set(values in prop::collection::hash_set(-1000i32..1000, 8..30), seed in any::<u64>(), v0 in 0.1f64..0.9) {
        // distinct values: no ties anywhere
        let values: Vec<f64> = values.into_iter().map(|v| v as f64 / 100.0).collect();
        let q = field(values);
        let n = q.values().len();
        let best = find_threshold(&q, v0, ThresholdMode::StrictBinary).unwrap();
        let k = selection_size(v0, n);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        idx.truncate(k);
        let f = ControlField::indicator(q.grid().clone(), &idx, v0).unwrap();
        let gap = quantitative_gap(&q, &f, &best).unwrap();
        prop_assert!(gap.gap >= -1e-12);
        prop_assert_eq!(gap.gap.abs() <= 1e-12, gap.l1 == 0.0);
        let self_gap = quantitative_gap(&q, &best.indicator, &best).unwrap();
        prop_assert_eq!(self_gap.gap, 0.0);
        prop_assert_eq!(self_gap.l1, 0.0);
    }
}
