use approx::assert_relative_eq;
use proptest::prelude::*;
use thresholdopt::grid::{build_grid, integrate, l1_distance, ControlField, DomainSpec, ScalarField};

fn control(values: Vec<f64>, grid: &std::sync::Arc<thresholdopt::grid::Grid>) -> ControlField {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    ControlField::new(grid.clone(), values, mean.clamp(1e-3, 1.0 - 1e-3)).unwrap()
}

fn unit_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..0.99, n)
}

proptest! {
    #[test]
    fn l1_is_a_metric(a in unit_values(16), b in unit_values(16), c in unit_values(16)) {
        let g16 = build_grid(DomainSpec::interval(0.0, 2.0, 16)).unwrap();
        let (f, k, m) = (control(a, &g16), control(b, &g16), control(c, &g16));
        let fk = l1_distance(&f, &k).unwrap();
        prop_assert_eq!(fk, l1_distance(&k, &f).unwrap());
        prop_assert_eq!(l1_distance(&f, &f).unwrap(), 0.0);
        let km = l1_distance(&k, &m).unwrap();
        let fm = l1_distance(&f, &m).unwrap();
        prop_assert!(fm <= fk + km + 1e-15);
    }

    #[test]
    fn integrate_is_linear(
        phi in prop::collection::vec(-5.0f64..5.0, 64),
        psi in prop::collection::vec(-5.0f64..5.0, 64),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let g = build_grid(DomainSpec::square(1.0, 8)).unwrap();
        let combo: Vec<f64> = phi.iter().zip(&psi).map(|(p, q)| a * p + b * q).collect();
        let ip = integrate(&ScalarField::new(g.clone(), phi).unwrap(), None).unwrap();
        let iq = integrate(&ScalarField::new(g.clone(), psi).unwrap(), None).unwrap();
        let ic = integrate(&ScalarField::new(g, combo).unwrap(), None).unwrap();
        prop_assert!((ic - (a * ip + b * iq)).abs() <= 1e-12 * (1.0 + ip.abs() + iq.abs()) * (1.0 + a.abs() + b.abs()));
    }
}

#[test]
fn disk_area_error_halves_under_refinement() {
    let err = |n| (build_grid(DomainSpec::disk(1.0, n)).unwrap().total_measure() - std::f64::consts::PI).abs();
    let (e64, e128) = (err(64), err(128));
    let ratio = e64 / e128;
    assert!((1.4..=2.6).contains(&ratio), "ratio {ratio} ({e64:e} -> {e128:e})");
}

#[test]
fn cell_measure_times_count_is_total() {
    for spec in [DomainSpec::interval(-1.0, 1.0, 10), DomainSpec::square(2.0, 12), DomainSpec::disk(0.5, 17)] {
        let g = build_grid(spec).unwrap();
        assert_relative_eq!(g.total_measure(), g.len() as f64 * g.cell_measure(), max_relative = 1e-15);
        let ones = ScalarField::constant(g.clone(), 1.0);
        assert_relative_eq!(integrate(&ones, None).unwrap(), g.total_measure(), max_relative = 1e-14);
    }
}
