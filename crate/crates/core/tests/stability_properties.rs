use proptest::prelude::*;
use thresholdopt::grid::{build_grid, ControlField, DomainSpec, ScalarField};
use thresholdopt::io::coercivity_csv;
use thresholdopt::objectives::ObjectiveKind;
use thresholdopt::pde::{solve_state, torsion};
use thresholdopt::stability::{coercivity_profile, critical_curve, stability_of, StabilityOptions};

/// Optimal interval control `(-1 + eps/2, 1 - eps/2)` and its state.
fn interval_state(n: usize, eps: f64) -> ScalarField {
    let g = build_grid(DomainSpec::interval(-1.0, 1.0, n)).unwrap();
    let sel: Vec<usize> = (0..n).filter(|&k| g.centers()[k][0].abs() < 1.0 - eps / 2.0).collect();
    let f = ControlField::indicator(g.clone(), &sel, sel.len() as f64 / n as f64).unwrap();
    solve_state(&g, &f).unwrap()
}

#[test]
fn interval_estimate_is_stable_under_refinement() {
    for eps in [0.05, 0.1, 0.2] {
        let v0 = 1.0 - eps / 2.0;
        let coarse = stability_of(&interval_state(512, eps), v0, &StabilityOptions::default()).unwrap();
        let fine = stability_of(&interval_state(1024, eps), v0, &StabilityOptions::default()).unwrap();
        let change = (fine.lambda0 - coarse.lambda0).abs() / coarse.lambda0;
        assert!(change < 0.1, "eps {eps}: {} -> {}", coarse.lambda0, fine.lambda0);
        assert!(coarse.stable && fine.stable);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rho_is_positive_and_bounded(v0 in 0.6f64..0.95, n in 16usize..40) {
        let g = build_grid(DomainSpec::disk(1.0, n)).unwrap();
        let w = torsion(&g).unwrap();
        let c = critical_curve(&w, v0).unwrap();
        let (lo, hi) = c.rho_range();
        prop_assert!(lo > 0.0 && hi.is_finite());
        prop_assert!(c.points.iter().all(|p| p.weight > 0.0));
    }

    #[test]
    fn principal_mode_has_one_sign_on_the_curve(v0 in 0.7f64..0.95, n in 16usize..32) {
        let g = build_grid(DomainSpec::square(1.0, n)).unwrap();
        let w = torsion(&g).unwrap();
        let c = critical_curve(&w, v0).unwrap();
        let r = thresholdopt::stability::steklov_lambda0(&g, &c, &StabilityOptions::default()).unwrap();
        let on_curve: Vec<f64> = c.points.iter().map(|p| p.interpolate(&r.eigenvectors[0])).collect();
        prop_assert!(on_curve.iter().all(|&x| x > 0.0) || on_curve.iter().all(|&x| x < 0.0));
        prop_assert_eq!(r.coercivity_bound, 1.0 - 1.0 / r.lambda0);
        prop_assert_eq!(r.stable, r.lambda0 > 1.0);
    }
}

#[test]
fn profile_rows_match_their_csv() {
    let rows = coercivity_profile(
        &ObjectiveKind::DirichletEnergy,
        DomainSpec::square(1.0, 24),
        &[0.8, 0.9],
        &StabilityOptions::default(),
    );
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.lambda0.is_some() && r.status == "converged"));
    let csv = coercivity_csv(&rows);
    assert_eq!(csv, coercivity_csv(&rows));
    assert_eq!(csv.lines().count(), 3);
}
