use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thresholdopt::bathtub::{find_threshold, selection_size, ThresholdMode};
use thresholdopt::grid::{build_grid, integrate, ControlField, DomainSpec, Grid};
use thresholdopt::objectives::{analyze, dirichlet_form, evaluate, JSpec, ObjectiveKind};
use thresholdopt::pde::{principal_eigenpair, solve_state, torsion};

const V0: f64 = 0.6;

fn grid() -> Arc<Grid> {
    build_grid(DomainSpec::square(1.0, 12)).unwrap()
}

/// `s 1_A + (1 - s) V0` for a random set `A` of `round(V0 N)` cells.
fn random_control(grid: &Arc<Grid>, seed: u64, s: f64) -> ControlField {
    let n = grid.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut values = vec![(1.0 - s) * V0; n];
    for &k in &idx[..selection_size(V0, n)] {
        values[k] += s;
    }
    ControlField::new(grid.clone(), values, V0).unwrap()
}

fn mix(t: f64, f: &ControlField, g: &ControlField) -> ControlField {
    let v = f.values().iter().zip(g.values()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    ControlField::new(f.grid().clone(), v, V0).unwrap()
}

fn kinds() -> Vec<ObjectiveKind> {
    vec![
        ObjectiveKind::DirichletEnergy,
        ObjectiveKind::Eigenvalue,
        ObjectiveKind::NonEnergetic { j: JSpec::Quadratic },
        ObjectiveKind::NonEnergetic { j: JSpec::Exponential },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn objectives_have_the_right_curvature_on_segments(s1 in any::<u64>(), s2 in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let g = grid();
        let (f, h) = (random_control(&g, s1, a), random_control(&g, s2, b));
        for kind in kinds() {
            let gf = evaluate(&kind, &g, &f).unwrap().value;
            let gh = evaluate(&kind, &g, &h).unwrap().value;
            for t in [0.25, 0.5, 0.75] {
                let mid = evaluate(&kind, &g, &mix(t, &f, &h)).unwrap().value;
                let chord = t * gf + (1.0 - t) * gh;
                match kind {
                    ObjectiveKind::NonEnergetic { .. } => prop_assert!(mid <= chord + 1e-10, "{} convex: {} > {}", kind.name(), mid, chord),
                    _ => prop_assert!(mid >= chord - 1e-10, "{} concave: {} < {}", kind.name(), mid, chord),
                }
            }
        }
    }

    #[test]
    fn first_order_dominance(s1 in any::<u64>(), s2 in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let g = grid();
        let (f, h) = (random_control(&g, s1, a), random_control(&g, s2, b));
        for kind in [ObjectiveKind::DirichletEnergy, ObjectiveKind::Eigenvalue] {
            let base = analyze(&kind, &g, &f).unwrap();
            let gh = evaluate(&kind, &g, &h).unwrap().value;
            let diff: Vec<f64> = h.values().iter().zip(f.values()).map(|(x, y)| x - y).collect();
            let q: Vec<f64> = match kind {
                ObjectiveKind::Eigenvalue => base.switch.values().iter().map(|e| e * e).collect(),
                _ => base.switch.values().to_vec(),
            };
            let lin = -q.iter().zip(&diff).map(|(q, d)| q * d).sum::<f64>() * g.cell_measure();
            prop_assert!(gh - base.value <= lin + 1e-9, "{}: {} > {}", kind.name(), gh - base.value, lin);
        }
    }

    #[test]
    fn energy_identity_holds(s in any::<u64>(), a in 0.0f64..=1.0) {
        let g = build_grid(DomainSpec::disk(1.0, 16)).unwrap();
        let n = g.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
        let mut values = vec![(1.0 - a) * V0; n];
        for &k in &idx[..selection_size(V0, n)] {
            values[k] += a;
        }
        let f = ControlField::new(g.clone(), values, V0).unwrap();
        let u = solve_state(&g, &f).unwrap();
        let lhs = dirichlet_form(&u);
        let rhs = integrate(&u, Some(&f)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn states_lie_below_torsion(s in any::<u64>(), a in 0.0f64..=1.0) {
        let g = grid();
        let f = random_control(&g, s, a);
        let w = torsion(&g).unwrap();
        let u = solve_state(&g, &f).unwrap();
        prop_assert!(u.values().iter().zip(w.values()).all(|(u, w)| *u <= w + 1e-9));
    }

    #[test]
    fn eigen_shift_identity(s in any::<u64>(), a in 0.0f64..=1.0, c in 0.0f64..0.2) {
        let g = grid();
        let f = random_control(&g, s, 0.5 * a);
        // f <= 0.8, so f + c stays in [0, 1]
        let shifted_values: Vec<f64> = f.values().iter().map(|v| v + c).collect();
        let shifted = ControlField::new(g.clone(), shifted_values, V0 + c).unwrap();
        let l0 = principal_eigenpair(&g, &f).unwrap().value;
        let l1 = principal_eigenpair(&g, &shifted).unwrap().value;
        prop_assert!((l1 - (l0 - c)).abs() <= 1e-9, "{} vs {}", l1, l0 - c);
    }
}

#[test]
fn zero_control_eigenvalue_on_square() {
    let g = build_grid(DomainSpec::square(1.0, 64)).unwrap();
    let n = g.len();
    // a tiny uniform control; the shift identity removes it exactly
    let f = ControlField::new(g.clone(), vec![1e-3; n], 1e-3).unwrap();
    let lambda = principal_eigenpair(&g, &f).unwrap().value + 1e-3;
    assert!((lambda - 19.73).abs() <= 0.1, "{lambda}");
}

#[test]
fn optimal_states_approach_torsion_as_volume_grows() {
    let g = build_grid(DomainSpec::square(1.0, 64)).unwrap();
    let w = torsion(&g).unwrap();
    let mut last = f64::INFINITY;
    for v0 in [0.7, 0.8, 0.9, 0.95] {
        // the energy-optimal control selects the largest torsion values when V0 is close to 1
        let best = find_threshold(&w, v0, ThresholdMode::StrictBinary).unwrap();
        let outcome = thresholdopt::threshold_loop::run_from(
            &thresholdopt::threshold_loop::RunConfig::new(ObjectiveKind::DirichletEnergy, *g.spec(), v0),
            &g,
            best.indicator,
        )
        .unwrap();
        let u = &outcome.final_analysis.state;
        let err = u.values().iter().zip(w.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < last, "V0 = {v0}: {err} not below {last}");
        last = err;
    }
}
