//! Built-in analytic checks. Checks that need a fine grid are skipped on coarse ones.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thresholdopt::bathtub::{bathtub_oracle, find_threshold, ThresholdMode};
use thresholdopt::grid::{build_grid, ControlField, DomainSpec, ScalarField};
use thresholdopt::pde::{principal_eigenpair, solve_state, torsion};
use thresholdopt::stability::{stability_of, StabilityOptions};

use crate::args::ValidateArgs;
use crate::exit::{CliError, ExitCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

impl Check {
    fn compare(name: impl Into<String>, measured: f64, expected: f64, tol: f64) -> Self {
        let ok = (measured - expected).abs() <= tol;
        Self {
            name: name.into(),
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
            detail: format!("measured {measured:.10e}, expected {expected:.10e}, tolerance {tol:e}"),
        }
    }

    fn skip(name: impl Into<String>, why: impl Into<String>) -> Self {
        Self { name: name.into(), outcome: Outcome::Skip, detail: why.into() }
    }

    fn error(name: impl Into<String>, e: impl std::fmt::Display) -> Self {
        Self { name: name.into(), outcome: Outcome::Fail, detail: format!("error: {e}") }
    }
}

type Res<T> = thresholdopt::Result<T>;

/// Smallest resolution for grid-convergence checks.
const CONVERGENCE_MIN_N: usize = 32;
/// Smallest resolution for the interval Steklov benchmark.
const STEKLOV_MIN_N: usize = 256;

fn torsion_1d(n: usize) -> Res<(f64, f64)> {
    let g = build_grid(DomainSpec::interval(-1.0, 1.0, n))?;
    let w = torsion(&g)?;
    let h = g.h();
    let mut discrete: f64 = 0.0;
    let mut continuum: f64 = 0.0;
    for (c, v) in g.centers().iter().zip(w.values()) {
        let exact = (1.0 - c[0] * c[0]) / 2.0;
        discrete = discrete.max((v - exact - h * h / 8.0).abs());
        continuum = continuum.max((v - exact).abs());
    }
    Ok((discrete, continuum))
}

fn eigen_square(n: usize, c: f64) -> Res<f64> {
    let g = build_grid(DomainSpec::square(1.0, n))?;
    let f = ControlField::constant(g.clone(), c)?;
    Ok(principal_eigenpair(&g, &f)?.value)
}

fn steklov_1d(n: usize, eps: f64) -> Res<f64> {
    let g = build_grid(DomainSpec::interval(-1.0, 1.0, n))?;
    let sel: Vec<usize> = (0..n).filter(|&k| g.centers()[k][0].abs() < 1.0 - eps / 2.0).collect();
    let f = ControlField::indicator(g.clone(), &sel, sel.len() as f64 / n as f64)?;
    let u = solve_state(&g, &f)?;
    Ok(stability_of(&u, 1.0 - eps / 2.0, &StabilityOptions::default())?.lambda0)
}

fn bathtub_cases() -> Res<usize> {
    // ties are intended here, so the flat-field warnings are muted
    let level = log::max_level();
    log::set_max_level(log::LevelFilter::Error);
    let result = bathtub_mismatches();
    log::set_max_level(level);
    result
}

fn bathtub_mismatches() -> Res<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.gen_range(8..=12);
        let g = build_grid(DomainSpec::interval(0.0, 1.0, n))?;
        // a coarse value set makes ties common
        let values = (0..n).map(|_| rng.gen_range(-4..=4) as f64 / 2.0).collect();
        let q = ScalarField::new(g.clone(), values)?;
        let v0 = rng.gen_range(0.05..0.95);
        let t = find_threshold(&q, v0, ThresholdMode::StrictBinary)?;
        let got: f64 = t.selected().iter().map(|&k| q.values()[k]).sum::<f64>() * g.cell_measure();
        if got != bathtub_oracle(&q, v0)?.binary {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

pub fn checks(n: usize) -> Vec<Check> {
    let mut out = Vec::new();

    let name = format!("torsion-1d-discrete n={n}");
    out.push(match torsion_1d(n) {
        Ok((d, _)) => Check::compare(name, d, 0.0, 1e-9),
        Err(e) => Check::error(name, e),
    });
    let name = "torsion-1d-order";
    out.push(if n < CONVERGENCE_MIN_N {
        Check::skip(name, format!("needs n >= {CONVERGENCE_MIN_N}"))
    } else {
        match (torsion_1d(n), torsion_1d(2 * n)) {
            (Ok((_, a)), Ok((_, b))) => Check::compare(format!("{name} n={n}->{}", 2 * n), (a / b).log2(), 2.0, 0.1),
            (Err(e), _) | (_, Err(e)) => Check::error(name, e),
        }
    });

    let m = n.clamp(8, 64);
    let name = format!("eigenvalue-shift square n={m}");
    out.push(match (eigen_square(m, 0.25), eigen_square(m, 0.75)) {
        (Ok(a), Ok(b)) => Check::compare(name, b, a - 0.5, 1e-9),
        (Err(e), _) | (_, Err(e)) => Check::error(name, e),
    });
    let name = format!("eigenvalue-discrete square n={m}");
    let h = 1.0 / m as f64;
    let exact = 8.0 / (h * h) * (PI * h / 2.0).sin().powi(2) - 0.25;
    out.push(match eigen_square(m, 0.25) {
        Ok(l) => Check::compare(name, l, exact, 1e-6 * exact),
        Err(e) => Check::error(name, e),
    });
    let name = "eigenvalue-continuum square";
    out.push(if n < 64 {
        Check::skip(name, "needs n >= 64")
    } else {
        let target = 2.0 * PI * PI - 0.25;
        match eigen_square(64, 0.25) {
            Ok(l) => Check::compare(format!("{name} n=64"), l, target, 0.005 * (target + 0.25)),
            Err(e) => Check::error(name, e),
        }
    });

    for eps in [0.05, 0.1, 0.2] {
        let name = format!("steklov-1d eps={eps}");
        out.push(if n < STEKLOV_MIN_N {
            Check::skip(name, format!("needs n >= {STEKLOV_MIN_N}"))
        } else {
            match steklov_1d(n, eps) {
                Ok(l) => Check::compare(format!("{name} n={n}"), l, 2.0 / eps, 0.1 * 2.0 / eps),
                Err(e) => Check::error(name, e),
            }
        });
    }

    let name = "bathtub-oracle 200 fields";
    out.push(match bathtub_cases() {
        Ok(bad) => Check::compare(name, bad as f64, 0.0, 0.0),
        Err(e) => Check::error(name, e),
    });
    out
}

pub fn validate(args: &ValidateArgs) -> Result<ExitCode, CliError> {
    if args.n < thresholdopt::grid::MIN_RESOLUTION {
        return Err(CliError::usage(format!("--n must be at least {}", thresholdopt::grid::MIN_RESOLUTION)));
    }
    let checks = checks(args.n);
    for c in &checks {
        let tag = match c.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        };
        println!("{tag} {}: {}", c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| c.outcome == Outcome::Fail).count();
    println!("{failed} failed, {} checks", checks.len());
    Ok(if failed == 0 { ExitCode::Ok } else { ExitCode::Solver })
}
