//! The three criteria, their switch functions and finite-difference derivative checks.
//!
//! | kind | value | sense | switch (thresholded) |
//! |------|-------|-------|----------------------|
//! | Dirichlet energy | `-1/2 int f u_f` | min | `u_f` |
//! | eigenvalue | `lambda(f)` of `-Delta - f` | min | `eta_f` |
//! | non-energetic | `int j(u_f)` | max | adjoint `p_f` |
//!
//! In every case the next iterate selects the cells where the switch field is largest.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate, integrate_slice, ControlField, Grid, ScalarField};
use crate::pde;

/// Convex increasing integrand `j(u)` of the non-energetic criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JSpec {
    /// `j(u) = u^2`
    Quadratic,
    /// `j(u) = e^u - 1 - u`
    Exponential,
    /// `j'` tabulated at ascending nodes and linearly interpolated; `j(0) = 0`.
    Tabulated { nodes: Vec<f64>, slopes: Vec<f64> },
}

impl JSpec {
    pub fn tabulated(nodes: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != slopes.len() {
            return Err(Error::InvalidParameter("tabulated j needs at least two nodes and one slope per node".into()));
        }
        if nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("nodes must start at 0 and increase strictly".into()));
        }
        Ok(JSpec::Tabulated { nodes, slopes })
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            JSpec::Quadratic => u * u,
            JSpec::Exponential => u.exp_m1() - u,
            JSpec::Tabulated { nodes, slopes } => {
                // exact integral of the piecewise linear derivative
                let mut acc = 0.0;
                let (seg, _) = segment(nodes, u);
                for s in 0..seg {
                    acc += 0.5 * (slopes[s] + slopes[s + 1]) * (nodes[s + 1] - nodes[s]);
                }
                let d = self.derivative(u);
                acc + 0.5 * (slopes[seg] + d) * (u - nodes[seg])
            }
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            JSpec::Quadratic => 2.0 * u,
            JSpec::Exponential => u.exp_m1(),
            JSpec::Tabulated { nodes, slopes } => {
                let (seg, _) = segment(nodes, u);
                let t = (u - nodes[seg]) / (nodes[seg + 1] - nodes[seg]);
                slopes[seg] + t * (slopes[seg + 1] - slopes[seg])
            }
        }
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        match self {
            JSpec::Quadratic => 2.0,
            JSpec::Exponential => u.exp(),
            JSpec::Tabulated { nodes, slopes } => {
                let (seg, _) = segment(nodes, u);
                (slopes[seg + 1] - slopes[seg]) / (nodes[seg + 1] - nodes[seg])
            }
        }
    }

    /// Checks `j' > 0` and `j'' > 0` on 100 points of `(0, u_max]`, the range the states can
    /// reach (they are bounded by the torsion function).
    pub fn validate(&self, u_max: f64) -> Result<()> {
        if !(u_max > 0.0) {
            return Err(Error::InvalidParameter(format!("u_max must be positive, got {u_max}")));
        }
        for k in 1..=100 {
            let u = u_max * k as f64 / 100.0;
            let (d1, d2) = (self.derivative(u), self.second_derivative(u));
            if !(d1 > 0.0 && d2 > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "j is not strictly convex and increasing at u = {u} (j' = {d1}, j'' = {d2})"
                )));
            }
        }
        Ok(())
    }
}

/// Index of the segment containing `u` (clamped to the first/last one for extrapolation).
fn segment(nodes: &[f64], u: f64) -> (usize, f64) {
    let last = nodes.len() - 2;
    let seg = match nodes.iter().rposition(|&x| x <= u) {
        Some(s) => s.min(last),
        None => 0,
    };
    (seg, nodes[seg])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "snake_case")]
pub enum ObjectiveKind {
    DirichletEnergy,
    Eigenvalue,
    NonEnergetic { j: JSpec },
}

impl ObjectiveKind {
    pub fn sense(&self) -> Sense {
        match self {
            ObjectiveKind::NonEnergetic { .. } => Sense::Maximize,
            _ => Sense::Minimize,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::DirichletEnergy => "dirichlet",
            ObjectiveKind::Eigenvalue => "eigenvalue",
            ObjectiveKind::NonEnergetic { .. } => "nonenergetic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    /// `u_f`, or `eta_f` for the eigenvalue.
    pub state: ScalarField,
}

/// Value, state and switch field computed together.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub value: f64,
    pub state: ScalarField,
    pub switch: ScalarField,
}

pub fn evaluate(kind: &ObjectiveKind, grid: &Arc<Grid>, f: &ControlField) -> Result<Evaluation> {
    match kind {
        ObjectiveKind::DirichletEnergy => {
            let u = pde::solve_state(grid, f)?;
            let value = -0.5 * integrate(&u, Some(f))?;
            Ok(Evaluation { value, state: u })
        }
        ObjectiveKind::Eigenvalue => {
            let e = pde::principal_eigenpair(grid, f)?;
            Ok(Evaluation { value: e.value, state: e.function })
        }
        ObjectiveKind::NonEnergetic { j } => {
            let u = pde::solve_state(grid, f)?;
            let jv: Vec<f64> = u.values().iter().map(|&v| j.value(v)).collect();
            Ok(Evaluation { value: integrate_slice(grid, &jv), state: u })
        }
    }
}

pub fn switch_field(kind: &ObjectiveKind, grid: &Arc<Grid>, f: &ControlField) -> Result<ScalarField> {
    Ok(analyze(kind, grid, f)?.switch)
}

pub fn analyze(kind: &ObjectiveKind, grid: &Arc<Grid>, f: &ControlField) -> Result<Analysis> {
    let Evaluation { value, state } = evaluate(kind, grid, f)?;
    let switch = match kind {
        ObjectiveKind::NonEnergetic { j } => pde::solve_adjoint(grid, &state, j)?,
        _ => state.clone(),
    };
    Ok(Analysis { value, state, switch })
}

/// Directional derivative `G'(f)[h]` predicted by the switch function.
pub fn predicted_slope(kind: &ObjectiveKind, analysis: &Analysis, h: &[f64]) -> f64 {
    let grid = analysis.switch.grid();
    let q = analysis.switch.values();
    let weighted: Vec<f64> = match kind {
        ObjectiveKind::DirichletEnergy => h.iter().zip(q).map(|(h, u)| -h * u).collect(),
        ObjectiveKind::Eigenvalue => h.iter().zip(q).map(|(h, e)| -h * e * e).collect(),
        ObjectiveKind::NonEnergetic { .. } => h.iter().zip(q).map(|(h, p)| h * p).collect(),
    };
    integrate_slice(grid, &weighted)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientRow {
    pub step: f64,
    pub finite_difference: f64,
    pub mismatch: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub predicted: f64,
    pub rows: Vec<GradientRow>,
    /// `log2(mismatch_k / mismatch_{k+1}) / log2(t_k / t_{k+1})` for consecutive steps.
    pub orders: Vec<f64>,
}

/// Compares forward differences `(G(f + t h) - G(f)) / t` with the switch-function slope.
///
/// `h` must have zero mean and keep `f + t h` inside `[0, 1]` for every step.
pub fn gradient_check(
    kind: &ObjectiveKind,
    grid: &Arc<Grid>,
    f: &ControlField,
    h: &[f64],
    steps: &[f64],
) -> Result<GradientReport> {
    if h.len() != grid.len() {
        return Err(Error::InvalidDirection("direction length differs from the grid".into()));
    }
    let scale: f64 = h.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if h.iter().sum::<f64>().abs() > 1e-10 * scale {
        return Err(Error::InvalidDirection("direction does not have zero mean".into()));
    }
    for &t in steps {
        let bad = f.values().iter().zip(h).any(|(fv, hv)| {
            let v = fv + t * hv;
            !(0.0..=1.0).contains(&v)
        });
        if bad {
            return Err(Error::InvalidDirection(format!("f + {t} h leaves [0,1]")));
        }
    }
    let base = analyze(kind, grid, f)?;
    let predicted = predicted_slope(kind, &base, h);
    let mut rows = Vec::with_capacity(steps.len());
    for &t in steps {
        let values: Vec<f64> = f.values().iter().zip(h).map(|(fv, hv)| fv + t * hv).collect();
        let ft = ControlField::new_unchecked_volume(grid.clone(), values, f.target());
        let gt = evaluate(kind, grid, &ft)?.value;
        let fd = (gt - base.value) / t;
        rows.push(GradientRow { step: t, finite_difference: fd, mismatch: (fd - predicted).abs() });
    }
    let orders =
        rows.windows(2).map(|w| (w[0].mismatch / w[1].mismatch).log2() / (w[0].step / w[1].step).log2()).collect();
    Ok(GradientReport { predicted, rows, orders })
}

/// Discrete Dirichlet integral `int |grad u|^2` summed face by face, with boundary faces
/// using the half-cell distance to the wall.
pub fn dirichlet_form(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let h = grid.h();
    let face = grid.cell_measure() / h; // h^{d-1}
    let v = u.values();
    let mut total = 0.0;
    for (k, &(i, j)) in grid.cells().iter().enumerate() {
        for &(di, dj) in grid.face_offsets() {
            match grid.index(i as isize + di, j as isize + dj) {
                // each interior face once
                Some(nb) if nb > k => total += ((v[nb] - v[k]) / h).powi(2) * h * face,
                Some(_) => {}
                None => total += (v[k] / (0.5 * h)).powi(2) * (0.5 * h) * face,
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use approx::assert_relative_eq;

    #[test]
    fn dirichlet_energy_of_full_control_1d() {
        let g = build_grid(DomainSpec::interval(-1.0, 1.0, 256)).unwrap();
        let one = ControlField::new_unchecked_volume(g.clone(), vec![1.0; g.len()], 0.5);
        let e = evaluate(&ObjectiveKind::DirichletEnergy, &g, &one).unwrap();
        assert!((e.value + 1.0 / 3.0).abs() < 1e-4, "{}", e.value);
    }

    #[test]
    fn eigenvalue_full_control_is_shift() {
        let g = build_grid(DomainSpec::square(1.0, 32)).unwrap();
        let zero = ControlField::new_unchecked_volume(g.clone(), vec![0.0; g.len()], 0.5);
        let one = ControlField::new_unchecked_volume(g.clone(), vec![1.0; g.len()], 0.5);
        let a = evaluate(&ObjectiveKind::Eigenvalue, &g, &zero).unwrap().value;
        let b = evaluate(&ObjectiveKind::Eigenvalue, &g, &one).unwrap().value;
        assert_relative_eq!(a - 1.0, b, epsilon = 1e-9);
    }

    #[test]
    fn nonenergetic_zero_control() {
        let g = build_grid(DomainSpec::square(1.0, 16)).unwrap();
        let zero = ControlField::new_unchecked_volume(g.clone(), vec![0.0; g.len()], 0.5);
        let kind = ObjectiveKind::NonEnergetic { j: JSpec::Quadratic };
        assert_eq!(evaluate(&kind, &g, &zero).unwrap().value, 0.0);
    }

    #[test]
    fn switch_fields() {
        let g = build_grid(DomainSpec::square(1.0, 16)).unwrap();
        let f = ControlField::constant(g.clone(), 0.4).unwrap();
        let s = switch_field(&ObjectiveKind::DirichletEnergy, &g, &f).unwrap();
        assert_eq!(s.values(), pde::solve_state(&g, &f).unwrap().values());

        let zero = ControlField::new_unchecked_volume(g.clone(), vec![0.0; g.len()], 0.5);
        let e0 = switch_field(&ObjectiveKind::Eigenvalue, &g, &zero).unwrap();
        let e = switch_field(&ObjectiveKind::Eigenvalue, &g, &f).unwrap();
        for (a, b) in e0.values().iter().zip(e.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn nonenergetic_switch_closed_form_1d() {
        let g = build_grid(DomainSpec::interval(-1.0, 1.0, 256)).unwrap();
        let one = ControlField::new_unchecked_volume(g.clone(), vec![1.0; g.len()], 0.5);
        let kind = ObjectiveKind::NonEnergetic { j: JSpec::Quadratic };
        let p = switch_field(&kind, &g, &one).unwrap();
        for (c, v) in g.centers().iter().zip(p.values()) {
            let x2 = c[0] * c[0];
            assert!((v - (1.0 - x2) * (5.0 - x2) / 12.0).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_direction_has_zero_mismatch() {
        let g = build_grid(DomainSpec::square(1.0, 16)).unwrap();
        let f = ControlField::constant(g.clone(), 0.5).unwrap();
        let h = vec![0.0; g.len()];
        for kind in [ObjectiveKind::DirichletEnergy, ObjectiveKind::Eigenvalue] {
            let r = gradient_check(&kind, &g, &f, &h, &[1e-2, 5e-3]).unwrap();
            assert!(r.rows.iter().all(|row| row.mismatch == 0.0));
        }
    }

    #[test]
    fn dirichlet_mismatch_is_linear_in_step() {
        let g = build_grid(DomainSpec::square(1.0, 16)).unwrap();
        let f = ControlField::constant(g.clone(), 0.5).unwrap();
        let mut h: Vec<f64> = (0..g.len()).map(|k| if g.cells()[k].0 < 8 { 1.0 } else { -1.0 }).collect();
        h.iter_mut().enumerate().for_each(|(k, v)| *v *= 1.0 + (k % 3) as f64 * 0.0);
        let r = gradient_check(&ObjectiveKind::DirichletEnergy, &g, &f, &h, &[1e-2, 5e-3, 2.5e-3]).unwrap();
        for o in &r.orders {
            assert!((o - 1.0).abs() < 1e-3, "{o}");
        }
    }

    #[test]
    fn rejects_inadmissible_directions() {
        let g = build_grid(DomainSpec::square(1.0, 16)).unwrap();
        let f = ControlField::constant(g.clone(), 0.5).unwrap();
        let h = vec![1.0; g.len()];
        assert!(matches!(
            gradient_check(&ObjectiveKind::DirichletEnergy, &g, &f, &h, &[1e-2]),
            Err(Error::InvalidDirection(_))
        ));
        let mut h = vec![0.0; g.len()];
        h[0] = 100.0;
        h[1] = -100.0;
        assert!(gradient_check(&ObjectiveKind::DirichletEnergy, &g, &f, &h, &[1e-2]).is_err());
    }

    #[test]
    fn energy_identity() {
        let g = build_grid(DomainSpec::disk(1.0, 32)).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|k| ((k * 13) % 7) as f64 / 6.0).collect();
        let f = ControlField::new_unchecked_volume(g.clone(), vals, 0.5);
        let u = pde::solve_state(&g, &f).unwrap();
        let lhs = dirichlet_form(&u);
        let rhs = integrate(&u, Some(&f)).unwrap();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn jspec_derivatives() {
        let e = JSpec::Exponential;
        assert!(e.validate(0.3).is_ok());
        assert_relative_eq!(e.derivative(0.0), 0.0);
        let q = JSpec::Quadratic;
        assert!(q.validate(0.1).is_ok());
        let t = JSpec::tabulated(vec![0.0, 0.1, 0.2], vec![0.0, 0.2, 0.5]).unwrap();
        assert!(t.validate(0.3).is_ok());
        assert_relative_eq!(t.value(0.1), 0.01, epsilon = 1e-15);
        assert_relative_eq!(t.derivative(0.15), 0.35, epsilon = 1e-15);
        assert_relative_eq!(t.second_derivative(0.15), 3.0, epsilon = 1e-12);
        // finite-difference consistency of the tabulated antiderivative
        let d = (t.value(0.1501) - t.value(0.1499)) / 2e-4;
        assert_relative_eq!(d, t.derivative(0.15), epsilon = 1e-8);
        let concave = JSpec::tabulated(vec![0.0, 0.1, 0.2], vec![0.5, 0.4, 0.3]).unwrap();
        assert!(concave.validate(0.2).is_err());
        assert!(JSpec::tabulated(vec![0.1, 0.2], vec![1.0, 2.0]).is_err());
    }
}
