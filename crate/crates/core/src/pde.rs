//! State, torsion, eigenpair and adjoint solves on a [`Grid`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ControlField, Grid, ScalarField};
use crate::linalg::{cg_cap, cg_solve, smallest_eigenpair, EigenOptions, DEFAULT_CG_TOL};
use crate::objectives::JSpec;

/// Shift for the inverse iteration on `-Delta - f`. With `0 <= f <= 1` the shifted operator
/// has spectrum above `1`.
pub const EIGEN_SHIFT: f64 = -2.0;

/// Principal eigenpair `(lambda(f), eta_f)` of `-Delta - f`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Strictly positive, `int eta^2 = 1`.
    pub function: ScalarField,
    pub residual: f64,
}

fn ensure_grid(grid: &Arc<Grid>, other: &Arc<Grid>) -> Result<()> {
    if grid.same_as(other) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Solves `-Delta u = rhs` with homogeneous Dirichlet data.
pub fn solve_poisson(grid: &Arc<Grid>, rhs: &[f64]) -> Result<ScalarField> {
    assert_eq!(rhs.len(), grid.len());
    let sol = cg_solve(grid.laplacian(), rhs, DEFAULT_CG_TOL, cg_cap(grid.len()))?;
    ScalarField::new(grid.clone(), sol.x)
}

/// The state `u_f`: `-Delta u_f = f`, `u_f = 0` on the boundary.
pub fn solve_state(grid: &Arc<Grid>, f: &ControlField) -> Result<ScalarField> {
    ensure_grid(grid, f.grid())?;
    solve_poisson(grid, f.values())
}

/// Torsion function `w`, i.e. the state for `f = 1`. Computed once per grid.
pub fn torsion(grid: &Arc<Grid>) -> Result<ScalarField> {
    let cache = grid.torsion_cache();
    if let Some(values) = cache.get() {
        return ScalarField::new(grid.clone(), values.clone());
    }
    let w = solve_poisson(grid, &vec![1.0; grid.len()])?;
    // a concurrent fill computes the same vector
    let values = cache.get_or_init(|| w.values().to_vec());
    ScalarField::new(grid.clone(), values.clone())
}

/// Principal eigenpair of the discrete `-Delta - f`.
pub fn principal_eigenpair(grid: &Arc<Grid>, f: &ControlField) -> Result<EigenPair> {
    ensure_grid(grid, f.grid())?;
    let weights: Vec<f64> = f.values().iter().map(|v| -v).collect();
    let op = grid.laplacian().add_diagonal(&weights);
    let eig = smallest_eigenpair(&op, EIGEN_SHIFT, &EigenOptions::default())?;
    let mut v = eig.vector;
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let negative = v.iter().filter(|&&x| x <= 0.0).count();
    if negative > 0 {
        return Err(Error::Positivity { negative });
    }
    let scale = 1.0 / grid.cell_measure().sqrt();
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(EigenPair { value: eig.value, function: ScalarField::new(grid.clone(), v)?, residual: eig.residual })
}

/// Adjoint `p_f`: `-Delta p = d_u j(u)` with the state `u` evaluated at cell centers.
pub fn solve_adjoint(grid: &Arc<Grid>, u: &ScalarField, j: &JSpec) -> Result<ScalarField> {
    ensure_grid(grid, u.grid())?;
    let rhs: Vec<f64> = u.values().iter().map(|&v| j.derivative(v)).collect();
    solve_poisson(grid, &rhs)
}
