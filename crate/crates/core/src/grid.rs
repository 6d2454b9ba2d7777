//! Cell-centered Cartesian discretization of the design domain.
//!
//! A [`Grid`] covers the bounding box of the domain with `n` cells per axis and keeps the
//! cells whose centers lie strictly inside the domain ("active" cells). Active cells are
//! numbered `0..N` in row-major order `(j, i)`, which is also the order used for every
//! vector in the crate.
//!
//! Fields hold an [`Arc<Grid>`] so that they can be moved across threads and compared
//! cheaply.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseOperator;

/// Smallest accepted number of cells per axis.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// The interval `(a, b)`.
    Interval { a: f64, b: f64 },
    /// The square `(0, side)^2`.
    Square { side: f64 },
    /// The disk of given radius centered at the origin.
    Disk { radius: f64 },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Interval { .. } => "interval",
            Shape::Square { .. } => "square",
            Shape::Disk { .. } => "disk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub shape: Shape,
    /// Cells per axis.
    pub resolution: usize,
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64, resolution: usize) -> Self {
        Self { shape: Shape::Interval { a, b }, resolution }
    }

    pub fn square(side: f64, resolution: usize) -> Self {
        Self { shape: Shape::Square { side }, resolution }
    }

    pub fn disk(radius: f64, resolution: usize) -> Self {
        Self { shape: Shape::Disk { radius }, resolution }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::InvalidDomain(format!(
                "resolution {} is below the minimum of {MIN_RESOLUTION}",
                self.resolution
            )));
        }
        match self.shape {
            Shape::Interval { a, b } if !(a.is_finite() && b.is_finite() && a < b) => {
                Err(Error::InvalidDomain(format!("interval requires a < b, got ({a}, {b})")))
            }
            Shape::Square { side } if !(side.is_finite() && side > 0.0) => {
                Err(Error::InvalidDomain(format!("square side must be positive, got {side}")))
            }
            Shape::Disk { radius } if !(radius.is_finite() && radius > 0.0) => {
                Err(Error::InvalidDomain(format!("disk radius must be positive, got {radius}")))
            }
            _ => Ok(()),
        }
    }
}

/// Uniform cell-centered grid with an interior mask.
#[derive(Debug)]
pub struct Grid {
    spec: DomainSpec,
    h: f64,
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    /// `(i, j)` lattice position of each active cell.
    cells: Vec<(usize, usize)>,
    centers: Vec<[f64; 2]>,
    /// Dense `nx * ny` lookup from lattice position to active index.
    lookup: Vec<Option<usize>>,
    laplacian: OnceLock<SparseOperator>,
    torsion: OnceLock<Vec<f64>>,
}

/// Builds the grid of `spec`. Deterministic for a fixed spec.
pub fn build_grid(spec: DomainSpec) -> Result<Arc<Grid>> {
    spec.validate()?;
    let n = spec.resolution;
    let (h, nx, ny, origin) = match spec.shape {
        Shape::Interval { a, b } => ((b - a) / n as f64, n, 1, [a, 0.0]),
        Shape::Square { side } => (side / n as f64, n, n, [0.0, 0.0]),
        Shape::Disk { radius } => (2.0 * radius / n as f64, n, n, [-radius, -radius]),
    };
    let mut cells = Vec::new();
    let mut centers = Vec::new();
    let mut lookup = vec![None; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let x = origin[0] + (i as f64 + 0.5) * h;
            let y = if spec.shape.dim() == 1 { 0.0 } else { origin[1] + (j as f64 + 0.5) * h };
            let inside = match spec.shape {
                Shape::Disk { radius } => x * x + y * y < radius * radius,
                _ => true,
            };
            if inside {
                lookup[j * nx + i] = Some(cells.len());
                cells.push((i, j));
                centers.push([x, y]);
            }
        }
    }
    Ok(Arc::new(Grid {
        spec,
        h,
        nx,
        ny,
        origin,
        cells,
        centers,
        lookup,
        laplacian: OnceLock::new(),
        torsion: OnceLock::new(),
    }))
}

impl Grid {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.shape.dim()
    }

    /// Cell size.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Number of active cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Measure of a single cell, `h^d`.
    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn total_measure(&self) -> f64 {
        self.len() as f64 * self.cell_measure()
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    /// Active index of lattice position `(i, j)`, if that cell is active.
    pub fn index(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        self.lookup[j as usize * self.nx + i as usize]
    }

    /// Lattice offsets of the face neighbors, `2d` of them.
    pub fn face_offsets(&self) -> &'static [(isize, isize)] {
        if self.dim() == 1 {
            &[(-1, 0), (1, 0)]
        } else {
            &[(-1, 0), (1, 0), (0, -1), (0, 1)]
        }
    }

    /// Physical coordinates of lattice position `(i, j)`, which may lie outside the box.
    pub fn lattice_point(&self, i: isize, j: isize) -> [f64; 2] {
        let x = self.origin[0] + (i as f64 + 0.5) * self.h;
        let y = if self.dim() == 1 { 0.0 } else { self.origin[1] + (j as f64 + 0.5) * self.h };
        [x, y]
    }

    /// Cached Dirichlet Laplacian of this grid.
    pub fn laplacian(&self) -> &SparseOperator {
        self.laplacian.get_or_init(|| crate::linalg::assemble_dirichlet_laplacian(self))
    }

    pub(crate) fn torsion_cache(&self) -> &OnceLock<Vec<f64>> {
        &self.torsion
    }

    pub fn same_as(self: &Arc<Self>, other: &Arc<Grid>) -> bool {
        Arc::ptr_eq(self, other) || self.spec == other.spec
    }
}

fn check_same(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Real values on the active cells of a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!("field has {} values for {} cells", values.len(), grid.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at cell {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = grid.centers().iter().map(|&c| f(c)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A control `f` with `0 <= f <= 1` and mean close to the target fraction `V0`.
#[derive(Debug, Clone)]
pub struct ControlField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    target: f64,
}

impl ControlField {
    /// Validates box constraints and the volume quantization bound
    /// `|mean - V0| <= 1/N`.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, target: f64) -> Result<Self> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::InvalidControl(format!("target fraction {target} not in (0,1)")));
        }
        if values.len() != grid.len() {
            return Err(Error::InvalidControl(format!("control has {} values for {} cells", values.len(), grid.len())));
        }
        if let Some(k) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidControl(format!("value {} at cell {k} outside [0,1]", values[k])));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if (mean - target).abs() > 1.0 / n + 1e-12 {
            return Err(Error::InvalidControl(format!("mean {mean} is more than one cell away from {target}")));
        }
        Ok(Self { grid, values, target })
    }

    /// Skips the volume check; box constraints are still enforced.
    pub(crate) fn new_unchecked_volume(grid: Arc<Grid>, values: Vec<f64>, target: f64) -> Self {
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { grid, values, target }
    }

    pub fn constant(grid: Arc<Grid>, target: f64) -> Result<Self> {
        let values = vec![target; grid.len()];
        Self::new(grid, values, target)
    }

    /// Indicator of the given active cells.
    pub fn indicator(grid: Arc<Grid>, selected: &[usize], target: f64) -> Result<Self> {
        let mut values = vec![0.0; grid.len()];
        for &k in selected {
            values[k] = 1.0;
        }
        Self::new(grid, values, target)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn is_bang_bang(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn as_scalar(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.clone() }
    }
}

/// `sum |f_i - g_i| h^d`.
pub fn l1_distance(f: &ControlField, g: &ControlField) -> Result<f64> {
    check_same(&f.grid, &g.grid)?;
    let sum: f64 = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum * f.grid.cell_measure())
}

/// Midpoint rule `sum phi_i w_i h^d`, with `w = 1` when no weight is given.
pub fn integrate(phi: &ScalarField, weight: Option<&ControlField>) -> Result<f64> {
    let sum: f64 = match weight {
        None => phi.values.iter().sum(),
        Some(w) => {
            check_same(&phi.grid, &w.grid)?;
            phi.values.iter().zip(&w.values).map(|(p, w)| p * w).sum()
        }
    };
    Ok(sum * phi.grid.cell_measure())
}

/// Midpoint rule for a raw vector aligned with the grid cells.
pub(crate) fn integrate_slice(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().sum::<f64>() * grid.cell_measure()
}
