//! Interior-Steklov stability estimate for a computed critical set `E = {u > mu_E}`.
//!
//! The level curve is extracted on the cell-center lattice extended by one ghost ring, the
//! boundary mass `B` integrates `rho v w` along it, and `lambda_0 = 1 / sigma_0` where
//! `sigma_0` is the top eigenvalue of `A^{-1} B` with `A` the Dirichlet form.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bathtub::{find_threshold, ThresholdMode};
use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Grid, ScalarField};
use crate::linalg::{pencil_leading, PencilOptions, SparseOperator};
use crate::objectives::ObjectiveKind;
use crate::threshold_loop::{run, Init, RunConfig, Status};

/// Quadrature points with `|grad u|` below this fraction of the maximum abort extraction.
pub const DEGENERACY_RATIO: f64 = 1e-8;

/// Linear combination of active-cell values.
type Coefficients = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct QuadraturePoint {
    pub position: [f64; 2],
    /// Interpolated `|grad u|`.
    pub grad_norm: f64,
    /// Arc-length weight (1 for the points of a 1D curve).
    pub weight: f64,
    /// Interpolation of the point value from active cells.
    pub coefficients: Coefficients,
}

impl QuadraturePoint {
    pub fn rho(&self) -> f64 {
        1.0 / self.grad_norm
    }

    pub fn interpolate(&self, values: &[f64]) -> f64 {
        self.coefficients.iter().map(|&(k, c)| c * values[k]).sum()
    }
}

/// Polygonal approximation of `{u = level}`.
#[derive(Debug, Clone)]
pub struct LevelCurve {
    pub level: f64,
    pub points: Vec<QuadraturePoint>,
    /// Pairs of point indices (empty in 1D).
    pub segments: Vec<[usize; 2]>,
    grid: Arc<Grid>,
}

impl LevelCurve {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Curve length in 2D, number of points in 1D.
    pub fn measure(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// Every point has exactly two incident segments (2D) or the point count is even (1D).
    pub fn is_closed(&self) -> bool {
        if self.grid.dim() == 1 {
            return !self.points.is_empty() && self.points.len().is_multiple_of(2);
        }
        let mut degree = vec![0usize; self.points.len()];
        for s in &self.segments {
            degree[s[0]] += 1;
            degree[s[1]] += 1;
        }
        !degree.is_empty() && degree.iter().all(|&d| d == 2)
    }

    pub fn rho_range(&self) -> (f64, f64) {
        self.points.iter().map(|p| p.rho()).fold((f64::INFINITY, 0.0), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }
}

/// Values on the cell-center lattice with a ghost ring. Ghost nodes carry minus the mean of
/// their face-adjacent active cells (diagonal ones when there are none), which puts the zero
/// of `u` half a cell outside the last active row.
struct Lattice {
    /// Lattice index offset: stored position `(i + 1, j + off_j)`.
    width: usize,
    height: usize,
    off_j: isize,
    coeffs: Vec<Option<Coefficients>>,
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
}

impl Lattice {
    fn new(grid: &Grid, u: &[f64]) -> Self {
        let dim = grid.dim();
        let width = grid.nx() + 2;
        let (height, off_j) = if dim == 1 { (1, 0) } else { (grid.ny() + 2, 1) };
        let mut coeffs = Vec::with_capacity(width * height);
        for sj in 0..height {
            for si in 0..width {
                let (i, j) = (si as isize - 1, sj as isize - off_j);
                coeffs.push(node_coefficients(grid, i, j));
            }
        }
        let values: Vec<f64> =
            coeffs.iter().map(|c| c.as_ref().map_or(f64::NAN, |c| c.iter().map(|&(k, w)| w * u[k]).sum())).collect();
        let mut lattice = Self { width, height, off_j, coeffs, values, grads: Vec::new() };
        let h = grid.h();
        lattice.grads = (0..width * height)
            .map(|s| {
                let (si, sj) = ((s % width) as isize, (s / width) as isize);
                let gx = lattice.difference(si, sj, 1, 0, h);
                let gy = if dim == 1 { 0.0 } else { lattice.difference(si, sj, 0, 1, h) };
                [gx, gy]
            })
            .collect();
        lattice
    }

    fn slot(&self, si: isize, sj: isize) -> Option<usize> {
        if si < 0 || sj < 0 || si as usize >= self.width || sj as usize >= self.height {
            return None;
        }
        let s = sj as usize * self.width + si as usize;
        self.coeffs[s].as_ref().map(|_| s)
    }

    /// Central difference, one-sided where a neighbor is missing.
    fn difference(&self, si: isize, sj: isize, di: isize, dj: isize, h: f64) -> f64 {
        let Some(c) = self.slot(si, sj) else { return 0.0 };
        match (self.slot(si - di, sj - dj), self.slot(si + di, sj + dj)) {
            (Some(m), Some(p)) => (self.values[p] - self.values[m]) / (2.0 * h),
            (None, Some(p)) => (self.values[p] - self.values[c]) / h,
            (Some(m), None) => (self.values[c] - self.values[m]) / h,
            (None, None) => 0.0,
        }
    }

    fn position(&self, grid: &Grid, s: usize) -> [f64; 2] {
        let (si, sj) = ((s % self.width) as isize, (s / self.width) as isize);
        grid.lattice_point(si - 1, sj - self.off_j)
    }
}

fn node_coefficients(grid: &Grid, i: isize, j: isize) -> Option<Coefficients> {
    if let Some(k) = grid.index(i, j) {
        return Some(vec![(k, 1.0)]);
    }
    let collect = |offsets: &[(isize, isize)]| -> Coefficients {
        offsets.iter().filter_map(|&(di, dj)| grid.index(i + di, j + dj)).map(|k| (k, 1.0)).collect()
    };
    let mut near = collect(grid.face_offsets());
    if near.is_empty() && grid.dim() == 2 {
        near = collect(&[(-1, -1), (1, -1), (-1, 1), (1, 1)]);
    }
    if near.is_empty() {
        return None;
    }
    let w = -1.0 / near.len() as f64;
    near.iter_mut().for_each(|c| c.1 = w);
    Some(near)
}

fn merge(a: &Coefficients, wa: f64, b: &Coefficients, wb: f64) -> Coefficients {
    let mut out: Coefficients = Vec::with_capacity(a.len() + b.len());
    let scaled = a.iter().map(|&(k, c)| (k, c * wa)).chain(b.iter().map(|&(k, c)| (k, c * wb)));
    for (k, c) in scaled {
        match out.iter_mut().find(|e| e.0 == k) {
            Some(e) => e.1 += c,
            None => out.push((k, c)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

struct Builder<'a> {
    grid: &'a Grid,
    lattice: &'a Lattice,
    level: f64,
    points: Vec<QuadraturePoint>,
    by_edge: HashMap<(usize, usize), usize>,
}

impl Builder<'_> {
    /// Crossing on the lattice edge `p -> q`, created once per edge.
    fn crossing(&mut self, p: usize, q: usize) -> usize {
        let key = (p.min(q), p.max(q));
        if let Some(&idx) = self.by_edge.get(&key) {
            return idx;
        }
        let (p, q) = key;
        let l = self.lattice;
        let (vp, vq) = (l.values[p], l.values[q]);
        let t = (self.level - vp) / (vq - vp);
        let (xp, xq) = (l.position(self.grid, p), l.position(self.grid, q));
        let position = [xp[0] + t * (xq[0] - xp[0]), xp[1] + t * (xq[1] - xp[1])];
        let (gp, gq) = (l.grads[p], l.grads[q]);
        let g = [gp[0] + t * (gq[0] - gp[0]), gp[1] + t * (gq[1] - gp[1])];
        let coefficients =
            merge(l.coeffs[p].as_ref().expect("defined node"), 1.0 - t, l.coeffs[q].as_ref().expect("defined node"), t);
        let idx = self.points.len();
        self.points.push(QuadraturePoint {
            position,
            grad_norm: (g[0] * g[0] + g[1] * g[1]).sqrt(),
            weight: 0.0,
            coefficients,
        });
        self.by_edge.insert(key, idx);
        idx
    }
}

/// Extracts `{u = level}` by linear root bracketing (1D) or marching squares (2D).
pub fn extract_level_curve(u: &ScalarField, level: f64) -> Result<LevelCurve> {
    if !level.is_finite() {
        return Err(Error::InvalidParameter(format!("level {level} is not finite")));
    }
    let grid = u.grid().clone();
    let lattice = Lattice::new(&grid, u.values());
    let mut b = Builder { grid: &grid, lattice: &lattice, level, points: Vec::new(), by_edge: HashMap::new() };
    let above = |s: usize| lattice.values[s] > level;
    let mut segments = Vec::new();

    if grid.dim() == 1 {
        for si in 0..lattice.width - 1 {
            let (p, q) = (si, si + 1);
            if above(p) != above(q) {
                let idx = b.crossing(p, q);
                b.points[idx].weight = 1.0;
            }
        }
    } else {
        for sj in 0..lattice.height as isize - 1 {
            for si in 0..lattice.width as isize - 1 {
                let corners = [
                    lattice.slot(si, sj),
                    lattice.slot(si + 1, sj),
                    lattice.slot(si + 1, sj + 1),
                    lattice.slot(si, sj + 1),
                ];
                let Some(c) = corners.iter().copied().collect::<Option<Vec<usize>>>() else { continue };
                let s: Vec<bool> = c.iter().map(|&k| above(k)).collect();
                // edge e joins corners e and e+1 (mod 4)
                let cut: Vec<usize> = (0..4).filter(|&e| s[e] != s[(e + 1) % 4]).collect();
                let pairs: Vec<[usize; 2]> = match cut.len() {
                    0 => continue,
                    2 => vec![[cut[0], cut[1]]],
                    _ => {
                        let center = c.iter().map(|&k| lattice.values[k]).sum::<f64>() / 4.0 > level;
                        // corners on the other side of the saddle from the center get cut off;
                        // corner k touches edges k-1 and k
                        (0..4).filter(|&k| s[k] != center).map(|k| [(k + 3) % 4, k]).collect()
                    }
                };
                for [e1, e2] in pairs {
                    let a = b.crossing(c[e1], c[(e1 + 1) % 4]);
                    let d = b.crossing(c[e2], c[(e2 + 1) % 4]);
                    segments.push([a, d]);
                }
            }
        }
        for &[a, d] in &segments {
            let (pa, pd) = (b.points[a].position, b.points[d].position);
            let len = ((pa[0] - pd[0]).powi(2) + (pa[1] - pd[1]).powi(2)).sqrt();
            b.points[a].weight += 0.5 * len;
            b.points[d].weight += 0.5 * len;
        }
    }

    let points = b.points;
    if points.is_empty() {
        return Err(Error::Degenerate(format!("level {level} is not crossed")));
    }
    let max_grad = grid
        .cells()
        .iter()
        .map(|&(i, j)| {
            let s = (j as isize + lattice.off_j) as usize * lattice.width + i + 1;
            let g = lattice.grads[s];
            (g[0] * g[0] + g[1] * g[1]).sqrt()
        })
        .fold(0.0, f64::max);
    if let Some(p) = points.iter().find(|p| !(p.grad_norm >= DEGENERACY_RATIO * max_grad) || p.grad_norm == 0.0) {
        return Err(Error::Degenerate(format!(
            "|grad u| = {:e} at ({:.4}, {:.4}) on a flat level set",
            p.grad_norm, p.position[0], p.position[1]
        )));
    }
    Ok(LevelCurve { level, points, segments, grid })
}

/// Level curve of the critical set selected from `u` at volume `v0`, placed halfway between
/// the smallest selected value and the largest rejected one.
pub fn critical_curve(u: &ScalarField, v0: f64) -> Result<LevelCurve> {
    let t = find_threshold(u, v0, ThresholdMode::StrictBinary)?;
    extract_level_curve(u, t.interface_level())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// `rho_E = 1 / |grad u|`
    #[default]
    RhoE,
    Unweighted,
}

/// `v^T B w = sum_q rho_q w_q v(x_q) w(x_q)`.
pub fn boundary_mass(curve: &LevelCurve, grid: &Arc<Grid>, weight: Weight) -> Result<SparseOperator> {
    if !curve.grid.same_as(grid) {
        return Err(Error::GridMismatch);
    }
    if curve.points.is_empty() {
        return Err(Error::Degenerate("empty level curve".into()));
    }
    let mut triplets = Vec::new();
    for p in &curve.points {
        let rho = match weight {
            Weight::RhoE => p.rho(),
            Weight::Unweighted => 1.0,
        };
        let w = rho * p.weight;
        for &(a, ca) in &p.coefficients {
            for &(b, cb) in &p.coefficients {
                triplets.push((a, b, w * ca * cb));
            }
        }
    }
    Ok(SparseOperator::from_triplets(grid.len(), triplets))
}

#[derive(Debug, Clone)]
pub struct StabilityOptions {
    /// Number of Steklov eigenvalues to compute.
    pub modes: usize,
    pub weight: Weight,
    pub pencil: PencilOptions,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { modes: 1, weight: Weight::RhoE, pencil: PencilOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub lambda0: f64,
    /// `lambda_1, ..., lambda_{m-1}` when more than one mode was requested.
    pub higher: Vec<f64>,
    /// `1 - 1/lambda0`
    pub coercivity_bound: f64,
    pub stable: bool,
    /// Arc length of the curve (point count in 1D).
    pub boundary_measure: f64,
    /// `1^T B 1`
    pub weighted_measure: f64,
    pub level: f64,
    pub quadrature_points: usize,
    pub closed: bool,
    pub rho_min: f64,
    pub rho_max: f64,
    pub pencil_iterations: usize,
    pub pencil_residual: f64,
    /// `B`-normalized eigenvectors, leading mode first.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Dirichlet form `h^d A`, so that `v^T A v` approximates the integral of `|grad v|^2`.
pub fn dirichlet_operator(grid: &Grid) -> SparseOperator {
    grid.laplacian().scaled(grid.cell_measure())
}

pub fn steklov_lambda0(grid: &Arc<Grid>, curve: &LevelCurve, opts: &StabilityOptions) -> Result<StabilityReport> {
    if opts.modes == 0 {
        return Err(Error::InvalidParameter("at least one mode is required".into()));
    }
    let b = boundary_mass(curve, grid, opts.weight)?;
    let a = dirichlet_operator(grid);
    let modes = pencil_leading(&a, &b, opts.modes, &opts.pencil)?;
    if !(modes[0].sigma > 0.0) {
        return Err(Error::Degenerate(format!("pencil eigenvalue {}", modes[0].sigma)));
    }
    let lambdas: Vec<f64> = modes.iter().map(|m| 1.0 / m.sigma).collect();
    let lambda0 = lambdas[0];
    let (rho_min, rho_max) = curve.rho_range();
    let ones = vec![1.0; grid.len()];
    Ok(StabilityReport {
        lambda0,
        higher: lambdas[1..].to_vec(),
        coercivity_bound: 1.0 - 1.0 / lambda0,
        stable: lambda0 > 1.0,
        boundary_measure: curve.measure(),
        weighted_measure: b.quadratic_form(&ones),
        level: curve.level,
        quadrature_points: curve.points.len(),
        closed: curve.is_closed(),
        rho_min,
        rho_max,
        pencil_iterations: modes.iter().map(|m| m.iterations).max().unwrap_or(0),
        pencil_residual: modes.iter().map(|m| m.residual).fold(0.0, f64::max),
        eigenvectors: modes.into_iter().map(|m| m.vector).collect(),
    })
}

/// Stability of the switch-field level set of a converged set.
pub fn stability_of(u: &ScalarField, v0: f64, opts: &StabilityOptions) -> Result<StabilityReport> {
    let curve = critical_curve(u, v0)?;
    steklov_lambda0(u.grid(), &curve, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityRow {
    pub v0: f64,
    pub lambda0: Option<f64>,
    pub coercivity_bound: Option<f64>,
    pub stable: Option<bool>,
    /// Run status, or the error that prevented the estimate.
    pub status: String,
}

/// One profile row: run the scheme, then estimate on the final switch field.
pub fn coercivity_row(config: &RunConfig, opts: &StabilityOptions) -> CoercivityRow {
    coercivity_estimate(config, opts).0
}

/// Profile row together with the full report, when the estimate succeeded.
pub fn coercivity_estimate(config: &RunConfig, opts: &StabilityOptions) -> (CoercivityRow, Option<StabilityReport>) {
    let failed =
        |status: String| CoercivityRow { v0: config.v0, lambda0: None, coercivity_bound: None, stable: None, status };
    let out = match run(config) {
        Ok(out) => out,
        Err(e) => return (failed(format!("error: {e}")), None),
    };
    match stability_of(&out.final_analysis.switch, config.v0, opts) {
        Ok(r) => {
            let row = CoercivityRow {
                v0: config.v0,
                lambda0: Some(r.lambda0),
                coercivity_bound: Some(r.coercivity_bound),
                stable: Some(r.stable),
                status: out.trace.status.as_str().to_string(),
            };
            (row, Some(r))
        }
        Err(e) => {
            let status = if out.trace.status == Status::Converged {
                format!("error: {e}")
            } else {
                format!("{}; error: {e}", out.trace.status.as_str())
            };
            (failed(status), None)
        }
    }
}

pub fn coercivity_profile(
    kind: &ObjectiveKind,
    domain: DomainSpec,
    v0_list: &[f64],
    opts: &StabilityOptions,
) -> Vec<CoercivityRow> {
    v0_list
        .iter()
        .map(|&v0| coercivity_row(&RunConfig::new(kind.clone(), domain, v0).with_init(Init::Constant), opts))
        .collect()
}
