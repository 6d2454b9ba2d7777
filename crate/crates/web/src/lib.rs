//! WebAssembly bindings for the browser demo: a thresholding run, a stability estimate on
//! its limit set, and the one-dimensional Steklov benchmark.
//!
//! Field arrays are full `nx * ny` lattices, top row first, with `NaN` outside the domain.

use std::sync::Arc;

use thresholdopt::grid::{build_grid, ControlField, DomainSpec, Grid, ScalarField};
use thresholdopt::objectives::{JSpec, ObjectiveKind};
use thresholdopt::pde::solve_state;
use thresholdopt::stability::{critical_curve, steklov_lambda0, StabilityOptions};
use thresholdopt::threshold_loop::{run, Init, RunConfig, RunOutcome};
use wasm_bindgen::prelude::*;

/// Largest resolution accepted from the page.
pub const MAX_RESOLUTION: usize = 256;

fn objective(name: &str) -> Result<ObjectiveKind, String> {
    match name {
        "dirichlet" => Ok(ObjectiveKind::DirichletEnergy),
        "eigenvalue" => Ok(ObjectiveKind::Eigenvalue),
        "quadratic" => Ok(ObjectiveKind::NonEnergetic { j: JSpec::Quadratic }),
        "exponential" => Ok(ObjectiveKind::NonEnergetic { j: JSpec::Exponential }),
        other => Err(format!("unknown objective {other:?}")),
    }
}

fn domain(name: &str, n: usize) -> Result<DomainSpec, String> {
    if n > MAX_RESOLUTION {
        return Err(format!("resolution {n} exceeds {MAX_RESOLUTION}"));
    }
    match name {
        "interval" => Ok(DomainSpec::interval(-1.0, 1.0, n)),
        "square" => Ok(DomainSpec::square(1.0, n)),
        "disk" => Ok(DomainSpec::disk(1.0, n)),
        other => Err(format!("unknown domain {other:?}")),
    }
}

fn init(name: &str, seed: u32) -> Result<Init, String> {
    match name {
        "constant" => Ok(Init::Constant),
        "checkerboard" => Ok(Init::Checkerboard),
        "random" => Ok(Init::SeededRandom { seed: seed as u64 }),
        other => Err(format!("unknown initialization {other:?}")),
    }
}

fn lattice(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![f64::NAN; nx * ny];
    for (&(i, j), &v) in grid.cells().iter().zip(values) {
        out[(ny - 1 - j) * nx + i] = v;
    }
    out
}

fn bounds(grid: &Grid) -> Vec<f64> {
    let [x0, y0] = grid.origin();
    let h = grid.h();
    vec![x0, x0 + h * grid.nx() as f64, y0, y0 + h * grid.ny() as f64]
}

fn solve(
    objective_name: &str,
    domain_name: &str,
    n: usize,
    v0: f64,
    init_name: &str,
    seed: u32,
) -> Result<RunOutcome, String> {
    let config =
        RunConfig::new(objective(objective_name)?, domain(domain_name, n)?, v0).with_init(init(init_name, seed)?);
    run(&config).map_err(|e| e.to_string())
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct ThresholdView {
    nx: usize,
    ny: usize,
    bounds: Vec<f64>,
    control: Vec<f64>,
    switch: Vec<f64>,
    objectives: Vec<f64>,
    increments: Vec<f64>,
    status: String,
}

#[wasm_bindgen]
impl ThresholdView {
    #[wasm_bindgen(getter)]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[wasm_bindgen(getter)]
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Lattice extent `[xmin, xmax, ymin, ymax]`.
    #[wasm_bindgen(getter)]
    pub fn bounds(&self) -> Vec<f64> {
        self.bounds.clone()
    }

    /// Final control.
    #[wasm_bindgen(getter)]
    pub fn control(&self) -> Vec<f64> {
        self.control.clone()
    }

    /// Final switch field.
    #[wasm_bindgen(getter)]
    pub fn switch(&self) -> Vec<f64> {
        self.switch.clone()
    }

    /// Objective per iteration, then the final value.
    #[wasm_bindgen(getter)]
    pub fn objectives(&self) -> Vec<f64> {
        self.objectives.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn increments(&self) -> Vec<f64> {
        self.increments.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn status(&self) -> String {
        self.status.clone()
    }
}

pub fn threshold_view(
    objective_name: &str,
    domain_name: &str,
    n: usize,
    v0: f64,
    init_name: &str,
    seed: u32,
) -> Result<ThresholdView, String> {
    let out = solve(objective_name, domain_name, n, v0, init_name, seed)?;
    let g = &out.grid;
    Ok(ThresholdView {
        nx: g.nx(),
        ny: g.ny(),
        bounds: bounds(g),
        control: lattice(g, out.final_control.values()),
        switch: lattice(g, out.final_analysis.switch.values()),
        objectives: out.trace.objectives(),
        increments: out.trace.increments(),
        status: out.trace.status.as_str().to_string(),
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct StabilityView {
    lambda0: f64,
    coercivity_bound: f64,
    stable: bool,
    status: String,
    curve_x: Vec<f64>,
    curve_y: Vec<f64>,
    segments: Vec<u32>,
}

#[wasm_bindgen]
impl StabilityView {
    #[wasm_bindgen(getter)]
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    #[wasm_bindgen(getter)]
    pub fn coercivity_bound(&self) -> f64 {
        self.coercivity_bound
    }

    #[wasm_bindgen(getter)]
    pub fn stable(&self) -> bool {
        self.stable
    }

    #[wasm_bindgen(getter)]
    pub fn status(&self) -> String {
        self.status.clone()
    }

    /// Quadrature points of the interface.
    #[wasm_bindgen(getter)]
    pub fn curve_x(&self) -> Vec<f64> {
        self.curve_x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn curve_y(&self) -> Vec<f64> {
        self.curve_y.clone()
    }

    /// Pairs of point indices joined by a curve segment.
    #[wasm_bindgen(getter)]
    pub fn segments(&self) -> Vec<u32> {
        self.segments.clone()
    }
}

pub fn stability_view(
    objective_name: &str,
    domain_name: &str,
    n: usize,
    v0: f64,
    init_name: &str,
    seed: u32,
) -> Result<StabilityView, String> {
    let out = solve(objective_name, domain_name, n, v0, init_name, seed)?;
    let curve = critical_curve(&out.final_analysis.switch, v0).map_err(|e| e.to_string())?;
    let r = steklov_lambda0(&out.grid, &curve, &StabilityOptions::default()).map_err(|e| e.to_string())?;
    Ok(StabilityView {
        lambda0: r.lambda0,
        coercivity_bound: r.coercivity_bound,
        stable: r.stable,
        status: out.trace.status.as_str().to_string(),
        curve_x: curve.points.iter().map(|p| p.position[0]).collect(),
        curve_y: curve.points.iter().map(|p| p.position[1]).collect(),
        segments: curve.segments.iter().flat_map(|s| [s[0] as u32, s[1] as u32]).collect(),
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct SteklovView {
    lambda0: f64,
    continuum: f64,
    x: Vec<f64>,
    mode: Vec<f64>,
    interface: Vec<f64>,
}

#[wasm_bindgen]
impl SteklovView {
    #[wasm_bindgen(getter)]
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// `(2 - eps) / eps`
    #[wasm_bindgen(getter)]
    pub fn continuum(&self) -> f64 {
        self.continuum
    }

    /// Cell centers.
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    /// Principal mode, scaled to unit maximum.
    #[wasm_bindgen(getter)]
    pub fn mode(&self) -> Vec<f64> {
        self.mode.clone()
    }

    /// Interface points.
    #[wasm_bindgen(getter)]
    pub fn interface(&self) -> Vec<f64> {
        self.interface.clone()
    }
}

/// Interval `(-1, 1)` with the control `(-1 + eps/2, 1 - eps/2)`.
pub fn steklov_view(n: usize, eps: f64) -> Result<SteklovView, String> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(format!("eps = {eps} not in (0,1)"));
    }
    let grid: Arc<Grid> = build_grid(DomainSpec::interval(-1.0, 1.0, n.min(4096))).map_err(|e| e.to_string())?;
    let n = grid.len();
    let sel: Vec<usize> = (0..n).filter(|&k| grid.centers()[k][0].abs() < 1.0 - eps / 2.0).collect();
    if sel.is_empty() || sel.len() == n {
        return Err(format!("eps = {eps} is not resolved by {n} cells"));
    }
    let f = ControlField::indicator(grid.clone(), &sel, sel.len() as f64 / n as f64).map_err(|e| e.to_string())?;
    let u: ScalarField = solve_state(&grid, &f).map_err(|e| e.to_string())?;
    let curve = critical_curve(&u, f.mean()).map_err(|e| e.to_string())?;
    let r = steklov_lambda0(&grid, &curve, &StabilityOptions::default()).map_err(|e| e.to_string())?;
    let v = &r.eigenvectors[0];
    let scale = v.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
    Ok(SteklovView {
        lambda0: r.lambda0,
        continuum: (2.0 - eps) / eps,
        x: grid.centers().iter().map(|c| c[0]).collect(),
        mode: v.iter().map(|x| x / scale).collect(),
        interface: curve.points.iter().map(|p| p.position[0]).collect(),
    })
}

fn js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

#[wasm_bindgen(js_name = runThresholding)]
pub fn run_thresholding(
    objective: &str,
    domain: &str,
    n: usize,
    v0: f64,
    init: &str,
    seed: u32,
) -> Result<ThresholdView, JsValue> {
    threshold_view(objective, domain, n, v0, init, seed).map_err(js)
}

#[wasm_bindgen(js_name = estimateStability)]
pub fn estimate_stability(
    objective: &str,
    domain: &str,
    n: usize,
    v0: f64,
    init: &str,
    seed: u32,
) -> Result<StabilityView, JsValue> {
    stability_view(objective, domain, n, v0, init, seed).map_err(js)
}

#[wasm_bindgen(js_name = steklovInterval)]
pub fn steklov_interval(n: usize, eps: f64) -> Result<SteklovView, JsValue> {
    steklov_view(n, eps).map_err(js)
}
