//! The fixed-point driver: compute the switch field of the current control, keep the cells
//! where it is largest, repeat until the control stops moving.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bathtub::{find_threshold, selection_size, ThresholdMode, ThresholdResult};
use crate::error::{Error, Result};
use crate::grid::{build_grid, l1_distance, ControlField, DomainSpec, Grid};
use crate::objectives::{analyze, Analysis, ObjectiveKind, Sense};
use crate::pde;

/// Objective increases smaller than this are not counted as descent violations.
pub const MONOTONICITY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "init", rename_all = "snake_case")]
pub enum Init {
    /// `f0 = V0` everywhere.
    Constant,
    /// `V0 +- min(V0, 1 - V0)` on alternating cells, rescaled so the mean is exactly `V0`
    /// when the two colours have different counts.
    Checkerboard,
    /// Indicator of the `round(V0 N)` cells closest (sup norm) to `center`.
    IndicatorBox { center: [f64; 2] },
    /// Indicator of `round(V0 N)` cells drawn uniformly with a seeded ChaCha8 generator.
    SeededRandom { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub objective: ObjectiveKind,
    pub domain: DomainSpec,
    pub v0: f64,
    pub init: Init,
    pub tolerance: f64,
    pub max_iter: usize,
    pub mode: ThresholdMode,
    /// Keep a copy of every `m`-th iterate.
    pub snapshot_every: Option<usize>,
}

impl RunConfig {
    pub fn new(objective: ObjectiveKind, domain: DomainSpec, v0: f64) -> Self {
        Self {
            objective,
            domain,
            v0,
            init: Init::Constant,
            tolerance: 1e-6,
            max_iter: 500,
            mode: ThresholdMode::StrictBinary,
            snapshot_every: None,
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0 && self.v0 < 1.0) {
            return Err(Error::InvalidParameter(format!("V0 = {} not in (0,1)", self.v0)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidParameter("snapshot interval must be at least 1".into()));
        }
        self.domain.validate()
    }
}

/// Builds `f0` for the given initialization.
pub fn initial_control(grid: &Arc<Grid>, v0: f64, init: Init) -> Result<ControlField> {
    let n = grid.len();
    match init {
        Init::Constant => ControlField::constant(grid.clone(), v0),
        Init::Checkerboard => {
            let delta = v0.min(1.0 - v0);
            let even = grid.cells().iter().filter(|&&(i, j)| (i + j) % 2 == 0).count() as f64;
            let odd = n as f64 - even;
            // amplitudes weighted by the opposite colour count keep the mean exact
            let m = even.max(odd);
            let (hi, lo) = (v0 + delta * odd / m, v0 - delta * even / m);
            let values = grid
                .cells()
                .iter()
                .map(|&(i, j)| if (i + j) % 2 == 0 { hi } else { lo })
                .map(|v| v.clamp(0.0, 1.0))
                .collect();
            ControlField::new(grid.clone(), values, v0)
        }
        Init::IndicatorBox { center } => {
            let dist = |c: &[f64; 2]| (c[0] - center[0]).abs().max((c[1] - center[1]).abs());
            let mut idx: Vec<usize> = (0..n).collect();
            let centers = grid.centers();
            idx.sort_by(|&a, &b| dist(&centers[a]).total_cmp(&dist(&centers[b])).then(a.cmp(&b)));
            idx.truncate(selection_size(v0, n));
            ControlField::indicator(grid.clone(), &idx, v0)
        }
        Init::SeededRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            idx.truncate(selection_size(v0, n));
            ControlField::indicator(grid.clone(), &idx, v0)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Objective at `f_k`.
    pub objective: f64,
    /// Threshold level `c_k`.
    pub level: f64,
    /// `||f_{k+1} - f_k||_{L^1}`
    pub increment: f64,
    pub tie_cells: usize,
    /// `sum_{j <= k} ||f_{j+1} - f_j||^2`
    pub cumulative_sq: f64,
    /// Seconds since the start of the run. Not serialized so that traces stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Cycled,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Cycled => "cycled",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterationTrace {
    pub sense: Sense,
    pub records: Vec<IterationRecord>,
    pub status: Status,
    /// Objective at the returned control.
    pub final_objective: f64,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.increment).collect()
    }

    /// Objective values `G(f_0), ..., G(f_K)` including the returned control.
    pub fn objectives(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.records.iter().map(|r| r.objective).collect();
        v.push(self.final_objective);
        v
    }
}

/// One step of the scheme.
#[derive(Debug, Clone)]
pub struct Step {
    /// Value, state and switch field at `f_k`.
    pub analysis: Analysis,
    pub threshold: ThresholdResult,
    pub next: ControlField,
    pub increment: f64,
}

pub fn iterate_once(kind: &ObjectiveKind, grid: &Arc<Grid>, f_k: &ControlField, mode: ThresholdMode) -> Result<Step> {
    let analysis = analyze(kind, grid, f_k)?;
    let threshold = find_threshold(&analysis.switch, f_k.target(), mode)?;
    let next = threshold.indicator.clone();
    let increment = l1_distance(&next, f_k)?;
    Ok(Step { analysis, threshold, next, increment })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub grid: Arc<Grid>,
    pub final_control: ControlField,
    /// Analysis of `final_control`.
    pub final_analysis: Analysis,
    /// Threshold of the final switch field, i.e. the candidate `f_{K+1}`.
    pub final_threshold: ThresholdResult,
    pub trace: IterationTrace,
    pub snapshots: Vec<(usize, ControlField)>,
}

pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let grid = build_grid(config.domain)?;
    let f0 = initial_control(&grid, config.v0, config.init)?;
    run_from(config, &grid, f0)
}

/// Runs the scheme from an explicit initial control.
pub fn run_from(config: &RunConfig, grid: &Arc<Grid>, f0: ControlField) -> Result<RunOutcome> {
    config.validate()?;
    if let ObjectiveKind::NonEnergetic { j } = &config.objective {
        j.validate(pde::torsion(grid)?.max())?;
    }
    let clock = Stopwatch::start();
    let kind = &config.objective;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut f = f0;
    let mut previous: Option<Vec<f64>> = None;
    let mut cumulative = 0.0;
    let mut status = Status::MaxIter;
    let mut last_step: Option<Step> = None;

    for k in 0..config.max_iter {
        if let Some(m) = config.snapshot_every {
            if k % m == 0 {
                snapshots.push((k, f.clone()));
            }
        }
        let step = iterate_once(kind, grid, &f, config.mode)?;
        cumulative += step.increment * step.increment;
        records.push(IterationRecord {
            k,
            objective: step.analysis.value,
            level: step.threshold.level,
            increment: step.increment,
            tie_cells: step.threshold.tie_cells.len(),
            cumulative_sq: cumulative,
            wall_time: clock.elapsed(),
        });
        log::debug!("iteration {k}: objective {:e}, increment {:e}", step.analysis.value, step.increment);

        let converged = step.increment <= config.tolerance;
        let cycled = !converged && previous.as_deref() == Some(step.next.values());
        previous = Some(f.values().to_vec());
        f = step.next.clone();
        last_step = Some(step);
        if converged {
            status = Status::Converged;
            break;
        }
        if cycled {
            status = Status::Cycled;
            break;
        }
    }

    let last = last_step.expect("max_iter >= 1");
    let (final_analysis, final_threshold) = if last.increment == 0.0 {
        (last.analysis, last.threshold)
    } else {
        let a = analyze(kind, grid, &f)?;
        let t = find_threshold(&a.switch, f.target(), config.mode)?;
        (a, t)
    };
    let trace = IterationTrace { sense: kind.sense(), records, status, final_objective: final_analysis.value };
    Ok(RunOutcome { grid: grid.clone(), final_control: f, final_analysis, final_threshold, trace, snapshots })
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    /// Indices `k` where the step `f_k -> f_{k+1}` moved the objective the wrong way.
    pub violations: Vec<usize>,
    /// `(G(f_k) - G(f_{k+1})) / ||f_{k+1} - f_k||^2` (sign flipped for maximization) for
    /// every step with a nonzero increment.
    pub ratios: Vec<f64>,
    pub min_ratio: Option<f64>,
    /// `sum ||f_{k+1} - f_k||^2 <= (objective range) / min ratio`.
    pub summability_holds: bool,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn monotonicity_audit(trace: &IterationTrace) -> AuditReport {
    let values = trace.objectives();
    let sign = match trace.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut violations = Vec::new();
    let mut ratios = Vec::new();
    for (k, rec) in trace.records.iter().enumerate() {
        let decrease = sign * (values[k] - values[k + 1]);
        if decrease < -MONOTONICITY_SLACK {
            violations.push(k);
        }
        if rec.increment > 0.0 {
            ratios.push(decrease / (rec.increment * rec.increment));
        }
    }
    let min_ratio = ratios.iter().copied().reduce(f64::min);
    let total_sq: f64 = trace.records.iter().map(|r| r.increment * r.increment).sum();
    let range = sign * (values[0] - values[values.len() - 1]);
    let summability_holds = match min_ratio {
        Some(r) if r > 0.0 => total_sq <= range / r * (1.0 + 1e-9) + 1e-15,
        Some(_) => false,
        None => true,
    };
    AuditReport { violations, ratios, min_ratio, summability_holds }
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::JSpec;

    fn dirichlet(domain: DomainSpec, v0: f64) -> RunConfig {
        RunConfig::new(ObjectiveKind::DirichletEnergy, domain, v0)
    }

    #[test]
    fn fixed_point_is_stationary() {
        let cfg = dirichlet(DomainSpec::square(1.0, 16), 0.8);
        let out = run(&cfg).unwrap();
        assert_eq!(out.trace.status, Status::Converged);
        let step = iterate_once(&cfg.objective, &out.grid, &out.final_control, cfg.mode).unwrap();
        assert_eq!(step.increment, 0.0);
        assert_eq!(step.next.values(), out.final_control.values());
    }

    #[test]
    fn first_iterate_is_centered_interval() {
        let g = build_grid(DomainSpec::interval(-1.0, 1.0, 16)).unwrap();
        let f0 = ControlField::constant(g.clone(), 0.8).unwrap();
        let step = iterate_once(&ObjectiveKind::DirichletEnergy, &g, &f0, ThresholdMode::StrictBinary).unwrap();
        // round(0.8 * 16) = 13 cells. u_{f0} is even, so the 12 innermost cells are picked
        // and the 13th goes to the lower index of the tied pair.
        let selected = step.threshold.selected();
        assert_eq!(selected.len(), 13);
        let brute: Vec<usize> = {
            let u = step.analysis.switch.values();
            let mut idx: Vec<usize> = (0..16).collect();
            idx.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
            let mut top = idx[..13].to_vec();
            top.sort();
            top
        };
        assert_eq!(selected, brute);
        let inner: Vec<usize> = (2..14).collect();
        assert!(inner.iter().all(|c| selected.contains(c)));
        assert!((step.next.mean() - 0.8).abs() <= 1.0 / 16.0);
    }

    #[test]
    fn loose_tolerance_stops_after_one_iteration() {
        let cfg = dirichlet(DomainSpec::square(1.0, 16), 0.8).with_tolerance(10.0);
        let out = run(&cfg).unwrap();
        assert_eq!(out.trace.iterations(), 1);
        assert_eq!(out.trace.status, Status::Converged);
    }

    #[test]
    fn max_iter_is_reported() {
        let cfg =
            dirichlet(DomainSpec::square(1.0, 16), 0.8).with_init(Init::SeededRandom { seed: 3 }).with_max_iter(1);
        let out = run(&cfg).unwrap();
        assert_eq!(out.trace.status, Status::MaxIter);
        assert_eq!(out.trace.objectives().len(), 2);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = RunConfig::new(ObjectiveKind::Eigenvalue, DomainSpec::disk(1.0, 24), 0.6)
            .with_init(Init::SeededRandom { seed: 11 });
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a.trace).unwrap(), serde_json::to_string(&b.trace).unwrap());
        assert_eq!(a.final_control.values(), b.final_control.values());
    }

    #[test]
    fn trace_invariants_and_descent() {
        for kind in [
            ObjectiveKind::DirichletEnergy,
            ObjectiveKind::Eigenvalue,
            ObjectiveKind::NonEnergetic { j: JSpec::Exponential },
        ] {
            let cfg = RunConfig::new(kind, DomainSpec::square(1.0, 20), 0.85).with_init(Init::SeededRandom { seed: 5 });
            let out = run(&cfg).unwrap();
            let t = &out.trace;
            assert!(t.records.iter().all(|r| r.increment >= 0.0));
            assert!(t.records.windows(2).all(|w| w[1].cumulative_sq >= w[0].cumulative_sq));
            assert_eq!(t.status, Status::Converged);
            assert!(t.records.last().unwrap().increment <= cfg.tolerance);
            let audit = monotonicity_audit(t);
            assert!(audit.is_clean(), "{:?}", audit.violations);
            assert!(audit.ratios.iter().all(|&r| r > 0.0));
            assert!(audit.summability_holds);
            assert!(out.final_control.is_bang_bang());
        }
    }

    #[test]
    fn audit_edge_cases() {
        let single = IterationTrace {
            sense: Sense::Minimize,
            records: vec![IterationRecord {
                k: 0,
                objective: 1.0,
                level: 0.0,
                increment: 0.0,
                tie_cells: 0,
                cumulative_sq: 0.0,
                wall_time: 0.0,
            }],
            status: Status::Converged,
            final_objective: 1.0,
        };
        let a = monotonicity_audit(&single);
        assert!(a.is_clean());
        assert!(a.ratios.is_empty());
        assert_eq!(a.min_ratio, None);

        let mut bad = single.clone();
        bad.records[0].increment = 0.5;
        bad.final_objective = 2.0;
        let a = monotonicity_audit(&bad);
        assert_eq!(a.violations, vec![0]);
    }

    #[test]
    fn initializations_are_admissible() {
        // odd disks have unequal checkerboard colour counts
        for spec in [DomainSpec::disk(1.0, 20), DomainSpec::disk(1.0, 9), DomainSpec::square(1.0, 9)] {
            let g = build_grid(spec).unwrap();
            for init in [
                Init::Constant,
                Init::Checkerboard,
                Init::IndicatorBox { center: [0.2, -0.1] },
                Init::SeededRandom { seed: 42 },
            ] {
                let f = initial_control(&g, 0.3, init).unwrap();
                assert!((f.mean() - 0.3).abs() <= 1.0 / g.len() as f64);
            }
            let c = initial_control(&g, 0.3, Init::Checkerboard).unwrap();
            assert!((c.mean() - 0.3).abs() < 1e-12);
        }
        let g = build_grid(DomainSpec::disk(1.0, 20)).unwrap();
        let a = initial_control(&g, 0.3, Init::SeededRandom { seed: 1 }).unwrap();
        let b = initial_control(&g, 0.3, Init::SeededRandom { seed: 2 }).unwrap();
        assert_ne!(a.values(), b.values());
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = dirichlet(DomainSpec::square(1.0, 16), 1.2);
        assert!(run(&cfg).is_err());
        cfg.v0 = 0.5;
        cfg.tolerance = 0.0;
        assert!(run(&cfg).is_err());
    }
}
