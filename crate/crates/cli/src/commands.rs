use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use thresholdopt::io::{coercivity_csv, field_csv, field_pgm, trace_csv, trace_jsonl};
use thresholdopt::stability::{coercivity_estimate, stability_of, StabilityOptions, StabilityReport, Weight};
use thresholdopt::threshold_loop::{monotonicity_audit, run, AuditReport, RunConfig, RunOutcome, Status};

use crate::args::{parse_list, run_config, LoopArgs, OutputArgs, ProblemArgs, SolveArgs, StabilityArgs, SweepArgs};
use crate::exit::{CliError, ExitCode};
use crate::output::{output_root, Staged};

pub const SWEEP_CSV_HEADER: &str = "V0,status,iterations,objective,lambda0";

#[derive(Serialize)]
struct RunSummary {
    status: String,
    error: Option<String>,
    v0: f64,
    tolerance: f64,
    objective: &'static str,
    objective_value: Option<f64>,
    iterations: Option<usize>,
    final_level: Option<f64>,
    interface_level: Option<f64>,
    selected_fraction: Option<f64>,
    lambda0: Option<f64>,
    audit: Option<AuditReport>,
    config: RunConfig,
}

#[derive(Serialize)]
struct Metadata {
    command: &'static str,
    version: &'static str,
    args: Vec<String>,
    started_unix: f64,
    finished_unix: f64,
    elapsed_seconds: f64,
    runs: Vec<RunTiming>,
}

#[derive(Serialize)]
struct RunTiming {
    v0: f64,
    /// Seconds since the start of the run, one entry per iteration.
    iteration_wall_times: Vec<f64>,
}

struct Clock {
    started: f64,
    instant: Instant,
}

impl Clock {
    fn start() -> Self {
        Self { started: unix_now(), instant: Instant::now() }
    }

    fn metadata(&self, command: &'static str, runs: Vec<RunTiming>) -> Metadata {
        Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            args: std::env::args().collect(),
            started_unix: self.started,
            finished_unix: unix_now(),
            elapsed_seconds: self.instant.elapsed().as_secs_f64(),
            runs,
        }
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn status_code(status: Status) -> ExitCode {
    match status {
        Status::Converged => ExitCode::Ok,
        Status::MaxIter => ExitCode::MaxIter,
        Status::Cycled => ExitCode::Cycled,
    }
}

/// A finished run, or the error that stopped it.
struct Row {
    config: RunConfig,
    result: Result<RunOutcome, String>,
    lambda0: Option<Result<f64, String>>,
}

impl Row {
    fn execute(config: RunConfig, with_lambda0: bool) -> Self {
        let result = run(&config).map_err(|e| e.to_string());
        let lambda0 = match (&result, with_lambda0) {
            (Ok(out), true) => Some(
                stability_of(&out.final_analysis.switch, config.v0, &StabilityOptions::default())
                    .map(|r| r.lambda0)
                    .map_err(|e| e.to_string()),
            ),
            _ => None,
        };
        Self { config, result, lambda0 }
    }

    fn code(&self) -> ExitCode {
        match &self.result {
            Err(_) => ExitCode::Solver,
            Ok(out) => status_code(out.trace.status),
        }
    }

    fn status(&self) -> String {
        match &self.result {
            Err(_) => "error".into(),
            Ok(out) => out.trace.status.as_str().into(),
        }
    }

    fn summary(&self) -> RunSummary {
        let c = &self.config;
        let mut s = RunSummary {
            status: self.status(),
            error: None,
            v0: c.v0,
            tolerance: c.tolerance,
            objective: c.objective.name(),
            objective_value: None,
            iterations: None,
            final_level: None,
            interface_level: None,
            selected_fraction: None,
            lambda0: None,
            audit: None,
            config: c.clone(),
        };
        match &self.result {
            Err(e) => s.error = Some(e.clone()),
            Ok(out) => {
                s.objective_value = Some(out.trace.final_objective);
                s.iterations = Some(out.trace.iterations());
                s.final_level = Some(out.final_threshold.level);
                s.interface_level = Some(out.final_threshold.interface_level());
                s.selected_fraction = Some(out.final_control.mean());
                s.audit = Some(monotonicity_audit(&out.trace));
            }
        }
        match &self.lambda0 {
            Some(Ok(l)) => s.lambda0 = Some(*l),
            Some(Err(e)) => s.error = Some(format!("stability estimate failed: {e}")),
            None => {}
        }
        s
    }

    /// Trace, final field and summary under `dir`.
    fn stage(&self, staged: &mut Staged, dir: &Path) {
        if let Ok(out) = &self.result {
            staged.add(dir.join("trace.jsonl"), trace_jsonl(&out.trace));
            staged.add(dir.join("trace.csv"), trace_csv(&out.trace));
            let field = out.final_control.as_scalar();
            staged.add(dir.join("final_field.csv"), field_csv(&field));
            staged.add(dir.join("final_field.pgm"), field_pgm(&field));
            for (k, f) in &out.snapshots {
                staged.add(dir.join("snapshots").join(format!("field_{k:05}.csv")), field_csv(&f.as_scalar()));
            }
        }
        staged.add_json(dir.join("summary.json"), &self.summary());
    }

    fn timing(&self) -> RunTiming {
        let iteration_wall_times = match &self.result {
            Ok(out) => out.trace.records.iter().map(|r| r.wall_time).collect(),
            Err(_) => Vec::new(),
        };
        RunTiming { v0: self.config.v0, iteration_wall_times }
    }
}

fn configs(problem: &ProblemArgs, run: &LoopArgs, v0_list: &str) -> Result<Vec<RunConfig>, CliError> {
    let v0s = parse_list(v0_list).map_err(CliError::usage)?;
    if v0s.is_empty() {
        return Err(CliError::usage("the V0 list is empty"));
    }
    v0s.into_iter().map(|v0| run_config(problem, run, v0).map_err(CliError::usage)).collect()
}

fn staged(output: &OutputArgs) -> Staged {
    Staged::new(output_root(output.out.as_deref()), output.force)
}

fn v0_dir(v0: f64) -> PathBuf {
    PathBuf::from(format!("v0_{v0}"))
}

pub fn solve(args: &SolveArgs) -> Result<ExitCode, CliError> {
    let clock = Clock::start();
    let mut config = run_config(&args.problem, &args.run, args.v0).map_err(CliError::usage)?;
    config.snapshot_every = args.snapshot_every;
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let row = Row::execute(config, false);
    match &row.result {
        Ok(out) => log::info!("{} after {} iterations", out.trace.status.as_str(), out.trace.iterations()),
        Err(e) => log::error!("solver failed: {e}"),
    }
    let mut out = staged(&args.output);
    row.stage(&mut out, Path::new(""));
    out.add_json("run_metadata.json", &clock.metadata("solve", vec![row.timing()]));
    out.commit()?;
    Ok(row.code())
}

#[derive(Serialize)]
struct SweepRow {
    v0: f64,
    status: String,
    iterations: Option<usize>,
    objective: Option<f64>,
    lambda0: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepSummary {
    rows: usize,
    failures: usize,
    results: Vec<SweepRow>,
}

pub fn sweep(args: &SweepArgs) -> Result<ExitCode, CliError> {
    let clock = Clock::start();
    let configs = configs(&args.problem, &args.run, &args.v0_list)?;
    let rows: Vec<Row> = configs.into_par_iter().map(|c| Row::execute(c, args.lambda0)).collect();

    let mut out = staged(&args.output);
    let mut csv = format!("{SWEEP_CSV_HEADER}\n");
    let mut results = Vec::with_capacity(rows.len());
    for row in &rows {
        row.stage(&mut out, &v0_dir(row.config.v0));
        let s = row.summary();
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let iterations = s.iterations.map_or(String::new(), |k| k.to_string());
        csv.push_str(&format!("{},{},{},{},{}\n", s.v0, s.status, iterations, opt(s.objective_value), opt(s.lambda0)));
        results.push(SweepRow {
            v0: s.v0,
            status: s.status,
            iterations: s.iterations,
            objective: s.objective_value,
            lambda0: s.lambda0,
            error: s.error,
        });
    }
    let failures = rows.iter().filter(|r| r.result.is_err()).count();
    out.add("sweep.csv", csv);
    out.add_json("summary.json", &SweepSummary { rows: rows.len(), failures, results });
    out.add_json("run_metadata.json", &clock.metadata("sweep", rows.iter().map(Row::timing).collect()));
    out.commit()?;
    if failures > 0 {
        log::warn!("{failures} of {} rows failed", rows.len());
    }
    Ok(if failures < rows.len() { ExitCode::Ok } else { ExitCode::Solver })
}

#[derive(Serialize)]
struct StabilityEntry {
    v0: f64,
    status: String,
    report: Option<StabilityReport>,
}

#[derive(Serialize)]
struct StabilityFile {
    objective: &'static str,
    weight: Weight,
    modes: usize,
    failures: usize,
    entries: Vec<StabilityEntry>,
}

pub fn stability(args: &StabilityArgs) -> Result<ExitCode, CliError> {
    let clock = Clock::start();
    if args.modes == 0 {
        return Err(CliError::usage("--modes must be at least 1"));
    }
    let configs = configs(&args.problem, &args.run, &args.v0_list)?;
    let opts = StabilityOptions { modes: args.modes, weight: args.weight.weight(), ..Default::default() };
    let results: Vec<_> = configs.par_iter().map(|c| coercivity_estimate(c, &opts)).collect();
    let rows: Vec<_> = results.iter().map(|(row, _)| row.clone()).collect();
    let failures = results.iter().filter(|(_, r)| r.is_none()).count();
    let entries =
        results.into_iter().map(|(row, report)| StabilityEntry { v0: row.v0, status: row.status, report }).collect();
    let file = StabilityFile {
        objective: configs[0].objective.name(),
        weight: opts.weight,
        modes: opts.modes,
        failures,
        entries,
    };
    let mut out = staged(&args.output);
    out.add("coercivity.csv", coercivity_csv(&rows));
    out.add_json("stability.json", &file);
    out.add_json("run_metadata.json", &clock.metadata("stability", Vec::new()));
    out.commit()?;
    Ok(if failures < rows.len() { ExitCode::Ok } else { ExitCode::Solver })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_status_has_its_own_code() {
        assert_eq!(status_code(Status::Converged) as i32, 0);
        assert_eq!(status_code(Status::MaxIter) as i32, 2);
        assert_eq!(status_code(Status::Cycled) as i32, 3);
    }
}
