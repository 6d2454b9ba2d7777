//! Flag definitions and the `key = value` config file, which is merged in front of the
//! command-line flags so that flags win.

use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use thresholdopt::bathtub::ThresholdMode;
use thresholdopt::grid::DomainSpec;
use thresholdopt::objectives::{JSpec, ObjectiveKind};
use thresholdopt::stability::Weight;
use thresholdopt::threshold_loop::{Init, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "thresholdopt", version, about = "Thresholding solver for volume-constrained optimal control")]
pub struct Cli {
    /// Config file of `key = value` lines; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the thresholding scheme once.
    #[command(args_override_self = true)]
    Solve(SolveArgs),
    /// Run the scheme for a list of volume fractions.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Run the scheme and estimate the stability of the limit set.
    #[command(args_override_self = true)]
    Stability(StabilityArgs),
    /// Run the built-in analytic checks.
    #[command(args_override_self = true)]
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Dirichlet,
    Eigenvalue,
    Nonenergetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JArg {
    Quadratic,
    Exponential,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Interval,
    Square,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Constant,
    Checkerboard,
    Box,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Strict,
    Fractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Rho,
    Unweighted,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long, value_enum, default_value = "dirichlet")]
    pub objective: ObjectiveArg,
    /// Integrand of the non-energetic criterion.
    #[arg(long, value_enum, default_value = "quadratic")]
    pub j: JArg,
    /// Nodes of a tabulated `j'`, comma separated, starting at 0.
    #[arg(long, value_name = "LIST")]
    pub j_nodes: Option<String>,
    /// Values of `j'` at the nodes, comma separated.
    #[arg(long, value_name = "LIST")]
    pub j_slopes: Option<String>,
    #[arg(long, value_enum, default_value = "square")]
    pub domain: DomainArg,
    /// Cells per axis.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Interval endpoints.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub side: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}

#[derive(Debug, Clone, Args)]
pub struct LoopArgs {
    /// Stopping tolerance on the L1 increment.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value = "constant")]
    pub init: InitArg,
    /// Seed for `--init random`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Center `x,y` for `--init box`.
    #[arg(long, value_name = "X,Y", default_value = "0.5,0.5", allow_hyphen_values = true)]
    pub box_center: String,
    #[arg(long, value_enum, default_value = "strict")]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory; `THRESHOLDOPT_OUT` takes precedence.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overwrite existing files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub v0: f64,
    /// Write every m-th iterate to `snapshots/`.
    #[arg(long, value_name = "M")]
    pub snapshot_every: Option<usize>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: LoopArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Comma list of values or inclusive ranges `start:stop:step`, e.g. `0.3,0.7:0.95:0.05`.
    #[arg(long, value_name = "LIST")]
    pub v0_list: String,
    /// Also estimate lambda0 for every row.
    #[arg(long)]
    pub lambda0: bool,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: LoopArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    /// Comma list of values or inclusive ranges `start:stop:step`, e.g. `0.3,0.7:0.95:0.05`.
    #[arg(long, value_name = "LIST")]
    pub v0_list: String,
    /// Number of pencil eigenvalues.
    #[arg(long, default_value_t = 1)]
    pub modes: usize,
    #[arg(long, value_enum, default_value = "rho")]
    pub weight: WeightArg,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub run: LoopArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Resolution of the grid-dependent checks; coarse grids skip them.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
}

/// Comma-separated items, each a number or an inclusive range `start:stop:step`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if item.contains(':') {
            out.extend(parse_range(item)?);
        } else {
            out.push(parse_number(item)?);
        }
    }
    Ok(out)
}

fn parse_number(p: &str) -> Result<f64, String> {
    p.parse().map_err(|_| format!("cannot parse {p:?} as a number"))
}

fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let [start, stop, step] = parts[..] else {
        return Err(format!("range {s:?} must be start:stop:step"));
    };
    let (start, stop, step) = (parse_number(start)?, parse_number(stop)?, parse_number(step)?);
    if !(step > 0.0) || stop < start {
        return Err(format!("range {s:?} needs a positive step and stop >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // rounding keeps 0.7 + 3 * 0.05 printable as 0.85
    Ok((0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}

impl ProblemArgs {
    pub fn objective(&self) -> Result<ObjectiveKind, String> {
        Ok(match self.objective {
            ObjectiveArg::Dirichlet => ObjectiveKind::DirichletEnergy,
            ObjectiveArg::Eigenvalue => ObjectiveKind::Eigenvalue,
            ObjectiveArg::Nonenergetic => {
                let j = match self.j {
                    JArg::Quadratic => JSpec::Quadratic,
                    JArg::Exponential => JSpec::Exponential,
                    JArg::Tabulated => {
                        let (Some(nodes), Some(slopes)) = (&self.j_nodes, &self.j_slopes) else {
                            return Err("--j tabulated needs --j-nodes and --j-slopes".into());
                        };
                        JSpec::tabulated(parse_list(nodes)?, parse_list(slopes)?).map_err(|e| e.to_string())?
                    }
                };
                ObjectiveKind::NonEnergetic { j }
            }
        })
    }

    pub fn domain(&self) -> DomainSpec {
        match self.domain {
            DomainArg::Interval => DomainSpec::interval(self.a, self.b, self.n),
            DomainArg::Square => DomainSpec::square(self.side, self.n),
            DomainArg::Disk => DomainSpec::disk(self.radius, self.n),
        }
    }
}

impl LoopArgs {
    pub fn init(&self) -> Result<Init, String> {
        Ok(match self.init {
            InitArg::Constant => Init::Constant,
            InitArg::Checkerboard => Init::Checkerboard,
            InitArg::Random => Init::SeededRandom { seed: self.seed },
            InitArg::Box => {
                let c = parse_list(&self.box_center)?;
                let [x, y] = c[..] else {
                    return Err(format!("--box-center {:?} must be x,y", self.box_center));
                };
                Init::IndicatorBox { center: [x, y] }
            }
        })
    }

    pub fn mode(&self) -> ThresholdMode {
        match self.mode {
            ModeArg::Strict => ThresholdMode::StrictBinary,
            ModeArg::Fractional => ThresholdMode::Fractional,
        }
    }
}

/// Builds and validates a run configuration; every failure here is a usage error.
pub fn run_config(problem: &ProblemArgs, run: &LoopArgs, v0: f64) -> Result<RunConfig, String> {
    let mut config = RunConfig::new(problem.objective()?, problem.domain(), v0)
        .with_init(run.init()?)
        .with_tolerance(run.tol)
        .with_max_iter(run.max_iter);
    config.mode = run.mode();
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

impl WeightArg {
    pub fn weight(self) -> Weight {
        match self {
            WeightArg::Rho => Weight::RhoE,
            WeightArg::Unweighted => Weight::Unweighted,
        }
    }
}

/// Removes `--config FILE` from `argv`, then inserts the file's entries as flags right
/// after the subcommand name.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(it.next().ok_or("--config needs a file")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let Some(pos) = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(rest);
    };
    let sub = Cli::command();
    let sub = sub.find_subcommand(&rest[pos]).ok_or_else(|| format!("unknown subcommand {:?}", rest[pos]))?;
    let mut inserted = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected `key = value`, got {raw:?}", lineno + 1))?;
        let flag = key.trim().replace('_', "-");
        let value = value.trim();
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(flag.as_str()) && !a.is_global_set())
            .ok_or_else(|| format!("{path}:{}: unknown key {:?} for {}", lineno + 1, key.trim(), rest[pos]))?;
        if arg.get_action().takes_values() {
            inserted.push(format!("--{flag}={value}"));
        } else {
            match value {
                "true" => inserted.push(format!("--{flag}")),
                "false" => {}
                _ => return Err(format!("{path}:{}: {flag} must be true or false", lineno + 1)),
            }
        }
    }
    rest.splice(pos + 1..pos + 1, inserted);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("0.7, 0.8").unwrap(), vec![0.7, 0.8]);
        assert_eq!(parse_list("0.7:0.95:0.05").unwrap(), vec![0.7, 0.75, 0.8, 0.85, 0.9, 0.95]);
        assert_eq!(parse_list("0.5:0.5:0.1").unwrap(), vec![0.5]);
        assert_eq!(parse_list("0.3, 0.8:0.9:0.1").unwrap(), vec![0.3, 0.8, 0.9]);
        assert!(parse_list("0.9:0.1:0.1").is_err());
        assert!(parse_list("a,b").is_err());
    }

    #[test]
    fn flags_parse() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["thresholdopt", "solve", "--v0", "0.8", "--n", "32"]).unwrap();
        let Command::Solve(s) = cli.command else { panic!() };
        assert_eq!(s.problem.n, 32);
        assert_eq!(s.run.tol, 1e-6);
    }

    #[test]
    fn later_flags_win() {
        let cli = Cli::try_parse_from(["thresholdopt", "solve", "--v0", "0.8", "--v0", "0.6"]).unwrap();
        let Command::Solve(s) = cli.command else { panic!() };
        assert_eq!(s.v0, 0.6);
    }
}
