//! Command line front end: instance generation, model building, solving,
//! validation, rendering and run statistics.
//!
//! Exit codes: 0 success or feasible, 1 the validated solution is
//! infeasible, 2 usage or input error, 3 the solver found no feasible
//! packing.

pub mod format;
pub mod render;
pub mod report;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use binpack3d_core::datagen::{self, GenSpec};
use binpack3d_core::model::{build_model_with, census, count_model, to_lp_string, BuildOptions, ModelCounts};
use binpack3d_core::solver::{self, run_stats, time_sweep, Backend, Outcome, SolverConfig};
use binpack3d_core::validate::{self, ValidateError};
use binpack3d_core::{ComTarget, Instance, Rational, Weights};
use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::format::{read_instance, read_json, to_json, Exact, InstanceFile, RunLog, RunLogSource, SolutionFile};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INFEASIBLE_SOLUTION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NO_PACKING: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "binpack3d", version, about = "Three-dimensional bin packing with real-world restrictions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file from an archetype or explicit settings.
    Generate(GenerateArgs),
    /// Report model size, optionally writing the model in LP format.
    Build(BuildArgs),
    /// Solve an instance and write the best packing.
    Solve(SolveArgs),
    /// Check a solution against an instance.
    Validate(ValidateArgs),
    /// Draw a solution as an SVG file.
    Render(RenderArgs),
    /// Summarize run logs.
    Stats(StatsArgs),
    /// Solve repeatedly and report energy against time limit.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Benchmark archetype, 1 to 12.
    #[arg(long, conflicts_with_all = ["items", "bin_dims", "bins", "categories", "max_weight", "eta", "com_target", "positive", "negative", "random_positive", "random_negative"])]
    pub archetype: Option<usize>,
    /// Number of items.
    #[arg(long, required_unless_present = "archetype")]
    pub items: Option<usize>,
    /// Bin dimensions L,W,H.
    #[arg(long, value_delimiter = ',')]
    pub bin_dims: Option<Vec<u32>>,
    /// Upper bound on bins (default: volume/weight estimate).
    #[arg(long)]
    pub bins: Option<u32>,
    #[arg(long)]
    pub categories: Option<u32>,
    /// Weight capacity per bin.
    #[arg(long)]
    pub max_weight: Option<u32>,
    /// Load-bearing mass ratio, e.g. 2 or 3/2.
    #[arg(long)]
    pub eta: Option<String>,
    /// Center-of-mass target X,Y.
    #[arg(long, value_delimiter = ',')]
    pub com_target: Option<Vec<String>>,
    /// Positive category pair A:B, repeatable.
    #[arg(long)]
    pub positive: Vec<String>,
    /// Negative category pair A:B, repeatable.
    #[arg(long)]
    pub negative: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub random_positive: usize,
    #[arg(long, default_value_t = 0)]
    pub random_negative: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Objective weights for bins, height and balance, e.g. 1,1,0.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<String>>,
}

impl WeightArgs {
    fn weights(&self) -> Result<Weights> {
        let Some(w) = &self.weights else {
            return Ok(Weights::default());
        };
        expect_len(w, 3, "--weights")?;
        let p = |s: &String| format::parse_rational(s).map_err(|e| anyhow!("--weights: {e}"));
        Ok(Weights {
            bins: p(&w[0])?,
            height: p(&w[1])?,
            balance: p(&w[2])?,
        })
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Print closed-form counts without building the model.
    #[arg(long)]
    pub counts_only: bool,
    /// Write the model in LP format.
    #[arg(long, conflicts_with = "counts_only")]
    pub export_lp: Option<PathBuf>,
    /// Keep every non-overlap row and position variable.
    #[arg(long)]
    pub no_reductions: bool,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value = "heuristic")]
    pub backend: String,
    /// Seconds per run.
    #[arg(long, default_value_t = 5.0)]
    pub time_limit: f64,
    #[arg(long, default_value_t = 1)]
    pub runs: u32,
    /// Seed of the first run; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop each run after this many moves instead of on the clock.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Stop a run after this many moves without improvement.
    #[arg(long)]
    pub stall_limit: Option<u64>,
    #[command(flatten)]
    pub weights: WeightArgs,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let backend = Backend::parse(&self.backend)
            .ok_or_else(|| anyhow!("unknown backend {:?}; expected heuristic, annealer or oracle", self.backend))?;
        if !(self.time_limit.is_finite() && self.time_limit > 0.0) {
            bail!("--time-limit must be a positive number of seconds");
        }
        Ok(SolverConfig {
            backend,
            time_limit: Duration::from_secs_f64(self.time_limit),
            iterations: self.iterations,
            stall_limit: self.stall_limit,
            seed: self.seed,
            runs: self.runs,
            weights: self.weights.weights()?,
            ..SolverConfig::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Leave wall-clock time out of the solution file.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Solution files, run logs or lists of run logs.
    #[arg(long, num_args = 1.., required = true)]
    pub runlogs: Vec<PathBuf>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Time limits in seconds.
    #[arg(long, value_delimiter = ',', default_value = "5,10,30,60")]
    pub limits: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write one run log per limit.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Generate(a) => generate(&a),
        Command::Build(a) => build(&a),
        Command::Solve(a) => solve(&a),
        Command::Validate(a) => validate(&a),
        Command::Render(a) => render(&a),
        Command::Stats(a) => stats(&a),
        Command::Sweep(a) => sweep(&a),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn expect_len<T>(values: &[T], n: usize, flag: &str) -> Result<()> {
    if values.len() != n {
        bail!("{flag} takes {n} comma-separated values, got {}", values.len());
    }
    Ok(())
}

fn category_pair(s: &str) -> Result<(u32, u32)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("category pair {s:?} must look like A:B"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn gen_spec(a: &GenerateArgs) -> Result<GenSpec> {
    if let Some(n) = a.archetype {
        return datagen::archetype(n, a.seed).ok_or_else(|| anyhow!("archetype must be between 1 and 12, got {n}"));
    }
    let items = a.items.expect("clap requires --items without --archetype");
    let mut spec = GenSpec::new(items, a.seed);
    if let Some(d) = &a.bin_dims {
        expect_len(d, 3, "--bin-dims")?;
        spec.bin = (d[0], d[1], d[2]);
    }
    spec.bin_count = a.bins;
    if let Some(c) = a.categories {
        spec.category_count = c;
    }
    let f = &mut spec.features;
    f.max_weight = a.max_weight;
    f.eta = a
        .eta
        .as_deref()
        .map(format::parse_rational)
        .transpose()
        .map_err(|e| anyhow!("--eta: {e}"))?;
    if let Some(t) = &a.com_target {
        expect_len(t, 2, "--com-target")?;
        let p = |s: &String| format::parse_rational(s).map_err(|e| anyhow!("--com-target: {e}"));
        f.com_target = Some(ComTarget {
            x: p(&t[0])?,
            y: p(&t[1])?,
        });
    }
    f.positive = a.positive.iter().map(|s| category_pair(s)).collect::<Result<_>>()?;
    f.negative = a.negative.iter().map(|s| category_pair(s)).collect::<Result<_>>()?;
    f.random_positive = a.random_positive;
    f.random_negative = a.random_negative;
    Ok(spec)
}

fn generate(a: &GenerateArgs) -> Result<u8> {
    let instance = datagen::generate(&gen_spec(a)?)?;
    let text = to_json(&InstanceFile::from_instance(&instance));
    write_out(a.out.as_deref(), &text)?;
    if a.out.is_some() {
        let weight: u64 = instance.items().iter().map(|i| i.weight as u64).sum();
        eprintln!("{} items, total weight {weight}", instance.item_count());
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct CountsReport {
    binary: u64,
    continuous: u64,
    quadratic_constraints: u64,
    linear_constraints: u64,
}

impl From<&ModelCounts> for CountsReport {
    fn from(c: &ModelCounts) -> Self {
        CountsReport {
            binary: c.binary_vars,
            continuous: c.continuous_vars,
            quadratic_constraints: c.quadratic_constraints,
            linear_constraints: c.linear_constraints,
        }
    }
}

fn build(a: &BuildArgs) -> Result<u8> {
    let instance = read_instance(&a.instance)?;
    for w in instance.warnings() {
        eprintln!("warning: {w}");
    }
    let counts = if a.counts_only {
        if a.no_reductions {
            bail!("--counts-only describes the reduced model; drop --no-reductions");
        }
        count_model(&instance)
    } else {
        let model = build_model_with(
            &instance,
            BuildOptions {
                weights: a.weights.weights()?,
                reductions: !a.no_reductions,
            },
        )?;
        if let Some(path) = &a.export_lp {
            std::fs::write(path, to_lp_string(&model)).with_context(|| format!("writing {}", path.display()))?;
        }
        census(&model)
    };
    write_out(None, &to_json(&CountsReport::from(&counts)))?;
    Ok(EXIT_OK)
}

fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn fmt_num(r: Rational) -> String {
    format!("{:.6}", r.to_f64().unwrap_or(f64::NAN))
}

fn print_run_stats(energies: &[Option<Rational>]) {
    let found: Vec<Rational> = energies.iter().flatten().copied().collect();
    eprintln!("runs: {} ({} feasible)", energies.len(), found.len());
    if let Ok(s) = run_stats(&found) {
        eprintln!(
            "mean {}  std {:.6}  sigma_bar {}  min {}  max {}",
            fmt_num(s.mean),
            s.std,
            fmt_num(s.sigma_bar),
            fmt_num(s.min),
            fmt_num(s.max)
        );
    }
}

fn solve_instance(path: &Path, args: &SolverArgs) -> Result<(Instance, SolverConfig)> {
    let instance = read_instance(path)?;
    let config = args.config()?;
    Ok((instance, config))
}

fn solve(a: &SolveArgs) -> Result<u8> {
    let (instance, config) = solve_instance(&a.instance, &a.solver)?;
    let result = solver::solve(&instance, &config)?;
    let energies: Vec<Option<Rational>> = result.runs.iter().map(|r| r.energy).collect();
    print_run_stats(&energies);
    let solution = match &result.best {
        Outcome::Feasible(s) => s,
        Outcome::Infeasible { certificate } => {
            eprintln!("no feasible packing found");
            if let Some(i) = certificate {
                eprintln!("certificate: item {i} could not be placed in any open bin");
            }
            return Ok(EXIT_NO_PACKING);
        }
    };
    let energy = result.energy.expect("feasible outcome has an energy");
    let mut file = SolutionFile::new(solution, energy, config.backend.as_str(), config.seed);
    if !a.no_timing {
        file.elapsed_s = Some(result.elapsed.as_secs_f64());
    }
    file.run_log = Some(RunLog {
        instance: instance_name(&a.instance),
        backend: config.backend.as_str().to_string(),
        time_limit_s: a.solver.time_limit,
        iterations: config.iterations,
        energies: energies.iter().map(|e| e.map(Exact)).collect(),
    });
    let o = &solution.objectives;
    eprintln!(
        "best energy {} ({})  bins {}  o2 {}{}",
        fmt_num(energy),
        energy,
        o.o1,
        fmt_num(o.o2),
        o.o3.map_or(String::new(), |v| format!("  o3 {}", fmt_num(v)))
    );
    write_out(a.out.as_deref(), &to_json(&file))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct ViolationRecord {
    rule: String,
    indices: Vec<usize>,
    magnitude: Exact,
}

fn validate(a: &ValidateArgs) -> Result<u8> {
    let instance = read_instance(&a.instance)?;
    let file: SolutionFile = read_json(&a.solution)?;
    let placements = file.placements()?;
    let report = match validate::check(&instance, &placements) {
        Ok(r) => r,
        Err(ValidateError::Malformed(msg)) => bail!("malformed solution: {msg}"),
        Err(e) => return Err(e.into()),
    };
    let records: Vec<ViolationRecord> = report
        .entries
        .iter()
        .map(|e| ViolationRecord {
            rule: e.rule.as_str().to_string(),
            indices: e.indices.clone(),
            magnitude: Exact(e.magnitude),
        })
        .collect();
    let text = if records.is_empty() {
        "[]\n".to_string()
    } else {
        to_json(&records)
    };
    write_out(None, &text)?;
    if !report.is_feasible() {
        return Ok(EXIT_INFEASIBLE_SOLUTION);
    }
    let actual = validate::objectives(&instance, &placements)?;
    if actual != file.objectives() {
        eprintln!(
            "warning: recorded objectives differ from recomputed o1={} o2={}{}",
            actual.o1,
            actual.o2,
            actual.o3.map_or(String::new(), |v| format!(" o3={v}"))
        );
    }
    Ok(EXIT_OK)
}

fn render(a: &RenderArgs) -> Result<u8> {
    let instance = read_instance(&a.instance)?;
    let file: SolutionFile = read_json(&a.solution)?;
    let placements = file.placements()?;
    if let Some(p) = placements.iter().find(|p| p.item >= instance.item_count() || p.bin == 0) {
        bail!("placement of item {} in bin {} does not match the instance", p.item, p.bin);
    }
    let svg = render::render_svg(&instance, &placements);
    std::fs::write(&a.out, svg).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(EXIT_OK)
}

fn emit_rows(rows: &[report::StatsRow], csv: Option<&Path>) -> Result<()> {
    write_out(None, &report::table(rows))?;
    if let Some(path) = csv {
        let f = std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        report::write_csv(rows, f)?;
    }
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<u8> {
    let mut logs = Vec::new();
    for path in &a.runlogs {
        let source: RunLogSource = read_json(path)?;
        let found = source.into_logs();
        if found.is_empty() {
            bail!("{}: solution file has no run log", path.display());
        }
        logs.extend(found);
    }
    emit_rows(&report::stats_rows(&logs), a.csv.as_deref())?;
    Ok(EXIT_OK)
}

fn sweep(a: &SweepArgs) -> Result<u8> {
    let (instance, config) = solve_instance(&a.instance, &a.solver)?;
    if a.limits.is_empty() || a.limits.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        bail!("--limits must be positive numbers of seconds");
    }
    let limits: Vec<Duration> = a.limits.iter().map(|&l| Duration::from_secs_f64(l)).collect();
    let rows = time_sweep(&instance, &config, &limits)?;
    let name = instance_name(&a.instance);
    let logs: Vec<RunLog> = rows
        .iter()
        .zip(&a.limits)
        .map(|(row, &limit)| RunLog {
            instance: name.clone(),
            backend: config.backend.as_str().to_string(),
            time_limit_s: limit,
            iterations: None,
            energies: row.energies.iter().map(|e| e.map(Exact)).collect(),
        })
        .collect();
    if let Some(path) = &a.out {
        std::fs::write(path, to_json(&logs)).with_context(|| format!("writing {}", path.display()))?;
    }
    emit_rows(&report::stats_rows(&logs), a.csv.as_deref())?;
    if !solver::medians_non_increasing(&rows) {
        eprintln!("note: median energy rose with the time limit");
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arguments_parse() {
        let cli = Cli::try_parse_from(["binpack3d", "solve", "--instance", "a.json", "--weights", "1,1,0"]).unwrap();
        let Command::Solve(s) = cli.command else { panic!() };
        let w = s.solver.weights.weights().unwrap();
        assert_eq!(w.balance, Rational::from_integer(0));
        assert!(Cli::try_parse_from(["binpack3d", "generate", "--archetype", "1", "--items", "4"]).is_err());
        assert!(Cli::try_parse_from(["binpack3d", "generate"]).is_err());
    }

    #[test]
    fn category_pairs() {
        assert_eq!(category_pair("3:7").unwrap(), (3, 7));
        assert!(category_pair("3-7").is_err());
    }

    #[test]
    fn unknown_archetype_is_a_usage_error() {
        assert_eq!(run(["binpack3d", "generate", "--archetype", "13"]), EXIT_USAGE);
    }
}
