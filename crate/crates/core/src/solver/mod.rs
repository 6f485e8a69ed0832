//! Backends that turn an [`Instance`] into a validated [`PackingSolution`].
//!
//! Every solution a backend returns has passed [`crate::validate::check`].

mod annealer;
mod heuristic;
mod oracle;
mod packing;
pub mod stats;
mod sweep;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::domain::{Instance, PackingSolution, Placement, Weights};
use crate::model::ModelError;
use crate::validate;
use crate::Rational;

pub use oracle::for_each_feasible;
pub use stats::{best_at, median, run_stats, RunStats, StatsError};
pub use sweep::{medians_non_increasing, time_sweep, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Heuristic,
    Annealer,
    Oracle,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Heuristic => "heuristic",
            Backend::Annealer => "annealer",
            Backend::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Backend> {
        match s {
            "heuristic" => Some(Backend::Heuristic),
            "annealer" => Some(Backend::Annealer),
            "oracle" => Some(Backend::Oracle),
            _ => None,
        }
    }
}

/// Relative frequency of each local-search move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveWeights {
    pub reinsert: f64,
    pub swap: f64,
    pub rotate: f64,
    pub change_bin: f64,
    pub empty_bin: f64,
    pub ruin: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        MoveWeights {
            reinsert: 4.0,
            swap: 2.0,
            rotate: 2.0,
            change_bin: 1.0,
            empty_bin: 1.0,
            ruin: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicParams {
    /// Constructive passes, the first in volume order and the rest shuffled.
    pub restarts: u32,
    pub moves: MoveWeights,
    /// Share of units pulled out by a ruin-and-recreate move.
    pub ruin_fraction: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams {
            restarts: 6,
            moves: MoveWeights::default(),
            ruin_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealerParams {
    pub initial_temperature: f64,
    /// Temperature factor applied after every sweep.
    pub cooling: f64,
    pub penalty_start: f64,
    /// Penalty factor applied after every sweep.
    pub penalty_growth: f64,
    /// Moves per sweep.
    pub sweep_length: u64,
}

impl Default for AnnealerParams {
    fn default() -> Self {
        AnnealerParams {
            initial_temperature: 2.0,
            cooling: 0.97,
            penalty_start: 1.0,
            penalty_growth: 1.05,
            sweep_length: 2000,
        }
    }
}

/// Hard caps for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_items: usize,
    pub max_bin_volume: u64,
    pub max_bins: u32,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_items: 4,
            max_bin_volume: 64,
            max_bins: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub backend: Backend,
    /// Wall-clock budget per run. Ignored when `iterations` is set.
    pub time_limit: Duration,
    /// Fixed move budget per run, which makes results independent of the clock.
    pub iterations: Option<u64>,
    /// Stop a run after this many moves without improvement.
    pub stall_limit: Option<u64>,
    pub seed: u64,
    /// Independent runs, seeded `seed, seed + 1, ...`.
    pub runs: u32,
    pub weights: Weights,
    pub heuristic: HeuristicParams,
    pub annealer: AnnealerParams,
    pub oracle: OracleLimits,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: Backend::Heuristic,
            time_limit: Duration::from_secs(5),
            iterations: None,
            stall_limit: None,
            seed: 0,
            runs: 1,
            weights: Weights::default(),
            heuristic: HeuristicParams::default(),
            annealer: AnnealerParams::default(),
            oracle: OracleLimits::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.time_limit.is_zero() {
            return Err(SolverError::BadConfig("time limit must be positive".into()));
        }
        let c = self.annealer.cooling;
        if !(c > 0.0 && c < 1.0) {
            return Err(SolverError::BadConfig(format!("cooling factor {c} is outside (0, 1)")));
        }
        if self.runs == 0 {
            return Err(SolverError::BadConfig("at least one run is required".into()));
        }
        if self.heuristic.restarts == 0 {
            return Err(SolverError::BadConfig("at least one restart is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("bad solver configuration: {0}")]
    BadConfig(String),
    #[error("instance exceeds oracle limits: {0}")]
    OracleLimits(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("backend produced an invalid packing: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Feasible(PackingSolution),
    /// No feasible packing was found. The certificate, when present, is an
    /// item that could not be placed anywhere.
    Infeasible { certificate: Option<usize> },
}

impl Outcome {
    pub fn solution(&self) -> Option<&PackingSolution> {
        match self {
            Outcome::Feasible(s) => Some(s),
            Outcome::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub seed: u64,
    pub energy: Option<Rational>,
    pub elapsed: Duration,
    /// Energy after each improvement, with the time it was reached.
    pub trajectory: Vec<(Duration, Rational)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub best: Outcome,
    /// Weighted objective of `best`.
    pub energy: Option<Rational>,
    pub elapsed: Duration,
    /// One record per run, sorted by seed.
    pub runs: Vec<RunRecord>,
}

/// Result of one seeded run before aggregation.
pub(crate) struct RunOutput {
    pub outcome: Outcome,
    pub energy: Option<Rational>,
    pub trajectory: Vec<(Duration, Rational)>,
}

/// Stop rule shared by the iterative backends.
pub(crate) struct Budget {
    start: Instant,
    deadline: Option<Instant>,
    iterations: Option<u64>,
    stall_limit: Option<u64>,
    pub done: u64,
    pub stalled: u64,
}

impl Budget {
    pub fn new(config: &SolverConfig, start: Instant) -> Self {
        Budget {
            start,
            deadline: match config.iterations {
                Some(_) => None,
                None => Some(start + config.time_limit),
            },
            iterations: config.iterations,
            stall_limit: config.stall_limit,
            done: 0,
            stalled: 0,
        }
    }

    /// Counts one move; false once the budget is spent.
    pub fn tick(&mut self) -> bool {
        if self.iterations.is_some_and(|cap| self.done >= cap)
            || self.stall_limit.is_some_and(|cap| self.stalled >= cap)
        {
            return false;
        }
        // The clock is read sparingly; it dominates cheap moves otherwise.
        if self.done.is_multiple_of(16) && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return false;
        }
        self.done += 1;
        self.stalled += 1;
        true
    }

    pub fn improved(&mut self) {
        self.stalled = 0;
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }
}

/// Validates `placements` and prices them, or explains why not.
pub(crate) fn finish(
    instance: &Instance,
    weights: &Weights,
    mut placements: Vec<Placement>,
) -> Result<(PackingSolution, Rational), SolverError> {
    placements.sort_by_key(|p| p.item);
    let report = validate::check(instance, &placements).map_err(|e| SolverError::Internal(e.to_string()))?;
    if !report.is_feasible() {
        return Err(SolverError::Internal(report.to_string()));
    }
    let objectives =
        validate::raw_objectives(instance, &placements).map_err(|e| SolverError::Internal(e.to_string()))?;
    let energy = objectives.energy(weights);
    Ok((
        PackingSolution {
            bins_used: objectives.o1,
            placements,
            objectives,
        },
        energy,
    ))
}

fn run_once(instance: &Instance, config: &SolverConfig, seed: u64) -> Result<(RunOutput, Duration), SolverError> {
    let start = Instant::now();
    let out = match config.backend {
        Backend::Heuristic => heuristic::run(instance, config, seed, start)?,
        Backend::Annealer => annealer::run(instance, config, seed, start)?,
        Backend::Oracle => oracle::run(instance, config)?,
    };
    Ok((out, start.elapsed()))
}

fn worker_count(runs: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("BINPACK3D_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(available);
    cap.min(runs).max(1)
}

/// Runs the configured backend `config.runs` times and keeps the best result.
///
/// Runs are independent and may execute on several threads; the result does
/// not depend on how they were scheduled.
pub fn solve(instance: &Instance, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    config.validate()?;
    let start = Instant::now();
    let seeds: Vec<u64> = (0..config.runs as u64).map(|r| config.seed.wrapping_add(r)).collect();
    let workers = worker_count(seeds.len());

    let mut results: Vec<(u64, Result<(RunOutput, Duration), SolverError>)> = if workers <= 1 {
        seeds.iter().map(|&s| (s, run_once(instance, config, s))).collect()
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let collected = std::sync::Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let Some(&s) = seeds.get(idx) else { break };
                    let r = run_once(instance, config, s);
                    collected.lock().expect("no worker panicked").push((s, r));
                });
            }
        });
        collected.into_inner().expect("no worker panicked")
    };
    results.sort_by_key(|(s, _)| *s);

    let mut runs = Vec::with_capacity(results.len());
    let mut best: Option<(Rational, PackingSolution)> = None;
    let mut certificate = None;
    for (seed, r) in results {
        let (out, elapsed) = r?;
        match out.outcome {
            Outcome::Feasible(sol) => {
                let e = out.energy.expect("feasible runs carry an energy");
                if best.as_ref().is_none_or(|(b, _)| e < *b) {
                    best = Some((e, sol));
                }
            }
            Outcome::Infeasible { certificate: c } => {
                certificate = certificate.or(c);
            }
        }
        runs.push(RunRecord {
            seed,
            energy: out.energy,
            elapsed,
            trajectory: out.trajectory,
        });
    }
    let (best, energy) = match best {
        Some((e, sol)) => (Outcome::Feasible(sol), Some(e)),
        None => (Outcome::Infeasible { certificate }, None),
    };
    Ok(SolveResult {
        best,
        energy,
        elapsed: start.elapsed(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_checks() {
        assert!(SolverConfig::default().validate().is_ok());
        let mut c = SolverConfig::default();
        c.time_limit = Duration::ZERO;
        assert!(matches!(c.validate(), Err(SolverError::BadConfig(_))));
        let mut c = SolverConfig::default();
        c.annealer.cooling = 1.0;
        assert!(c.validate().is_err());
        assert_eq!(Backend::parse("oracle"), Some(Backend::Oracle));
        assert_eq!(Backend::parse(Backend::Annealer.as_str()), Some(Backend::Annealer));
    }
}
