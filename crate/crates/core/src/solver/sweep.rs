//! Energy against time limit, over repeated seeded runs.

use std::time::Duration;

use super::stats::{best_at, median, run_stats, RunStats};
use super::{solve, SolverConfig, SolverError};
use crate::domain::Instance;
use crate::Rational;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub limit: Duration,
    /// Best energy of each run by `limit`, in seed order; `None` when the
    /// run had nothing feasible yet.
    pub energies: Vec<Option<Rational>>,
    pub median: Option<Rational>,
    pub stats: Option<RunStats>,
}

/// Runs `config.runs` seeds once each, up to the largest limit, and reads
/// every run's best energy at each limit.
///
/// A run's move sequence depends only on its seed, so a run stopped at a
/// shorter limit is a prefix of the long run. Sampling the long run at
/// each limit therefore reports what separate runs would have returned.
pub fn time_sweep(instance: &Instance, config: &SolverConfig, limits: &[Duration]) -> Result<Vec<SweepRow>, SolverError> {
    let longest = limits.iter().copied().max().unwrap_or(config.time_limit);
    let long = SolverConfig {
        time_limit: longest,
        iterations: None,
        ..config.clone()
    };
    let result = solve(instance, &long)?;
    Ok(limits
        .iter()
        .map(|&limit| {
            let energies: Vec<Option<Rational>> = result.runs.iter().map(|r| best_at(&r.trajectory, limit)).collect();
            let found: Vec<Rational> = energies.iter().flatten().copied().collect();
            SweepRow {
                limit,
                median: median(&found),
                stats: run_stats(&found).ok(),
                energies,
            }
        })
        .collect())
}

/// True when the medians never rise as the limit grows. Rows without any
/// feasible run are skipped.
pub fn medians_non_increasing(rows: &[SweepRow]) -> bool {
    let medians: Vec<Rational> = rows.iter().filter_map(|r| r.median).collect();
    medians.windows(2).all(|w| w[1] <= w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BinSpec, InstanceParts, Item};

    #[test]
    fn sweep_reads_each_limit() {
        let items = (0..5)
            .map(|i| Item {
                index: i,
                length: 1 + i as u32 % 2,
                width: 1,
                height: 1,
                weight: 1,
                category: 0,
            })
            .collect();
        let bin = BinSpec {
            length: 3,
            width: 2,
            height: 2,
            max_weight: None,
            count: 2,
        };
        let inst = Instance::new(InstanceParts::new(items, bin)).unwrap();
        let config = SolverConfig {
            runs: 3,
            stall_limit: Some(200),
            ..SolverConfig::default()
        };
        let limits = [Duration::from_millis(200), Duration::from_secs(1)];
        let rows = time_sweep(&inst, &config, &limits).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.energies.len() == 3));
        assert!(medians_non_increasing(&rows));
    }
}
