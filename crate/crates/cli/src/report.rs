//! Run-statistics tables built from run logs.

use std::io::Write;

use binpack3d_core::solver::{median, run_stats, RunStats};
use binpack3d_core::Rational;
use num_traits::ToPrimitive;

use crate::format::RunLog;

/// Statistics of all runs recorded for one instance and time limit.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub instance: String,
    pub time_limit_s: f64,
    pub runs: usize,
    pub feasible: usize,
    pub median: Option<Rational>,
    /// `None` when no run was feasible or the mean energy is zero.
    pub stats: Option<RunStats>,
}

/// One row per (instance, time limit), in order of first appearance. Logs
/// with the same key are merged.
pub fn stats_rows(logs: &[RunLog]) -> Vec<StatsRow> {
    let mut groups: Vec<(String, f64, Vec<Option<Rational>>)> = Vec::new();
    for log in logs {
        let energies = log.energies.iter().map(|e| e.map(|x| x.0));
        match groups
            .iter_mut()
            .find(|(name, limit, _)| *name == log.instance && *limit == log.time_limit_s)
        {
            Some(g) => g.2.extend(energies),
            None => groups.push((log.instance.clone(), log.time_limit_s, energies.collect())),
        }
    }
    groups
        .into_iter()
        .map(|(instance, time_limit_s, energies)| {
            let found: Vec<Rational> = energies.iter().flatten().copied().collect();
            let stats = run_stats(&found).ok();
            StatsRow {
                instance,
                time_limit_s,
                runs: energies.len(),
                feasible: found.len(),
                median: median(&found),
                stats,
            }
        })
        .collect()
}

fn num(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

pub const HEADER: [&str; 10] = [
    "instance",
    "time_limit_s",
    "runs",
    "feasible",
    "median",
    "mean",
    "std",
    "sigma_bar",
    "min",
    "max",
];

fn cells(row: &StatsRow) -> [String; 10] {
    let s = row.stats.as_ref();
    [
        row.instance.clone(),
        format!("{}", row.time_limit_s),
        row.runs.to_string(),
        row.feasible.to_string(),
        cell(row.median.map(num)),
        cell(s.map(|s| num(s.mean))),
        cell(s.map(|s| s.std)),
        cell(s.map(|s| num(s.sigma_bar))),
        cell(s.map(|s| num(s.min))),
        cell(s.map(|s| num(s.max))),
    ]
}

/// Fixed-width text table.
pub fn table(rows: &[StatsRow]) -> String {
    let body: Vec<[String; 10]> = rows.iter().map(cells).collect();
    let mut widths = HEADER.map(str::len);
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: &[String]| {
        let parts: Vec<String> = cols
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(n, (c, w))| if n == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&HEADER.map(String::from));
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

/// Plot data: the table columns as CSV.
pub fn write_csv<W: Write>(rows: &[StatsRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(cells(r))?;
    }
    w.flush()?;
    Ok(())
}
