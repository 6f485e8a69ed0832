use std::time::Duration;

use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("no energies to summarize")]
    Empty,
    #[error("mean energy is zero, relative deviation is undefined")]
    ZeroMean,
}

/// Summary of the energies returned by repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub mean: Rational,
    /// Population standard deviation.
    pub std: f64,
    /// Mean relative deviation `(1/R) Σ |e_i/μ − 1|`.
    pub sigma_bar: Rational,
    pub min: Rational,
    pub max: Rational,
}

pub fn run_stats(energies: &[Rational]) -> Result<RunStats, StatsError> {
    let (&first, _) = energies.split_first().ok_or(StatsError::Empty)?;
    let count = Rational::from_integer(energies.len() as i128);
    let mean = energies.iter().copied().fold(Rational::zero(), |a, e| a + e) / count;
    if mean.is_zero() {
        return Err(StatsError::ZeroMean);
    }
    let sigma_bar = energies
        .iter()
        .map(|&e| (e / mean - Rational::from_integer(1)).abs())
        .fold(Rational::zero(), |a, d| a + d)
        / count;
    let var = energies
        .iter()
        .map(|&e| (e - mean) * (e - mean))
        .fold(Rational::zero(), |a, d| a + d)
        / count;
    Ok(RunStats {
        mean,
        std: var.to_f64().unwrap_or(f64::NAN).sqrt(),
        sigma_bar,
        min: energies.iter().copied().fold(first, Rational::min),
        max: energies.iter().copied().fold(first, Rational::max),
    })
}

/// Best energy reached by `at` in a run's improvement trajectory.
pub fn best_at(trajectory: &[(Duration, Rational)], at: Duration) -> Option<Rational> {
    trajectory
        .iter()
        .take_while(|(t, _)| *t <= at)
        .map(|&(_, e)| e)
        .min()
}

/// Median of a non-empty list; the mean of the two middle values for even
/// lengths.
pub fn median(values: &[Rational]) -> Option<Rational> {
    let mut v = values.to_vec();
    v.sort();
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / Rational::from_integer(2)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: i128) -> Rational {
        Rational::from_integer(v)
    }

    #[test]
    fn identical_energies_have_no_spread() {
        let s = run_stats(&[r(2), r(2), r(2)]).unwrap();
        assert_eq!(s.mean, r(2));
        assert_eq!(s.std, 0.0);
        assert_eq!(s.sigma_bar, r(0));
    }

    #[test]
    fn one_and_three() {
        let s = run_stats(&[r(1), r(3)]).unwrap();
        assert_eq!(s.mean, r(2));
        assert_eq!(s.sigma_bar, Rational::new(1, 2));
        assert_eq!(s.std, 1.0);
        assert_eq!((s.min, s.max), (r(1), r(3)));
    }

    #[test]
    fn singleton_and_errors() {
        assert_eq!(run_stats(&[Rational::new(7, 3)]).unwrap().sigma_bar, r(0));
        assert_eq!(run_stats(&[]), Err(StatsError::Empty));
        assert_eq!(run_stats(&[r(-1), r(1)]), Err(StatsError::ZeroMean));
    }

    #[test]
    fn best_at_reads_prefix() {
        let t = |s| Duration::from_secs(s);
        let traj = [(t(1), r(5)), (t(4), r(3)), (t(20), r(2))];
        assert_eq!(best_at(&traj, t(0)), None);
        assert_eq!(best_at(&traj, t(5)), Some(r(3)));
        assert_eq!(best_at(&traj, t(60)), Some(r(2)));
        assert_eq!(median(&[r(3), r(1), r(2), r(10)]), Some(Rational::new(5, 2)));
    }
}
