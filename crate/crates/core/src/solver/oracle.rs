//! Exhaustive search for tiny instances, used as a referee.

use std::cmp::Ordering;

use num_traits::{Signed, Zero};

use super::packing::Ctx;
use super::{finish, Outcome, OracleLimits, RunOutput, SolverConfig, SolverError};
use crate::domain::{Instance, Placement, Weights};
use crate::validate;
use crate::Rational;

fn check_limits(instance: &Instance, limits: &OracleLimits) -> Result<(), SolverError> {
    let bin = instance.bin();
    if instance.item_count() > limits.max_items {
        return Err(SolverError::OracleLimits(format!(
            "{} items, at most {} allowed",
            instance.item_count(),
            limits.max_items
        )));
    }
    if bin.volume() > limits.max_bin_volume {
        return Err(SolverError::OracleLimits(format!(
            "bin volume {}, at most {} allowed",
            bin.volume(),
            limits.max_bin_volume
        )));
    }
    if bin.count > limits.max_bins {
        return Err(SolverError::OracleLimits(format!(
            "{} bins, at most {} allowed",
            bin.count, limits.max_bins
        )));
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Slot {
    bin: usize,
    orient: usize,
    p: [u32; 3],
}

/// Best complete packing so far, ranked by `(bins, Σ top, Σ deviation)`.
struct Incumbent {
    key: (usize, u64, Rational),
    placements: Vec<Placement>,
}

struct Dfs<'a> {
    instance: &'a Instance,
    ctx: Ctx,
    order: Vec<usize>,
    positive: Vec<bool>,
    slots: Vec<Option<Slot>>,
    bin_weight: Vec<u64>,
    /// `min_top[d]`: least height the items `order[d..]` add to Σ top.
    min_top: Vec<u64>,
    /// Prune by objective bound; off when listing every packing.
    bound: bool,
}

impl Dfs<'_> {
    fn new(instance: &Instance, bound: bool) -> Dfs<'_> {
        let ctx = Ctx::new(instance, &Weights::default());
        let m = ctx.m;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(ctx.volume[i]), i));
        let mut positive = vec![false; m * m];
        for (i, k) in instance.positive_item_pairs() {
            positive[i * m + k] = true;
            positive[k * m + i] = true;
        }
        let mut min_top = vec![0; m + 1];
        for d in (0..m).rev() {
            let i = order[d];
            let lowest = ctx.orients[i].iter().map(|&(_, dims)| dims[2] as u64).min().unwrap_or(0);
            min_top[d] = min_top[d + 1] + lowest;
        }
        Dfs {
            instance,
            bin_weight: vec![0; ctx.n],
            slots: vec![None; m],
            ctx,
            order,
            positive,
            min_top,
            bound,
        }
    }

    fn deviation(&self, d: [u32; 3], p: [u32; 3]) -> Rational {
        let Some(t) = self.instance.com_target() else {
            return Rational::zero();
        };
        let bin = self.instance.bin();
        let int = |v: u32| Rational::from_integer(v as i128);
        let cx = int(2 * p[0] + d[0]) / int(2);
        let cy = int(2 * p[1] + d[1]) / int(2);
        (cx - t.x).abs() / int(bin.length) + (cy - t.y).abs() / int(bin.width)
    }

    fn admissible(&self, i: usize, slot: Slot, d: [u32; 3]) -> bool {
        let ctx = &self.ctx;
        self.slots.iter().enumerate().all(|(k, s)| match s {
            None => true,
            Some(s) if s.bin != slot.bin => !self.positive[i * ctx.m + k],
            Some(s) => ctx.pair_ok(i, slot.p, d, k, s.p, ctx.orients[k][s.orient].1),
        })
    }

    fn placements(&self) -> Vec<Placement> {
        let size = self.ctx.size;
        (0..self.ctx.m)
            .map(|i| {
                let s = self.slots[i].expect("complete packing");
                Placement {
                    item: i,
                    bin: s.bin as u32 + 1,
                    orientation: self.ctx.orients[i][s.orient].0,
                    x: s.p[0] + s.bin as u32 * size[0],
                    y: s.p[1],
                    z: s.p[2],
                }
            })
            .collect()
    }

    /// Visits complete packings. `visit` returns the incumbent key used for
    /// pruning from then on.
    fn go(
        &mut self,
        depth: usize,
        bins_used: usize,
        top: u64,
        dev: Rational,
        best: &Option<(usize, u64, Rational)>,
        visit: &mut dyn FnMut(&Self) -> Result<Option<(usize, u64, Rational)>, SolverError>,
    ) -> Result<Option<(usize, u64, Rational)>, SolverError> {
        let mut best = *best;
        if self.bound {
            if let Some(b) = &best {
                let lb = (bins_used, top + self.min_top[depth], dev);
                if lb.cmp(b) != Ordering::Less {
                    return Ok(best);
                }
            }
        }
        if depth == self.order.len() {
            if let Some(k) = visit(self)? {
                best = Some(k);
            }
            return Ok(best);
        }
        let i = self.order[depth];
        let ctx_n = self.ctx.n;
        let size = self.ctx.size;
        let weight = self.ctx.weight[i];
        for bin in 0..(bins_used + 1).min(ctx_n) {
            if self.ctx.cap.is_some_and(|cap| self.bin_weight[bin] + weight > cap) {
                continue;
            }
            let clash = self
                .slots
                .iter()
                .enumerate()
                .any(|(k, s)| s.is_some_and(|s| s.bin == bin) && self.ctx.incompatible(i, k));
            if clash {
                continue;
            }
            for orient in 0..self.ctx.orients[i].len() {
                let d = self.ctx.orients[i][orient].1;
                if (0..3).any(|a| d[a] > size[a]) {
                    continue;
                }
                for z in 0..=size[2] - d[2] {
                    for y in 0..=size[1] - d[1] {
                        for x in 0..=size[0] - d[0] {
                            let slot = Slot { bin, orient, p: [x, y, z] };
                            if !self.admissible(i, slot, d) {
                                continue;
                            }
                            self.slots[i] = Some(slot);
                            self.bin_weight[bin] += weight;
                            let used = bins_used.max(bin + 1);
                            let r = self.go(
                                depth + 1,
                                used,
                                top + (z + d[2]) as u64,
                                dev + self.deviation(d, [x, y, z]),
                                &best,
                                visit,
                            );
                            self.bin_weight[bin] -= weight;
                            self.slots[i] = None;
                            best = r?;
                        }
                    }
                }
            }
        }
        Ok(best)
    }
}

/// Lexicographic optimum over `(o₁, o₂, o₃)` by full enumeration.
fn optimum(instance: &Instance, weights: &Weights) -> Result<Option<(Incumbent, Rational)>, SolverError> {
    let mut dfs = Dfs::new(instance, true);
    let mut found: Option<Incumbent> = None;
    let mut visit = |d: &Dfs| -> Result<Option<(usize, u64, Rational)>, SolverError> {
        let placements = d.placements();
        let top = placements
            .iter()
            .map(|p| (p.z + p.orientation.apply(instance.items()[p.item].dims())[2]) as u64)
            .sum();
        let dev = placements
            .iter()
            .map(|p| {
                let dims = p.orientation.apply(instance.items()[p.item].dims());
                let local = [p.x - (p.bin - 1) * instance.bin().length, p.y, p.z];
                d.deviation(dims, local)
            })
            .fold(Rational::zero(), |a, b| a + b);
        let bins = placements.iter().map(|p| p.bin).max().unwrap_or(0) as usize;
        let key = (bins, top, dev);
        found = Some(Incumbent {
            key,
            placements,
        });
        Ok(Some(key))
    };
    dfs.go(0, 0, 0, Rational::zero(), &None, &mut visit)?;
    match found {
        Some(inc) => {
            let (_, energy) = finish(instance, weights, inc.placements.clone())?;
            Ok(Some((inc, energy)))
        }
        None => Ok(None),
    }
}

pub(crate) fn run(instance: &Instance, config: &SolverConfig) -> Result<RunOutput, SolverError> {
    check_limits(instance, &config.oracle)?;
    match optimum(instance, &config.weights)? {
        Some((inc, energy)) => {
            debug_assert!(inc.key.0 >= 1);
            let (solution, _) = finish(instance, &config.weights, inc.placements)?;
            Ok(RunOutput {
                outcome: Outcome::Feasible(solution),
                energy: Some(energy),
                trajectory: vec![(std::time::Duration::ZERO, energy)],
            })
        }
        None => Ok(RunOutput {
            outcome: Outcome::Infeasible { certificate: None },
            energy: None,
            trajectory: Vec::new(),
        }),
    }
}

/// Calls `visit` on every feasible packing of a tiny instance, with bins
/// used in order. Returns how many there were.
///
/// Each packing is confirmed by the validator before it is passed on.
pub fn for_each_feasible(
    instance: &Instance,
    limits: &OracleLimits,
    mut visit: impl FnMut(&[Placement]),
) -> Result<usize, SolverError> {
    check_limits(instance, limits)?;
    let mut dfs = Dfs::new(instance, false);
    let mut count = 0;
    let mut each = |d: &Dfs| -> Result<Option<(usize, u64, Rational)>, SolverError> {
        let placements = d.placements();
        let report = validate::check(instance, &placements).map_err(|e| SolverError::Internal(e.to_string()))?;
        if !report.is_feasible() {
            return Err(SolverError::Internal(report.to_string()));
        }
        count += 1;
        visit(&placements);
        Ok(None)
    };
    dfs.go(0, 0, 0, Rational::zero(), &None, &mut each)?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BinSpec, InstanceParts, Item};
    use crate::solver::{solve, Backend};

    fn parts(dims: &[(u32, u32, u32, u32)], bin: (u32, u32, u32), n: u32) -> InstanceParts {
        let items = dims
            .iter()
            .enumerate()
            .map(|(i, &(l, w, h, mu))| Item {
                index: i,
                length: l,
                width: w,
                height: h,
                weight: mu,
                category: i as u32,
            })
            .collect();
        InstanceParts::new(
            items,
            BinSpec {
                length: bin.0,
                width: bin.1,
                height: bin.2,
                max_weight: None,
                count: n,
            },
        )
    }

    fn oracle() -> SolverConfig {
        SolverConfig {
            backend: Backend::Oracle,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn mixed_pair_stacks_at_three_quarters() {
        // The floor is 2 by 1, so one item has to sit on the other: tops 1 and 2.
        let inst = Instance::new(parts(&[(1, 1, 2, 1), (2, 1, 1, 1)], (2, 1, 2), 1)).unwrap();
        let sol = solve(&inst, &oracle()).unwrap().best.solution().cloned().unwrap();
        assert_eq!(sol.objectives.o2, Rational::new(3, 4));
        assert!(sol.placements.iter().any(|p| p.z == 0));
    }

    #[test]
    fn single_cube_fills_its_bin() {
        let inst = Instance::new(parts(&[(1, 1, 1, 1)], (1, 1, 1), 1)).unwrap();
        let r = solve(&inst, &oracle()).unwrap();
        let sol = r.best.solution().unwrap();
        assert_eq!(sol.placements[0].corner(), [0, 0, 0]);
        assert_eq!(sol.objectives.o2, Rational::from_integer(1));
        assert_eq!(r.energy, Some(Rational::from_integer(2)));
    }

    #[test]
    fn heavy_item_never_rests_on_light_one() {
        let mut p = parts(&[(1, 1, 1, 3), (1, 1, 1, 1)], (1, 1, 2), 1);
        p.eta = Some(Rational::new(3, 2));
        let inst = Instance::new(p).unwrap();
        let mut seen = 0;
        let count = for_each_feasible(&inst, &OracleLimits::default(), |pl| {
            seen += 1;
            assert!(pl[0].z < pl[1].z, "heavy item 0 must be underneath");
        })
        .unwrap();
        assert_eq!(count, 1);
        assert_eq!(seen, 1);
    }

    #[test]
    fn refuses_oversized_instances() {
        let inst = Instance::new(parts(&[(1, 1, 1, 1)], (5, 5, 5), 1)).unwrap();
        assert!(matches!(solve(&inst, &oracle()), Err(SolverError::OracleLimits(_))));
    }

    #[test]
    fn reports_infeasible() {
        let inst = Instance::new(parts(&[(2, 2, 2, 1); 3], (2, 2, 2), 2)).unwrap();
        let r = solve(&inst, &oracle()).unwrap();
        assert_eq!(r.best, Outcome::Infeasible { certificate: None });
    }
}
