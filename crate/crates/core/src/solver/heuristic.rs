//! Constructive placement plus local search in placement space.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::packing::{better, not_worse, BinLoad, Ctx, Packing};
use super::{finish, Budget, Outcome, RunOutput, SolverConfig, SolverError};
use crate::domain::Instance;

/// Builds a packing unit by unit, first bin that takes each unit.
fn construct(ctx: &Ctx, order: &[Vec<usize>], by_cost: bool) -> Result<Packing, usize> {
    let mut p = Packing::empty(ctx);
    for unit in order {
        let placed = (0..p.bins.len()).any(|b| p.insert_unit(ctx, unit, b, by_cost));
        if placed {
            continue;
        }
        if p.bins.len() < ctx.n {
            p.bins.push(BinLoad::default());
            if p.insert_unit(ctx, unit, p.bins.len() - 1, by_cost) {
                continue;
            }
            p.bins.pop();
        }
        return Err(unit[0]);
    }
    Ok(p)
}

/// Best packing obtained by adding `unit` to one bin of `p`.
fn insert_best(ctx: &Ctx, p: &Packing, unit: &[usize], allow_new: bool, exclude: Option<usize>) -> Option<Packing> {
    let open = p.bins.len() + usize::from(allow_new && p.bins.len() < ctx.n);
    let mut best: Option<Packing> = None;
    for b in 0..open {
        if Some(b) == exclude || (b < p.bins.len() && !p.bin_accepts(ctx, b, unit)) {
            continue;
        }
        let mut c = p.clone();
        if b == c.bins.len() {
            c.bins.push(BinLoad::default());
        }
        if c.insert_unit(ctx, unit, b, true) && best.as_ref().is_none_or(|x| better(c.key(), x.key())) {
            best = Some(c);
        }
    }
    best
}

fn remove_unit(ctx: &Ctx, p: &mut Packing, unit: &[usize]) {
    for &i in unit {
        p.remove(ctx, i);
    }
}

struct Search<'a> {
    ctx: &'a Ctx,
    rng: ChaCha8Rng,
    ruin_fraction: f64,
}

impl Search<'_> {
    fn reinsert(&mut self, cur: &Packing) -> Option<Packing> {
        let i = self.rng.random_range(0..self.ctx.m);
        let unit = self.ctx.unit_of(i);
        let mut c = cur.clone();
        remove_unit(self.ctx, &mut c, &unit);
        let mut c = insert_best(self.ctx, &c, &unit, true, None)?;
        c.compact_bins();
        Some(c)
    }

    fn swap(&mut self, cur: &Packing) -> Option<Packing> {
        let ctx = self.ctx;
        let free: Vec<usize> = (0..ctx.m).filter(|&i| ctx.group[i].is_none()).collect();
        if free.len() < 2 {
            return None;
        }
        let a = free[self.rng.random_range(0..free.len())];
        let b = free[self.rng.random_range(0..free.len())];
        if a == b || ctx.volume[a] == ctx.volume[b] && cur.spot[a].map(|s| s.bin) == cur.spot[b].map(|s| s.bin) {
            return None;
        }
        let mut c = cur.clone();
        let sa = c.remove(ctx, a);
        let sb = c.remove(ctx, b);
        for (item, bin) in [(b, sa.bin), (a, sb.bin)] {
            if !c.insert_unit(ctx, &[item], bin, true) {
                return None;
            }
        }
        Some(c)
    }

    fn rotate(&mut self, cur: &Packing) -> Option<Packing> {
        let ctx = self.ctx;
        let i = self.rng.random_range(0..ctx.m);
        if ctx.orients[i].len() < 2 {
            return None;
        }
        let mut c = cur.clone();
        let old = c.remove(ctx, i);
        let (spot, _) = c.best_in_bin(ctx, i, old.bin, true, &|o| o != old.orient)?;
        c.place(ctx, i, spot);
        Some(c)
    }

    fn change_bin(&mut self, cur: &Packing) -> Option<Packing> {
        let ctx = self.ctx;
        let i = self.rng.random_range(0..ctx.m);
        let from = cur.spot[i]?.bin;
        let open = cur.bins.len() + usize::from(cur.bins.len() < ctx.n);
        if open < 2 {
            return None;
        }
        let mut to = self.rng.random_range(0..open - 1);
        if to >= from {
            to += 1;
        }
        let unit = ctx.unit_of(i);
        let mut c = cur.clone();
        remove_unit(ctx, &mut c, &unit);
        if to == c.bins.len() {
            c.bins.push(BinLoad::default());
        }
        if !c.insert_unit(ctx, &unit, to, true) {
            return None;
        }
        c.compact_bins();
        Some(c)
    }

    /// Moves everything out of one bin into the others.
    fn empty_bin(&mut self, cur: &Packing) -> Option<Packing> {
        let ctx = self.ctx;
        if cur.bins.len() < 2 {
            return None;
        }
        let target = if self.rng.random_bool(0.5) {
            (0..cur.bins.len()).min_by_key(|&b| cur.bins[b].volume)?
        } else {
            self.rng.random_range(0..cur.bins.len())
        };
        let mut units: Vec<Vec<usize>> = Vec::new();
        for &i in &cur.bins[target].items {
            let unit = ctx.unit_of(i);
            if !units.contains(&unit) {
                units.push(unit);
            }
        }
        units.sort_by_key(|u| std::cmp::Reverse(ctx.unit_volume(u)));
        let mut c = cur.clone();
        for u in &units {
            remove_unit(ctx, &mut c, u);
        }
        for u in &units {
            c = insert_best(ctx, &c, u, false, Some(target))?;
        }
        c.compact_bins();
        Some(c)
    }

    /// Pulls out a random share of the units and reinserts them greedily.
    fn ruin(&mut self, cur: &Packing) -> Option<Packing> {
        let ctx = self.ctx;
        let mut units = ctx.units();
        units.shuffle(&mut self.rng);
        let take = ((units.len() as f64 * self.ruin_fraction).ceil() as usize).clamp(1, units.len());
        units.truncate(take);
        let mut c = cur.clone();
        for u in &units {
            remove_unit(ctx, &mut c, u);
        }
        if self.rng.random_bool(0.5) {
            units.sort_by_key(|u| std::cmp::Reverse(ctx.unit_volume(u)));
        }
        for u in &units {
            c = insert_best(ctx, &c, u, true, None)?;
        }
        c.compact_bins();
        Some(c)
    }
}

pub(crate) fn run(
    instance: &Instance,
    config: &SolverConfig,
    seed: u64,
    start: Instant,
) -> Result<RunOutput, SolverError> {
    let ctx = Ctx::new(instance, &config.weights);
    let params = &config.heuristic;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut base = ctx.units();
    base.sort_by_key(|u| (std::cmp::Reverse(ctx.unit_volume(u)), u[0]));
    // Units with incompatible partners go first so that conflicting
    // categories settle into separate bins before the bins fill up.
    let conflicted = |u: &Vec<usize>| u.iter().any(|&i| (0..ctx.m).any(|k| ctx.incompatible(i, k)));
    let mut best: Option<Packing> = None;
    let mut certificate = None;
    for r in 0..params.restarts {
        let mut order = base.clone();
        if r >= 2 {
            let mut keyed: Vec<(f64, Vec<usize>)> = order
                .into_iter()
                .map(|u| (ctx.unit_volume(&u) as f64 * rng.random_range(0.6..1.4), u))
                .collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
            order = keyed.into_iter().map(|(_, u)| u).collect();
        }
        if r % 2 == 1 {
            order.sort_by_key(|u| !conflicted(u));
        }
        // The first pass takes the lowest corner; later passes weigh the objective.
        match construct(&ctx, &order, r > 0) {
            Ok(p) => {
                if best.as_ref().is_none_or(|b| better(p.key(), b.key())) {
                    best = Some(p);
                }
            }
            Err(item) => {
                certificate.get_or_insert(item);
            }
        }
    }
    let Some(mut best) = best else {
        return Ok(RunOutput {
            outcome: Outcome::Infeasible { certificate },
            energy: None,
            trajectory: Vec::new(),
        });
    };

    let mut budget = Budget::new(config, start);
    let (_, mut energy) = finish(instance, &config.weights, best.to_placements(&ctx))?;
    let mut trajectory = vec![(budget.elapsed(), energy)];

    let w = params.moves;
    let weights = [w.reinsert, w.swap, w.rotate, w.change_bin, w.empty_bin, w.ruin];
    let total: f64 = weights.iter().sum();
    let mut search = Search {
        ctx: &ctx,
        rng,
        ruin_fraction: params.ruin_fraction,
    };
    let mut cur = best.clone();
    let mut since_reset = 0u64;
    while total > 0.0 && budget.tick() {
        let mut pick = search.rng.random::<f64>() * total;
        let mut kind = 0;
        while kind + 1 < weights.len() && pick >= weights[kind] {
            pick -= weights[kind];
            kind += 1;
        }
        let cand = match kind {
            0 => search.reinsert(&cur),
            1 => search.swap(&cur),
            2 => search.rotate(&cur),
            3 => search.change_bin(&cur),
            4 => search.empty_bin(&cur),
            _ => search.ruin(&cur),
        };
        if let Some(c) = cand {
            let sideways = kind == 5 && c.key().0 == cur.key().0 && search.rng.random_bool(0.05);
            if not_worse(c.key(), cur.key()) || sideways {
                cur = c;
            }
        }
        if better(cur.key(), best.key()) {
            best = cur.clone();
            budget.improved();
            since_reset = 0;
            energy = finish(instance, &config.weights, best.to_placements(&ctx))?.1;
            trajectory.push((budget.elapsed(), energy));
        } else {
            since_reset += 1;
            if since_reset >= 400 {
                cur = best.clone();
                since_reset = 0;
            }
        }
    }

    let (solution, energy) = finish(instance, &config.weights, best.to_placements(&ctx))?;
    Ok(RunOutput {
        outcome: Outcome::Feasible(solution),
        energy: Some(energy),
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use crate::domain::{Affinities, BinSpec, CategoryPair, Instance, InstanceParts, Item};
    use crate::solver::{solve, Outcome, SolverConfig};

    fn cubes(count: usize, side: u32, bin: [u32; 3], n: u32) -> InstanceParts {
        let items = (0..count)
            .map(|i| Item {
                index: i,
                length: side,
                width: side,
                height: side,
                weight: 1,
                category: i as u32,
            })
            .collect();
        InstanceParts::new(
            items,
            BinSpec {
                length: bin[0],
                width: bin[1],
                height: bin[2],
                max_weight: None,
                count: n,
            },
        )
    }

    fn quick() -> SolverConfig {
        SolverConfig {
            iterations: Some(300),
            ..SolverConfig::default()
        }
    }

    fn bins_used(parts: InstanceParts) -> Option<u32> {
        let inst = Instance::new(parts).unwrap();
        let r = solve(&inst, &quick()).unwrap();
        r.best.solution().map(|s| s.objectives.o1)
    }

    #[test]
    fn two_cubes_stack() {
        let inst = Instance::new(cubes(2, 1, [1, 1, 2], 1)).unwrap();
        let r = solve(&inst, &quick()).unwrap();
        let sol = r.best.solution().unwrap();
        assert_eq!(sol.objectives.o1, 1);
        let mut z: Vec<u32> = sol.placements.iter().map(|p| p.z).collect();
        z.sort();
        assert_eq!(z, [0, 1]);
    }

    #[test]
    fn eight_cubes_fill_one_bin() {
        assert_eq!(bins_used(cubes(8, 1, [2, 2, 2], 2)), Some(1));
    }

    #[test]
    fn incompatible_cubes_take_two_bins() {
        let mut parts = cubes(2, 2, [4, 4, 4], 2);
        parts.affinities = Affinities {
            positive: Default::default(),
            negative: [CategoryPair::new(0, 1)].into(),
        };
        assert_eq!(bins_used(parts), Some(2));
    }

    #[test]
    fn too_few_bins_is_infeasible_with_certificate() {
        let inst = Instance::new(cubes(3, 2, [2, 2, 2], 2)).unwrap();
        let r = solve(&inst, &quick()).unwrap();
        assert!(matches!(r.best, Outcome::Infeasible { certificate: Some(_) }));
        assert_eq!(r.energy, None);
    }

    #[test]
    fn iteration_mode_is_deterministic() {
        let inst = Instance::new(cubes(6, 1, [2, 2, 3], 2)).unwrap();
        let a = solve(&inst, &quick()).unwrap();
        let b = solve(&inst, &quick()).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.energy, b.energy);
    }
}
