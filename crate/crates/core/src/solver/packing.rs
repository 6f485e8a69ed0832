//! Bin-local packing state shared by the search backends.

use num_traits::ToPrimitive;

use crate::domain::{allowed_orientations, positive_groups, Instance, Orientation, Placement, Weights};

/// Mask of relative positions of box `a` (as the first item) against `b`.
pub(crate) fn relation_mask(pa: [u32; 3], da: [u32; 3], pb: [u32; 3], db: [u32; 3]) -> u8 {
    let mut mask = 0;
    for axis in 0..3 {
        if pa[axis] + da[axis] <= pb[axis] {
            mask |= 1 << axis;
        }
        if pb[axis] + db[axis] <= pa[axis] {
            mask |= 1 << (axis + 3);
        }
    }
    mask
}

/// Swaps the roles of the two items in a relation mask.
pub(crate) fn mirror_mask(mask: u8) -> u8 {
    ((mask & 0b111) << 3) | (mask >> 3)
}

/// Instance data flattened for fast feasibility checks.
pub(crate) struct Ctx {
    pub m: usize,
    pub n: usize,
    pub size: [u32; 3],
    pub orients: Vec<Vec<(Orientation, [u32; 3])>>,
    pub weight: Vec<u64>,
    pub volume: Vec<u64>,
    pub cap: Option<u64>,
    /// Positions of `a` against `b` that are not allowed, indexed `a * m + b`.
    forbid: Vec<u8>,
    /// Required position of `a` against `b`, or 0.
    favour: Vec<u8>,
    incompatible: Vec<bool>,
    pub group: Vec<Option<usize>>,
    pub groups: Vec<Vec<usize>>,
    pub target: Option<[f64; 2]>,
    w_height: f64,
    w_balance: f64,
}

impl Ctx {
    pub fn new(instance: &Instance, weights: &Weights) -> Self {
        let items = instance.items();
        let m = items.len();
        let bin = instance.bin();
        let mut forbid = vec![0u8; m * m];
        for &(i, k, q) in &instance.effective_avoid() {
            forbid[i * m + k] |= q.bit();
            forbid[k * m + i] |= mirror_mask(q.bit());
        }
        let mut favour = vec![0u8; m * m];
        for (&(i, k), q) in instance.favour() {
            favour[i * m + k] = q.bit();
            favour[k * m + i] = mirror_mask(q.bit());
        }
        let mut incompatible = vec![false; m * m];
        for (i, k) in instance.incompatible_item_pairs() {
            incompatible[i * m + k] = true;
            incompatible[k * m + i] = true;
        }
        let groups = positive_groups(instance);
        let mut group = vec![None; m];
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                group[i] = Some(g);
            }
        }
        let f = |r: crate::Rational| r.to_f64().unwrap_or(0.0);
        Ctx {
            m,
            n: bin.count as usize,
            size: bin.dims(),
            orients: items
                .iter()
                .map(|it| allowed_orientations(it).into_iter().map(|k| (k, k.apply(it.dims()))).collect())
                .collect(),
            weight: items.iter().map(|it| it.weight as u64).collect(),
            volume: items.iter().map(|it| it.volume()).collect(),
            cap: bin.max_weight.map(u64::from),
            forbid,
            favour,
            incompatible,
            group,
            groups,
            target: instance.com_target().map(|t| [f(t.x), f(t.y)]),
            w_height: f(weights.height),
            w_balance: f(weights.balance),
        }
    }

    pub fn bin_volume(&self) -> u64 {
        self.size.iter().map(|&s| s as u64).product()
    }

    /// Per-item share of `ω₂·o₂ + ω₃·o₃` at bin-local corner `p`.
    pub fn cost(&self, d: [u32; 3], p: [u32; 3]) -> f64 {
        let m = self.m as f64;
        let mut c = self.w_height * (p[2] + d[2]) as f64 / (m * self.size[2] as f64);
        if let Some([tx, ty]) = self.target {
            let cx = p[0] as f64 + d[0] as f64 / 2.0;
            let cy = p[1] as f64 + d[1] as f64 / 2.0;
            c += self.w_balance * ((cx - tx).abs() / self.size[0] as f64 + (cy - ty).abs() / self.size[1] as f64) / m;
        }
        c
    }

    pub fn incompatible(&self, a: usize, b: usize) -> bool {
        self.incompatible[a * self.m + b]
    }

    /// Whether `a` at `pa` may sit next to `b` at `pb` in the same bin.
    pub fn pair_ok(&self, a: usize, pa: [u32; 3], da: [u32; 3], b: usize, pb: [u32; 3], db: [u32; 3]) -> bool {
        let rel = relation_mask(pa, da, pb, db);
        if rel == 0 {
            return false;
        }
        let idx = a * self.m + b;
        if rel & !self.forbid[idx] == 0 {
            return false;
        }
        let fav = self.favour[idx];
        fav == 0 || rel & fav != 0
    }

    /// Items that must travel together: the positive group of `i`, or `i` alone.
    pub fn unit_of(&self, i: usize) -> Vec<usize> {
        match self.group[i] {
            Some(g) => self.groups[g].clone(),
            None => vec![i],
        }
    }

    /// All units, each listed once.
    pub fn units(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.groups.clone();
        out.extend((0..self.m).filter(|&i| self.group[i].is_none()).map(|i| vec![i]));
        out
    }

    pub fn unit_volume(&self, unit: &[usize]) -> u64 {
        unit.iter().map(|&i| self.volume[i]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Spot {
    pub bin: usize,
    pub orient: usize,
    pub p: [u32; 3],
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BinLoad {
    pub items: Vec<usize>,
    pub weight: u64,
    pub volume: u64,
}

/// Packing over bins `0..bins.len()`, bin-local coordinates.
#[derive(Debug, Clone)]
pub(crate) struct Packing {
    pub bins: Vec<BinLoad>,
    pub spot: Vec<Option<Spot>>,
    pub cost: f64,
}

/// Search key: bins used, then the weighted height/balance cost.
pub(crate) type Key = (usize, f64);

const EPS: f64 = 1e-9;

pub(crate) fn better(a: Key, b: Key) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1 - EPS)
}

pub(crate) fn not_worse(a: Key, b: Key) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 <= b.1 + EPS)
}

impl Packing {
    pub fn empty(ctx: &Ctx) -> Self {
        Packing {
            bins: Vec::new(),
            spot: vec![None; ctx.m],
            cost: 0.0,
        }
    }

    pub fn key(&self) -> Key {
        (self.bins.iter().filter(|b| !b.items.is_empty()).count(), self.cost)
    }

    #[allow(dead_code)]
    pub fn dims(&self, ctx: &Ctx, i: usize) -> [u32; 3] {
        let s = self.spot[i].expect("item is placed");
        ctx.orients[i][s.orient].1
    }

    pub fn place(&mut self, ctx: &Ctx, i: usize, spot: Spot) {
        debug_assert!(self.spot[i].is_none());
        let b = &mut self.bins[spot.bin];
        b.items.push(i);
        b.weight += ctx.weight[i];
        b.volume += ctx.volume[i];
        self.cost += ctx.cost(ctx.orients[i][spot.orient].1, spot.p);
        self.spot[i] = Some(spot);
    }

    pub fn remove(&mut self, ctx: &Ctx, i: usize) -> Spot {
        let spot = self.spot[i].take().expect("item is placed");
        let b = &mut self.bins[spot.bin];
        b.items.retain(|&k| k != i);
        b.weight -= ctx.weight[i];
        b.volume -= ctx.volume[i];
        self.cost -= ctx.cost(ctx.orients[i][spot.orient].1, spot.p);
        spot
    }

    /// Drops empty bins and renumbers the rest in order.
    pub fn compact_bins(&mut self) {
        let mut remap = Vec::with_capacity(self.bins.len());
        let mut next = 0;
        for b in &self.bins {
            remap.push(next);
            if !b.items.is_empty() {
                next += 1;
            }
        }
        self.bins.retain(|b| !b.items.is_empty());
        for s in self.spot.iter_mut().flatten() {
            s.bin = remap[s.bin];
        }
    }

    /// Weight and incompatibility admit all of `unit` into `bin`.
    pub fn bin_accepts(&self, ctx: &Ctx, bin: usize, unit: &[usize]) -> bool {
        let load = &self.bins[bin];
        let extra: u64 = unit.iter().map(|&i| ctx.weight[i]).sum();
        if ctx.cap.is_some_and(|cap| load.weight + extra > cap) {
            return false;
        }
        let vol: u64 = unit.iter().map(|&i| ctx.volume[i]).sum();
        if load.volume + vol > ctx.bin_volume() {
            return false;
        }
        unit.iter()
            .all(|&i| load.items.iter().all(|&k| !ctx.incompatible(i, k)))
    }

    fn fits(&self, ctx: &Ctx, bin: usize, i: usize, d: [u32; 3], p: [u32; 3]) -> bool {
        if (0..3).any(|a| p[a] + d[a] > ctx.size[a]) {
            return false;
        }
        self.bins[bin].items.iter().all(|&k| {
            let s = self.spot[k].expect("binned item is placed");
            ctx.pair_ok(i, p, d, k, s.p, ctx.orients[k][s.orient].1)
        })
    }

    /// Pushes a box towards the origin along `axes`, in order, until it
    /// touches something. Repeats while anything moves.
    fn slide(&self, ctx: &Ctx, bin: usize, d: [u32; 3], mut p: [u32; 3], axes: &[usize]) -> [u32; 3] {
        for _ in 0..8 {
            let mut moved = false;
            for &axis in axes {
                let (o1, o2) = match axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let mut floor = 0;
                for &k in &self.bins[bin].items {
                    let s = self.spot[k].expect("binned item is placed");
                    let dk = ctx.orients[k][s.orient].1;
                    let overlaps = |a: usize| p[a] < s.p[a] + dk[a] && s.p[a] < p[a] + d[a];
                    if overlaps(o1) && overlaps(o2) {
                        let end = s.p[axis] + dk[axis];
                        if end <= p[axis] && end > floor {
                            floor = end;
                        }
                    }
                }
                if floor < p[axis] {
                    p[axis] = floor;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        p
    }

    fn candidates(&self, ctx: &Ctx, bin: usize, d: [u32; 3]) -> Vec<[u32; 3]> {
        let items = &self.bins[bin].items;
        let mut pts = vec![[0, 0, 0]];
        if items.len() <= 6 {
            let mut axes: [Vec<u32>; 3] = [vec![0], vec![0], vec![0]];
            for &k in items {
                let s = self.spot[k].expect("binned item is placed");
                let dk = ctx.orients[k][s.orient].1;
                for a in 0..3 {
                    axes[a].push(s.p[a] + dk[a]);
                }
            }
            for &x in &axes[0] {
                for &y in &axes[1] {
                    for &z in &axes[2] {
                        pts.push([x, y, z]);
                    }
                }
            }
        } else {
            for &k in items {
                let s = self.spot[k].expect("binned item is placed");
                let dk = ctx.orients[k][s.orient].1;
                pts.push([s.p[0] + dk[0], s.p[1], s.p[2]]);
                pts.push([s.p[0], s.p[1] + dk[1], s.p[2]]);
                pts.push([s.p[0], s.p[1], s.p[2] + dk[2]]);
            }
        }
        if let Some([tx, ty]) = ctx.target {
            let cx = (tx - d[0] as f64 / 2.0).round().max(0.0) as u32;
            let cy = (ty - d[1] as f64 / 2.0).round().max(0.0) as u32;
            pts.push([cx, cy, 0]);
            for &k in items {
                let s = self.spot[k].expect("binned item is placed");
                let dk = ctx.orients[k][s.orient].1;
                pts.push([cx, cy, s.p[2] + dk[2]]);
                pts.push([s.p[0] + dk[0], cy, s.p[2]]);
                pts.push([cx, s.p[1] + dk[1], s.p[2]]);
            }
        }
        pts.retain(|p| (0..3).all(|a| p[a] + d[a] <= ctx.size[a]));
        pts.sort_unstable();
        pts.dedup();
        pts
    }

    /// Best feasible spot for `i` within `bin`, restricted to orientations
    /// accepted by `orient_ok`. Spots are ranked by cost then lowest
    /// `(z, y, x)`, or by `(z, y, x)` alone when `by_cost` is false.
    pub fn best_in_bin(
        &self,
        ctx: &Ctx,
        i: usize,
        bin: usize,
        by_cost: bool,
        orient_ok: &dyn Fn(usize) -> bool,
    ) -> Option<(Spot, f64)> {
        let mut best: Option<(Spot, f64)> = None;
        let ahead = |c: f64, p: [u32; 3], bc: f64, bp: [u32; 3]| {
            let corner = (p[2], p[1], p[0]).cmp(&(bp[2], bp[1], bp[0]));
            if by_cost {
                c < bc - EPS || (c <= bc + EPS && corner.is_lt())
            } else {
                corner.is_lt() || (corner.is_eq() && c < bc - EPS)
            }
        };
        for (o, &(_, d)) in ctx.orients[i].iter().enumerate() {
            if !orient_ok(o) {
                continue;
            }
            for p in self.candidates(ctx, bin, d) {
                if !self.fits(ctx, bin, i, d, p) {
                    continue;
                }
                let mut options = vec![self.slide(ctx, bin, d, p, &[2, 1, 0])];
                if ctx.target.is_some() {
                    options.push(self.slide(ctx, bin, d, p, &[2]));
                    options.push(p);
                }
                for q in options {
                    let c = ctx.cost(d, q);
                    if best.is_some_and(|(s, bc)| !ahead(c, q, bc, s.p)) {
                        continue;
                    }
                    if self.fits(ctx, bin, i, d, q) {
                        best = Some((Spot { bin, orient: o, p: q }, c));
                    }
                }
            }
        }
        best
    }

    /// Inserts `unit` into `bin` member by member, largest first. Leaves
    /// the packing untouched and returns false when any member fails.
    pub fn insert_unit(&mut self, ctx: &Ctx, unit: &[usize], bin: usize, by_cost: bool) -> bool {
        if !self.bin_accepts(ctx, bin, unit) {
            return false;
        }
        let mut order = unit.to_vec();
        order.sort_by_key(|&i| std::cmp::Reverse(ctx.volume[i]));
        let mut done = Vec::with_capacity(order.len());
        for &i in &order {
            match self.best_in_bin(ctx, i, bin, by_cost, &|_| true) {
                Some((spot, _)) => {
                    self.place(ctx, i, spot);
                    done.push(i);
                }
                None => {
                    for &k in &done {
                        self.remove(ctx, k);
                    }
                    return false;
                }
            }
        }
        true
    }

    /// Global placements, 1-based bins, sorted by item.
    pub fn to_placements(&self, ctx: &Ctx) -> Vec<Placement> {
        (0..ctx.m)
            .map(|i| {
                let s = self.spot[i].expect("every item is placed");
                Placement {
                    item: i,
                    bin: s.bin as u32 + 1,
                    orientation: ctx.orients[i][s.orient].0,
                    x: s.p[0] + s.bin as u32 * ctx.size[0],
                    y: s.p[1],
                    z: s.p[2],
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_mirror() {
        let a = relation_mask([0, 0, 0], [1, 1, 1], [1, 0, 2], [1, 1, 1]);
        assert_eq!(a, 0b000_101);
        let b = relation_mask([1, 0, 2], [1, 1, 1], [0, 0, 0], [1, 1, 1]);
        assert_eq!(b, mirror_mask(a));
    }
}
