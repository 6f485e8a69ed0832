//! Simulated annealing over the compiled model, constraints as penalties.

use std::collections::BTreeSet;
use std::time::Instant;

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finish, Budget, Outcome, RunOutput, SolverConfig, SolverError};
use crate::domain::{Instance, Orientation, Placement, RelPos};
use crate::model::{build_model, ModelError, QuadraticModel, Sense, VarKind, VarTag};

const TOL: f64 = 1e-9;

fn f(r: crate::Rational) -> f64 {
    r.to_f64().unwrap_or(0.0)
}

/// What a move changed, for rollback.
#[derive(Default)]
struct Journal {
    vals: Vec<(usize, f64)>,
    rows: Vec<(usize, f64, f64)>,
    d_obj: f64,
    d_pen: f64,
    d_vio: isize,
}

struct Row {
    linear: Vec<(usize, f64)>,
    quadratic: Vec<(usize, usize, f64)>,
    sense: Sense,
    rhs: f64,
}

impl Row {
    fn lhs(&self, vals: &[f64]) -> f64 {
        self.linear.iter().map(|&(v, c)| c * vals[v]).sum::<f64>()
            + self.quadratic.iter().map(|&(a, b, c)| c * vals[a] * vals[b]).sum::<f64>()
    }

    fn miss(&self, lhs: f64) -> f64 {
        let d = match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        };
        if d < TOL {
            0.0
        } else {
            d
        }
    }
}

/// Variable layout per item, for structured moves and decoding.
struct ItemVars {
    bins: Vec<usize>,
    orients: Vec<(usize, Orientation)>,
    coords: [usize; 3],
    devs: Vec<usize>,
}

struct State<'a> {
    instance: &'a Instance,
    rows: Vec<Row>,
    adj: Vec<Vec<usize>>,
    obj: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    vals: Vec<f64>,
    lhs: Vec<f64>,
    miss: Vec<f64>,
    penalty: f64,
    violated: usize,
    objective: f64,
    items: Vec<ItemVars>,
    /// `(i, k, [(var, q)])` for pairs that kept their position variables.
    pairs: Vec<(usize, usize, Vec<(usize, RelPos)>)>,
    pairs_of: Vec<Vec<usize>>,
    bins_used: Vec<usize>,
    derived: Vec<bool>,
    size: [u32; 3],
    /// Rows already journaled during the current move.
    mark: Vec<u64>,
    epoch: u64,
}

impl<'a> State<'a> {
    fn new(instance: &'a Instance, model: &QuadraticModel) -> Self {
        let nv = model.variables().len();
        let mut lower = vec![0.0; nv];
        let mut upper = vec![1.0; nv];
        let mut derived = vec![false; nv];
        for v in model.variables() {
            if let VarKind::Continuous { lower: lo, upper: hi } = v.kind {
                lower[v.id.index()] = f(lo);
                upper[v.id.index()] = f(hi);
            }
            if matches!(v.tag, VarTag::DevX(_) | VarTag::DevY(_)) {
                derived[v.id.index()] = true;
            }
        }
        let mut adj = vec![Vec::new(); nv];
        let rows: Vec<Row> = model
            .constraints()
            .iter()
            .enumerate()
            .map(|(r, c)| {
                for id in c.expr.variables() {
                    adj[id.index()].push(r);
                }
                Row {
                    linear: c.expr.linear().iter().map(|(id, &k)| (id.index(), f(k))).collect(),
                    quadratic: c.expr.quadratic().iter().map(|(&(a, b), &k)| (a.index(), b.index(), f(k))).collect(),
                    sense: c.sense,
                    rhs: f(c.rhs),
                }
            })
            .collect();
        let mut obj = vec![0.0; nv];
        for (id, &k) in model.objective().linear() {
            obj[id.index()] = f(k);
        }

        let bin = instance.bin();
        let n = model.bin_count();
        let lookup = |t| model.lookup(t).map(|id| id.index());
        let items = (0..instance.item_count())
            .map(|i| ItemVars {
                bins: (1..=n).filter_map(|j| lookup(VarTag::ItemInBin(i, j))).collect(),
                orients: Orientation::ALL
                    .into_iter()
                    .filter_map(|k| lookup(VarTag::Orient(i, k.index())).map(|id| (id, k)))
                    .collect(),
                coords: [VarTag::X(i), VarTag::Y(i), VarTag::Z(i)].map(|t| lookup(t).expect("coordinates exist")),
                devs: [VarTag::DevX(i), VarTag::DevY(i)].into_iter().filter_map(lookup).collect(),
            })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..instance.item_count() {
            for k in i + 1..instance.item_count() {
                let vars: Vec<(usize, RelPos)> = RelPos::ALL
                    .into_iter()
                    .filter_map(|q| lookup(VarTag::Rel(i, k, q)).map(|id| (id, q)))
                    .collect();
                if !vars.is_empty() {
                    pairs.push((i, k, vars));
                }
            }
        }
        let mut pairs_of = vec![Vec::new(); instance.item_count()];
        for (p, &(i, k, _)) in pairs.iter().enumerate() {
            pairs_of[i].push(p);
            pairs_of[k].push(p);
        }
        let nrows = rows.len();
        State {
            instance,
            rows,
            adj,
            obj,
            lower,
            upper,
            vals: vec![0.0; nv],
            lhs: vec![0.0; nrows],
            miss: vec![0.0; nrows],
            penalty: 0.0,
            violated: 0,
            objective: 0.0,
            items,
            pairs,
            pairs_of,
            bins_used: (1..=n).filter_map(|j| lookup(VarTag::BinUsed(j))).collect(),
            derived,
            size: bin.dims(),
            mark: vec![0; nrows],
            epoch: 0,
        }
    }

    fn recompute(&mut self) {
        self.penalty = 0.0;
        self.violated = 0;
        for (r, row) in self.rows.iter().enumerate() {
            self.lhs[r] = row.lhs(&self.vals);
            self.miss[r] = row.miss(self.lhs[r]);
            self.penalty += self.miss[r] * self.miss[r];
            self.violated += usize::from(self.miss[r] > 0.0);
        }
        self.objective = self.obj.iter().zip(&self.vals).map(|(c, v)| c * v).sum();
    }

    fn dims(&self, i: usize) -> [u32; 3] {
        let item = &self.instance.items()[i];
        let k = self.items[i]
            .orients
            .iter()
            .find(|&&(id, _)| self.vals[id] > 0.5)
            .map_or(Orientation::IDENTITY, |&(_, k)| k);
        k.apply(item.dims())
    }

    fn bin_of(&self, i: usize) -> usize {
        self.items[i].bins.iter().position(|&id| self.vals[id] > 0.5).unwrap_or(0)
    }

    /// Smallest value of a derived deviation variable that its rows allow.
    fn derived_value(&self, d: usize) -> f64 {
        let mut need = self.lower[d];
        for &r in &self.adj[d] {
            let row = &self.rows[r];
            let Some(&(_, c)) = row.linear.iter().find(|&&(v, _)| v == d) else {
                continue;
            };
            if row.sense == Sense::Le && c < 0.0 {
                let rest = self.lhs[r] - c * self.vals[d];
                need = need.max((row.rhs - rest) / c);
            }
        }
        need.min(self.upper[d])
    }

    fn set(&mut self, v: usize, value: f64, journal: &mut Journal, rows: &mut BTreeSet<usize>) {
        let old = self.vals[v];
        if old == value {
            return;
        }
        journal.vals.push((v, old));
        journal.d_obj += self.obj[v] * (value - old);
        self.vals[v] = value;
        rows.extend(self.adj[v].iter().copied());
    }

    fn refresh(&mut self, rows: &BTreeSet<usize>, journal: &mut Journal) {
        for &r in rows {
            let (old_lhs, old_miss) = (self.lhs[r], self.miss[r]);
            if self.mark[r] != self.epoch {
                self.mark[r] = self.epoch;
                journal.rows.push((r, old_lhs, old_miss));
            }
            let lhs = self.rows[r].lhs(&self.vals);
            let miss = self.rows[r].miss(lhs);
            self.lhs[r] = lhs;
            self.miss[r] = miss;
            journal.d_pen += miss * miss - old_miss * old_miss;
            journal.d_vio += (miss > 0.0) as isize - (old_miss > 0.0) as isize;
        }
    }

    fn begin(&mut self) -> Journal {
        self.epoch += 1;
        Journal::default()
    }

    /// Applies `changes`, then lets derived variables follow.
    fn apply(&mut self, changes: &[(usize, f64)], journal: &mut Journal) {
        let before = (journal.d_obj, journal.d_pen, journal.d_vio);
        let mut touched = BTreeSet::new();
        for &(v, value) in changes {
            self.set(v, value, journal, &mut touched);
        }
        self.refresh(&touched, journal);
        let derived: BTreeSet<usize> = touched
            .iter()
            .flat_map(|&r| self.rows[r].linear.iter().map(|&(v, _)| v))
            .filter(|&v| self.derived[v])
            .collect();
        let mut second = BTreeSet::new();
        for d in derived {
            let value = self.derived_value(d);
            self.set(d, value, journal, &mut second);
        }
        self.refresh(&second, journal);
        self.objective += journal.d_obj - before.0;
        self.penalty += journal.d_pen - before.1;
        self.violated = (self.violated as isize + journal.d_vio - before.2) as usize;
    }

    fn undo(&mut self, journal: Journal) {
        for (v, old) in journal.vals.into_iter().rev() {
            self.vals[v] = old;
        }
        for (r, lhs, miss) in journal.rows {
            self.lhs[r] = lhs;
            self.miss[r] = miss;
        }
        self.objective -= journal.d_obj;
        self.penalty -= journal.d_pen;
        self.violated = (self.violated as isize - journal.d_vio) as usize;
    }

    fn one_hot(vars: &[usize], pick: usize) -> Vec<(usize, f64)> {
        vars.iter().enumerate().map(|(t, &v)| (v, if t == pick { 1.0 } else { 0.0 })).collect()
    }

    /// Position variable choice that agrees with the current geometry.
    fn resync_pair(&self, p: usize) -> Option<Vec<(usize, f64)>> {
        let (i, k, ref vars) = self.pairs[p];
        let pos = |i: usize| self.items[i].coords.map(|v| self.vals[v].round() as i64);
        let (pi, pk) = (pos(i), pos(k));
        let (di, dk) = (self.dims(i), self.dims(k));
        let ok = |q: RelPos| {
            let a = q.axis();
            if q.i_first() {
                pi[a] + di[a] as i64 <= pk[a]
            } else {
                pk[a] + dk[a] as i64 <= pi[a]
            }
        };
        let pick = vars.iter().position(|&(_, q)| ok(q))?;
        let ids: Vec<usize> = vars.iter().map(|&(v, _)| v).collect();
        Some(State::one_hot(&ids, pick))
    }

    /// A random move, plus the item whose geometry it changed, if any.
    fn propose(&self, rng: &mut ChaCha8Rng) -> (Vec<(usize, f64)>, Option<usize>) {
        let m = self.items.len();
        let i = rng.random_range(0..m);
        let roll = rng.random::<f64>();
        let it = &self.items[i];
        if roll < 0.12 && it.bins.len() > 1 {
            let from = self.bin_of(i);
            let mut to = rng.random_range(0..it.bins.len() - 1);
            if to >= from {
                to += 1;
            }
            let d = self.dims(i);
            let mut out = State::one_hot(&it.bins, to);
            for axis in 0..3 {
                let room = self.size[axis].saturating_sub(d[axis]);
                let mut c = rng.random_range(0..=room) as f64;
                if axis == 0 {
                    c += (to as u32 * self.size[0]) as f64;
                }
                out.push((it.coords[axis], c));
            }
            if let Some(&v) = self.bins_used.get(to) {
                out.push((v, 1.0));
            }
            let others = (0..m).any(|k| k != i && self.bin_of(k) == from);
            if let (false, Some(&v)) = (others, self.bins_used.get(from)) {
                out.push((v, 0.0));
            }
            return (out, Some(i));
        }
        if roll < 0.22 && it.orients.len() > 1 {
            let ids: Vec<usize> = it.orients.iter().map(|&(v, _)| v).collect();
            return (State::one_hot(&ids, rng.random_range(0..ids.len())), Some(i));
        }
        if roll < 0.32 && !self.pairs.is_empty() {
            let p = rng.random_range(0..self.pairs.len());
            let ids: Vec<usize> = self.pairs[p].2.iter().map(|&(v, _)| v).collect();
            return (State::one_hot(&ids, rng.random_range(0..ids.len())), None);
        }
        if roll < 0.37 && !self.bins_used.is_empty() {
            let v = self.bins_used[rng.random_range(0..self.bins_used.len())];
            return (vec![(v, 1.0 - self.vals[v])], None);
        }
        let axis = rng.random_range(0..3);
        let v = it.coords[axis];
        let span = self.size[axis] as f64;
        let step = match rng.random_range(0..3) {
            0 => 1.0,
            1 => (span / 8.0).floor().max(1.0),
            _ => (span / 2.0).floor().max(1.0),
        };
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let hi = self.upper[v].floor();
        (vec![(v, (self.vals[v] + sign * step).clamp(self.lower[v], hi))], Some(i))
    }

    /// Placements with bins renumbered `1..` in order of first use.
    fn decode(&self) -> Vec<Placement> {
        let m = self.items.len();
        let mut used: Vec<usize> = (0..m).map(|i| self.bin_of(i)).collect();
        let mut order = used.clone();
        order.sort_unstable();
        order.dedup();
        for b in &mut used {
            *b = order.iter().position(|x| x == b).expect("bin is listed");
        }
        (0..m)
            .map(|i| {
                let c = self.items[i].coords.map(|v| self.vals[v].round() as i64);
                let from = self.bin_of(i) as i64;
                let x = c[0] - (from - used[i] as i64) * self.size[0] as i64;
                let k = self.items[i]
                    .orients
                    .iter()
                    .find(|&&(id, _)| self.vals[id] > 0.5)
                    .map_or(Orientation::IDENTITY, |&(_, k)| k);
                Placement {
                    item: i,
                    bin: used[i] as u32 + 1,
                    orientation: k,
                    x: x.max(0) as u32,
                    y: c[1].max(0) as u32,
                    z: c[2].max(0) as u32,
                }
            })
            .collect()
    }
}

pub(crate) fn run(
    instance: &Instance,
    config: &SolverConfig,
    seed: u64,
    start: Instant,
) -> Result<RunOutput, SolverError> {
    let model = match build_model(instance, config.weights) {
        Ok(m) => m,
        Err(ModelError::InfeasibleByConstruction(_)) => {
            return Ok(RunOutput {
                outcome: Outcome::Infeasible { certificate: None },
                energy: None,
                trajectory: Vec::new(),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let params = config.annealer;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = State::new(instance, &model);

    for i in 0..st.items.len() {
        if !st.items[i].bins.is_empty() {
            let pick = rng.random_range(0..st.items[i].bins.len());
            for (t, &v) in st.items[i].bins.iter().enumerate() {
                st.vals[v] = if t == pick { 1.0 } else { 0.0 };
            }
            st.vals[st.items[i].coords[0]] = (pick as u32 * st.size[0]) as f64;
        }
        if let Some(&(v, _)) = st.items[i].orients.first() {
            st.vals[v] = 1.0;
        }
    }
    for &v in &st.bins_used {
        st.vals[v] = 1.0;
    }
    for p in 0..st.pairs.len() {
        let first = st.pairs[p].2[0].0;
        st.vals[first] = 1.0;
        if let Some(c) = st.resync_pair(p) {
            for (v, x) in c {
                st.vals[v] = x;
            }
        }
    }
    st.recompute();
    let devs: Vec<usize> = st.items.iter().flat_map(|it| it.devs.clone()).collect();
    for d in devs {
        let value = st.derived_value(d);
        let mut journal = st.begin();
        st.apply(&[(d, value)], &mut journal);
    }

    let mut budget = Budget::new(config, start);
    let mut temperature = params.initial_temperature;
    let mut weight = params.penalty_start;
    let mut best: Option<(f64, Vec<Placement>)> = None;
    let mut trajectory = Vec::new();
    let mut offer = |st: &State, best: &mut Option<(f64, Vec<Placement>)>, budget: &mut Budget| -> Result<(), SolverError> {
        if st.violated > 0 || best.as_ref().is_some_and(|(b, _)| st.objective >= b - TOL) {
            return Ok(());
        }
        let placements = st.decode();
        // A rounding slip would surface here; such states are skipped.
        if let Ok((_, energy)) = finish(instance, &config.weights, placements.clone()) {
            *best = Some((st.objective, placements));
            budget.improved();
            trajectory.push((budget.elapsed(), energy));
        }
        Ok(())
    };
    offer(&st, &mut best, &mut budget)?;

    let mut step = 0u64;
    while budget.tick() {
        let (changes, moved) = st.propose(&mut rng);
        let mut journal = st.begin();
        st.apply(&changes, &mut journal);
        // Position variables of the moved item follow its new geometry.
        if let Some(i) = moved {
            for p in st.pairs_of[i].clone() {
                if let Some(c) = st.resync_pair(p) {
                    st.apply(&c, &mut journal);
                }
            }
        }
        let delta = journal.d_obj + weight * journal.d_pen;
        let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature.max(1e-12)).exp();
        if accept {
            offer(&st, &mut best, &mut budget)?;
        } else {
            st.undo(journal);
        }
        step += 1;
        if step.is_multiple_of(params.sweep_length.max(1)) {
            temperature *= params.cooling;
            weight = (weight * params.penalty_growth).min(1e6);
            if temperature < 1e-4 {
                temperature = params.initial_temperature;
            }
            // Drift in the running sums is cleared once per sweep.
            st.recompute();
        }
    }

    match best {
        Some((_, placements)) => {
            let (solution, energy) = finish(instance, &config.weights, placements)?;
            Ok(RunOutput {
                outcome: Outcome::Feasible(solution),
                energy: Some(energy),
                trajectory,
            })
        }
        None => Ok(RunOutput {
            outcome: Outcome::Infeasible { certificate: None },
            energy: None,
            trajectory,
        }),
    }
}

#[cfg(test)]
mod tests {
    use crate::domain::{BinSpec, Instance, InstanceParts, Item};
    use crate::model::{build_model, encode_solution, evaluate};
    use crate::solver::{solve, Backend, SolverConfig};

    fn cubes(count: usize, bin: [u32; 3], n: u32) -> Instance {
        let items = (0..count)
            .map(|i| Item {
                index: i,
                length: 1,
                width: 1,
                height: 1,
                weight: 1,
                category: 0,
            })
            .collect();
        let bin = BinSpec {
            length: bin[0],
            width: bin[1],
            height: bin[2],
            max_weight: None,
            count: n,
        };
        Instance::new(InstanceParts::new(items, bin)).unwrap()
    }

    fn annealer(iterations: u64) -> SolverConfig {
        SolverConfig {
            backend: Backend::Annealer,
            iterations: Some(iterations),
            ..SolverConfig::default()
        }
    }

    #[test]
    fn single_item_is_feasible_and_priced_like_the_model() {
        let inst = cubes(1, [4, 4, 4], 1);
        let r = solve(&inst, &annealer(2000)).unwrap();
        let sol = r.best.solution().expect("feasible");
        let model = build_model(&inst, Default::default()).unwrap();
        let ev = evaluate(&model, &encode_solution(&model, &inst, &sol.placements).unwrap()).unwrap();
        assert!(ev.is_feasible());
        assert_eq!(Some(ev.objective), r.energy);
    }

    #[test]
    fn eight_cubes_reach_one_bin_for_some_seed() {
        let inst = cubes(8, [2, 2, 2], 2);
        let mut config = annealer(150_000);
        config.runs = 4;
        let r = solve(&inst, &config).unwrap();
        let best = r.best.solution().expect("some run is feasible");
        assert_eq!(best.objectives.o1, 1);
    }
}
