//! Feasibility checking and objective evaluation by direct geometry.
//!
//! Nothing here goes through the model: every rule is restated on boxes,
//! bins and masses so the checker can referee the model and the solvers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::domain::{allowed_orientations, Instance, Objectives, Placement, RelPos};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidateError {
    #[error("malformed solution: {0}")]
    Malformed(String),
    #[error("solution is infeasible: {0}")]
    Infeasible(ViolationReport),
}

/// Rule broken by a packing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    /// Item sticks out of its bin, or names a bin outside `1..=n`.
    OutOfBounds,
    Overlap,
    NonSequentialBins,
    Overweight,
    NegativeAffinity,
    PositiveAffinity,
    /// Heavy item resting on a light one beyond the mass ratio.
    LoadBearing,
    /// Explicit relative-position preference not honoured.
    RelativePosition,
    BadOrientation,
}

impl Rule {
    pub const ALL: [Rule; 9] = [
        Rule::OutOfBounds,
        Rule::Overlap,
        Rule::NonSequentialBins,
        Rule::Overweight,
        Rule::NegativeAffinity,
        Rule::PositiveAffinity,
        Rule::LoadBearing,
        Rule::RelativePosition,
        Rule::BadOrientation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::OutOfBounds => "OutOfBounds",
            Rule::Overlap => "Overlap",
            Rule::NonSequentialBins => "NonSequentialBins",
            Rule::Overweight => "Overweight",
            Rule::NegativeAffinity => "NegativeAffinity",
            Rule::PositiveAffinity => "PositiveAffinity",
            Rule::LoadBearing => "LoadBearing",
            Rule::RelativePosition => "RelativePosition",
            Rule::BadOrientation => "BadOrientation",
        }
    }

    pub fn parse(s: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One broken rule. `indices` are item indices, except for
/// [`Rule::Overweight`] and [`Rule::NonSequentialBins`] where they are bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationEntry {
    pub rule: Rule,
    pub indices: Vec<usize>,
    pub magnitude: Rational,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViolationReport {
    pub entries: Vec<ViolationEntry>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.entries.iter().any(|e| e.rule == rule)
    }

    pub fn rules(&self) -> BTreeSet<Rule> {
        self.entries.iter().map(|e| e.rule).collect()
    }

    fn push(&mut self, rule: Rule, indices: Vec<usize>, magnitude: impl Into<Rational>) {
        self.entries.push(ViolationEntry {
            rule,
            indices,
            magnitude: magnitude.into(),
        });
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("feasible");
        }
        for (n, e) in self.entries.iter().enumerate() {
            if n > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}{:?} ({})", e.rule, e.indices, e.magnitude)?;
        }
        Ok(())
    }
}

struct BoxAt {
    lo: [i64; 3],
    hi: [i64; 3],
}

fn sorted_placements<'a>(instance: &Instance, placements: &'a [Placement]) -> Result<Vec<&'a Placement>, ValidateError> {
    let m = instance.item_count();
    let mut slots: Vec<Option<&Placement>> = vec![None; m];
    for p in placements {
        if p.item >= m {
            return Err(ValidateError::Malformed(format!("unknown item {}", p.item)));
        }
        if slots[p.item].replace(p).is_some() {
            return Err(ValidateError::Malformed(format!("item {} placed twice", p.item)));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| ValidateError::Malformed(format!("item {i} has no placement"))))
        .collect()
}

fn boxes(instance: &Instance, placed: &[&Placement]) -> Vec<BoxAt> {
    placed
        .iter()
        .map(|p| {
            let d = p.orientation.apply(instance.items()[p.item].dims());
            let lo = [p.x as i64, p.y as i64, p.z as i64];
            BoxAt {
                lo,
                hi: [lo[0] + d[0] as i64, lo[1] + d[1] as i64, lo[2] + d[2] as i64],
            }
        })
        .collect()
}

/// Relative positions `q` of `a` (as item `i`) against `b` that hold.
fn relations(a: &BoxAt, b: &BoxAt) -> BTreeSet<RelPos> {
    let mut s = BTreeSet::new();
    for axis in 0..3 {
        if a.hi[axis] <= b.lo[axis] {
            s.insert(RelPos::ALL[axis]);
        }
        if b.hi[axis] <= a.lo[axis] {
            s.insert(RelPos::ALL[axis + 3]);
        }
    }
    s
}

/// Checks every hard rule for `placements` (one per item, any order).
pub fn check(instance: &Instance, placements: &[Placement]) -> Result<ViolationReport, ValidateError> {
    let placed = sorted_placements(instance, placements)?;
    let items = instance.items();
    let bin = instance.bin();
    let n = bin.count;
    let (l, w, h) = (bin.length as i64, bin.width as i64, bin.height as i64);
    let bx = boxes(instance, &placed);
    let mut report = ViolationReport::default();

    for (i, (p, b)) in placed.iter().zip(&bx).enumerate() {
        if !allowed_orientations(&items[i]).contains(&p.orientation) {
            report.push(Rule::BadOrientation, vec![i], Rational::from_integer(p.orientation.index() as i128));
        }
        if p.bin == 0 || p.bin > n {
            report.push(Rule::OutOfBounds, vec![i], Rational::from_integer(p.bin as i128));
            continue;
        }
        let start = (p.bin as i64 - 1) * l;
        let excess = [
            (start - b.lo[0]).max(0),
            (b.hi[0] - (start + l)).max(0),
            (b.hi[1] - w).max(0),
            (b.hi[2] - h).max(0),
        ];
        let total: i64 = excess.iter().sum();
        if total > 0 {
            report.push(Rule::OutOfBounds, vec![i], Rational::from_integer(total as i128));
        }
    }

    let forbidden = instance.effective_avoid();
    let derived = instance.load_bearing_avoid();
    let incompatible: BTreeSet<(usize, usize)> = instance.incompatible_item_pairs().into_iter().collect();
    for i in 0..placed.len() {
        for k in i + 1..placed.len() {
            if placed[i].bin != placed[k].bin {
                continue;
            }
            if incompatible.contains(&(i, k)) {
                report.push(Rule::NegativeAffinity, vec![i, k], 1);
            }
            let s = relations(&bx[i], &bx[k]);
            if s.is_empty() {
                let overlap: i64 = (0..3)
                    .map(|a| bx[i].hi[a].min(bx[k].hi[a]) - bx[i].lo[a].max(bx[k].lo[a]))
                    .product();
                report.push(Rule::Overlap, vec![i, k], Rational::from_integer(overlap as i128));
                continue;
            }
            if s.iter().all(|&q| forbidden.contains(&(i, k, q))) {
                let rule = if s.iter().any(|&q| derived.contains(&(i, k, q))) {
                    Rule::LoadBearing
                } else {
                    Rule::RelativePosition
                };
                report.push(rule, vec![i, k], 1);
            }
            if let Some(q) = instance.favour().get(&(i, k)) {
                if !s.contains(q) {
                    report.push(Rule::RelativePosition, vec![i, k], 1);
                }
            }
        }
    }

    for (i, k) in instance.positive_item_pairs() {
        if placed[i].bin != placed[k].bin {
            report.push(Rule::PositiveAffinity, vec![i, k], 1);
        }
    }

    let mut load: BTreeMap<u32, u64> = BTreeMap::new();
    for p in &placed {
        *load.entry(p.bin).or_default() += items[p.item].weight as u64;
    }
    if let Some(cap) = bin.max_weight {
        for (&j, &mass) in &load {
            if mass > cap as u64 {
                report.push(Rule::Overweight, vec![j as usize], Rational::from_integer((mass - cap as u64) as i128));
            }
        }
    }
    let used: BTreeSet<u32> = load.keys().copied().filter(|&j| j >= 1 && j <= n).collect();
    if let Some(&top) = used.iter().next_back() {
        let missing: Vec<usize> = (1..top).filter(|j| !used.contains(j)).map(|j| j as usize).collect();
        if !missing.is_empty() {
            let count = missing.len() as i128;
            report.push(Rule::NonSequentialBins, missing, Rational::from_integer(count));
        }
    }
    Ok(report)
}

/// Objective values of a packing, computed without checking feasibility.
pub fn raw_objectives(instance: &Instance, placements: &[Placement]) -> Result<Objectives, ValidateError> {
    let placed = sorted_placements(instance, placements)?;
    let items = instance.items();
    let bin = instance.bin();
    let m = items.len() as i128;
    let int = |v: i64| Rational::from_integer(v as i128);

    let bins: BTreeSet<u32> = placed.iter().map(|p| p.bin).collect();
    let mut heights = 0i64;
    let mut dev = Rational::zero();
    let half = Rational::new(1, 2);
    for p in &placed {
        let d = p.orientation.apply(items[p.item].dims());
        heights += p.z as i64 + d[2] as i64;
        if let Some(t) = instance.com_target() {
            let local_x = p.x as i64 - (p.bin as i64 - 1) * bin.length as i64;
            let cx = int(local_x) + int(d[0] as i64) * half;
            let cy = int(p.y as i64) + int(d[1] as i64) * half;
            dev += (cx - t.x).abs() / int(bin.length as i64) + (cy - t.y).abs() / int(bin.width as i64);
        }
    }
    Ok(Objectives {
        o1: bins.len() as u32,
        o2: Rational::new(heights as i128, m * bin.height as i128),
        o3: instance.com_target().map(|_| dev / Rational::from_integer(m)),
    })
}

/// Objective values of a feasible packing.
pub fn objectives(instance: &Instance, placements: &[Placement]) -> Result<Objectives, ValidateError> {
    let report = check(instance, placements)?;
    if !report.is_feasible() {
        return Err(ValidateError::Infeasible(report));
    }
    raw_objectives(instance, placements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BinSpec, ComTarget, InstanceParts, Item, Orientation};

    fn inst(dims: &[(u32, u32, u32, u32)], bin: (u32, u32, u32), n: u32) -> InstanceParts {
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

    fn at(item: usize, bin: u32, x: u32, y: u32, z: u32) -> Placement {
        Placement {
            item,
            bin,
            orientation: Orientation::IDENTITY,
            x,
            y,
            z,
        }
    }

    #[test]
    fn stacked_cubes_at_origin_overlap() {
        let i = Instance::new(inst(&[(1, 1, 1, 1), (1, 1, 1, 1)], (2, 2, 2), 1)).unwrap();
        let r = check(&i, &[at(0, 1, 0, 0, 0), at(1, 1, 0, 0, 0)]).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].rule, Rule::Overlap);
        assert_eq!(r.entries[0].indices, vec![0, 1]);
        // Face contact is not overlap.
        assert!(check(&i, &[at(0, 1, 0, 0, 0), at(1, 1, 1, 0, 0)]).unwrap().is_feasible());
    }

    #[test]
    fn overweight_reports_excess() {
        let mut parts = inst(&[(1, 1, 1, 600), (1, 1, 1, 500)], (2, 2, 2), 2);
        parts.bin.max_weight = Some(1000);
        let i = Instance::new(parts).unwrap();
        let r = check(&i, &[at(0, 1, 0, 0, 0), at(1, 1, 1, 0, 0)]).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].rule, Rule::Overweight);
        assert_eq!(r.entries[0].magnitude, Rational::from_integer(100));
    }

    #[test]
    fn heavy_on_light_breaks_load_bearing() {
        let mut parts = inst(&[(1, 1, 1, 4), (1, 1, 1, 10)], (1, 1, 2), 1);
        parts.eta = Some(Rational::from_integer(2));
        let i = Instance::new(parts).unwrap();
        let r = check(&i, &[at(0, 1, 0, 0, 0), at(1, 1, 0, 0, 1)]).unwrap();
        assert_eq!(r.rules(), [Rule::LoadBearing].into());
        // The other way round is fine.
        assert!(check(&i, &[at(0, 1, 0, 0, 1), at(1, 1, 0, 0, 0)]).unwrap().is_feasible());
    }

    #[test]
    fn gaps_in_bin_sequence_are_flagged() {
        let i = Instance::new(inst(&[(1, 1, 1, 1)], (2, 2, 2), 3)).unwrap();
        let r = check(&i, &[at(0, 3, 4, 0, 0)]).unwrap();
        assert_eq!(r.rules(), [Rule::NonSequentialBins].into());
        assert_eq!(r.entries[0].indices, vec![1, 2]);
        let r = check(&i, &[at(0, 1, 1, 1, 1)]).unwrap();
        assert!(r.is_feasible());
        let r = check(&i, &[at(0, 1, 2, 0, 0)]).unwrap();
        assert_eq!(r.rules(), [Rule::OutOfBounds].into());
    }

    #[test]
    fn malformed_inputs_are_errors() {
        let i = Instance::new(inst(&[(1, 1, 1, 1), (1, 1, 1, 1)], (2, 2, 2), 1)).unwrap();
        assert!(check(&i, &[at(0, 1, 0, 0, 0)]).is_err());
        assert!(check(&i, &[at(0, 1, 0, 0, 0), at(0, 1, 1, 0, 0)]).is_err());
        assert!(check(&i, &[at(0, 1, 0, 0, 0), at(5, 1, 1, 0, 0)]).is_err());
    }

    #[test]
    fn objective_examples() {
        let i = Instance::new(inst(&[(1, 1, 1, 1)], (1, 1, 1), 1)).unwrap();
        let o = objectives(&i, &[at(0, 1, 0, 0, 0)]).unwrap();
        assert_eq!((o.o1, o.o2, o.o3), (1, Rational::from_integer(1), None));

        let mut parts = inst(&[(2, 2, 2, 1)], (4, 4, 4), 1);
        parts.com_target = Some(ComTarget {
            x: Rational::from_integer(2),
            y: Rational::from_integer(2),
        });
        let i = Instance::new(parts).unwrap();
        assert_eq!(objectives(&i, &[at(0, 1, 1, 1, 0)]).unwrap().o3, Some(Rational::zero()));

        // Centers at x = 1 and x = 3 with L = 4, target 2, no y deviation.
        let mut parts = inst(&[(2, 2, 1, 1), (2, 2, 1, 1)], (4, 4, 4), 1);
        parts.com_target = Some(ComTarget {
            x: Rational::from_integer(2),
            y: Rational::from_integer(1),
        });
        let i = Instance::new(parts).unwrap();
        let o = objectives(&i, &[at(0, 1, 0, 0, 0), at(1, 1, 2, 0, 0)]).unwrap();
        assert_eq!(o.o3, Some(Rational::new(1, 4)));
    }
}
