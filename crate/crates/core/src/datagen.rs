//! Reproducible benchmark instance generation.
//!
//! Items are drawn from a discrete dimension profile (size classes given
//! as fractions of the bin sides) with weights proportional to volume plus
//! uniform noise. The twelve archetypes mirror the feature combinations
//! of the reference benchmark: overweight (OW), positive affinities (PA),
//! incompatibilities (INC), load bearing (LB) and center of mass (CM).

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{
    default_bin_count, Affinities, BinSpec, CategoryPair, ComTarget, Instance, InstanceError, InstanceParts, Item,
};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("category pair ({0}, {1}) requested as both positive and negative affinity")]
    Contradictory(u32, u32),
    #[error("invalid generator spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// One size class: each side is uniform in `[low, high]` times the bin side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeClass {
    pub probability: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionProfile {
    pub classes: Vec<SizeClass>,
}

impl Default for DimensionProfile {
    /// Small, medium and large parcels with probabilities 0.5/0.3/0.2,
    /// sized so that about fifty items fill a fraction of one bin.
    fn default() -> Self {
        DimensionProfile {
            classes: vec![
                SizeClass {
                    probability: 0.5,
                    low: 0.1,
                    high: 0.2,
                },
                SizeClass {
                    probability: 0.3,
                    low: 0.15,
                    high: 0.25,
                },
                SizeClass {
                    probability: 0.2,
                    low: 0.2,
                    high: 0.3,
                },
            ],
        }
    }
}

/// Optional restrictions to attach to a generated instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Features {
    pub max_weight: Option<u32>,
    /// Fixed positive category pairs.
    pub positive: Vec<(u32, u32)>,
    /// Fixed negative category pairs.
    pub negative: Vec<(u32, u32)>,
    /// Extra positive pairs sampled at random.
    pub random_positive: usize,
    /// Extra negative pairs sampled at random.
    pub random_negative: usize,
    pub eta: Option<Rational>,
    pub com_target: Option<ComTarget>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub item_count: usize,
    pub seed: u64,
    /// Stream used for item data. Specs sharing seed and stream get the
    /// same items, whatever their features.
    pub item_stream: u64,
    pub bin: (u32, u32, u32),
    /// Upper bound on bins; defaults to the volume/weight estimate.
    pub bin_count: Option<u32>,
    pub category_count: u32,
    pub profile: DimensionProfile,
    /// Weight of an item filling the whole bin, before noise.
    pub density: f64,
    /// Relative half-width of the uniform weight noise.
    pub weight_noise: f64,
    pub features: Features,
}

impl GenSpec {
    pub fn new(item_count: usize, seed: u64) -> Self {
        GenSpec {
            item_count,
            seed,
            item_stream: 0,
            bin: (1500, 1500, 1500),
            bin_count: None,
            category_count: 10,
            profile: DimensionProfile::default(),
            density: 4200.0,
            weight_noise: 0.3,
            features: Features::default(),
        }
    }

    fn check(&self) -> Result<(), GenError> {
        let bad = |s: &str| Err(GenError::BadSpec(s.into()));
        if self.item_count == 0 {
            return bad("item count must be positive");
        }
        if self.category_count == 0 {
            return bad("category count must be positive");
        }
        if self.profile.classes.is_empty() {
            return bad("dimension profile has no classes");
        }
        let total: f64 = self.profile.classes.iter().map(|c| c.probability).sum();
        if (total - 1.0).abs() > 1e-9 || self.profile.classes.iter().any(|c| c.probability < 0.0) {
            return bad("class probabilities must be non-negative and sum to 1");
        }
        if self
            .profile
            .classes
            .iter()
            .any(|c| !(c.low > 0.0 && c.low <= c.high && c.high <= 1.0))
        {
            return bad("class bounds must satisfy 0 < low <= high <= 1");
        }
        if !(0.0..1.0).contains(&self.weight_noise) || self.density <= 0.0 {
            return bad("weight noise must lie in [0, 1) and density be positive");
        }
        for &(a, b) in &self.features.positive {
            if self.features.negative.iter().any(|&(c, d)| CategoryPair::new(a, b) == CategoryPair::new(c, d)) {
                let p = CategoryPair::new(a, b);
                return Err(GenError::Contradictory(p.first(), p.second()));
            }
        }
        Ok(())
    }
}

fn draw_items(spec: &GenSpec) -> Vec<Item> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2 * spec.item_stream);
    let (bl, bw, bh) = spec.bin;
    let bin_volume = bl as f64 * bw as f64 * bh as f64;
    let side = |rng: &mut ChaCha8Rng, class: &SizeClass, bound: u32| -> u32 {
        let f = rng.random_range(class.low..=class.high);
        ((f * bound as f64).round() as u32).clamp(1, bound)
    };
    (0..spec.item_count)
        .map(|index| {
            let pick: f64 = rng.random();
            let mut acc = 0.0;
            let mut class = spec.profile.classes[spec.profile.classes.len() - 1];
            for c in &spec.profile.classes {
                acc += c.probability;
                if pick < acc {
                    class = *c;
                    break;
                }
            }
            let length = side(&mut rng, &class, bl);
            let width = side(&mut rng, &class, bw);
            let height = side(&mut rng, &class, bh);
            let volume = length as f64 * width as f64 * height as f64;
            let noise = rng.random_range(1.0 - spec.weight_noise..=1.0 + spec.weight_noise);
            let weight = (spec.density * volume / bin_volume * noise).round().max(1.0) as u32;
            let category = rng.random_range(0..spec.category_count);
            Item {
                index,
                length,
                width,
                height,
                weight,
                category,
            }
        })
        .collect()
}

fn sample_pairs(
    rng: &mut ChaCha8Rng,
    categories: u32,
    count: usize,
    taken: &BTreeSet<CategoryPair>,
    kind: &str,
) -> Result<Vec<CategoryPair>, GenError> {
    let mut free: Vec<CategoryPair> = Vec::new();
    for a in 0..categories {
        for b in a + 1..categories {
            let p = CategoryPair::new(a, b);
            if !taken.contains(&p) {
                free.push(p);
            }
        }
    }
    if count > free.len() {
        return Err(GenError::BadSpec(format!(
            "cannot sample {count} {kind} pairs from {} free category pairs",
            free.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let idx = rng.random_range(0..free.len());
        out.push(free.swap_remove(idx));
    }
    Ok(out)
}

/// Generates an instance. Deterministic in `spec`.
pub fn generate(spec: &GenSpec) -> Result<Instance, GenError> {
    spec.check()?;
    let items = draw_items(spec);
    let f = &spec.features;

    let mut affinities = Affinities::default();
    affinities.positive.extend(f.positive.iter().map(|&(a, b)| CategoryPair::new(a, b)));
    affinities.negative.extend(f.negative.iter().map(|&(a, b)| CategoryPair::new(a, b)));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2 * spec.item_stream + 1);
    let taken: BTreeSet<CategoryPair> = affinities.positive.union(&affinities.negative).copied().collect();
    let pos = sample_pairs(&mut rng, spec.category_count, f.random_positive, &taken, "positive")?;
    affinities.positive.extend(pos);
    let taken: BTreeSet<CategoryPair> = affinities.positive.union(&affinities.negative).copied().collect();
    let neg = sample_pairs(&mut rng, spec.category_count, f.random_negative, &taken, "negative")?;
    affinities.negative.extend(neg);

    let (length, width, height) = spec.bin;
    let count = spec
        .bin_count
        .unwrap_or_else(|| default_bin_count(&items, length, width, height, f.max_weight));
    let mut parts = InstanceParts::new(
        items,
        BinSpec {
            length,
            width,
            height,
            max_weight: f.max_weight,
            count,
        },
    );
    parts.affinities = affinities;
    parts.eta = f.eta;
    parts.com_target = f.com_target;
    Ok(Instance::new(parts)?)
}

/// Item counts of the twelve archetypes.
pub const ARCHETYPE_ITEMS: [usize; 12] = [51, 51, 52, 52, 53, 53, 46, 46, 47, 51, 38, 38];

/// Reference model sizes `(variables, constraints)` of the twelve archetypes.
pub const ARCHETYPE_SIZES: [(u64, u64); 12] = [
    (8085, 9129),
    (8189, 17039),
    (8406, 9490),
    (7925, 9009),
    (8745, 9858),
    (8853, 17555),
    (6624, 7429),
    (6718, 13585),
    (7003, 7943),
    (8211, 9333),
    (4417, 8805),
    (4453, 8973),
];

/// Which restrictions an archetype activates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeatureFlags {
    pub overweight: bool,
    pub positive: bool,
    pub incompatible: bool,
    pub load_bearing: bool,
    pub center_of_mass: bool,
}

pub const ARCHETYPE_FLAGS: [FeatureFlags; 12] = {
    const fn f(ow: bool, pa: bool, inc: bool, lb: bool, cm: bool) -> FeatureFlags {
        FeatureFlags {
            overweight: ow,
            positive: pa,
            incompatible: inc,
            load_bearing: lb,
            center_of_mass: cm,
        }
    }
    [
        f(false, false, false, false, false),
        f(true, false, false, false, false),
        f(false, false, false, false, false),
        f(false, false, false, true, false),
        f(false, false, false, false, false),
        f(false, false, true, false, false),
        f(false, false, false, false, false),
        f(false, true, true, false, false),
        f(false, false, false, false, true),
        f(false, false, false, false, true),
        f(true, true, true, true, true),
        f(true, true, true, true, true),
    ]
};

impl FeatureFlags {
    /// Flags an instance actually carries.
    pub fn of(instance: &Instance) -> Self {
        FeatureFlags {
            overweight: instance.bin().max_weight.is_some(),
            positive: !instance.affinities().positive.is_empty(),
            incompatible: !instance.affinities().negative.is_empty(),
            load_bearing: instance.eta().is_some(),
            center_of_mass: instance.com_target().is_some(),
        }
    }
}

/// Generator spec for archetype `number` (1-based), or `None` outside 1..=12.
///
/// Archetypes 1/2, 3/4, 5/6 and 7/8 share their items.
pub fn archetype(number: usize, seed: u64) -> Option<GenSpec> {
    if !(1..=12).contains(&number) {
        return None;
    }
    let mut spec = GenSpec::new(ARCHETYPE_ITEMS[number - 1], seed);
    spec.item_stream = match number {
        1 | 2 => 1,
        3 | 4 => 2,
        5 | 6 => 3,
        7 | 8 => 4,
        other => other as u64,
    };
    let r = |v: i128| Rational::from_integer(v);
    let target = |x: i128, y: i128| Some(ComTarget { x: r(x), y: r(y) });
    let f = &mut spec.features;
    spec.bin_count = Some(match number {
        2 | 6 | 8 | 11 | 12 => 2,
        _ => 1,
    });
    match number {
        2 => f.max_weight = Some(1000),
        4 => f.eta = Some(r(2)),
        6 => f.negative = vec![(4, 7), (7, 9)],
        8 => {
            f.negative = vec![(4, 8)];
            f.positive = vec![(0, 3), (0, 8)];
        }
        9 => f.com_target = target(750, 750),
        10 => f.com_target = target(900, 500),
        11 => {
            f.max_weight = Some(800);
            f.eta = Some(r(2));
            f.com_target = target(750, 750);
            f.negative = vec![(7, 9)];
            f.positive = vec![(0, 3), (0, 8)];
        }
        12 => {
            spec.bin = (1000, 1000, 1000);
            f.max_weight = Some(900);
            f.eta = Some(r(2));
            f.com_target = target(500, 500);
            f.negative = vec![(4, 8)];
            f.positive = vec![(2, 4)];
        }
        _ => {}
    }
    Some(spec)
}

/// All twelve archetype specs with the given seed.
pub fn archetypes(seed: u64) -> Vec<GenSpec> {
    (1..=12).filter_map(|n| archetype(n, seed)).collect()
}

/// Size caps and restrictions for small random test instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySpec {
    pub max_items: usize,
    pub max_bin_volume: u64,
    pub max_bins: u32,
    pub flags: FeatureFlags,
    /// Add explicit avoided and favoured relative positions.
    pub relpos: bool,
}

impl ToySpec {
    /// Sizes the exhaustive oracle accepts by default.
    pub fn oracle_scale(flags: FeatureFlags) -> Self {
        ToySpec {
            max_items: 4,
            max_bin_volume: 64,
            max_bins: 2,
            flags,
            relpos: false,
        }
    }
}

/// Small random instance with the restrictions in `spec.flags`. Every item
/// fits the bin on its own.
pub fn toy_instance(seed: u64, spec: &ToySpec) -> Result<Instance, GenError> {
    if spec.max_items == 0 || spec.max_bins == 0 || spec.max_bin_volume == 0 {
        return Err(GenError::BadSpec("toy caps must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = |rng: &mut ChaCha8Rng| rng.random_range(1..=4u32);
    let (mut l, mut w, mut h) = (side(&mut rng), side(&mut rng), side(&mut rng));
    while (l * w * h) as u64 > spec.max_bin_volume {
        let biggest = l.max(w).max(h);
        if l == biggest {
            l -= 1;
        } else if w == biggest {
            w -= 1;
        } else {
            h -= 1;
        }
    }
    let smallest = l.min(w).min(h);
    let m = rng.random_range(1..=spec.max_items);
    let categories = 3;
    let items: Vec<Item> = (0..m)
        .map(|index| Item {
            index,
            // Sides up to the smallest bin side, so each item fits alone.
            length: rng.random_range(1..=smallest),
            width: rng.random_range(1..=smallest),
            height: rng.random_range(1..=smallest),
            weight: rng.random_range(1..=6),
            category: rng.random_range(0..categories),
        })
        .collect();
    let count = rng.random_range(1..=spec.max_bins);
    let total: u32 = items.iter().map(|i| i.weight).sum();
    let heaviest = items.iter().map(|i| i.weight).max().unwrap_or(1);
    let flags = spec.flags;
    let mut parts = InstanceParts::new(
        items,
        BinSpec {
            length: l,
            width: w,
            height: h,
            max_weight: flags
                .overweight
                .then(|| rng.random_range(heaviest..=total.max(heaviest))),
            count,
        },
    );
    let pair = |rng: &mut ChaCha8Rng| CategoryPair::new(rng.random_range(0..categories), rng.random_range(0..categories));
    if flags.positive {
        parts.affinities.positive.insert(pair(&mut rng));
    }
    if flags.incompatible {
        let a = rng.random_range(0..categories);
        let p = CategoryPair::new(a, (a + rng.random_range(1..categories)) % categories);
        if !parts.affinities.positive.contains(&p) {
            parts.affinities.negative.insert(p);
        }
    }
    if flags.load_bearing {
        parts.eta = Some(Rational::new(3, 2));
    }
    if flags.center_of_mass {
        parts.com_target = Some(ComTarget {
            x: Rational::new(l as i128, 2),
            y: Rational::new(w as i128, 2),
        });
    }
    if spec.relpos && m >= 2 {
        let q = |rng: &mut ChaCha8Rng| crate::domain::RelPos::ALL[rng.random_range(0..6)];
        for _ in 0..rng.random_range(1..=2) {
            let i = rng.random_range(0..m - 1);
            let k = rng.random_range(i + 1..m);
            if rng.random_bool(0.5) {
                parts.relpos_avoid.insert((i, k, q(&mut rng)));
            } else {
                parts.relpos_favour.insert((i, k, q(&mut rng)));
            }
        }
    }
    Ok(Instance::new(parts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RelPos;

    #[test]
    fn same_seed_same_instance() {
        let spec = GenSpec::new(20, 3);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = GenSpec::new(20, 4);
        assert_ne!(generate(&spec).unwrap().items(), generate(&other).unwrap().items());
    }

    #[test]
    fn paired_archetypes_share_items() {
        for (a, b) in [(1, 2), (3, 4), (5, 6), (7, 8)] {
            let ia = generate(&archetype(a, 9).unwrap()).unwrap();
            let ib = generate(&archetype(b, 9).unwrap()).unwrap();
            assert_eq!(ia.items(), ib.items());
        }
    }

    #[test]
    fn archetype_flags_and_sizes() {
        for (n, spec) in archetypes(1).iter().enumerate() {
            let inst = generate(spec).unwrap();
            assert_eq!(inst.item_count(), ARCHETYPE_ITEMS[n]);
            assert_eq!(FeatureFlags::of(&inst), ARCHETYPE_FLAGS[n], "archetype {}", n + 1);
        }
        assert!(archetype(0, 1).is_none());
        assert!(archetype(13, 1).is_none());
        let a2 = archetype(2, 1).unwrap();
        assert_eq!(a2.features.max_weight, Some(1000));
    }

    #[test]
    fn eta_derives_every_heavy_pair() {
        let mut spec = GenSpec::new(30, 5);
        spec.features.eta = Some(Rational::from_integer(2));
        let inst = generate(&spec).unwrap();
        let items = inst.items();
        for i in 0..items.len() {
            for k in i + 1..items.len() {
                let heavy_above = items[k].weight as u64 > 2 * items[i].weight as u64;
                assert_eq!(inst.load_bearing_avoid().contains(&(i, k, RelPos::Below)), heavy_above);
            }
        }
    }

    #[test]
    fn contradictions_are_rejected() {
        let mut spec = GenSpec::new(5, 1);
        spec.features.positive = vec![(1, 2)];
        spec.features.negative = vec![(2, 1)];
        assert_eq!(generate(&spec).unwrap_err(), GenError::Contradictory(1, 2));
    }

    #[test]
    fn random_pairs_never_contradict() {
        let mut spec = GenSpec::new(10, 2);
        spec.features.random_positive = 10;
        spec.features.random_negative = 20;
        let inst = generate(&spec).unwrap();
        let a = inst.affinities();
        assert_eq!((a.positive.len(), a.negative.len()), (10, 20));
        assert!(a.positive.is_disjoint(&a.negative));
    }

    #[test]
    fn default_bin_count_applies_without_override() {
        let spec = GenSpec::new(10, 2);
        let inst = generate(&spec).unwrap();
        let b = inst.bin();
        assert_eq!(b.count, default_bin_count(inst.items(), b.length, b.width, b.height, None));
    }
}
