//! Domain types shared by every module.
//!
//! Coordinates follow one global convention: bins are laid out along the
//! x axis, bin `j` (1-based) spanning `[(j-1)L, jL)`. A [`Placement`] stores
//! the back lower left corner of an item in these global coordinates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::Rational;

/// Errors raised while assembling an [`Instance`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("instance has no items")]
    NoItems,
    #[error("item {index}: {reason}")]
    BadItem { index: usize, reason: String },
    #[error("bin: {0}")]
    BadBin(String),
    #[error("item {0} does not fit in a bin under any orientation")]
    ItemDoesNotFit(usize),
    #[error("categories ({0}, {1}) are both positive and negative affinities")]
    ContradictoryAffinity(u32, u32),
    #[error("category {0} cannot be incompatible with itself")]
    SelfIncompatible(u32),
    #[error("load bearing ratio must be greater than 1, got {0}")]
    BadEta(Rational),
    #[error("target center of mass ({0}, {1}) lies outside the bin footprint")]
    BadComTarget(Rational, Rational),
    #[error("relative position entry ({i}, {k}, {q}): {reason}")]
    BadRelPos {
        i: usize,
        k: usize,
        q: u8,
        reason: String,
    },
    #[error("orientation index {0} outside 1..=6")]
    BadOrientation(u8),
    #[error("relative position index {0} outside 1..=6")]
    BadRelPosIndex(u8),
}

/// A rectangular item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Item {
    pub index: usize,
    pub length: u32,
    pub width: u32,
    pub height: u32,
    pub weight: u32,
    pub category: u32,
}

impl Item {
    pub fn dims(&self) -> [u32; 3] {
        [self.length, self.width, self.height]
    }

    pub fn volume(&self) -> u64 {
        self.length as u64 * self.width as u64 * self.height as u64
    }

    pub fn is_cube(&self) -> bool {
        self.length == self.width && self.width == self.height
    }
}

/// Bin geometry, optional weight capacity and the upper bound `n` on bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinSpec {
    pub length: u32,
    pub width: u32,
    pub height: u32,
    pub max_weight: Option<u32>,
    pub count: u32,
}

impl BinSpec {
    pub fn dims(&self) -> [u32; 3] {
        [self.length, self.width, self.height]
    }

    pub fn volume(&self) -> u64 {
        self.length as u64 * self.width as u64 * self.height as u64
    }
}

/// Unordered pair of item categories, stored with `first <= second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryPair(u32, u32);

impl CategoryPair {
    pub fn new(a: u32, b: u32) -> Self {
        if a <= b {
            CategoryPair(a, b)
        } else {
            CategoryPair(b, a)
        }
    }

    pub fn first(&self) -> u32 {
        self.0
    }

    pub fn second(&self) -> u32 {
        self.1
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        *self == CategoryPair::new(a, b)
    }
}

/// Positive (must share a bin) and negative (must not share a bin)
/// category affinities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Affinities {
    pub positive: BTreeSet<CategoryPair>,
    pub negative: BTreeSet<CategoryPair>,
}

impl Affinities {
    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }
}

/// Target `(L~, W~)` for the per-bin center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComTarget {
    pub x: Rational,
    pub y: Rational,
}

/// One of the six axis-aligned item orientations.
///
/// `k` permutes `(l, w, h)` into effective `(x', y', z')`:
/// 1 → (l,w,h), 2 → (l,h,w), 3 → (w,l,h), 4 → (w,h,l), 5 → (h,l,w), 6 → (h,w,l).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Orientation(u8);

// Index into (l, w, h) for each effective axis, per orientation.
const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

impl Orientation {
    pub const ALL: [Orientation; 6] = [
        Orientation(1),
        Orientation(2),
        Orientation(3),
        Orientation(4),
        Orientation(5),
        Orientation(6),
    ];

    /// The fixed orientation used for items whose orientation set is empty.
    pub const IDENTITY: Orientation = Orientation(1);

    pub fn new(k: u8) -> Result<Self, InstanceError> {
        if (1..=6).contains(&k) {
            Ok(Orientation(k))
        } else {
            Err(InstanceError::BadOrientation(k))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Effective `(x', y', z')` of an item with dimensions `(l, w, h)`.
    pub fn apply(self, dims: [u32; 3]) -> [u32; 3] {
        let p = PERMUTATIONS[(self.0 - 1) as usize];
        [dims[p[0]], dims[p[1]], dims[p[2]]]
    }

    /// Which of `(l, w, h)` feeds each effective axis.
    pub fn source_axes(self) -> [usize; 3] {
        PERMUTATIONS[(self.0 - 1) as usize]
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Relative position of item `i` with respect to item `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelPos {
    /// `x_i + x'_i <= x_k`
    Left = 1,
    /// `y_i + y'_i <= y_k`
    Behind = 2,
    /// `z_i + z'_i <= z_k`
    Below = 3,
    /// `x_k + x'_k <= x_i`
    Right = 4,
    /// `y_k + y'_k <= y_i`
    Front = 5,
    /// `z_k + z'_k <= z_i`
    Above = 6,
}

impl RelPos {
    pub const ALL: [RelPos; 6] = [
        RelPos::Left,
        RelPos::Behind,
        RelPos::Below,
        RelPos::Right,
        RelPos::Front,
        RelPos::Above,
    ];

    pub fn from_index(q: u8) -> Result<Self, InstanceError> {
        match q {
            1 => Ok(RelPos::Left),
            2 => Ok(RelPos::Behind),
            3 => Ok(RelPos::Below),
            4 => Ok(RelPos::Right),
            5 => Ok(RelPos::Front),
            6 => Ok(RelPos::Above),
            _ => Err(InstanceError::BadRelPosIndex(q)),
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    /// The relation seen from the other item: swapping `i` and `k` maps
    /// 1↔4, 2↔5, 3↔6.
    pub fn mirror(self) -> RelPos {
        match self {
            RelPos::Left => RelPos::Right,
            RelPos::Behind => RelPos::Front,
            RelPos::Below => RelPos::Above,
            RelPos::Right => RelPos::Left,
            RelPos::Front => RelPos::Behind,
            RelPos::Above => RelPos::Below,
        }
    }

    /// Axis index (0 = x, 1 = y, 2 = z).
    pub fn axis(self) -> usize {
        (self.index() as usize - 1) % 3
    }

    /// True for q = 1..=3, where `i` precedes `k` along the axis.
    pub fn i_first(self) -> bool {
        self.index() <= 3
    }

    /// Bit used in 6-bit relation masks.
    pub fn bit(self) -> u8 {
        1 << (self.index() - 1)
    }
}

impl fmt::Display for RelPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Non-redundant orientation set `K_i`.
///
/// An empty set means the orientation is fixed to `k = 1` (cubes).
pub fn nonredundant_orientations(item: &Item) -> Vec<Orientation> {
    let (l, w, h) = (item.length, item.width, item.height);
    let ks: &[u8] = if l == w && w == h {
        &[]
    } else if w == h {
        &[1, 3, 4]
    } else if l == h {
        &[1, 2, 3]
    } else if l == w {
        &[1, 2, 5]
    } else {
        &[1, 2, 3, 4, 5, 6]
    };
    ks.iter().map(|&k| Orientation(k)).collect()
}

/// Orientations a placement may use: `K_i`, or `{1}` when `K_i` is empty.
pub fn allowed_orientations(item: &Item) -> Vec<Orientation> {
    let ks = nonredundant_orientations(item);
    if ks.is_empty() {
        vec![Orientation::IDENTITY]
    } else {
        ks
    }
}

/// Effective `(x', y', z')` of `item` under orientation `k`.
pub fn effective_dims(item: &Item, k: Orientation) -> [u32; 3] {
    k.apply(item.dims())
}

/// Number of orientation variables, `Σ |K_i|`.
pub fn kappa(instance: &Instance) -> usize {
    instance
        .items()
        .iter()
        .map(|it| nonredundant_orientations(it).len())
        .sum()
}

/// Bin-count upper bound used when an instance does not state one:
/// `ceil(Σ volume / bin volume) + 1`, raised to `ceil(Σ μ / M) + 1` under a
/// weight capacity.
pub fn default_bin_count(items: &[Item], length: u32, width: u32, height: u32, max_weight: Option<u32>) -> u32 {
    let bin_volume = length as u64 * width as u64 * height as u64;
    let volume: u64 = items.iter().map(Item::volume).sum();
    let mut n = volume.div_ceil(bin_volume.max(1)) + 1;
    if let Some(m) = max_weight {
        let weight: u64 = items.iter().map(|it| it.weight as u64).sum();
        n = n.max(weight.div_ceil(m.max(1) as u64) + 1);
    }
    n as u32
}

/// Plain data used to assemble an [`Instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceParts {
    pub items: Vec<Item>,
    pub bin: BinSpec,
    pub affinities: Affinities,
    pub eta: Option<Rational>,
    pub com_target: Option<ComTarget>,
    /// Explicit `P_q^-` entries `(i, k, q)` with `i < k`.
    pub relpos_avoid: BTreeSet<(usize, usize, RelPos)>,
    /// Explicit `P_q^+` entries `(i, k, q)` with `i < k`.
    pub relpos_favour: BTreeSet<(usize, usize, RelPos)>,
}

impl InstanceParts {
    pub fn new(items: Vec<Item>, bin: BinSpec) -> Self {
        InstanceParts {
            items,
            bin,
            affinities: Affinities::default(),
            eta: None,
            com_target: None,
            relpos_avoid: BTreeSet::new(),
            relpos_favour: BTreeSet::new(),
        }
    }
}

/// A validated packing instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    parts: InstanceParts,
    favour: BTreeMap<(usize, usize), RelPos>,
    derived_avoid: BTreeSet<(usize, usize, RelPos)>,
}

impl TryFrom<InstanceParts> for Instance {
    type Error = InstanceError;

    fn try_from(parts: InstanceParts) -> Result<Self, Self::Error> {
        Instance::new(parts)
    }
}

impl Instance {
    pub fn new(parts: InstanceParts) -> Result<Self, InstanceError> {
        if parts.items.is_empty() {
            return Err(InstanceError::NoItems);
        }
        let bin = &parts.bin;
        if bin.length == 0 || bin.width == 0 || bin.height == 0 {
            return Err(InstanceError::BadBin("dimensions must be positive".into()));
        }
        if bin.max_weight == Some(0) {
            return Err(InstanceError::BadBin("maximum weight must be positive".into()));
        }
        if bin.count == 0 {
            return Err(InstanceError::BadBin("bin count must be positive".into()));
        }
        for (pos, item) in parts.items.iter().enumerate() {
            if item.index != pos {
                return Err(InstanceError::BadItem {
                    index: item.index,
                    reason: format!("item ids must be 0..m in order, found {} at position {pos}", item.index),
                });
            }
            if item.length == 0 || item.width == 0 || item.height == 0 || item.weight == 0 {
                return Err(InstanceError::BadItem {
                    index: pos,
                    reason: "dimensions and weight must be positive".into(),
                });
            }
            let fits = allowed_orientations(item).into_iter().any(|k| {
                let d = effective_dims(item, k);
                d[0] <= bin.length && d[1] <= bin.width && d[2] <= bin.height
            });
            if !fits {
                return Err(InstanceError::ItemDoesNotFit(pos));
            }
        }

        for pair in &parts.affinities.negative {
            if pair.first() == pair.second() {
                return Err(InstanceError::SelfIncompatible(pair.first()));
            }
            if parts.affinities.positive.contains(pair) {
                return Err(InstanceError::ContradictoryAffinity(pair.first(), pair.second()));
            }
        }

        if let Some(eta) = parts.eta {
            if eta <= Rational::one() {
                return Err(InstanceError::BadEta(eta));
            }
        }
        if let Some(t) = parts.com_target {
            let l = Rational::from_integer(bin.length as i128);
            let w = Rational::from_integer(bin.width as i128);
            if t.x < Rational::zero() || t.x > l || t.y < Rational::zero() || t.y > w {
                return Err(InstanceError::BadComTarget(t.x, t.y));
            }
        }

        let m = parts.items.len();
        let check_pair = |&(i, k, q): &(usize, usize, RelPos)| -> Result<(), InstanceError> {
            if i >= k || k >= m {
                return Err(InstanceError::BadRelPos {
                    i,
                    k,
                    q: q.index(),
                    reason: format!("pairs need i < k < {m}"),
                });
            }
            Ok(())
        };
        parts.relpos_avoid.iter().try_for_each(check_pair)?;
        parts.relpos_favour.iter().try_for_each(check_pair)?;

        let mut favour = BTreeMap::new();
        for &(i, k, q) in &parts.relpos_favour {
            if let Some(prev) = favour.insert((i, k), q) {
                return Err(InstanceError::BadRelPos {
                    i,
                    k,
                    q: q.index(),
                    reason: format!("pair already favours position {prev}"),
                });
            }
        }

        let derived_avoid = load_bearing_pairs(&parts.items, parts.eta);
        let mut avoided_per_pair: BTreeMap<(usize, usize), u8> = BTreeMap::new();
        for &(i, k, q) in parts.relpos_avoid.iter().chain(derived_avoid.iter()) {
            if let Some(&fq) = favour.get(&(i, k)) {
                return Err(InstanceError::BadRelPos {
                    i,
                    k,
                    q: q.index(),
                    reason: format!("pair is also favoured at position {fq}"),
                });
            }
            *avoided_per_pair.entry((i, k)).or_default() |= q.bit();
        }
        if let Some((&(i, k), _)) = avoided_per_pair.iter().find(|(_, &mask)| mask == 0b11_1111) {
            return Err(InstanceError::BadRelPos {
                i,
                k,
                q: 0,
                reason: "every relative position is avoided".into(),
            });
        }

        Ok(Instance {
            parts,
            favour,
            derived_avoid,
        })
    }

    pub fn parts(&self) -> &InstanceParts {
        &self.parts
    }

    pub fn items(&self) -> &[Item] {
        &self.parts.items
    }

    pub fn item_count(&self) -> usize {
        self.parts.items.len()
    }

    pub fn bin(&self) -> &BinSpec {
        &self.parts.bin
    }

    pub fn affinities(&self) -> &Affinities {
        &self.parts.affinities
    }

    pub fn eta(&self) -> Option<Rational> {
        self.parts.eta
    }

    pub fn com_target(&self) -> Option<ComTarget> {
        self.parts.com_target
    }

    pub fn explicit_avoid(&self) -> &BTreeSet<(usize, usize, RelPos)> {
        &self.parts.relpos_avoid
    }

    /// `P_3^-` / `P_6^-` entries implied by the load-bearing ratio.
    pub fn load_bearing_avoid(&self) -> &BTreeSet<(usize, usize, RelPos)> {
        &self.derived_avoid
    }

    /// All `P_q^-` entries: explicit ones plus those implied by `η`.
    pub fn effective_avoid(&self) -> BTreeSet<(usize, usize, RelPos)> {
        self.parts
            .relpos_avoid
            .union(&self.derived_avoid)
            .copied()
            .collect()
    }

    /// `P_q^+` as a map from pair to favoured position.
    pub fn favour(&self) -> &BTreeMap<(usize, usize), RelPos> {
        &self.favour
    }

    pub fn category_members(&self, category: u32) -> Vec<usize> {
        self.items()
            .iter()
            .filter(|it| it.category == category)
            .map(|it| it.index)
            .collect()
    }

    /// Item pairs `(i, k)`, `i < k`, whose categories are incompatible.
    pub fn incompatible_item_pairs(&self) -> Vec<(usize, usize)> {
        self.item_pairs_in(&self.parts.affinities.negative)
    }

    /// Item pairs `(i, k)`, `i < k`, whose categories must share a bin.
    pub fn positive_item_pairs(&self) -> Vec<(usize, usize)> {
        self.item_pairs_in(&self.parts.affinities.positive)
    }

    fn item_pairs_in(&self, set: &BTreeSet<CategoryPair>) -> Vec<(usize, usize)> {
        let items = self.items();
        let mut out = Vec::new();
        for i in 0..items.len() {
            for k in i + 1..items.len() {
                if set.contains(&CategoryPair::new(items[i].category, items[k].category)) {
                    out.push((i, k));
                }
            }
        }
        out
    }

    /// Non-fatal observations, e.g. positive-affinity groups that cannot
    /// fit one bin by weight or volume.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for group in positive_groups(self) {
            let weight: u64 = group.iter().map(|&i| self.items()[i].weight as u64).sum();
            let volume: u64 = group.iter().map(|&i| self.items()[i].volume()).sum();
            if let Some(m) = self.bin().max_weight {
                if weight > m as u64 {
                    out.push(format!(
                        "positive-affinity group {group:?} weighs {weight} > M = {m}; instance is infeasible"
                    ));
                }
            }
            if volume > self.bin().volume() {
                out.push(format!(
                    "positive-affinity group {group:?} has volume {volume} > bin volume; instance is infeasible"
                ));
            }
        }
        out
    }
}

fn load_bearing_pairs(items: &[Item], eta: Option<Rational>) -> BTreeSet<(usize, usize, RelPos)> {
    let mut out = BTreeSet::new();
    let Some(eta) = eta else {
        return out;
    };
    for i in 0..items.len() {
        for k in i + 1..items.len() {
            let mi = Rational::from_integer(items[i].weight as i128);
            let mk = Rational::from_integer(items[k].weight as i128);
            if mk > eta * mi {
                out.insert((i, k, RelPos::Below));
            } else if mi > eta * mk {
                out.insert((i, k, RelPos::Above));
            }
        }
    }
    out
}

/// Items that the positive affinities force into one common bin.
///
/// A category pair only binds when both categories have items. Returned
/// groups have at least two items and are sorted.
pub fn positive_groups(instance: &Instance) -> Vec<Vec<usize>> {
    let m = instance.item_count();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = x;
        while parent[c] != r {
            let next = parent[c];
            parent[c] = r;
            c = next;
        }
        r
    }
    for (i, k) in instance.positive_item_pairs() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, k));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// Location of one item: 1-based bin, orientation and global corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Placement {
    pub item: usize,
    pub bin: u32,
    pub orientation: Orientation,
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl Placement {
    pub fn corner(&self) -> [u32; 3] {
        [self.x, self.y, self.z]
    }
}

/// Objective weights `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Weights {
    pub bins: Rational,
    pub height: Rational,
    pub balance: Rational,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            bins: Rational::one(),
            height: Rational::one(),
            balance: Rational::one(),
        }
    }
}

/// Objective breakdown of a packing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objectives {
    /// Bins used.
    pub o1: u32,
    /// Mean top height normalized by `H`.
    pub o2: Rational,
    /// Mean taxicab deviation from the center-of-mass target, if one is set.
    pub o3: Option<Rational>,
}

impl Objectives {
    /// `ω₁·o₁ + ω₂·o₂ + ω₃·o₃`.
    pub fn energy(&self, w: &Weights) -> Rational {
        let mut e = w.bins * Rational::from_integer(self.o1 as i128) + w.height * self.o2;
        if let Some(o3) = self.o3 {
            e += w.balance * o3;
        }
        e
    }
}

/// A complete packing with its objective values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackingSolution {
    /// One placement per item, sorted by item index.
    pub placements: Vec<Placement>,
    pub objectives: Objectives,
    pub bins_used: u32,
}
