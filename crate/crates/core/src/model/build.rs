use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use super::{
    Constraint, ConstraintLabel, ModelError, ObjectiveTerms, Provenance, QuadExpr, QuadraticModel,
    Sense, Side, VarId, VarKind, VarTag, Variable,
};
use crate::domain::{nonredundant_orientations, Instance, RelPos, Weights};
use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub weights: Weights,
    /// Apply the incompatibility (`ν`) and relative-position (`p^-`, `p^+`)
    /// reductions. When off, preferences become explicit fixing constraints
    /// and every non-overlap constraint is kept.
    pub reductions: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            weights: Weights::default(),
            reductions: true,
        }
    }
}

/// Compiles `instance` with all reductions applied.
pub fn build_model(instance: &Instance, weights: Weights) -> Result<QuadraticModel, ModelError> {
    build_model_with(
        instance,
        BuildOptions {
            weights,
            reductions: true,
        },
    )
}

fn int(v: impl Into<i128>) -> Rational {
    Rational::from_integer(v.into())
}

struct Builder<'a> {
    instance: &'a Instance,
    variables: Vec<Variable>,
    index: BTreeMap<VarTag, VarId>,
}

impl Builder<'_> {
    fn add(&mut self, tag: VarTag, kind: VarKind) -> VarId {
        let id = VarId(self.variables.len() as u32);
        self.variables.push(Variable { id, kind, tag });
        self.index.insert(tag, id);
        id
    }

    fn id(&self, tag: VarTag) -> VarId {
        self.index[&tag]
    }

    /// Effective extent of item `i` along `axis`, linear in `r_{i,k}`.
    fn extent(&self, i: usize, axis: usize) -> QuadExpr {
        let item = &self.instance.items()[i];
        let ks = nonredundant_orientations(item);
        if ks.is_empty() {
            return QuadExpr::constant_of(int(item.dims()[axis]));
        }
        let mut e = QuadExpr::new();
        for k in ks {
            let d = k.apply(item.dims())[axis];
            e.add_linear(self.id(VarTag::Orient(i, k.index())), int(d));
        }
        e
    }

    fn coord(&self, i: usize, axis: usize) -> QuadExpr {
        let tag = match axis {
            0 => VarTag::X(i),
            1 => VarTag::Y(i),
            _ => VarTag::Z(i),
        };
        QuadExpr::var(self.id(tag))
    }

    /// `u_{i,j}`, or the constant 1 for a single bin.
    fn in_bin(&self, i: usize, j: u32) -> QuadExpr {
        if self.instance.bin().count == 1 {
            QuadExpr::constant_of(Rational::one())
        } else {
            QuadExpr::var(self.id(VarTag::ItemInBin(i, j)))
        }
    }

    /// `u_{i,j} u_{k,j}`, or the constant 1 for a single bin.
    fn both_in_bin(&self, i: usize, k: usize, j: u32) -> QuadExpr {
        if self.instance.bin().count == 1 {
            QuadExpr::constant_of(Rational::one())
        } else {
            QuadExpr::product(
                self.id(VarTag::ItemInBin(i, j)),
                self.id(VarTag::ItemInBin(k, j)),
            )
        }
    }
}

/// Compiles `instance` into a [`QuadraticModel`].
pub fn build_model_with(instance: &Instance, options: BuildOptions) -> Result<QuadraticModel, ModelError> {
    let items = instance.items();
    let m = items.len();
    let bin = *instance.bin();
    let n = bin.count;
    let (len, wid, hei) = (int(bin.length), int(bin.width), int(bin.height));
    let reductions = options.reductions;

    let incompatible: BTreeSet<(usize, usize)> = instance.incompatible_item_pairs().into_iter().collect();
    let positive = instance.positive_item_pairs();
    if n == 1 {
        if let Some(&(i, k)) = incompatible.iter().next() {
            return Err(ModelError::InfeasibleByConstruction(format!(
                "items {i} and {k} are incompatible but only one bin is available"
            )));
        }
        if let Some(cap) = bin.max_weight {
            let total: u64 = items.iter().map(|it| it.weight as u64).sum();
            if total > cap as u64 {
                return Err(ModelError::InfeasibleByConstruction(format!(
                    "total weight {total} exceeds the capacity {cap} of the only bin"
                )));
            }
        }
    }

    let avoid = instance.effective_avoid();
    let favour = instance.favour();
    // Relative-position variables fixed in advance: value per (i, k, q).
    let mut fixed_rel: BTreeMap<(usize, usize, RelPos), bool> = BTreeMap::new();
    if reductions {
        for &(i, k, q) in &avoid {
            fixed_rel.insert((i, k, q), false);
        }
        for (&(i, k), &fq) in favour {
            for q in RelPos::ALL {
                fixed_rel.insert((i, k, q), q == fq);
            }
        }
    }

    let mut b = Builder {
        instance,
        variables: Vec::new(),
        index: BTreeMap::new(),
    };

    if n >= 2 {
        for j in 1..=n {
            b.add(VarTag::BinUsed(j), VarKind::Binary);
        }
        for i in 0..m {
            for j in 1..=n {
                b.add(VarTag::ItemInBin(i, j), VarKind::Binary);
            }
        }
    }
    for (i, item) in items.iter().enumerate() {
        for k in nonredundant_orientations(item) {
            b.add(VarTag::Orient(i, k.index()), VarKind::Binary);
        }
    }
    for i in 0..m {
        for k in i + 1..m {
            for q in RelPos::ALL {
                if !fixed_rel.contains_key(&(i, k, q)) {
                    b.add(VarTag::Rel(i, k, q), VarKind::Binary);
                }
            }
        }
    }
    let bounded = |upper: Rational| VarKind::Continuous {
        lower: Rational::zero(),
        upper,
    };
    for i in 0..m {
        b.add(VarTag::X(i), bounded(int(n) * len));
        b.add(VarTag::Y(i), bounded(wid));
        b.add(VarTag::Z(i), bounded(hei));
    }
    let target = instance.com_target();
    if let Some(t) = target {
        for i in 0..m {
            b.add(VarTag::DevX(i), bounded(t.x.max(len - t.x)));
            b.add(VarTag::DevY(i), bounded(t.y.max(wid - t.y)));
        }
    }

    let mut constraints = Vec::new();
    let mut provenance = Provenance {
        eliminated_rel_vars: fixed_rel.len() as u64,
        ..Provenance::default()
    };

    // Orientation uniqueness for every non-cubic item.
    for (i, item) in items.iter().enumerate() {
        let ks = nonredundant_orientations(item);
        if ks.is_empty() {
            continue;
        }
        let mut e = QuadExpr::new();
        for k in ks {
            e.add_linear(b.id(VarTag::Orient(i, k.index())), Rational::one());
        }
        constraints.push(Constraint::new(ConstraintLabel::Orientation(i), e, Sense::Eq, Rational::one()));
    }

    // Non-overlap (big-M) and relative-position uniqueness per pair.
    let big_m = [int(n) * len, wid, hei];
    for i in 0..m {
        for k in i + 1..m {
            let pair_incompatible = reductions && incompatible.contains(&(i, k));
            for q in RelPos::ALL {
                let fixed = fixed_rel.get(&(i, k, q)).copied();
                if pair_incompatible {
                    provenance.dropped_nonoverlap_incompatible += n as u64;
                    continue;
                }
                if fixed == Some(false) {
                    provenance.dropped_nonoverlap_relpos += n as u64;
                    continue;
                }
                let axis = q.axis();
                let (first, second) = if q.i_first() { (i, k) } else { (k, i) };
                let rel = match fixed {
                    Some(true) => QuadExpr::constant_of(Rational::one()),
                    _ => QuadExpr::var(b.id(VarTag::Rel(i, k, q))),
                };
                for j in 1..=n {
                    // -(2 - u_ij u_kj - b_ikq) M + c_first + c'_first - c_second <= 0
                    let mut e = QuadExpr::constant_of(-int(2) * big_m[axis]);
                    e.add_scaled(&b.both_in_bin(i, k, j), big_m[axis]);
                    e.add_scaled(&rel, big_m[axis]);
                    e.add_scaled(&b.coord(first, axis), Rational::one());
                    e.add_scaled(&b.extent(first, axis), Rational::one());
                    e.add_scaled(&b.coord(second, axis), -Rational::one());
                    constraints.push(Constraint::new(
                        ConstraintLabel::NonOverlap { i, k, q, j },
                        e,
                        Sense::Le,
                        Rational::zero(),
                    ));
                }
            }

            if favour.contains_key(&(i, k)) && reductions {
                provenance.dropped_uniqueness += 1;
                continue;
            }
            let mut e = QuadExpr::new();
            for q in RelPos::ALL {
                if let Some(id) = b.index.get(&VarTag::Rel(i, k, q)) {
                    e.add_linear(*id, Rational::one());
                }
            }
            constraints.push(Constraint::new(
                ConstraintLabel::RelPosUnique(i, k),
                e,
                Sense::Eq,
                Rational::one(),
            ));
        }
    }

    if !reductions {
        for &(i, k, q) in &avoid {
            constraints.push(Constraint::new(
                ConstraintLabel::FixRel(i, k, q),
                QuadExpr::var(b.id(VarTag::Rel(i, k, q))),
                Sense::Eq,
                Rational::zero(),
            ));
        }
        for (&(i, k), &q) in favour {
            constraints.push(Constraint::new(
                ConstraintLabel::FixRel(i, k, q),
                QuadExpr::var(b.id(VarTag::Rel(i, k, q))),
                Sense::Eq,
                Rational::one(),
            ));
        }
    }

    if n >= 2 {
        for i in 0..m {
            let mut e = QuadExpr::new();
            for j in 1..=n {
                e.add_linear(b.id(VarTag::ItemInBin(i, j)), Rational::one());
            }
            constraints.push(Constraint::new(ConstraintLabel::OneBin(i), e, Sense::Eq, Rational::one()));
        }
        for j in 1..=n {
            // Σ_i (1 - v_j) u_ij <= 0
            let v = b.id(VarTag::BinUsed(j));
            let mut e = QuadExpr::new();
            for i in 0..m {
                let u = b.id(VarTag::ItemInBin(i, j));
                e.add_linear(u, Rational::one());
                e.add_quadratic(v, u, -Rational::one());
            }
            constraints.push(Constraint::new(
                ConstraintLabel::BinActivation(j),
                e,
                Sense::Le,
                Rational::zero(),
            ));
        }
        for j in 1..n {
            let mut e = QuadExpr::var(b.id(VarTag::BinUsed(j)));
            e.add_linear(b.id(VarTag::BinUsed(j + 1)), -Rational::one());
            constraints.push(Constraint::new(ConstraintLabel::BinOrder(j), e, Sense::Ge, Rational::zero()));
        }
    }

    // Bin boundaries.
    for i in 0..m {
        for j in 1..=n {
            // x_i + x'_i - jL <= (1 - u_ij) nL
            let mut e = b.coord(i, 0);
            e.add_scaled(&b.extent(i, 0), Rational::one());
            e.add_constant(-int(j) * len);
            e.add_constant(-int(n) * len);
            e.add_scaled(&b.in_bin(i, j), int(n) * len);
            constraints.push(Constraint::new(ConstraintLabel::BoundaryX(i, j), e, Sense::Le, Rational::zero()));

            if j > 1 {
                // x_i - (j-1) L u_ij >= 0
                let mut e = b.coord(i, 0);
                e.add_scaled(&b.in_bin(i, j), -int(j - 1) * len);
                constraints.push(Constraint::new(
                    ConstraintLabel::BoundaryXLower(i, j),
                    e,
                    Sense::Ge,
                    Rational::zero(),
                ));
            }

            for (axis, size, label) in [
                (1, wid, ConstraintLabel::BoundaryY(i, j)),
                (2, hei, ConstraintLabel::BoundaryZ(i, j)),
            ] {
                // c_i + c'_i - S <= (1 - u_ij) S
                let mut e = b.coord(i, axis);
                e.add_scaled(&b.extent(i, axis), Rational::one());
                e.add_constant(-int(2) * size);
                e.add_scaled(&b.in_bin(i, j), size);
                constraints.push(Constraint::new(label, e, Sense::Le, Rational::zero()));
            }
        }
    }

    if n >= 2 {
        if let Some(cap) = bin.max_weight {
            for j in 1..=n {
                let mut e = QuadExpr::new();
                for (i, item) in items.iter().enumerate() {
                    e.add_linear(b.id(VarTag::ItemInBin(i, j)), int(item.weight));
                }
                constraints.push(Constraint::new(ConstraintLabel::Overweight(j), e, Sense::Le, int(cap)));
            }
        }

        // Σ_neg Σ_j u u = 0 and Σ_pos (1 - Σ_j u u) = 0, summed when both exist.
        let co_binned = |pairs: &[(usize, usize)]| {
            let mut e = QuadExpr::new();
            for &(i, k) in pairs {
                for j in 1..=n {
                    e.add_scaled(&b.both_in_bin(i, k, j), Rational::one());
                }
            }
            e
        };
        let incompatible_list: Vec<(usize, usize)> = incompatible.iter().copied().collect();
        let neg = co_binned(&incompatible_list);
        let mut pos = QuadExpr::constant_of(int(positive.len() as i128));
        pos.add_scaled(&co_binned(&positive), -Rational::one());
        match (incompatible_list.is_empty(), positive.is_empty()) {
            (false, false) => {
                let mut e = neg;
                e.add_scaled(&pos, Rational::one());
                constraints.push(Constraint::new(
                    ConstraintLabel::AffinityCombined,
                    e,
                    Sense::Eq,
                    Rational::zero(),
                ));
            }
            (false, true) => constraints.push(Constraint::new(
                ConstraintLabel::NegativeAffinity,
                neg,
                Sense::Eq,
                Rational::zero(),
            )),
            (true, false) => constraints.push(Constraint::new(
                ConstraintLabel::PositiveAffinity,
                pos,
                Sense::Eq,
                Rational::zero(),
            )),
            (true, true) => {}
        }
    }

    if let Some(t) = target {
        let half = Rational::new(1, 2);
        for i in 0..m {
            // (1/n) Σ_j [x_i + x'_i/2 - n (j-1) u_ij L - L~]
            let mut ex = QuadExpr::new();
            for j in 1..=n {
                let mut term = b.coord(i, 0);
                term.add_scaled(&b.extent(i, 0), half);
                term.add_scaled(&b.in_bin(i, j), -int(n) * int(j - 1) * len);
                term.add_constant(-t.x);
                ex.add_scaled(&term, Rational::new(1, n as i128));
            }
            let mut ey = b.coord(i, 1);
            ey.add_scaled(&b.extent(i, 1), half);
            ey.add_constant(-t.y);

            for (expr, dev, plus, minus) in [
                (&ex, VarTag::DevX(i), ConstraintLabel::BalanceX(i, Side::Plus), ConstraintLabel::BalanceX(i, Side::Minus)),
                (&ey, VarTag::DevY(i), ConstraintLabel::BalanceY(i, Side::Plus), ConstraintLabel::BalanceY(i, Side::Minus)),
            ] {
                for (sign, label) in [(Rational::one(), plus), (-Rational::one(), minus)] {
                    let mut e = expr.scaled(sign);
                    e.add_linear(b.id(dev), -Rational::one());
                    constraints.push(Constraint::new(label, e, Sense::Le, Rational::zero()));
                }
            }
        }
    }

    // Objectives.
    let mut bins_term = QuadExpr::new();
    if n >= 2 {
        for j in 1..=n {
            bins_term.add_linear(b.id(VarTag::BinUsed(j)), Rational::one());
        }
    } else {
        bins_term.add_constant(Rational::one());
    }
    let mut height = QuadExpr::new();
    let scale = Rational::new(1, m as i128 * bin.height as i128);
    for i in 0..m {
        height.add_scaled(&b.coord(i, 2), scale);
        height.add_scaled(&b.extent(i, 2), scale);
    }
    let balance = target.map(|_| {
        let mut e = QuadExpr::new();
        for i in 0..m {
            e.add_linear(b.id(VarTag::DevX(i)), Rational::new(1, m as i128 * bin.length as i128));
            e.add_linear(b.id(VarTag::DevY(i)), Rational::new(1, m as i128 * bin.width as i128));
        }
        e
    });

    let w = options.weights;
    let mut objective = bins_term.scaled(w.bins);
    objective.add_scaled(&height, w.height);
    if let Some(bal) = &balance {
        objective.add_scaled(bal, w.balance);
    }

    Ok(QuadraticModel {
        variables: b.variables,
        index: b.index,
        objective,
        terms: ObjectiveTerms {
            bins: bins_term,
            height,
            balance,
        },
        constraints,
        weights: w,
        provenance,
        bins: n,
        reductions,
        fixed_rel,
    })
}
