use num_traits::{One, Signed, Zero};

use super::{Assignment, ConstraintLabel, ModelError, QuadraticModel, VarKind, VarTag};
use crate::domain::{allowed_orientations, effective_dims, Instance, Placement, RelPos};
use crate::Rational;

/// What a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationTarget {
    Constraint(ConstraintLabel),
    /// A variable outside its domain (binary not in {0,1}, or out of bounds).
    Domain(VarTag),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub target: ViolationTarget,
    pub magnitude: Rational,
}

/// Exact evaluation of an assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    /// Weighted objective.
    pub objective: Rational,
    pub bins: Rational,
    pub height: Rational,
    pub balance: Option<Rational>,
    pub violations: Vec<Violation>,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates `assignment` against `model` with zero tolerance.
pub fn evaluate(model: &QuadraticModel, assignment: &Assignment) -> Result<Evaluation, ModelError> {
    let mut values = Vec::with_capacity(model.variables().len());
    let mut violations = Vec::new();
    for var in model.variables() {
        let v = assignment.get(var.id).ok_or(ModelError::MissingVariable(var.tag))?;
        let miss = match var.kind {
            VarKind::Binary => {
                v.abs().min((v - Rational::one()).abs())
            }
            VarKind::Continuous { lower, upper } => (lower - v).max(v - upper).max(Rational::zero()),
        };
        if !miss.is_zero() {
            violations.push(Violation {
                target: ViolationTarget::Domain(var.tag),
                magnitude: miss,
            });
        }
        values.push(v);
    }
    let value = |id: super::VarId| values[id.index()];

    for c in model.constraints() {
        let miss = c.violation(c.expr.eval(value));
        if !miss.is_zero() {
            violations.push(Violation {
                target: ViolationTarget::Constraint(c.label),
                magnitude: miss,
            });
        }
    }
    let terms = model.objective_terms();
    Ok(Evaluation {
        objective: model.objective().eval(value),
        bins: terms.bins.eval(value),
        height: terms.height.eval(value),
        balance: terms.balance.as_ref().map(|e| e.eval(value)),
        violations,
    })
}

/// Positions `q` under which `first` and `second` are separated, as a bit mask.
pub(crate) fn separations(a: ([u32; 3], [u32; 3]), b: ([u32; 3], [u32; 3])) -> u8 {
    let (pa, da) = a;
    let (pb, db) = b;
    let mut mask = 0;
    for q in RelPos::ALL {
        let axis = q.axis();
        let ok = if q.i_first() {
            pa[axis] + da[axis] <= pb[axis]
        } else {
            pb[axis] + db[axis] <= pa[axis]
        };
        if ok {
            mask |= q.bit();
        }
    }
    mask
}

/// Model assignment realizing `placements` (one per item, any order).
pub fn encode_solution(
    model: &QuadraticModel,
    instance: &Instance,
    placements: &[Placement],
) -> Result<Assignment, ModelError> {
    let items = instance.items();
    let m = items.len();
    let n = model.bin_count();
    let bin = instance.bin();
    let int = |v: u32| Rational::from_integer(v as i128);

    let mut by_item: Vec<Option<&Placement>> = vec![None; m];
    for p in placements {
        if p.item >= m {
            return Err(ModelError::Malformed(format!("placement for unknown item {}", p.item)));
        }
        if by_item[p.item].replace(p).is_some() {
            return Err(ModelError::Malformed(format!("item {} placed twice", p.item)));
        }
    }
    let mut placed = Vec::with_capacity(m);
    for (i, slot) in by_item.iter().enumerate() {
        let p = slot.ok_or_else(|| ModelError::Malformed(format!("item {i} has no placement")))?;
        if p.bin == 0 || p.bin > n {
            return Err(ModelError::BinOutOfRange {
                item: i,
                bin: p.bin,
                bins: n,
            });
        }
        if !allowed_orientations(&items[i]).contains(&p.orientation) {
            return Err(ModelError::UnknownOrientation {
                item: i,
                k: p.orientation.index(),
            });
        }
        placed.push(*p);
    }

    let mut a = Assignment::new();
    let mut set = |tag: VarTag, value: Rational| {
        if let Some(id) = model.lookup(tag) {
            a.set(id, value);
        }
    };
    let flag = |b: bool| if b { Rational::one() } else { Rational::zero() };

    for j in 1..=n {
        set(VarTag::BinUsed(j), flag(placed.iter().any(|p| p.bin == j)));
    }
    let dims: Vec<[u32; 3]> = placed.iter().map(|p| effective_dims(&items[p.item], p.orientation)).collect();
    for (i, p) in placed.iter().enumerate() {
        for j in 1..=n {
            set(VarTag::ItemInBin(i, j), flag(p.bin == j));
        }
        for k in crate::domain::nonredundant_orientations(&items[i]) {
            set(VarTag::Orient(i, k.index()), flag(k == p.orientation));
        }
        set(VarTag::X(i), int(p.x));
        set(VarTag::Y(i), int(p.y));
        set(VarTag::Z(i), int(p.z));
        if let Some(t) = instance.com_target() {
            let half = Rational::new(1, 2);
            let cx = int(p.x) + int(dims[i][0]) * half - int((p.bin - 1) * bin.length);
            let cy = int(p.y) + int(dims[i][1]) * half;
            set(VarTag::DevX(i), (cx - t.x).abs());
            set(VarTag::DevY(i), (cy - t.y).abs());
        }
    }

    let forbidden = instance.effective_avoid();
    for i in 0..m {
        for k in i + 1..m {
            let valid = separations((placed[i].corner(), dims[i]), (placed[k].corner(), dims[k]));
            let same_bin = placed[i].bin == placed[k].bin;
            if same_bin && valid == 0 {
                return Err(ModelError::Overlap(i, k));
            }
            let existing: Vec<RelPos> = RelPos::ALL
                .into_iter()
                .filter(|&q| model.lookup(VarTag::Rel(i, k, q)).is_some())
                .collect();
            if existing.is_empty() {
                continue;
            }
            // Different bins satisfy every non-overlap row whatever b says.
            let ok = |q: &RelPos| !same_bin || valid & q.bit() != 0;
            let chosen = instance
                .favour()
                .get(&(i, k))
                .copied()
                .filter(|q| ok(q) && existing.contains(q))
                .or_else(|| existing.iter().copied().find(|q| ok(q) && !forbidden.contains(&(i, k, *q))))
                .or_else(|| existing.iter().copied().find(ok))
                .unwrap_or(existing[0]);
            for &q in &existing {
                set(VarTag::Rel(i, k, q), flag(q == chosen));
            }
        }
    }
    Ok(a)
}
