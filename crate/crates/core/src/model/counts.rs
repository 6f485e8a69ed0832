use std::collections::BTreeSet;

use super::{QuadraticModel, VarKind};
use crate::domain::{kappa, Instance};

/// Variable and constraint totals for one row group. Optional rows may be
/// negative because reductions remove entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub binary: i64,
    pub continuous: i64,
    pub quadratic: i64,
    pub linear: i64,
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            binary: self.binary + o.binary,
            continuous: self.continuous + o.continuous,
            quadratic: self.quadratic + o.quadratic,
            linear: self.linear + o.linear,
        }
    }
}

/// Entries removed by the reductions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Eliminated {
    pub rel_vars: u64,
    pub nonoverlap_incompatible: u64,
    pub nonoverlap_relpos: u64,
    pub uniqueness: u64,
}

/// Size of a model, split into the intrinsic rows and the optional rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ModelCounts {
    pub binary_vars: u64,
    pub continuous_vars: u64,
    pub quadratic_constraints: u64,
    pub linear_constraints: u64,
    pub mandatory: Counts,
    pub optional: Counts,
    pub eliminated: Eliminated,
}

impl ModelCounts {
    fn from_parts(mandatory: Counts, optional: Counts, eliminated: Eliminated) -> Self {
        let total = mandatory + optional;
        let nonneg = |v: i64| u64::try_from(v).expect("counts are non-negative");
        ModelCounts {
            binary_vars: nonneg(total.binary),
            continuous_vars: nonneg(total.continuous),
            quadratic_constraints: nonneg(total.quadratic),
            linear_constraints: nonneg(total.linear),
            mandatory,
            optional,
            eliminated,
        }
    }
}

/// Closed-form size of the model [`build_model`](super::build_model) emits
/// for `instance`, computed without building it.
pub fn count_model(instance: &Instance) -> ModelCounts {
    let m = instance.item_count() as i64;
    let n = instance.bin().count as i64;
    let pairs = m * (m - 1) / 2;
    let kappa = kappa(instance) as i64;
    let cubes = instance.items().iter().filter(|it| it.is_cube()).count() as i64;

    let mandatory = if n == 1 {
        Counts {
            binary: 6 * pairs + kappa,
            continuous: 3 * m,
            quadratic: 0,
            linear: 7 * pairs + 4 * m - cubes,
        }
    } else {
        Counts {
            binary: 6 * pairs + n * (m + 1) + kappa,
            continuous: 3 * m,
            quadratic: 6 * n * pairs + n,
            linear: pairs + n * (4 * m + 1) + m - 1 - cubes,
        }
    };

    let incompatible: BTreeSet<(usize, usize)> = instance.incompatible_item_pairs().into_iter().collect();
    let avoid = instance.effective_avoid();
    let favour = instance.favour();
    let p_minus = avoid.len() as i64;
    let p_plus = favour.len() as i64;
    // Preferences on incompatible pairs drop nothing extra: those pairs have
    // no non-overlap constraints left.
    let avoid_overlap = avoid.iter().filter(|(i, k, _)| incompatible.contains(&(*i, *k))).count() as i64;
    let favour_overlap = favour.keys().filter(|p| incompatible.contains(p)).count() as i64;
    let nu = if n >= 2 { 6 * n * incompatible.len() as i64 } else { 0 };
    let relpos_drop = n * (p_minus + 5 * p_plus) - n * (avoid_overlap + 5 * favour_overlap);

    let mut optional = Counts {
        binary: -(p_minus + 6 * p_plus),
        ..Counts::default()
    };
    if n >= 2 {
        optional.quadratic -= relpos_drop + nu;
    } else {
        optional.linear -= relpos_drop;
    }
    optional.linear -= p_plus;
    if n >= 2 {
        if instance.bin().max_weight.is_some() {
            optional.linear += n;
        }
        if !incompatible.is_empty() || !instance.positive_item_pairs().is_empty() {
            optional.quadratic += 1;
        }
    }
    if instance.com_target().is_some() {
        optional.continuous += 2 * m;
        optional.linear += 4 * m;
    }

    let eliminated = Eliminated {
        rel_vars: (p_minus + 6 * p_plus) as u64,
        nonoverlap_incompatible: nu as u64,
        nonoverlap_relpos: relpos_drop as u64,
        uniqueness: p_plus as u64,
    };
    ModelCounts::from_parts(mandatory, optional, eliminated)
}

/// Audits a built model: emitted variables and constraints, with the
/// reductions recorded in its provenance added back to the intrinsic rows.
pub fn census(model: &QuadraticModel) -> ModelCounts {
    let mut mandatory = Counts::default();
    let mut optional = Counts::default();
    for var in model.variables() {
        match (var.kind, var.tag) {
            (VarKind::Binary, _) => mandatory.binary += 1,
            (_, super::VarTag::DevX(_) | super::VarTag::DevY(_)) => optional.continuous += 1,
            _ => mandatory.continuous += 1,
        }
    }
    for c in model.constraints() {
        let row = if c.label.is_mandatory() {
            &mut mandatory
        } else {
            &mut optional
        };
        if c.is_quadratic() {
            row.quadratic += 1;
        } else {
            row.linear += 1;
        }
    }

    let p = model.provenance();
    let rel = p.eliminated_rel_vars as i64;
    mandatory.binary += rel;
    optional.binary -= rel;
    let dropped = (p.dropped_nonoverlap_incompatible + p.dropped_nonoverlap_relpos) as i64;
    if model.bin_count() >= 2 {
        mandatory.quadratic += dropped;
        optional.quadratic -= dropped;
    } else {
        mandatory.linear += dropped;
        optional.linear -= dropped;
    }
    mandatory.linear += p.dropped_uniqueness as i64;
    optional.linear -= p.dropped_uniqueness as i64;

    ModelCounts::from_parts(
        mandatory,
        optional,
        Eliminated {
            rel_vars: p.eliminated_rel_vars,
            nonoverlap_incompatible: p.dropped_nonoverlap_incompatible,
            nonoverlap_relpos: p.dropped_nonoverlap_relpos,
            uniqueness: p.dropped_uniqueness,
        },
    )
}
