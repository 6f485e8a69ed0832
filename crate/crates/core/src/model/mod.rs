//! Constrained quadratic model of the packing problem.
//!
//! [`build_model`] compiles an [`Instance`](crate::Instance) into binary and
//! bounded continuous variables, a linear objective and labeled
//! linear/quadratic constraints, applying the orientation, incompatibility
//! and relative-position reductions. [`count_model`] predicts the size of
//! that model in closed form; [`census`] audits a built model so the two
//! can be compared. [`encode_solution`] and [`evaluate`] bridge placements
//! and model assignments with exact rational arithmetic.

mod build;
mod counts;
mod eval;
mod expr;
mod lp;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;
use thiserror::Error;

use crate::domain::{RelPos, Weights};
use crate::Rational;

pub use build::{build_model, build_model_with, BuildOptions};
pub use counts::{census, count_model, Counts, Eliminated, ModelCounts};
pub use eval::{encode_solution, evaluate, Evaluation, Violation, ViolationTarget};
pub use expr::QuadExpr;
pub use lp::{export_lp, to_lp_string};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("instance is infeasible by construction: {0}")]
    InfeasibleByConstruction(String),
    #[error("assignment has no value for variable {0}")]
    MissingVariable(VarTag),
    #[error("solution is malformed: {0}")]
    Malformed(String),
    #[error("item {item} uses orientation {k}, which has no model variable")]
    UnknownOrientation { item: usize, k: u8 },
    #[error("item {item} is placed in bin {bin}, outside 1..={bins}")]
    BinOutOfRange { item: usize, bin: u32, bins: u32 },
    #[error("items {0} and {1} overlap; no relative position is valid")]
    Overlap(usize, usize),
}

/// Dense variable handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Structured variable name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarTag {
    /// `v_j`: bin `j` is used.
    BinUsed(u32),
    /// `u_{i,j}`: item `i` goes to bin `j`.
    ItemInBin(usize, u32),
    /// `r_{i,k}`: item `i` uses orientation `k`.
    Orient(usize, u8),
    /// `b_{i,k,q}`: relative position `q` between items `i < k`.
    Rel(usize, usize, RelPos),
    X(usize),
    Y(usize),
    Z(usize),
    /// `x~_i`: x deviation from the center-of-mass target.
    DevX(usize),
    /// `y~_i`: y deviation from the center-of-mass target.
    DevY(usize),
}

impl fmt::Display for VarTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarTag::BinUsed(j) => write!(f, "v_{j}"),
            VarTag::ItemInBin(i, j) => write!(f, "u_{i}_{j}"),
            VarTag::Orient(i, k) => write!(f, "r_{i}_{k}"),
            VarTag::Rel(i, k, q) => write!(f, "b_{i}_{k}_{q}"),
            VarTag::X(i) => write!(f, "x_{i}"),
            VarTag::Y(i) => write!(f, "y_{i}"),
            VarTag::Z(i) => write!(f, "z_{i}"),
            VarTag::DevX(i) => write!(f, "xt_{i}"),
            VarTag::DevY(i) => write!(f, "yt_{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous { lower: Rational, upper: Rational },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub kind: VarKind,
    pub tag: VarTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// Sign of one half of a two-sided load-balancing constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Plus,
    Minus,
}

/// Constraint family and indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintLabel {
    Orientation(usize),
    NonOverlap { i: usize, k: usize, q: RelPos, j: u32 },
    RelPosUnique(usize, usize),
    OneBin(usize),
    BinActivation(u32),
    BinOrder(u32),
    BoundaryX(usize, u32),
    BoundaryXLower(usize, u32),
    BoundaryY(usize, u32),
    BoundaryZ(usize, u32),
    Overweight(u32),
    NegativeAffinity,
    PositiveAffinity,
    AffinityCombined,
    BalanceX(usize, Side),
    BalanceY(usize, Side),
    /// Relative-position preference written as an explicit fixing
    /// constraint (only when reductions are disabled).
    FixRel(usize, usize, RelPos),
}

impl ConstraintLabel {
    /// Intrinsic constraints; everything else is an optional real-world
    /// restriction.
    pub fn is_mandatory(&self) -> bool {
        matches!(
            self,
            ConstraintLabel::Orientation(_)
                | ConstraintLabel::NonOverlap { .. }
                | ConstraintLabel::RelPosUnique(..)
                | ConstraintLabel::OneBin(_)
                | ConstraintLabel::BinActivation(_)
                | ConstraintLabel::BinOrder(_)
                | ConstraintLabel::BoundaryX(..)
                | ConstraintLabel::BoundaryXLower(..)
                | ConstraintLabel::BoundaryY(..)
                | ConstraintLabel::BoundaryZ(..)
        )
    }
}

impl fmt::Display for ConstraintLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: &Side| match s {
            Side::Plus => "pos",
            Side::Minus => "neg",
        };
        match self {
            ConstraintLabel::Orientation(i) => write!(f, "orientation_{i}"),
            ConstraintLabel::NonOverlap { i, k, q, j } => write!(f, "nonoverlap_{i}_{k}_q{q}_j{j}"),
            ConstraintLabel::RelPosUnique(i, k) => write!(f, "relpos_{i}_{k}"),
            ConstraintLabel::OneBin(i) => write!(f, "onebin_{i}"),
            ConstraintLabel::BinActivation(j) => write!(f, "binuse_{j}"),
            ConstraintLabel::BinOrder(j) => write!(f, "binorder_{j}"),
            ConstraintLabel::BoundaryX(i, j) => write!(f, "boundary_x_{i}_{j}"),
            ConstraintLabel::BoundaryXLower(i, j) => write!(f, "boundary_xl_{i}_{j}"),
            ConstraintLabel::BoundaryY(i, j) => write!(f, "boundary_y_{i}_{j}"),
            ConstraintLabel::BoundaryZ(i, j) => write!(f, "boundary_z_{i}_{j}"),
            ConstraintLabel::Overweight(j) => write!(f, "overweight_{j}"),
            ConstraintLabel::NegativeAffinity => write!(f, "affinity_negative"),
            ConstraintLabel::PositiveAffinity => write!(f, "affinity_positive"),
            ConstraintLabel::AffinityCombined => write!(f, "affinity_combined"),
            ConstraintLabel::BalanceX(i, s) => write!(f, "balance_x_{i}_{}", side(s)),
            ConstraintLabel::BalanceY(i, s) => write!(f, "balance_y_{i}_{}", side(s)),
            ConstraintLabel::FixRel(i, k, q) => write!(f, "fixrel_{i}_{k}_{q}"),
        }
    }
}

/// `expr (sense) rhs`, with the constant part of `expr` folded into `rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub label: ConstraintLabel,
    pub expr: QuadExpr,
    pub sense: Sense,
    pub rhs: Rational,
}

impl Constraint {
    pub fn new(label: ConstraintLabel, mut expr: QuadExpr, sense: Sense, rhs: Rational) -> Self {
        let rhs = rhs - expr.take_constant();
        Constraint {
            label,
            expr,
            sense,
            rhs,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        self.expr.is_quadratic()
    }

    /// How far `lhs` misses the constraint; zero when satisfied.
    pub fn violation(&self, lhs: Rational) -> Rational {
        let zero = Rational::from_integer(0);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(zero),
            Sense::Ge => (self.rhs - lhs).max(zero),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Unweighted objective components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectiveTerms {
    /// `o₁ = Σ v_j`; a constant 1 when there is a single bin.
    pub bins: QuadExpr,
    /// `o₂ = (1/(mH)) Σ (z_i + z'_i)`.
    pub height: QuadExpr,
    /// `o₃ = (1/m)((1/L) Σ x~_i + (1/W) Σ y~_i)`.
    pub balance: Option<QuadExpr>,
}

/// What the reductions removed while building.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Provenance {
    /// `b` variables fixed by relative-position preferences.
    pub eliminated_rel_vars: u64,
    /// Non-overlap constraints satisfied in advance by incompatibilities (`ν`).
    pub dropped_nonoverlap_incompatible: u64,
    /// Non-overlap constraints satisfied in advance by relative-position
    /// preferences, excluding pairs already counted in `ν`.
    pub dropped_nonoverlap_relpos: u64,
    /// Uniqueness constraints of favoured pairs (all six `b` fixed).
    pub dropped_uniqueness: u64,
}

/// A compiled model. Immutable after [`build_model`].
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    variables: Vec<Variable>,
    index: BTreeMap<VarTag, VarId>,
    objective: QuadExpr,
    terms: ObjectiveTerms,
    constraints: Vec<Constraint>,
    weights: Weights,
    provenance: Provenance,
    bins: u32,
    reductions: bool,
    fixed_rel: BTreeMap<(usize, usize, RelPos), bool>,
}

impl QuadraticModel {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.index()]
    }

    pub fn lookup(&self, tag: VarTag) -> Option<VarId> {
        self.index.get(&tag).copied()
    }

    pub fn objective(&self) -> &QuadExpr {
        &self.objective
    }

    pub fn objective_terms(&self) -> &ObjectiveTerms {
        &self.terms
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Upper bound `n` on bins the model was built for.
    pub fn bin_count(&self) -> u32 {
        self.bins
    }

    pub fn reductions_enabled(&self) -> bool {
        self.reductions
    }

    /// Value a relative-position variable was fixed to by the reductions,
    /// if it was eliminated.
    pub fn fixed_rel(&self, i: usize, k: usize, q: RelPos) -> Option<bool> {
        self.fixed_rel.get(&(i, k, q)).copied()
    }
}

/// Values for model variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    values: BTreeMap<VarId, Rational>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, id: VarId, value: Rational) {
        self.values.insert(id, value);
    }

    pub fn get(&self, id: VarId) -> Option<Rational> {
        self.values.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, Rational)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }
}
