use std::collections::BTreeMap;

use num_traits::Zero;

use super::VarId;
use crate::Rational;

/// Quadratic expression with exact coefficients.
///
/// Keys are canonical: quadratic terms are stored as `(low, high)` and zero
/// coefficients are never kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuadExpr {
    constant: Rational,
    linear: BTreeMap<VarId, Rational>,
    quadratic: BTreeMap<(VarId, VarId), Rational>,
}

impl QuadExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant_of(c: Rational) -> Self {
        QuadExpr {
            constant: c,
            ..Self::default()
        }
    }

    pub fn var(id: VarId) -> Self {
        let mut e = Self::new();
        e.add_linear(id, Rational::from_integer(1));
        e
    }

    pub fn product(a: VarId, b: VarId) -> Self {
        let mut e = Self::new();
        e.add_quadratic(a, b, Rational::from_integer(1));
        e
    }

    pub fn constant(&self) -> Rational {
        self.constant
    }

    pub(crate) fn take_constant(&mut self) -> Rational {
        std::mem::take(&mut self.constant)
    }

    pub fn linear(&self) -> &BTreeMap<VarId, Rational> {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(VarId, VarId), Rational> {
        &self.quadratic
    }

    pub fn is_quadratic(&self) -> bool {
        !self.quadratic.is_empty()
    }

    pub fn add_constant(&mut self, c: Rational) {
        self.constant += c;
    }

    pub fn add_linear(&mut self, id: VarId, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.linear.entry(id).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.linear.remove(&id);
        }
    }

    pub fn add_quadratic(&mut self, a: VarId, b: VarId, c: Rational) {
        if c.is_zero() {
            return;
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        let entry = self.quadratic.entry(key).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.quadratic.remove(&key);
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &QuadExpr, factor: Rational) {
        if factor.is_zero() {
            return;
        }
        self.constant += other.constant * factor;
        for (&id, &c) in &other.linear {
            self.add_linear(id, c * factor);
        }
        for (&(a, b), &c) in &other.quadratic {
            self.add_quadratic(a, b, c * factor);
        }
    }

    pub fn scaled(&self, factor: Rational) -> QuadExpr {
        let mut e = QuadExpr::new();
        e.add_scaled(self, factor);
        e
    }

    /// Product of two expressions; panics if the result would be cubic.
    pub fn mul(&self, other: &QuadExpr) -> QuadExpr {
        assert!(
            !(self.is_quadratic() && !other.is_constant_only()
                || other.is_quadratic() && !self.is_constant_only()),
            "product would exceed degree two"
        );
        let mut e = QuadExpr::new();
        e.add_scaled(other, self.constant);
        for (&a, &ca) in &self.linear {
            e.add_linear(a, ca * other.constant);
            for (&b, &cb) in &other.linear {
                e.add_quadratic(a, b, ca * cb);
            }
        }
        for (&(a, b), &c) in &self.quadratic {
            e.add_quadratic(a, b, c * other.constant);
        }
        e
    }

    pub fn is_constant_only(&self) -> bool {
        self.linear.is_empty() && self.quadratic.is_empty()
    }

    /// Every variable referenced by the expression, sorted and deduplicated.
    pub fn variables(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = self.linear.keys().copied().collect();
        for &(a, b) in self.quadratic.keys() {
            out.push(a);
            out.push(b);
        }
        out.sort();
        out.dedup();
        out
    }

    /// Exact value given a lookup for each variable.
    pub fn eval<F>(&self, mut value: F) -> Rational
    where
        F: FnMut(VarId) -> Rational,
    {
        let mut acc = self.constant;
        for (&id, &c) in &self.linear {
            acc += c * value(id);
        }
        for (&(a, b), &c) in &self.quadratic {
            acc += c * value(a) * value(b);
        }
        acc
    }
}
