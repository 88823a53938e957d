//! Executable parameter spaces compiled from constraints.
//!
//! Compilation classifies every parameter from the top-level conjuncts of
//! the constraint:
//!
//! * `p == c` with `c` constant pins `p` to `c`;
//! * `p == expr` where `p` has neither an interval nor a pin and `expr` does
//!   not depend on `p` makes `p` a derived parameter, substituted from the
//!   free ones;
//! * every remaining parameter needs an `in (lo, hi)` clause and becomes a
//!   free dimension of the bounding box.
//!
//! The whole constraint is then evaluated over the reconstructed valuation,
//! with each equality `l == r` read as the open band `|l - r| < eps`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{ArithExpr, CmpOp, Constraint, ShapeExpr};

pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Margin reported for a strict inequality violated only on its boundary.
const BOUNDARY_MARGIN: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("unbounded free parameter `{0}`")]
    Unbounded(String),
    #[error("contradictory pins for `{param}`: {first} and {second}")]
    ContradictoryPins { param: String, first: f64, second: f64 },
    #[error("contradictory pins: `{param}` == {value} lies outside ({lo}, {hi})")]
    PinOutsideInterval { param: String, value: f64, lo: f64, hi: f64 },
    #[error("empty box for `{param}`: [{lo}, {hi}]")]
    EmptyBox { param: String, lo: f64, hi: f64 },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// How a parameter obtains its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Binding {
    /// Free dimension bounded by the intersection of its intervals.
    Interval { lo: f64, hi: f64 },
    /// Pinned by `p == c`.
    Constant(f64),
    /// Substituted by `p == expr`.
    Derived(ArithExpr),
}

/// Classifies parameters from the top-level conjuncts. `None` means the
/// parameter is unbounded. Conflicts (two pins, pins outside intervals) are
/// not reported here; [`ParamSpace::compile`] checks them.
pub fn bind_parameters(gamma: &Constraint, params: &[String]) -> Vec<(String, Option<Binding>)> {
    let conjuncts = gamma.conjuncts();
    let mut intervals: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let mut constants: BTreeMap<&str, f64> = BTreeMap::new();
    for c in &conjuncts {
        match c {
            Constraint::In { param, lo, hi } => {
                let e = intervals
                    .entry(param.as_str())
                    .or_insert((f64::NEG_INFINITY, f64::INFINITY));
                e.0 = e.0.max(*lo);
                e.1 = e.1.min(*hi);
            }
            Constraint::Cmp {
                op: CmpOp::Eq,
                lhs,
                rhs,
            } => {
                if let Some((p, value)) = constant_pin(lhs, rhs) {
                    constants.entry(p).or_insert(value);
                }
            }
            _ => {}
        }
    }
    let mut derived: BTreeMap<&str, &ArithExpr> = BTreeMap::new();
    for c in &conjuncts {
        let Constraint::Cmp {
            op: CmpOp::Eq,
            lhs,
            rhs,
        } = c
        else {
            continue;
        };
        for (side, other) in [(lhs, rhs), (rhs, lhs)] {
            let Some(p) = side.as_param() else { continue };
            if intervals.contains_key(p) || constants.contains_key(p) || derived.contains_key(p) {
                continue;
            }
            if other.constant_value().is_some() {
                continue;
            }
            if depends_on(other, p, &derived) {
                continue;
            }
            derived.insert(p, other);
            break;
        }
    }
    params
        .iter()
        .map(|p| {
            let b = if let Some(v) = constants.get(p.as_str()) {
                Some(Binding::Constant(*v))
            } else if let Some(e) = derived.get(p.as_str()) {
                Some(Binding::Derived((*e).clone()))
            } else {
                intervals
                    .get(p.as_str())
                    .map(|&(lo, hi)| Binding::Interval { lo, hi })
            };
            (p.clone(), b)
        })
        .collect()
}

fn constant_pin<'a>(lhs: &'a ArithExpr, rhs: &'a ArithExpr) -> Option<(&'a str, f64)> {
    match (lhs.as_param(), rhs.as_param()) {
        (Some(p), _) => rhs.constant_value().map(|v| (p, v)),
        (None, Some(p)) => lhs.constant_value().map(|v| (p, v)),
        _ => None,
    }
}

fn depends_on(e: &ArithExpr, target: &str, derived: &BTreeMap<&str, &ArithExpr>) -> bool {
    let mut stack = BTreeSet::new();
    e.collect_params(&mut stack);
    let mut seen = BTreeSet::new();
    while let Some(p) = stack.pop_first() {
        if p == target {
            return true;
        }
        if !seen.insert(p.clone()) {
            continue;
        }
        if let Some(d) = derived.get(p.as_str()) {
            d.collect_params(&mut stack);
        }
    }
    false
}

/// Parameter valuation over the free dimensions of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valuation(pub Vec<f64>);

impl Valuation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for Valuation {
    fn from(v: Vec<f64>) -> Self {
        Valuation(v)
    }
}

#[derive(Debug, Clone)]
enum Expr {
    Const(f64),
    Slot(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Exp(Box<Expr>),
}

impl Expr {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Slot(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k),
            // f64::exp saturates to +inf on overflow.
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }
}

#[derive(Debug, Clone)]
enum Pred {
    True,
    And(Vec<Pred>),
    Or(Vec<Pred>),
    /// `lhs < rhs` (or `<=` when not strict).
    Less { lhs: Expr, rhs: Expr, strict: bool },
    /// Relaxed equality `|lhs - rhs| < eps`.
    Band { lhs: Expr, rhs: Expr },
    /// `lo < x[slot] < hi`.
    Within { slot: usize, lo: f64, hi: f64 },
}

impl Pred {
    fn holds(&self, x: &[f64], eps: f64) -> bool {
        match self {
            Pred::True => true,
            Pred::And(ps) => ps.iter().all(|p| p.holds(x, eps)),
            Pred::Or(ps) => ps.iter().any(|p| p.holds(x, eps)),
            Pred::Less { lhs, rhs, strict } => {
                let (l, r) = (lhs.eval(x), rhs.eval(x));
                if *strict {
                    l < r
                } else {
                    l <= r
                }
            }
            Pred::Band { lhs, rhs } => (lhs.eval(x) - rhs.eval(x)).abs() < eps,
            Pred::Within { slot, lo, hi } => *lo < x[*slot] && x[*slot] < *hi,
        }
    }

    fn margin(&self, x: &[f64], eps: f64) -> f64 {
        fn violation(d: f64, strict: bool) -> f64 {
            if d.is_nan() {
                f64::MAX
            } else if d > 0.0 {
                d
            } else if d == 0.0 && strict {
                BOUNDARY_MARGIN
            } else {
                0.0
            }
        }
        match self {
            Pred::True => 0.0,
            Pred::And(ps) => ps.iter().map(|p| p.margin(x, eps)).sum(),
            Pred::Or(ps) => ps
                .iter()
                .map(|p| p.margin(x, eps))
                .fold(f64::INFINITY, f64::min),
            Pred::Less { lhs, rhs, strict } => violation(lhs.eval(x) - rhs.eval(x), *strict),
            Pred::Band { lhs, rhs } => violation((lhs.eval(x) - rhs.eval(x)).abs() - eps, true),
            Pred::Within { slot, lo, hi } => {
                let v = x[*slot];
                violation(lo - v, true).max(violation(v - hi, true))
            }
        }
    }
}

/// A top-level equality that is checked as the band `|lhs - rhs| < eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedEquality {
    pub lhs: ArithExpr,
    pub rhs: ArithExpr,
    /// A free parameter standing alone on one side, if any.
    pub free_param: Option<String>,
}

impl RelaxedEquality {
    /// The side opposite `free_param`.
    pub fn defining_expr(&self) -> Option<&ArithExpr> {
        let p = self.free_param.as_deref()?;
        Some(if self.lhs.as_param() == Some(p) { &self.rhs } else { &self.lhs })
    }
}

/// Compiled constraint: free dimensions, bounding box, pins and predicate.
#[derive(Debug, Clone)]
pub struct ParamSpace {
    /// Free parameters first, then pinned ones (constants, then derived in
    /// dependency order). Indexes the reconstructed full valuation.
    slots: Vec<String>,
    free: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    constants: Vec<(usize, f64)>,
    derived: Vec<(usize, Expr)>,
    pinned: Vec<(String, Binding)>,
    relaxed: Vec<RelaxedEquality>,
    predicate: Pred,
    epsilon: f64,
}

impl ParamSpace {
    /// Compiles `gamma` over the given parameters with relaxation width `eps`.
    pub fn compile(gamma: &Constraint, params: &[String], eps: f64) -> Result<Self, SpaceError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SpaceError::InvalidEpsilon(eps));
        }
        let mut mentioned = BTreeSet::new();
        gamma.collect_params(&mut mentioned);
        if let Some(p) = mentioned.iter().find(|p| !params.contains(p)) {
            return Err(SpaceError::UnknownParameter(p.clone()));
        }
        let bindings = bind_parameters(gamma, params);
        check_pins(gamma, &bindings)?;

        let mut slots = Vec::new();
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for (name, b) in &bindings {
            match b {
                None => return Err(SpaceError::Unbounded(name.clone())),
                Some(Binding::Interval { lo: l, hi: h }) => {
                    if !(l < h) || !l.is_finite() || !h.is_finite() {
                        return Err(SpaceError::EmptyBox {
                            param: name.clone(),
                            lo: *l,
                            hi: *h,
                        });
                    }
                    slots.push(name.clone());
                    lo.push(*l);
                    hi.push(*h);
                }
                Some(_) => {}
            }
        }
        let free = slots.len();
        let mut pinned = Vec::new();
        for (name, b) in &bindings {
            if let Some(b @ Binding::Constant(_)) = b {
                slots.push(name.clone());
                pinned.push((name.clone(), b.clone()));
            }
        }
        // Derived parameters in dependency order.
        let mut pending: Vec<(String, ArithExpr)> = bindings
            .iter()
            .filter_map(|(n, b)| match b {
                Some(Binding::Derived(e)) => Some((n.clone(), e.clone())),
                _ => None,
            })
            .collect();
        while !pending.is_empty() {
            let ready = pending.iter().position(|(_, e)| {
                let mut deps = BTreeSet::new();
                e.collect_params(&mut deps);
                deps.iter().all(|d| slots.contains(d))
            });
            // bind_parameters rejects cycles, so some entry is always ready.
            let (name, e) = pending.remove(ready.expect("acyclic derived parameters"));
            slots.push(name.clone());
            pinned.push((name, Binding::Derived(e)));
        }

        let index: BTreeMap<&str, usize> = slots
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut constants = Vec::new();
        let mut derived = Vec::new();
        for (name, b) in &pinned {
            let slot = index[name.as_str()];
            match b {
                Binding::Constant(v) => constants.push((slot, *v)),
                Binding::Derived(e) => derived.push((slot, lower_expr(e, &index))),
                Binding::Interval { .. } => unreachable!(),
            }
        }
        let mut definitions: Vec<(&str, &ArithExpr)> = pinned
            .iter()
            .filter_map(|(n, b)| match b {
                Binding::Derived(e) => Some((n.as_str(), e)),
                _ => None,
            })
            .collect();
        let mut relaxed = Vec::new();
        for c in gamma.conjuncts() {
            let Constraint::Cmp {
                op: CmpOp::Eq,
                lhs,
                rhs,
            } = c
            else {
                continue;
            };
            if constant_pin(lhs, rhs).is_some() {
                continue;
            }
            let defines = |side: &ArithExpr, other: &ArithExpr, d: &(&str, &ArithExpr)| {
                side.as_param() == Some(d.0) && other == d.1
            };
            if let Some(k) = definitions
                .iter()
                .position(|d| defines(lhs, rhs, d) || defines(rhs, lhs, d))
            {
                definitions.remove(k);
                continue;
            }
            let free_param = [lhs, rhs]
                .into_iter()
                .filter_map(|e| e.as_param())
                .find(|p| index[p] < free)
                .map(str::to_string);
            relaxed.push(RelaxedEquality {
                lhs: lhs.clone(),
                rhs: rhs.clone(),
                free_param,
            });
        }
        Ok(ParamSpace {
            predicate: lower_pred(gamma, &index),
            slots,
            free,
            lo,
            hi,
            constants,
            derived,
            pinned,
            relaxed,
            epsilon: eps,
        })
    }

    /// Compiles a shape expression's constraint. `eps` overrides the file's
    /// `epsilon`, which overrides [`DEFAULT_EPSILON`].
    pub fn from_spec(e: &ShapeExpr, eps: Option<f64>) -> Result<Self, SpaceError> {
        let eps = eps.or(e.epsilon).unwrap_or(DEFAULT_EPSILON);
        ParamSpace::compile(&e.constraint, &e.parameters(), eps)
    }

    /// Number of free dimensions.
    pub fn dim(&self) -> usize {
        self.free
    }

    /// Names of the free dimensions.
    pub fn dims(&self) -> &[String] {
        &self.slots[..self.free]
    }

    /// Names of every parameter in reconstruction order.
    pub fn all_params(&self) -> &[String] {
        &self.slots
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Eliminated parameters with their substitutions.
    pub fn pinned(&self) -> &[(String, Binding)] {
        &self.pinned
    }

    /// Top-level equalities kept as ε-bands whose one side is a free parameter.
    pub fn relaxed_equalities(&self) -> &[RelaxedEquality] {
        &self.relaxed
    }

    pub fn box_volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), SpaceError> {
        if v.len() == self.free {
            Ok(())
        } else {
            Err(SpaceError::DimensionMismatch {
                expected: self.free,
                got: v.len(),
            })
        }
    }

    /// Full valuation over [`Self::all_params`], pins reinstated.
    pub fn reconstruct(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.free, "valuation dimension");
        let mut x = Vec::with_capacity(self.slots.len());
        x.extend_from_slice(v);
        x.resize(self.slots.len(), 0.0);
        for &(slot, c) in &self.constants {
            x[slot] = c;
        }
        for (slot, e) in &self.derived {
            x[*slot] = e.eval(&x);
        }
        x
    }

    /// Named full valuation.
    pub fn full_valuation(&self, v: &[f64]) -> BTreeMap<String, f64> {
        self.slots.iter().cloned().zip(self.reconstruct(v)).collect()
    }

    fn in_box(&self, v: &[f64]) -> bool {
        v.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| l <= x && x <= h)
    }

    /// Membership test for a valuation of matching dimension.
    ///
    /// # Panics
    /// On dimension mismatch; see [`Self::contains`] for the checked form.
    pub fn member(&self, v: &[f64]) -> bool {
        if !self.in_box(v) {
            return false;
        }
        if self.pinned.is_empty() {
            self.predicate.holds(v, self.epsilon)
        } else {
            self.predicate.holds(&self.reconstruct(v), self.epsilon)
        }
    }

    /// True iff `v` satisfies the relaxed constraint.
    pub fn contains(&self, v: &[f64]) -> Result<bool, SpaceError> {
        self.check_dim(v)?;
        Ok(self.member(v))
    }

    /// Sum of violation margins of the relaxed constraint; zero iff `contains`.
    pub fn penalty(&self, v: &[f64]) -> Result<f64, SpaceError> {
        self.check_dim(v)?;
        Ok(self.predicate.margin(&self.reconstruct(v), self.epsilon))
    }
}

fn check_pins(gamma: &Constraint, bindings: &[(String, Option<Binding>)]) -> Result<(), SpaceError> {
    let pins: BTreeMap<&str, f64> = bindings
        .iter()
        .filter_map(|(n, b)| match b {
            Some(Binding::Constant(v)) => Some((n.as_str(), *v)),
            _ => None,
        })
        .collect();
    let mut intervals: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for c in gamma.conjuncts() {
        match c {
            Constraint::Cmp {
                op: CmpOp::Eq,
                lhs,
                rhs,
            } => {
                if let Some((p, v)) = constant_pin(lhs, rhs) {
                    let first = pins[p];
                    if first != v {
                        return Err(SpaceError::ContradictoryPins {
                            param: p.to_string(),
                            first,
                            second: v,
                        });
                    }
                }
            }
            Constraint::In { param, lo, hi } => {
                let e = intervals
                    .entry(param.as_str())
                    .or_insert((f64::NEG_INFINITY, f64::INFINITY));
                e.0 = e.0.max(*lo);
                e.1 = e.1.min(*hi);
            }
            _ => {}
        }
    }
    for (p, v) in pins {
        if let Some(&(lo, hi)) = intervals.get(p) {
            if !(lo < v && v < hi) {
                return Err(SpaceError::PinOutsideInterval {
                    param: p.to_string(),
                    value: v,
                    lo,
                    hi,
                });
            }
        }
    }
    Ok(())
}

fn lower_expr(e: &ArithExpr, index: &BTreeMap<&str, usize>) -> Expr {
    let b = |x: &ArithExpr| Box::new(lower_expr(x, index));
    match e {
        ArithExpr::Num(c) => Expr::Const(*c),
        ArithExpr::Param(p) => Expr::Slot(index[p.as_str()]),
        ArithExpr::Neg(x) => Expr::Neg(b(x)),
        ArithExpr::Add(l, r) => Expr::Add(b(l), b(r)),
        ArithExpr::Sub(l, r) => Expr::Sub(b(l), b(r)),
        ArithExpr::Mul(l, r) => Expr::Mul(b(l), b(r)),
        ArithExpr::Pow(x, k) => Expr::Pow(b(x), *k),
        ArithExpr::Exp(x) => Expr::Exp(b(x)),
    }
}

fn lower_pred(c: &Constraint, index: &BTreeMap<&str, usize>) -> Pred {
    match c {
        Constraint::True => Pred::True,
        Constraint::And(..) => Pred::And(
            c.conjuncts()
                .into_iter()
                .map(|x| lower_pred(x, index))
                .collect(),
        ),
        Constraint::Or(l, r) => Pred::Or(vec![lower_pred(l, index), lower_pred(r, index)]),
        Constraint::In { param, lo, hi } => Pred::Within {
            slot: index[param.as_str()],
            lo: *lo,
            hi: *hi,
        },
        Constraint::Cmp { op, lhs, rhs } => {
            let (l, r) = (lower_expr(lhs, index), lower_expr(rhs, index));
            match op {
                CmpOp::Lt => Pred::Less { lhs: l, rhs: r, strict: true },
                CmpOp::Le => Pred::Less { lhs: l, rhs: r, strict: false },
                CmpOp::Gt => Pred::Less { lhs: r, rhs: l, strict: true },
                CmpOp::Ge => Pred::Less { lhs: r, rhs: l, strict: false },
                CmpOp::Eq => Pred::Band { lhs: l, rhs: r },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_spec;

    fn params(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn ring2() -> ParamSpace {
        let r2 = ArithExpr::add(
            ArithExpr::pow(ArithExpr::param("x"), 2),
            ArithExpr::pow(ArithExpr::param("y"), 2),
        );
        let gamma = Constraint::and(
            Constraint::and(Constraint::within("x", -1.0, 1.0), Constraint::within("y", -1.0, 1.0)),
            Constraint::and(
                Constraint::cmp(r2.clone(), CmpOp::Lt, ArithExpr::Num(1.0)),
                Constraint::cmp(r2, CmpOp::Gt, ArithExpr::Num(0.81)),
            ),
        );
        ParamSpace::compile(&gamma, &params(&["x", "y"]), 1e-3).unwrap()
    }

    #[test]
    fn unit_interval() {
        let s = ParamSpace::compile(&Constraint::within("p", 0.0, 1.0), &params(&["p"]), 1e-3).unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!((s.lower()[0], s.upper()[0]), (0.0, 1.0));
        assert!(s.contains(&[0.5]).unwrap());
        assert!(!s.contains(&[0.0]).unwrap());
        assert!(!s.contains(&[1.0]).unwrap());
        assert_eq!(s.penalty(&[1.5]).unwrap(), 0.5);
        assert_eq!(s.penalty(&[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn pinned_only() {
        let gamma = Constraint::and(
            Constraint::within("p", 0.0, 1.0),
            Constraint::cmp(ArithExpr::param("p"), CmpOp::Eq, ArithExpr::Num(0.5)),
        );
        let s = ParamSpace::compile(&gamma, &params(&["p"]), 1e-3).unwrap();
        assert_eq!(s.dim(), 0);
        assert_eq!(s.pinned(), &[("p".to_string(), Binding::Constant(0.5))]);
        assert!(s.contains(&[]).unwrap());
    }

    #[test]
    fn ring_membership_and_penalty() {
        let s = ring2();
        assert!(s.contains(&[0.95, 0.0]).unwrap());
        assert!(!s.contains(&[0.5, 0.0]).unwrap());
        assert!(!s.contains(&[1.5, 0.0]).unwrap());
        assert!((s.penalty(&[0.0, 0.0]).unwrap() - 0.81).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let s = ring2();
        assert_eq!(
            s.contains(&[0.1]),
            Err(SpaceError::DimensionMismatch { expected: 2, got: 1 })
        );
        assert!(s.penalty(&[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn contradictory_pins() {
        let gamma = Constraint::and(
            Constraint::cmp(ArithExpr::param("p"), CmpOp::Eq, ArithExpr::Num(1.0)),
            Constraint::cmp(ArithExpr::param("p"), CmpOp::Eq, ArithExpr::Num(2.0)),
        );
        let err = ParamSpace::compile(&gamma, &params(&["p"]), 1e-3).unwrap_err();
        assert!(matches!(err, SpaceError::ContradictoryPins { .. }));
    }

    #[test]
    fn empty_box_and_unbounded() {
        let err = ParamSpace::compile(&Constraint::within("p", 1.0, 1.0), &params(&["p"]), 1e-3)
            .unwrap_err();
        assert!(matches!(err, SpaceError::EmptyBox { .. }));
        let err = ParamSpace::compile(&Constraint::True, &params(&["p"]), 1e-3).unwrap_err();
        assert_eq!(err, SpaceError::Unbounded("p".into()));
    }

    #[test]
    fn exp_overflow_saturates() {
        let gamma = Constraint::and(
            Constraint::within("p", 0.0, 1000.0),
            Constraint::cmp(ArithExpr::exp(ArithExpr::param("p")), CmpOp::Gt, ArithExpr::Num(1.0)),
        );
        let s = ParamSpace::compile(&gamma, &params(&["p"]), 1e-3).unwrap();
        assert!(s.contains(&[999.0]).unwrap());
    }

    #[test]
    fn pulse_has_eleven_free_dimensions() {
        let e = parse_spec(include_str!("../specs/pulse.sexp")).unwrap();
        let s = ParamSpace::from_spec(&e, None).unwrap();
        assert_eq!(s.dim(), 11, "{:?}", s.dims());
        let mut pinned: Vec<&str> = s.pinned().iter().map(|(n, _)| n.as_str()).collect();
        pinned.sort();
        assert_eq!(pinned, ["a1", "a3", "b2", "b3", "b4", "b5", "b6"]);
        assert_eq!(s.relaxed_equalities().len(), 3, "{:?}", s.relaxed_equalities());
    }

    #[test]
    fn derived_parameters_follow_dependencies() {
        let gamma = Constraint::and(
            Constraint::and(
                Constraint::cmp(
                    ArithExpr::param("c"),
                    CmpOp::Eq,
                    ArithExpr::add(ArithExpr::param("b"), ArithExpr::Num(1.0)),
                ),
                Constraint::cmp(
                    ArithExpr::param("b"),
                    CmpOp::Eq,
                    ArithExpr::mul(ArithExpr::param("a"), ArithExpr::Num(2.0)),
                ),
            ),
            Constraint::within("a", 0.0, 1.0),
        );
        let s = ParamSpace::compile(&gamma, &params(&["a", "b", "c"]), 1e-3).unwrap();
        assert_eq!(s.dims(), ["a"]);
        let full = s.full_valuation(&[0.25]);
        assert_eq!(full["b"], 0.5);
        assert_eq!(full["c"], 1.5);
        assert!(s.contains(&[0.25]).unwrap());
    }

    #[test]
    fn cyclic_definitions_stay_unbounded() {
        let gamma = Constraint::and(
            Constraint::cmp(ArithExpr::param("a"), CmpOp::Eq, ArithExpr::param("b")),
            Constraint::cmp(ArithExpr::param("b"), CmpOp::Eq, ArithExpr::param("a")),
        );
        let err = ParamSpace::compile(&gamma, &params(&["a", "b"]), 1e-3).unwrap_err();
        assert_eq!(err, SpaceError::Unbounded("b".into()));
    }
}
