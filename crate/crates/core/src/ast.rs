//! Abstract syntax of shape expressions.
//!
//! A shape expression pairs a regular expression over named atomic shapes
//! with one global constraint over the shapes' parameters. The `Display`
//! impls print the concrete `.sexp` syntax accepted by [`crate::parser`],
//! so `parse_spec(&e.to_string())` reproduces `e`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Family of an atomic shape. The last parameter of every kind is the
/// segment duration in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    /// `lin(a, b, d)`: `a*t + b`
    Linear,
    /// `exp(a, b, c, d)`: `a + b*exp(c*t)`
    Exponential,
    /// `sin(a, b, c, e, d)`: `a*sin(b*t + c) + e`
    Sinusoid,
}

impl ShapeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ShapeKind::Linear => "lin",
            ShapeKind::Exponential => "exp",
            ShapeKind::Sinusoid => "sin",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "lin" => Some(ShapeKind::Linear),
            "exp" => Some(ShapeKind::Exponential),
            "sin" => Some(ShapeKind::Sinusoid),
            _ => None,
        }
    }

    /// Number of parameters including the duration.
    pub fn arity(self) -> usize {
        match self {
            ShapeKind::Linear => 3,
            ShapeKind::Exponential => 4,
            ShapeKind::Sinusoid => 5,
        }
    }

    /// Value of the shape at local time `t` given its parameters (duration last, unused).
    pub fn eval(self, params: &[f64], t: f64) -> f64 {
        match self {
            ShapeKind::Linear => params[0] * t + params[1],
            ShapeKind::Exponential => params[0] + params[1] * (params[2] * t).exp(),
            ShapeKind::Sinusoid => params[0] * (params[1] * t + params[2]).sin() + params[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicShapeDecl {
    pub name: String,
    pub kind: ShapeKind,
    /// Parameter identifiers in signature order; the duration is last.
    pub params: Vec<String>,
}

impl AtomicShapeDecl {
    pub fn duration_param(&self) -> &str {
        self.params.last().map(String::as_str).unwrap_or_default()
    }
}

/// Regular expression over atom names.
///
/// There is no `Plus` variant: `x+` is built as `x . x*` by [`Regex::plus`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regex {
    Epsilon,
    Atom(String),
    Union(Box<Regex>, Box<Regex>),
    Concat(Box<Regex>, Box<Regex>),
    Star(Box<Regex>),
}

impl Regex {
    pub fn atom(name: impl Into<String>) -> Self {
        Regex::Atom(name.into())
    }

    pub fn union(l: Regex, r: Regex) -> Self {
        Regex::Union(Box::new(l), Box::new(r))
    }

    pub fn concat(l: Regex, r: Regex) -> Self {
        Regex::Concat(Box::new(l), Box::new(r))
    }

    pub fn star(inner: Regex) -> Self {
        Regex::Star(Box::new(inner))
    }

    /// Kleene plus, desugared.
    pub fn plus(inner: Regex) -> Self {
        Regex::concat(inner.clone(), Regex::star(inner))
    }

    /// Concatenation of a word of atoms; `eps` for the empty word.
    pub fn word<S: AsRef<str>>(atoms: &[S]) -> Self {
        atoms
            .iter()
            .map(|a| Regex::atom(a.as_ref()))
            .reduce(Regex::concat)
            .unwrap_or(Regex::Epsilon)
    }

    pub fn nullable(&self) -> bool {
        match self {
            Regex::Epsilon | Regex::Star(_) => true,
            Regex::Atom(_) => false,
            Regex::Union(l, r) => l.nullable() || r.nullable(),
            Regex::Concat(l, r) => l.nullable() && r.nullable(),
        }
    }

    /// Number of atom occurrences.
    pub fn atom_count(&self) -> usize {
        match self {
            Regex::Epsilon => 0,
            Regex::Atom(_) => 1,
            Regex::Union(l, r) | Regex::Concat(l, r) => l.atom_count() + r.atom_count(),
            Regex::Star(x) => x.atom_count(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Regex::Epsilon | Regex::Atom(_) => 1,
            Regex::Union(l, r) | Regex::Concat(l, r) => 1 + l.node_count() + r.node_count(),
            Regex::Star(x) => 1 + x.node_count(),
        }
    }

    /// Distinct atom names, sorted.
    pub fn alphabet(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Regex::Epsilon => {}
            Regex::Atom(a) => {
                out.insert(a.clone());
            }
            Regex::Union(l, r) | Regex::Concat(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            Regex::Star(x) => x.collect_atoms(out),
        }
    }

    /// First star whose argument matches the empty word, if any.
    pub fn find_nullable_star(&self) -> Option<&Regex> {
        match self {
            Regex::Epsilon | Regex::Atom(_) => None,
            Regex::Union(l, r) | Regex::Concat(l, r) => {
                l.find_nullable_star().or_else(|| r.find_nullable_star())
            }
            Regex::Star(x) if x.nullable() => Some(self),
            Regex::Star(x) => x.find_nullable_star(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Regex::Union(..) => 0,
            Regex::Concat(..) => 1,
            Regex::Star(_) => 2,
            Regex::Epsilon | Regex::Atom(_) => 3,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Regex::Epsilon => f.write_str("eps"),
            Regex::Atom(a) => f.write_str(a),
            // Both operators parse left-associatively; a right child of equal
            // precedence needs parentheses to keep the tree shape.
            Regex::Union(l, r) => {
                l.fmt_prec(f, 0)?;
                f.write_str(" | ")?;
                r.fmt_prec(f, 1)
            }
            Regex::Concat(l, r) => {
                l.fmt_prec(f, 1)?;
                f.write_str(" . ")?;
                r.fmt_prec(f, 2)
            }
            Regex::Star(x) => {
                x.fmt_prec(f, 3)?;
                f.write_str("*")
            }
        }
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }
}

/// Real-valued arithmetic over parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArithExpr {
    Num(f64),
    Param(String),
    Neg(Box<ArithExpr>),
    Add(Box<ArithExpr>, Box<ArithExpr>),
    Sub(Box<ArithExpr>, Box<ArithExpr>),
    Mul(Box<ArithExpr>, Box<ArithExpr>),
    Pow(Box<ArithExpr>, i32),
    Exp(Box<ArithExpr>),
}

impl ArithExpr {
    pub fn param(name: impl Into<String>) -> Self {
        ArithExpr::Param(name.into())
    }

    pub fn add(l: ArithExpr, r: ArithExpr) -> Self {
        ArithExpr::Add(Box::new(l), Box::new(r))
    }

    pub fn sub(l: ArithExpr, r: ArithExpr) -> Self {
        ArithExpr::Sub(Box::new(l), Box::new(r))
    }

    pub fn mul(l: ArithExpr, r: ArithExpr) -> Self {
        ArithExpr::Mul(Box::new(l), Box::new(r))
    }

    pub fn pow(base: ArithExpr, exponent: i32) -> Self {
        ArithExpr::Pow(Box::new(base), exponent)
    }

    pub fn exp(arg: ArithExpr) -> Self {
        ArithExpr::Exp(Box::new(arg))
    }

    pub fn as_param(&self) -> Option<&str> {
        match self {
            ArithExpr::Param(p) => Some(p),
            _ => None,
        }
    }

    /// Constant value if the expression mentions no parameter.
    pub fn constant_value(&self) -> Option<f64> {
        let mut params = BTreeSet::new();
        self.collect_params(&mut params);
        if params.is_empty() {
            Some(self.eval(&|_| 0.0))
        } else {
            None
        }
    }

    pub fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            ArithExpr::Num(_) => {}
            ArithExpr::Param(p) => {
                out.insert(p.clone());
            }
            ArithExpr::Neg(x) | ArithExpr::Pow(x, _) | ArithExpr::Exp(x) => x.collect_params(out),
            ArithExpr::Add(l, r) | ArithExpr::Sub(l, r) | ArithExpr::Mul(l, r) => {
                l.collect_params(out);
                r.collect_params(out);
            }
        }
    }

    /// Direct tree evaluation with a parameter lookup.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> f64) -> f64 {
        match self {
            ArithExpr::Num(x) => *x,
            ArithExpr::Param(p) => lookup(p),
            ArithExpr::Neg(x) => -x.eval(lookup),
            ArithExpr::Add(l, r) => l.eval(lookup) + r.eval(lookup),
            ArithExpr::Sub(l, r) => l.eval(lookup) - r.eval(lookup),
            ArithExpr::Mul(l, r) => l.eval(lookup) * r.eval(lookup),
            ArithExpr::Pow(x, k) => x.eval(lookup).powi(*k),
            ArithExpr::Exp(x) => x.eval(lookup).exp(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ArithExpr::Add(..) | ArithExpr::Sub(..) => 0,
            ArithExpr::Mul(..) => 1,
            ArithExpr::Neg(_) => 2,
            ArithExpr::Pow(..) => 3,
            ArithExpr::Num(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => 2,
            ArithExpr::Num(_) | ArithExpr::Param(_) | ArithExpr::Exp(_) => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            ArithExpr::Num(x) => write!(f, "{x:?}"),
            ArithExpr::Param(p) => f.write_str(p),
            // `-(..)` always parenthesised so that `-3` stays a literal and
            // `-(3)` stays a negation on re-parse.
            ArithExpr::Neg(x) => {
                f.write_str("-(")?;
                x.fmt_prec(f, 0)?;
                f.write_str(")")
            }
            ArithExpr::Add(l, r) => {
                l.fmt_prec(f, 0)?;
                f.write_str(" + ")?;
                r.fmt_prec(f, 1)
            }
            ArithExpr::Sub(l, r) => {
                l.fmt_prec(f, 0)?;
                f.write_str(" - ")?;
                r.fmt_prec(f, 1)
            }
            ArithExpr::Mul(l, r) => {
                l.fmt_prec(f, 1)?;
                f.write_str("*")?;
                r.fmt_prec(f, 2)
            }
            ArithExpr::Pow(x, k) => {
                x.fmt_prec(f, 4)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            ArithExpr::Exp(x) => {
                f.write_str("exp(")?;
                x.fmt_prec(f, 0)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for ArithExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Boolean constraint over parameters. `In` is the open interval `lo < p < hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Constraint {
    True,
    And(Box<Constraint>, Box<Constraint>),
    Or(Box<Constraint>, Box<Constraint>),
    Cmp {
        op: CmpOp,
        lhs: ArithExpr,
        rhs: ArithExpr,
    },
    In {
        param: String,
        lo: f64,
        hi: f64,
    },
}

impl Constraint {
    pub fn and(l: Constraint, r: Constraint) -> Self {
        match (l, r) {
            (Constraint::True, x) | (x, Constraint::True) => x,
            (l, r) => Constraint::And(Box::new(l), Box::new(r)),
        }
    }

    pub fn or(l: Constraint, r: Constraint) -> Self {
        Constraint::Or(Box::new(l), Box::new(r))
    }

    pub fn cmp(lhs: ArithExpr, op: CmpOp, rhs: ArithExpr) -> Self {
        Constraint::Cmp { op, lhs, rhs }
    }

    pub fn within(param: impl Into<String>, lo: f64, hi: f64) -> Self {
        Constraint::In {
            param: param.into(),
            lo,
            hi,
        }
    }

    /// Flattened top-level conjunction.
    pub fn conjuncts(&self) -> Vec<&Constraint> {
        let mut out = Vec::new();
        fn walk<'a>(c: &'a Constraint, out: &mut Vec<&'a Constraint>) {
            match c {
                Constraint::And(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                Constraint::True => {}
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn collect_params(&self, out: &mut BTreeSet<String>) {
        match self {
            Constraint::True => {}
            Constraint::And(l, r) | Constraint::Or(l, r) => {
                l.collect_params(out);
                r.collect_params(out);
            }
            Constraint::Cmp { lhs, rhs, .. } => {
                lhs.collect_params(out);
                rhs.collect_params(out);
            }
            Constraint::In { param, .. } => {
                out.insert(param.clone());
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Constraint::Or(..) => 0,
            Constraint::And(..) => 1,
            _ => 2,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Constraint::True => f.write_str("true"),
            Constraint::Or(l, r) => {
                l.fmt_prec(f, 0)?;
                f.write_str(" || ")?;
                r.fmt_prec(f, 1)
            }
            Constraint::And(l, r) => {
                l.fmt_prec(f, 1)?;
                f.write_str("\n    && ")?;
                r.fmt_prec(f, 2)
            }
            Constraint::Cmp { op, lhs, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Constraint::In { param, lo, hi } => write!(f, "{param} in ({lo:?}, {hi:?})"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// A parsed and validated shape expression `regex : constraint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeExpr {
    pub decls: Vec<AtomicShapeDecl>,
    pub regex: Regex,
    pub constraint: Constraint,
    /// Equality-relaxation half-width declared in the file, if any.
    pub epsilon: Option<f64>,
}

impl ShapeExpr {
    pub fn decl(&self, name: &str) -> Option<&AtomicShapeDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    /// All parameter identifiers in declaration order, shared ones listed once.
    pub fn parameters(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for p in self.decls.iter().flat_map(|d| d.params.iter()) {
            if seen.insert(p.clone()) {
                out.push(p.clone());
            }
        }
        out
    }
}

/// Prints the concrete syntax; `parse_spec(&print_spec(e)) == e`.
pub fn print_spec(e: &ShapeExpr) -> String {
    e.to_string()
}

impl fmt::Display for ShapeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(
                f,
                "shape {} = {}({});",
                d.name,
                d.kind.keyword(),
                d.params.join(", ")
            )?;
        }
        writeln!(f, "expr = {};", self.regex)?;
        writeln!(f, "constraint = {};", self.constraint)?;
        if let Some(eps) = self.epsilon {
            writeln!(f, "epsilon = {eps:?};")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plus_desugars() {
        let p = Regex::plus(Regex::atom("A"));
        assert_eq!(p, Regex::concat(Regex::atom("A"), Regex::star(Regex::atom("A"))));
        assert!(!p.nullable());
    }

    #[test]
    fn epsilon_prints_as_eps() {
        assert_eq!(Regex::Epsilon.to_string(), "eps");
    }

    #[test]
    fn regex_printing_keeps_right_nesting() {
        let r = Regex::concat(
            Regex::atom("A"),
            Regex::concat(Regex::atom("B"), Regex::atom("C")),
        );
        assert_eq!(r.to_string(), "A . (B . C)");
        let u = Regex::union(Regex::atom("A"), Regex::concat(Regex::atom("B"), Regex::atom("C")));
        assert_eq!(u.to_string(), "A | B . C");
    }

    #[test]
    fn nullable_star_detection() {
        let r = Regex::star(Regex::star(Regex::atom("A")));
        assert!(r.find_nullable_star().is_some());
        assert!(Regex::star(Regex::atom("A")).find_nullable_star().is_none());
    }

    #[test]
    fn shape_kinds_evaluate() {
        assert_eq!(ShapeKind::Linear.eval(&[2.0, 1.0, 5.0], 3.0), 7.0);
        assert_eq!(ShapeKind::Exponential.eval(&[1.0, 2.0, 0.0, 5.0], 3.0), 3.0);
        assert_eq!(ShapeKind::Sinusoid.eval(&[1.0, 0.0, 0.0, 4.0, 1.0], 3.0), 4.0);
    }
}
