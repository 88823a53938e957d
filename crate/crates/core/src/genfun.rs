//! Generating functions of shape regexes and Boltzmann parameter tuning.
//!
//! All symbolic work is exact over the rationals. Floating point enters only
//! when a rational function is evaluated, when the convergence radius is
//! located and when `z` is tuned for a target mean length.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::ast::Regex;
use crate::poly::{horner, Polynomial};

/// Absolute tolerance of the convergence-radius bisection.
pub const RCONV_TOL: f64 = 1e-12;
/// Relative guard keeping the tuning bracket away from the pole.
pub const POLE_GUARD: f64 = 1e-9;
const MONOTONE_GRID: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenfunError {
    #[error("nullable star argument in `{0}`")]
    NullableStar(String),
    #[error("rational function is singular at z = 0")]
    SingularAtOrigin,
    #[error("series has non-integral coefficients")]
    NonIntegral,
    #[error("unreachable mean length {target}: achievable range is [{min}, {max})")]
    UnreachableMeanLength { target: f64, min: f64, max: f64 },
    #[error("mean length is not monotone near z = {z}; refusing to bisect")]
    NonMonotone { z: f64 },
    #[error("generating function is identically zero")]
    ZeroFunction,
}

/// `num / den` with gcd-reduced exact coefficients and `den(0) = 1` whenever
/// `den(0) != 0` (otherwise `den` is monic).
#[derive(Clone)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
    num_f: Vec<f64>,
    den_f: Vec<f64>,
}

impl PartialEq for RationalFunction {
    fn eq(&self, other: &Self) -> bool {
        self.num == other.num && self.den == other.den
    }
}

impl fmt::Debug for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl RationalFunction {
    /// # Panics
    /// If `den` is the zero polynomial.
    pub fn new(num: Polynomial, den: Polynomial) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let (num, den) = if num.is_zero() {
            (num, Polynomial::one())
        } else {
            let g = num.gcd(&den);
            (num.div_rem(&g).0, den.div_rem(&g).0)
        };
        let c0 = den.coeff(0);
        let norm = if c0.is_zero() {
            den.leading().expect("non-zero").recip()
        } else {
            c0.recip()
        };
        let (num, den) = (num.scale(&norm), den.scale(&norm));
        RationalFunction {
            num_f: num.to_f64_coeffs(),
            den_f: den.to_f64_coeffs(),
            num,
            den,
        }
    }

    pub fn from_poly(p: Polynomial) -> Self {
        RationalFunction::new(p, Polynomial::one())
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn eval(&self, z: f64) -> f64 {
        horner(&self.num_f, z) / horner(&self.den_f, z)
    }

    pub fn eval_exact(&self, z: &BigRational) -> Option<BigRational> {
        let d = self.den.eval_exact(z);
        (!d.is_zero()).then(|| self.num.eval_exact(z) / d)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        RationalFunction::new(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        RationalFunction::new(&self.num * &rhs.num, &self.den * &rhs.den)
    }

    /// `1 / (1 - self)`.
    pub fn quasi_inverse(&self) -> Self {
        RationalFunction::new(self.den.clone(), &self.den - &self.num)
    }

    /// Symbolic derivative by the quotient rule.
    pub fn derivative(&self) -> Self {
        RationalFunction::new(
            &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative()),
            &self.den * &self.den,
        )
    }
}

/// Generating function `g(z) = Σ_w z^|w|` of an unambiguous regex.
pub fn generating_function(r: &Regex) -> Result<RationalFunction, GenfunError> {
    Ok(match r {
        Regex::Epsilon => RationalFunction::from_poly(Polynomial::one()),
        Regex::Atom(_) => RationalFunction::from_poly(Polynomial::z()),
        Regex::Union(l, r) => generating_function(l)?.add(&generating_function(r)?),
        Regex::Concat(l, r) => generating_function(l)?.mul(&generating_function(r)?),
        Regex::Star(x) => {
            let g0 = generating_function(x)?;
            // A non-nullable argument has no constant term.
            if !g0.numerator().coeff(0).is_zero() {
                return Err(GenfunError::NullableStar(r.to_string()));
            }
            g0.quasi_inverse()
        }
    })
}

fn exact_series(g: &RationalFunction, n: usize) -> Result<Vec<BigRational>, GenfunError> {
    let d0 = g.den.coeff(0);
    if d0.is_zero() {
        return Err(GenfunError::SingularAtOrigin);
    }
    let den = g.den.coeffs();
    let mut out: Vec<BigRational> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut acc = g.num.coeff(k);
        for j in 1..den.len().min(k + 1) {
            acc -= &den[j] * &out[k - j];
        }
        out.push(acc / &d0);
    }
    Ok(out)
}

/// First `n + 1` power-series coefficients, by the linear recurrence
/// `den * series = num`.
pub fn taylor_coefficients(g: &RationalFunction, n: usize) -> Result<Vec<BigInt>, GenfunError> {
    exact_series(g, n)?
        .into_iter()
        .map(|c| {
            if c.is_integer() {
                Ok(c.to_integer())
            } else {
                Err(GenfunError::NonIntegral)
            }
        })
        .collect()
}

/// Sturm chain of a square-free polynomial.
struct Sturm(Vec<Polynomial>);

impl Sturm {
    fn new(p: &Polynomial) -> Self {
        let mut chain = vec![p.clone(), p.derivative()];
        while !chain.last().expect("non-empty").is_zero() {
            let n = chain.len();
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            chain.push(-&r);
        }
        chain.pop();
        Sturm(chain)
    }

    fn sign_changes(signs: impl Iterator<Item = i8>) -> usize {
        let mut prev = 0i8;
        let mut changes = 0;
        for s in signs.filter(|&s| s != 0) {
            if prev != 0 && s != prev {
                changes += 1;
            }
            prev = s;
        }
        changes
    }

    fn changes_at(&self, x: &BigRational) -> usize {
        Sturm::sign_changes(self.0.iter().map(|p| {
            let v = p.eval_exact(x);
            if v.is_positive() {
                1
            } else if v.is_negative() {
                -1
            } else {
                0
            }
        }))
    }

    fn changes_at_infinity(&self) -> usize {
        Sturm::sign_changes(
            self.0
                .iter()
                .map(|p| if p.leading().is_some_and(Signed::is_positive) { 1 } else { -1 }),
        )
    }

    /// Distinct roots in `(0, x]`.
    fn roots_up_to(&self, x: &BigRational) -> usize {
        self.changes_at(&BigRational::zero())
            .saturating_sub(self.changes_at(x))
    }
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Radius of convergence: the smallest positive root of the denominator, or
/// `+inf` for polynomials. Root location uses a Sturm count on the
/// square-free part, a doubling scan and bisection to [`RCONV_TOL`].
pub fn convergence_radius(g: &RationalFunction) -> f64 {
    let den = g.denominator();
    if den.degree().unwrap_or(0) == 0 {
        return f64::INFINITY;
    }
    let square_free = den.div_rem(&den.gcd(&den.derivative())).0;
    let sturm = Sturm::new(&square_free);
    let positive = sturm
        .changes_at(&BigRational::zero())
        .saturating_sub(sturm.changes_at_infinity());
    if positive == 0 {
        return f64::INFINITY;
    }
    let mut hi = 1.0 / 1024.0;
    while sturm.roots_up_to(&rational(hi)) == 0 {
        hi *= 2.0;
    }
    let mut lo = if hi > 1.0 / 1024.0 { hi / 2.0 } else { 0.0 };
    while hi - lo > RCONV_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm.roots_up_to(&rational(mid)) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean word length `N(z) = z g'(z) / g(z)` as a rational function.
pub fn mean_length_function(g: &RationalFunction) -> Result<RationalFunction, GenfunError> {
    if g.numerator().is_zero() {
        return Err(GenfunError::ZeroFunction);
    }
    let (p, q) = (g.numerator(), g.denominator());
    let top = &(&p.derivative() * q) - &(p * &q.derivative());
    Ok(RationalFunction::new(top.shift(1), p * q))
}

/// The polynomial `N q(z) - p(z)` whose root in `[0, Rconv)` is the tuned `z`,
/// where `N(z) = p(z) / q(z)`.
pub fn tuning_polynomial(g: &RationalFunction, target: f64) -> Result<Polynomial, GenfunError> {
    let n = mean_length_function(g)?;
    Ok(&n.denominator().scale(&rational(target)) - n.numerator())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TunedParams {
    pub z: f64,
    /// `+inf` for finite languages.
    pub rconv: f64,
    pub mean_length_at_z: f64,
}

/// Finds `z` with `N(z) = target` by bisection.
pub fn tune_z(g: &RationalFunction, target: f64) -> Result<TunedParams, GenfunError> {
    let mean = mean_length_function(g)?;
    let rconv = convergence_radius(g);
    let n0 = mean.eval(0.0);
    let upper = if rconv.is_finite() {
        rconv * (1.0 - POLE_GUARD)
    } else {
        let mut u = 1.0;
        while mean.eval(u) < target && u < 1e12 {
            u *= 2.0;
        }
        u
    };
    let sup = mean.eval(upper);
    let unreachable = || GenfunError::UnreachableMeanLength {
        target,
        min: n0,
        max: sup,
    };
    if !target.is_finite() || target < n0 {
        return Err(unreachable());
    }
    if target == n0 {
        return Ok(TunedParams {
            z: 0.0,
            rconv,
            mean_length_at_z: n0,
        });
    }
    let mut prev = n0;
    for i in 1..=MONOTONE_GRID {
        let z = upper * i as f64 / MONOTONE_GRID as f64;
        let v = mean.eval(z);
        if v < prev - 1e-9 * prev.abs().max(1.0) {
            return Err(GenfunError::NonMonotone { z });
        }
        prev = v;
    }
    if !(sup > target) {
        return Err(unreachable());
    }
    let (mut lo, mut hi) = (0.0f64, upper);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean.eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = if (mean.eval(lo) - target).abs() <= (mean.eval(hi) - target).abs() {
        lo
    } else {
        hi
    };
    Ok(TunedParams {
        z,
        rconv,
        mean_length_at_z: mean.eval(z),
    })
}

/// Coefficients rendered for reports: integers when integral, `p/q` otherwise.
pub fn coefficient_strings(p: &Polynomial) -> Vec<String> {
    p.coeffs().iter().map(|c| c.to_string()).collect()
}

/// Exact integer coefficients, if every coefficient is integral.
pub fn integer_coefficients(p: &Polynomial) -> Option<Vec<i64>> {
    p.integer_coeffs()?
        .into_iter()
        .map(|c| i64::try_from(c).ok())
        .collect()
}

/// `true` if `p` is a non-zero rational multiple of `q`.
pub fn proportional(p: &Polynomial, q: &Polynomial) -> bool {
    match (p.leading(), q.leading()) {
        (Some(a), Some(b)) => p.scale(b) == q.scale(a),
        (None, None) => true,
        _ => false,
    }
}

impl RationalFunction {
    pub fn is_one(&self) -> bool {
        self.num.degree() == Some(0) && self.num.coeff(0).is_one() && self.den == Polynomial::one()
    }
}
