//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use shapegen::ast::{ArithExpr, CmpOp, Constraint, Regex};

/// Parse-tree count of `w` under `r` by span dynamic programming.
pub fn derivations<S: AsRef<str>>(r: &Regex, w: &[S]) -> u64 {
    spans(r, w)[0][w.len()]
}

fn spans<S: AsRef<str>>(r: &Regex, w: &[S]) -> Vec<Vec<u64>> {
    let n = w.len();
    let mut m = vec![vec![0u64; n + 1]; n + 1];
    match r {
        Regex::Epsilon => (0..=n).for_each(|i| m[i][i] = 1),
        Regex::Atom(a) => {
            for i in 0..n {
                if w[i].as_ref() == a {
                    m[i][i + 1] = 1;
                }
            }
        }
        Regex::Union(l, r) => {
            let (a, b) = (spans(l, w), spans(r, w));
            for i in 0..=n {
                for j in i..=n {
                    m[i][j] = a[i][j] + b[i][j];
                }
            }
        }
        Regex::Concat(l, r) => {
            let (a, b) = (spans(l, w), spans(r, w));
            for i in 0..=n {
                for j in i..=n {
                    m[i][j] = (i..=j).map(|k| a[i][k] * b[k][j]).sum();
                }
            }
        }
        Regex::Star(inner) => {
            let a = spans(inner, w);
            for j in 0..=n {
                m[j][j] = 1;
                for i in (0..j).rev() {
                    m[i][j] = (i + 1..=j).map(|k| a[i][k] * m[k][j]).sum();
                }
            }
        }
    }
    m
}

/// Every word over `alphabet` of exactly `len` letters.
pub fn all_words(alphabet: &[String], len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |a| {
                    let mut v = w.clone();
                    v.push(a.clone());
                    v
                })
            })
            .collect();
    }
    out
}

/// Number of words of each length `0..=max_len` in the language of `r`.
pub fn brute_force_counts(r: &Regex, max_len: usize) -> Vec<u64> {
    let alphabet: Vec<String> = r.alphabet().into_iter().collect();
    (0..=max_len)
        .map(|n| {
            if alphabet.is_empty() {
                return u64::from(n == 0 && derivations::<String>(r, &[]) > 0);
            }
            all_words(&alphabet, n).iter().filter(|w| derivations(r, w) > 0).count() as u64
        })
        .collect()
}

/// A word with two or more parse trees, up to `max_len` letters.
pub fn brute_force_ambiguous(r: &Regex, max_len: usize) -> Option<Vec<String>> {
    let alphabet: Vec<String> = r.alphabet().into_iter().collect();
    (0..=max_len).find_map(|n| {
        if alphabet.is_empty() {
            return None;
        }
        all_words(&alphabet, n).into_iter().find(|w| derivations(r, w) > 1)
    })
}

/// Random regex with at most `max_atoms` atom occurrences over `letters`.
pub fn random_regex<R: Rng>(rng: &mut R, max_atoms: usize, letters: &[&str]) -> Regex {
    fn go<R: Rng>(rng: &mut R, budget: usize, letters: &[&str]) -> Regex {
        if budget <= 1 {
            return match rng.gen_range(0..6) {
                0 => Regex::star(Regex::atom(letters[rng.gen_range(0..letters.len())])),
                _ => Regex::atom(letters[rng.gen_range(0..letters.len())]),
            };
        }
        match rng.gen_range(0..7) {
            0..=2 => {
                let k = rng.gen_range(1..budget);
                Regex::concat(go(rng, k, letters), go(rng, budget - k, letters))
            }
            3 | 4 => {
                let k = rng.gen_range(1..budget);
                Regex::union(go(rng, k, letters), go(rng, budget - k, letters))
            }
            _ => Regex::star(go(rng, budget, letters)),
        }
    }
    let budget = rng.gen_range(1..=max_atoms);
    go(rng, budget, letters)
}

pub fn eval(e: &ArithExpr, val: &BTreeMap<String, f64>) -> f64 {
    match e {
        ArithExpr::Num(x) => *x,
        ArithExpr::Param(p) => val[p],
        ArithExpr::Neg(a) => -eval(a, val),
        ArithExpr::Add(a, b) => eval(a, val) + eval(b, val),
        ArithExpr::Sub(a, b) => eval(a, val) - eval(b, val),
        ArithExpr::Mul(a, b) => eval(a, val) * eval(b, val),
        ArithExpr::Pow(a, k) => eval(a, val).powi(*k),
        ArithExpr::Exp(a) => eval(a, val).exp(),
    }
}

/// Truth of `c` on a full valuation, with equalities read as open
/// bands of half-width `eps`.
pub fn holds(c: &Constraint, val: &BTreeMap<String, f64>, eps: f64) -> bool {
    match c {
        Constraint::True => true,
        Constraint::And(a, b) => holds(a, val, eps) && holds(b, val, eps),
        Constraint::Or(a, b) => holds(a, val, eps) || holds(b, val, eps),
        Constraint::In { param, lo, hi } => {
            let x = val[param];
            *lo < x && x < *hi
        }
        Constraint::Cmp { op, lhs, rhs } => {
            let (l, r) = (eval(lhs, val), eval(rhs, val));
            match op {
                CmpOp::Lt => l < r,
                CmpOp::Le => l <= r,
                CmpOp::Gt => l > r,
                CmpOp::Ge => l >= r,
                CmpOp::Eq => (l - r).abs() < eps,
            }
        }
    }
}

pub fn in_ring(x: &[f64], c1: f64, c2: f64, c: f64) -> bool {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    c2 * c2 < r2 && r2 < c1 * c1 && x.iter().all(|v| v.abs() < c)
}

pub fn spec_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

pub fn load(name: &str) -> shapegen::ast::ShapeExpr {
    shapegen::parser::parse_spec(&std::fs::read_to_string(spec_path(name)).unwrap()).unwrap()
}
