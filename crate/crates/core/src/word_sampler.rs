//! Boltzmann sampling of shape words.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::Regex;
use crate::automaton::PositionAutomaton;

pub const DEFAULT_MAX_LENGTH: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WordError {
    #[error("invalid Boltzmann parameter z = {0}")]
    InvalidZ(f64),
    #[error("z = {z} is not below the convergence radius of `{subexpr}`")]
    Divergent { z: f64, subexpr: String },
    #[error("sampled word exceeded the length cap of {cap} atoms")]
    TooLong { cap: usize },
    #[error("word `{0}` is not in the language")]
    NotInLanguage(String),
}

/// A sequence of atomic-shape names accepted by the shape regex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeWord {
    pub atoms: Vec<String>,
}

impl ShapeWord {
    pub fn new<S: AsRef<str>>(atoms: &[S]) -> Self {
        ShapeWord {
            atoms: atoms.iter().map(|a| a.as_ref().to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atoms concatenated without separators, e.g. `ABCFA`.
    pub fn compact(&self) -> String {
        self.atoms.concat()
    }
}

impl fmt::Display for ShapeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("eps");
        }
        f.write_str(&self.atoms.join(" "))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Epsilon,
    Atom(String),
    Union(usize, usize),
    Concat(usize, usize),
    Star(usize),
}

/// Generating-function values of every subexpression, evaluated once at `z`.
#[derive(Debug, Clone)]
pub struct BoltzmannOracle {
    z: f64,
    nodes: Vec<Node>,
    g: Vec<f64>,
    root: usize,
    max_length: usize,
    automaton: PositionAutomaton,
}

impl BoltzmannOracle {
    pub fn build(regex: &Regex, z: f64) -> Result<Self, WordError> {
        if !(z >= 0.0 && z.is_finite()) {
            return Err(WordError::InvalidZ(z));
        }
        let mut oracle = BoltzmannOracle {
            z,
            nodes: Vec::new(),
            g: Vec::new(),
            root: 0,
            max_length: DEFAULT_MAX_LENGTH,
            automaton: PositionAutomaton::new(regex),
        };
        oracle.root = oracle.push(regex)?;
        Ok(oracle)
    }

    pub fn with_max_length(mut self, cap: usize) -> Self {
        self.max_length = cap;
        self
    }

    fn push(&mut self, r: &Regex) -> Result<usize, WordError> {
        let (node, g) = match r {
            Regex::Epsilon => (Node::Epsilon, 1.0),
            Regex::Atom(a) => (Node::Atom(a.clone()), self.z),
            Regex::Union(l, r) => {
                let (l, r) = (self.push(l)?, self.push(r)?);
                (Node::Union(l, r), self.g[l] + self.g[r])
            }
            Regex::Concat(l, r) => {
                let (l, r) = (self.push(l)?, self.push(r)?);
                (Node::Concat(l, r), self.g[l] * self.g[r])
            }
            Regex::Star(x) => {
                let x = self.push(x)?;
                if !(self.g[x] < 1.0) {
                    return Err(WordError::Divergent {
                        z: self.z,
                        subexpr: r.to_string(),
                    });
                }
                (Node::Star(x), 1.0 / (1.0 - self.g[x]))
            }
        };
        if !g.is_finite() {
            return Err(WordError::Divergent {
                z: self.z,
                subexpr: r.to_string(),
            });
        }
        self.nodes.push(node);
        self.g.push(g);
        Ok(self.nodes.len() - 1)
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// `g(z)` of the whole expression.
    pub fn g(&self) -> f64 {
        self.g[self.root]
    }

    /// Cached values, children before parents.
    pub fn cached_values(&self) -> &[f64] {
        &self.g
    }

    pub fn sample_word<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ShapeWord, WordError> {
        let mut atoms = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                Node::Epsilon => {}
                Node::Atom(a) => {
                    if atoms.len() >= self.max_length {
                        return Err(WordError::TooLong {
                            cap: self.max_length,
                        });
                    }
                    atoms.push(a.clone());
                }
                Node::Concat(l, r) => {
                    stack.push(*r);
                    stack.push(*l);
                }
                Node::Union(l, r) => {
                    let total = self.g[n];
                    let left = total == 0.0 || rng.gen::<f64>() * total < self.g[*l];
                    stack.push(if left { *l } else { *r });
                }
                Node::Star(x) => {
                    if rng.gen::<f64>() * self.g[n] >= 1.0 {
                        stack.push(n);
                        stack.push(*x);
                    }
                }
            }
        }
        Ok(ShapeWord { atoms })
    }

    pub fn accepts(&self, w: &ShapeWord) -> bool {
        self.automaton.accepts(&w.atoms)
    }

    /// `z^|w| / g(z)`.
    pub fn word_probability(&self, w: &ShapeWord) -> Result<f64, WordError> {
        if !self.accepts(w) {
            return Err(WordError::NotInLanguage(w.to_string()));
        }
        Ok(self.z.powi(w.len() as i32) / self.g())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn pulse() -> Regex {
        let body = Regex::word(&["A", "B", "C"]);
        let choice = Regex::union(Regex::word(&["D", "E"]), Regex::atom("F"));
        Regex::concat(Regex::plus(Regex::concat(body, choice)), Regex::atom("A"))
    }

    #[test]
    fn cached_values() {
        let o = BoltzmannOracle::build(&Regex::star(Regex::atom("A")), 0.5).unwrap();
        assert_eq!(o.g(), 2.0);
        let o = BoltzmannOracle::build(&Regex::union(Regex::Epsilon, Regex::atom("A")), 0.0).unwrap();
        assert_eq!(o.cached_values(), [1.0, 0.0, 1.0]);
        let o = BoltzmannOracle::build(&pulse(), 0.78631).unwrap();
        assert!(o.cached_values().iter().all(|g| g.is_finite() && *g > 0.0));
    }

    #[test]
    fn divergent_z_rejected() {
        assert!(matches!(
            BoltzmannOracle::build(&Regex::star(Regex::atom("A")), 1.0),
            Err(WordError::Divergent { .. })
        ));
        assert!(matches!(BoltzmannOracle::build(&pulse(), 0.9), Err(WordError::Divergent { .. })));
        assert!(BoltzmannOracle::build(&pulse(), -0.1).is_err());
    }

    #[test]
    fn tiny_z_gives_shortest_word() {
        let o = BoltzmannOracle::build(&pulse(), 1e-6).unwrap();
        let mut rng = rng_for(1, 0, 0);
        let hits = (0..10_000)
            .filter(|_| o.sample_word(&mut rng).unwrap().compact() == "ABCFA")
            .count();
        assert!(hits as f64 / 1e4 > 0.999);
    }

    #[test]
    fn words_are_in_language_and_deterministic() {
        let o = BoltzmannOracle::build(&pulse(), 0.78631).unwrap();
        let (mut r1, mut r2) = (rng_for(3, 0, 0), rng_for(3, 0, 0));
        for _ in 0..500 {
            let w = o.sample_word(&mut r1).unwrap();
            assert!(o.accepts(&w), "{w}");
            assert_eq!(w, o.sample_word(&mut r2).unwrap());
        }
    }

    #[test]
    fn probability_formula() {
        let o = BoltzmannOracle::build(&Regex::Epsilon, 0.3).unwrap();
        assert_eq!(o.word_probability(&ShapeWord::new::<&str>(&[])).unwrap(), 1.0);
        let o = BoltzmannOracle::build(&pulse(), 0.78631).unwrap();
        let p1 = o.word_probability(&ShapeWord::new(&["A", "B", "C", "D", "E", "A", "B", "C", "F", "A"])).unwrap();
        let p2 = o.word_probability(&ShapeWord::new(&["A", "B", "C", "F", "A", "B", "C", "D", "E", "A"])).unwrap();
        assert_eq!(p1, p2);
        assert!(o.word_probability(&ShapeWord::new(&["A"])).is_err());
    }

    #[test]
    fn length_cap() {
        let o = BoltzmannOracle::build(&Regex::star(Regex::atom("A")), 0.999)
            .unwrap()
            .with_max_length(3);
        let mut rng = rng_for(0, 0, 0);
        let mut saw = false;
        for _ in 0..100 {
            saw |= matches!(o.sample_word(&mut rng), Err(WordError::TooLong { cap: 3 }));
        }
        assert!(saw);
    }
}
