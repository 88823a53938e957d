//! Statistical checks on sampled words and valuations.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::ast::Regex;
use crate::automaton::PositionAutomaton;
use crate::genfun::{taylor_coefficients, RationalFunction};
use crate::word_sampler::ShapeWord;

/// Distinct words tracked by [`WordStats`].
pub const DISTINCT_WORD_CAP: usize = 10_000;
/// Asymptotic two-sided Kolmogorov–Smirnov coefficient at the 1% level.
pub const KS_C_001: f64 = 1.628;
/// Same at the 5% level.
pub const KS_C_005: f64 = 1.358;
const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagError {
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("only {0} word(s) of this length in the language; test skipped")]
    Skipped(usize),
    #[error("{0}")]
    Genfun(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WordStats {
    pub count: u64,
    pub length_histogram: BTreeMap<usize, u64>,
    pub frequencies: BTreeMap<ShapeWord, u64>,
    /// Words not tracked individually once the cap was reached.
    pub untracked: u64,
    length_sum: u128,
    length_sq_sum: u128,
}

impl WordStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a ShapeWord>) -> Self {
        let mut s = WordStats::new();
        for w in words {
            s.add(w);
        }
        s
    }

    pub fn add(&mut self, w: &ShapeWord) {
        let n = w.len();
        self.count += 1;
        *self.length_histogram.entry(n).or_default() += 1;
        self.length_sum += n as u128;
        self.length_sq_sum += (n as u128) * (n as u128);
        if let Some(c) = self.frequencies.get_mut(w) {
            *c += 1;
        } else if self.frequencies.len() < DISTINCT_WORD_CAP {
            self.frequencies.insert(w.clone(), 1);
        } else {
            self.untracked += 1;
        }
    }

    pub fn merge(&mut self, other: &WordStats) {
        self.count += other.count;
        self.length_sum += other.length_sum;
        self.length_sq_sum += other.length_sq_sum;
        self.untracked += other.untracked;
        for (n, c) in &other.length_histogram {
            *self.length_histogram.entry(*n).or_default() += c;
        }
        for (w, c) in &other.frequencies {
            if let Some(mine) = self.frequencies.get_mut(w) {
                *mine += c;
            } else if self.frequencies.len() < DISTINCT_WORD_CAP {
                self.frequencies.insert(w.clone(), *c);
            } else {
                self.untracked += c;
            }
        }
    }

    pub fn mean_length(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.length_sum as f64 / self.count as f64
    }

    pub fn length_variance(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        let m = self.mean_length();
        self.length_sq_sum as f64 / self.count as f64 - m * m
    }
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    d.sf(statistic)
}

/// Pearson statistic and p-value with `bins - 1` degrees of freedom.
pub fn chi_square_test(observed: &[f64], expected: &[f64]) -> (f64, f64) {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    (stat, chi_square_sf(stat, observed.len().saturating_sub(1)))
}

/// Pearson test of `observed` against cell probabilities `probs` (summing
/// to one), after merging adjacent cells until each expects at least five.
pub fn pooled_chi_square(observed: &[u64], probs: &[f64]) -> Result<(f64, f64, usize), DiagError> {
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let (mut obs, mut exp) = (Vec::new(), Vec::new());
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (o, p) in observed.iter().zip(probs) {
        o_acc += *o as f64;
        e_acc += p * total;
        if e_acc >= MIN_EXPECTED {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if o_acc > 0.0 || e_acc > 0.0 {
        match (obs.last_mut(), exp.last_mut()) {
            (Some(o), Some(e)) => {
                *o += o_acc;
                *e += e_acc;
            }
            _ => {
                obs.push(o_acc);
                exp.push(e_acc);
            }
        }
    }
    if obs.len() < 2 {
        return Err(DiagError::Insufficient("fewer than two cells with expected count >= 5".into()));
    }
    let (stat, p) = chi_square_test(&obs, &exp);
    Ok((stat, p, obs.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SameLengthReport {
    pub length: usize,
    pub words: Vec<String>,
    pub observed: Vec<u64>,
    pub statistic: f64,
    pub p_value: f64,
}

/// Chi-square test that every word of the given length was drawn equally
/// often, over the exact set of such words in the language.
pub fn same_length_test(stats: &WordStats, regex: &Regex, length: usize) -> Result<SameLengthReport, DiagError> {
    let words = PositionAutomaton::new(regex).words_of_length(length, DISTINCT_WORD_CAP);
    if words.len() < 2 {
        return Err(DiagError::Skipped(words.len()));
    }
    let observed: Vec<u64> = words
        .iter()
        .map(|w| {
            stats
                .frequencies
                .get(&ShapeWord { atoms: w.clone() })
                .copied()
                .unwrap_or(0)
        })
        .collect();
    let total: u64 = observed.iter().sum();
    let expected = total as f64 / words.len() as f64;
    if expected < MIN_EXPECTED {
        return Err(DiagError::Insufficient(format!(
            "expected count {expected:.2} per word of length {length} is below 5"
        )));
    }
    let obs: Vec<f64> = observed.iter().map(|&o| o as f64).collect();
    let (statistic, p_value) = chi_square_test(&obs, &vec![expected; obs.len()]);
    Ok(SameLengthReport {
        length,
        words: words.into_iter().map(|w| w.concat()).collect(),
        observed,
        statistic,
        p_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthLawReport {
    pub statistic: f64,
    pub p_value: f64,
    pub cells: usize,
}

/// Chi-square test of the length histogram against `c_n z^n / g(z)`.
pub fn length_law_test(stats: &WordStats, g: &RationalFunction, z: f64) -> Result<LengthLawReport, DiagError> {
    let max_len = *stats
        .length_histogram
        .keys()
        .next_back()
        .ok_or_else(|| DiagError::Insufficient("no words".into()))?;
    let coeffs = taylor_coefficients(g, max_len).map_err(|e| DiagError::Genfun(e.to_string()))?;
    let gz = g.eval(z);
    let mut probs: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| c.to_f64().unwrap_or(f64::INFINITY) * z.powi(n as i32) / gz)
        .collect();
    let covered: f64 = probs.iter().sum();
    // Lengths beyond the largest observed one share the last cell.
    *probs.last_mut().expect("non-empty") += (1.0 - covered).max(0.0);
    let observed: Vec<u64> = (0..=max_len)
        .map(|n| stats.length_histogram.get(&n).copied().unwrap_or(0))
        .collect();
    let (statistic, p_value, cells) = pooled_chi_square(&observed, &probs)?;
    Ok(LengthLawReport {
        statistic,
        p_value,
        cells,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Critical value `c * sqrt((n + m) / (n m))`; pass `m = None` for the
/// one-sample test.
pub fn ks_critical(c: f64, n: usize, m: Option<usize>) -> f64 {
    let n = n as f64;
    match m {
        Some(m) => {
            let m = m as f64;
            c * ((n + m) / (n * m)).sqrt()
        }
        None => c / n.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::generating_function;
    use crate::seed::rng_for;
    use crate::word_sampler::BoltzmannOracle;
    use rand::Rng;

    fn pulse() -> Regex {
        let body = Regex::word(&["A", "B", "C"]);
        let choice = Regex::union(Regex::word(&["D", "E"]), Regex::atom("F"));
        Regex::concat(Regex::plus(Regex::concat(body, choice)), Regex::atom("A"))
    }

    #[test]
    fn empty_and_constant_streams() {
        let s = WordStats::new();
        assert_eq!(s.count, 0);
        let w = ShapeWord::new(&["A", "B"]);
        let s = WordStats::from_words(std::iter::repeat_n(&w, 10));
        assert_eq!(s.length_histogram, BTreeMap::from([(2, 10)]));
        assert_eq!(s.mean_length(), 2.0);
        assert_eq!(s.length_variance(), 0.0);
    }

    #[test]
    fn merge_matches_single_pass() {
        let ws: Vec<ShapeWord> = (0..20).map(|i| ShapeWord::new(&vec!["A"; i % 4])).collect();
        let all = WordStats::from_words(&ws);
        let mut a = WordStats::from_words(&ws[..7]);
        a.merge(&WordStats::from_words(&ws[7..]));
        assert_eq!(a, all);
    }

    #[test]
    fn pulse_law_and_uniformity() {
        let o = BoltzmannOracle::build(&pulse(), 0.78631).unwrap();
        let mut rng = rng_for(21, 0, 0);
        let mut s = WordStats::new();
        for _ in 0..20_000 {
            s.add(&o.sample_word(&mut rng).unwrap());
        }
        assert!((s.mean_length() - 15.0).abs() < 0.7, "{}", s.mean_length());
        let g = generating_function(&pulse()).unwrap();
        assert!(length_law_test(&s, &g, 0.78631).unwrap().p_value > 0.001);
        let r = same_length_test(&s, &pulse(), 10).unwrap();
        assert_eq!(r.words.len(), 2);
        assert!(r.p_value > 0.001);
        assert!(matches!(same_length_test(&s, &pulse(), 5), Err(DiagError::Skipped(1))));
    }

    #[test]
    fn planted_bias_detected() {
        let a = ShapeWord::new(&["A", "B", "C", "D", "E", "A", "B", "C", "F", "A"]);
        let b = ShapeWord::new(&["A", "B", "C", "F", "A", "B", "C", "D", "E", "A"]);
        let mut s = WordStats::new();
        for i in 0..1000 {
            s.add(if i % 3 == 0 { &b } else { &a });
        }
        assert!(same_length_test(&s, &pulse(), 10).unwrap().p_value < 0.01);
    }

    #[test]
    fn chi_square_reference_values() {
        // 3.841 is the 95% quantile with one degree of freedom.
        assert!((chi_square_sf(3.841458820694124, 1) - 0.05).abs() < 1e-9);
        assert_eq!(chi_square_sf(1.0, 0), 1.0);
    }

    #[test]
    fn ks_statistics() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_one_sample(&xs, |x| x) - 0.005).abs() < 1e-12);
        let mut rng = rng_for(1, 0, 0);
        let u: Vec<f64> = (0..2000).map(|_| rng.gen()).collect();
        assert!(ks_one_sample(&u, |x| x) < ks_critical(KS_C_001, 2000, None));
    }
}
