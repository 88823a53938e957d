//! Position (Glushkov) automata of shape regexes.
//!
//! Used for matching shape words, for the ambiguity check that the
//! generating-function computation requires, and for rewriting an
//! ambiguous regex into an unambiguous one through a DFA.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::ast::Regex;

pub const DEFAULT_NODE_LIMIT: usize = 10_000;

/// Outcome of [`check_ambiguity`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum AmbiguityReport {
    Unambiguous,
    /// A shortest word with at least two parse derivations.
    Ambiguous { witness: Vec<String> },
}

impl AmbiguityReport {
    pub fn is_unambiguous(&self) -> bool {
        matches!(self, AmbiguityReport::Unambiguous)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DisambiguateError {
    #[error("unambiguous rewrite exceeds {limit} regex nodes; rewrite the expression by hand")]
    TooLarge { limit: usize },
}

/// Position automaton. State 0 is initial; state `i + 1` is position `i`.
#[derive(Debug, Clone)]
pub struct PositionAutomaton {
    letters: Vec<String>,
    /// Letter index of each position.
    labels: Vec<usize>,
    /// Successor positions of each state.
    next: Vec<Vec<usize>>,
    finals: Vec<bool>,
}

struct Glushkov {
    letters: Vec<String>,
    labels: Vec<usize>,
    follow: Vec<BTreeSet<usize>>,
}

impl Glushkov {
    /// Returns (nullable, first, last) of `r`, adding its positions.
    fn visit(&mut self, r: &Regex) -> (bool, BTreeSet<usize>, BTreeSet<usize>) {
        match r {
            Regex::Epsilon => (true, BTreeSet::new(), BTreeSet::new()),
            Regex::Atom(a) => {
                let letter = match self.letters.iter().position(|l| l == a) {
                    Some(i) => i,
                    None => {
                        self.letters.push(a.clone());
                        self.letters.len() - 1
                    }
                };
                let pos = self.labels.len();
                self.labels.push(letter);
                self.follow.push(BTreeSet::new());
                (false, BTreeSet::from([pos]), BTreeSet::from([pos]))
            }
            Regex::Union(l, r) => {
                let (n1, f1, l1) = self.visit(l);
                let (n2, f2, l2) = self.visit(r);
                (n1 || n2, &f1 | &f2, &l1 | &l2)
            }
            Regex::Concat(l, r) => {
                let (n1, f1, l1) = self.visit(l);
                let (n2, f2, l2) = self.visit(r);
                for &p in &l1 {
                    self.follow[p].extend(f2.iter().copied());
                }
                let first = if n1 { &f1 | &f2 } else { f1 };
                let last = if n2 { &l1 | &l2 } else { l2 };
                (n1 && n2, first, last)
            }
            Regex::Star(x) => {
                let (_, f, l) = self.visit(x);
                for &p in &l {
                    self.follow[p].extend(f.iter().copied());
                }
                (true, f, l)
            }
        }
    }
}

impl PositionAutomaton {
    pub fn new(r: &Regex) -> Self {
        let mut g = Glushkov {
            letters: Vec::new(),
            labels: Vec::new(),
            follow: Vec::new(),
        };
        let (nullable, first, last) = g.visit(r);
        let n = g.labels.len();
        let mut next = Vec::with_capacity(n + 1);
        next.push(first.into_iter().collect());
        next.extend(g.follow.into_iter().map(|f| f.into_iter().collect()));
        let mut finals = vec![false; n + 1];
        finals[0] = nullable;
        for p in last {
            finals[p + 1] = true;
        }
        PositionAutomaton {
            letters: g.letters,
            labels: g.labels,
            next,
            finals,
        }
    }

    pub fn positions(&self) -> usize {
        self.labels.len()
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }

    fn letter_index(&self, name: &str) -> Option<usize> {
        self.letters.iter().position(|l| l == name)
    }

    /// States reachable from `states` by reading `letter`.
    fn step(&self, states: &BTreeSet<usize>, letter: usize) -> BTreeSet<usize> {
        states
            .iter()
            .flat_map(|&s| self.next[s].iter())
            .filter(|&&p| self.labels[p] == letter)
            .map(|&p| p + 1)
            .collect()
    }

    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let mut states = BTreeSet::from([0usize]);
        for a in word {
            let Some(letter) = self.letter_index(a.as_ref()) else {
                return false;
            };
            states = self.step(&states, letter);
            if states.is_empty() {
                return false;
            }
        }
        states.iter().any(|&s| self.finals[s])
    }

    /// Distinct words of exactly `len` atoms, in lexicographic letter order.
    /// Stops after `limit` words.
    pub fn words_of_length(&self, len: usize, limit: usize) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        self.enumerate(&BTreeSet::from([0usize]), len, limit, &mut prefix, &mut out);
        out
    }

    fn enumerate(
        &self,
        states: &BTreeSet<usize>,
        remaining: usize,
        limit: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<String>>,
    ) {
        if out.len() >= limit {
            return;
        }
        if remaining == 0 {
            if states.iter().any(|&s| self.finals[s]) {
                out.push(prefix.iter().map(|&l| self.letters[l].clone()).collect());
            }
            return;
        }
        let mut order: Vec<usize> = (0..self.letters.len()).collect();
        order.sort_by(|a, b| self.letters[*a].cmp(&self.letters[*b]));
        for letter in order {
            let succ = self.step(states, letter);
            if succ.is_empty() {
                continue;
            }
            prefix.push(letter);
            self.enumerate(&succ, remaining - 1, limit, prefix, out);
            prefix.pop();
        }
    }

    /// Shortest word with two distinct accepting paths, by breadth-first
    /// search over the squared automaton.
    pub fn ambiguous_path_witness(&self) -> Option<Vec<String>> {
        let n = self.next.len();
        let encode = |a: usize, b: usize, d: bool| (a * n + b) * 2 + d as usize;
        let mut parent: HashMap<usize, (usize, usize)> = HashMap::new();
        let start = encode(0, 0, false);
        let mut queue = VecDeque::from([start]);
        parent.insert(start, (usize::MAX, usize::MAX));
        // Successors of each state grouped by letter.
        let grouped: Vec<BTreeMap<usize, Vec<usize>>> = self
            .next
            .iter()
            .map(|succ| {
                let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for &p in succ {
                    m.entry(self.labels[p]).or_default().push(p + 1);
                }
                m
            })
            .collect();
        while let Some(code) = queue.pop_front() {
            let diverged = code % 2 == 1;
            let (a, b) = ((code / 2) / n, (code / 2) % n);
            if diverged && self.finals[a] && self.finals[b] {
                let mut word = Vec::new();
                let mut cur = code;
                while cur != start {
                    let (prev, letter) = parent[&cur];
                    word.push(self.letters[letter].clone());
                    cur = prev;
                }
                word.reverse();
                return Some(word);
            }
            for (letter, xs) in &grouped[a] {
                let Some(ys) = grouped[b].get(letter) else { continue };
                for &x in xs {
                    for &y in ys {
                        let next = encode(x, y, diverged || x != y);
                        if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(next) {
                            e.insert((code, *letter));
                            queue.push_back(next);
                        }
                    }
                }
            }
        }
        None
    }
}

fn shortest_word(r: &Regex) -> Vec<String> {
    match r {
        Regex::Epsilon | Regex::Star(_) => Vec::new(),
        Regex::Atom(a) => vec![a.clone()],
        Regex::Union(l, r) => {
            let (a, b) = (shortest_word(l), shortest_word(r));
            if b.len() < a.len() {
                b
            } else {
                a
            }
        }
        Regex::Concat(l, r) => {
            let mut w = shortest_word(l);
            w.extend(shortest_word(r));
            w
        }
    }
}

/// Shortest word of `r` whose derivation matches `target` (a subtree of `r`,
/// compared by address) with the empty word.
fn shortest_through_empty(r: &Regex, target: &Regex) -> Option<Vec<String>> {
    if std::ptr::eq(r, target) {
        return Some(Vec::new());
    }
    match r {
        Regex::Epsilon | Regex::Atom(_) => None,
        Regex::Union(l, rr) => {
            shortest_through_empty(l, target).or_else(|| shortest_through_empty(rr, target))
        }
        Regex::Concat(l, rr) => {
            if let Some(mut w) = shortest_through_empty(l, target) {
                w.extend(shortest_word(rr));
                Some(w)
            } else {
                let mut w = shortest_word(l);
                w.extend(shortest_through_empty(rr, target)?);
                Some(w)
            }
        }
        Regex::Star(x) => shortest_through_empty(x, target),
    }
}

/// Unions whose two branches both match the empty word.
fn nullable_unions<'a>(r: &'a Regex, out: &mut Vec<&'a Regex>) {
    match r {
        Regex::Epsilon | Regex::Atom(_) => {}
        Regex::Union(l, rr) => {
            if l.nullable() && rr.nullable() {
                out.push(r);
            }
            nullable_unions(l, out);
            nullable_unions(rr, out);
        }
        Regex::Concat(l, rr) => {
            nullable_unions(l, out);
            nullable_unions(rr, out);
        }
        Regex::Star(x) => nullable_unions(x, out),
    }
}

/// Decides whether every word of `r` has exactly one parse derivation.
///
/// Star arguments must not be nullable (the parser rejects those). Two
/// sources of ambiguity remain: two accepting position paths for one word,
/// and a union with two nullable branches deriving the empty factor twice.
pub fn check_ambiguity(r: &Regex) -> AmbiguityReport {
    let mut candidates: Vec<Vec<String>> = Vec::new();
    if let Some(w) = PositionAutomaton::new(r).ambiguous_path_witness() {
        candidates.push(w);
    }
    let mut unions = Vec::new();
    nullable_unions(r, &mut unions);
    candidates.extend(unions.into_iter().filter_map(|u| shortest_through_empty(r, u)));
    match candidates.into_iter().min_by_key(Vec::len) {
        Some(witness) => AmbiguityReport::Ambiguous { witness },
        None => AmbiguityReport::Unambiguous,
    }
}

fn union_opt(a: Option<Regex>, b: Option<Regex>) -> Option<Regex> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(Regex::union(a, b)),
    }
}

fn concat_opt(a: &Option<Regex>, b: &Option<Regex>) -> Option<Regex> {
    match (a, b) {
        (Some(Regex::Epsilon), Some(x)) | (Some(x), Some(Regex::Epsilon)) => Some(x.clone()),
        (Some(a), Some(b)) => Some(Regex::concat(a.clone(), b.clone())),
        _ => None,
    }
}

/// Language-equivalent unambiguous regex: position automaton, subset
/// construction, then state elimination on the DFA.
pub fn disambiguate(r: &Regex) -> Result<Regex, DisambiguateError> {
    disambiguate_with_limit(r, DEFAULT_NODE_LIMIT)
}

pub fn disambiguate_with_limit(r: &Regex, limit: usize) -> Result<Regex, DisambiguateError> {
    let nfa = PositionAutomaton::new(r);
    // Subset construction.
    let mut index: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    let mut subsets = vec![BTreeSet::from([0usize])];
    index.insert(subsets[0].clone(), 0);
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    let mut i = 0;
    while i < subsets.len() {
        for letter in 0..nfa.letters.len() {
            let succ = nfa.step(&subsets[i], letter);
            if succ.is_empty() {
                continue;
            }
            let j = match index.get(&succ) {
                Some(&j) => j,
                None => {
                    subsets.push(succ.clone());
                    edges.push(Vec::new());
                    index.insert(succ, subsets.len() - 1);
                    subsets.len() - 1
                }
            };
            edges[i].push((letter, j));
        }
        i += 1;
    }
    let k = subsets.len();
    // Generalised automaton: DFA states 0..k, source k, sink k + 1.
    let (source, sink) = (k, k + 1);
    let mut table: Vec<Vec<Option<Regex>>> = vec![vec![None; k + 2]; k + 2];
    for (from, out) in edges.iter().enumerate() {
        for &(letter, to) in out {
            let atom = Some(Regex::atom(nfa.letters[letter].clone()));
            table[from][to] = union_opt(table[from][to].take(), atom);
        }
    }
    table[source][0] = Some(Regex::Epsilon);
    for (s, set) in subsets.iter().enumerate() {
        if set.iter().any(|&q| nfa.finals[q]) {
            table[s][sink] = Some(Regex::Epsilon);
        }
    }
    let size = |x: &Option<Regex>| x.as_ref().map_or(0, Regex::node_count);
    let mut alive: BTreeSet<usize> = (0..k).collect();
    while !alive.is_empty() {
        // Eliminate the state with the fewest in/out connections first.
        let degree = |q: usize| {
            let ins = (0..k + 2).filter(|&p| p != q && table[p][q].is_some()).count();
            let outs = (0..k + 2).filter(|&p| p != q && table[q][p].is_some()).count();
            ins * outs
        };
        let q = *alive.iter().min_by_key(|&&q| degree(q)).expect("non-empty");
        alive.remove(&q);
        let loop_star = table[q][q].take().map(Regex::star);
        let ins: Vec<usize> = (0..k + 2).filter(|&p| table[p][q].is_some()).collect();
        let outs: Vec<usize> = (0..k + 2).filter(|&p| table[q][p].is_some()).collect();
        for &p in &ins {
            for &s in &outs {
                let mut via = table[p][q].clone();
                if loop_star.is_some() {
                    via = concat_opt(&via, &loop_star);
                }
                via = concat_opt(&via, &table[q][s]);
                let merged = union_opt(table[p][s].take(), via);
                if size(&merged) > limit {
                    return Err(DisambiguateError::TooLarge { limit });
                }
                table[p][s] = merged;
            }
        }
        for p in 0..k + 2 {
            table[p][q] = None;
            table[q][p] = None;
        }
    }
    // The source reaches the sink because the start state is live.
    Ok(table[source][sink].take().unwrap_or(Regex::Epsilon))
}
