//! Rendering of (word, valuation) pairs into sampled piecewise signals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{ShapeExpr, ShapeKind};
use crate::word_sampler::ShapeWord;

pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("sampling period must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("atom `{atom}` has non-positive duration {duration}")]
    NonPositiveDuration { atom: String, duration: f64 },
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("no value for parameter `{0}`")]
    MissingParameter(String),
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub dt: f64,
    /// Rewrite each segment's additive offset so it starts where the
    /// previous segment ended.
    pub project_continuity: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            dt: DEFAULT_DT,
            project_continuity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub variable: String,
    pub samples: Vec<(f64, f64)>,
    pub total_duration: f64,
    /// Start time of every segment.
    pub segment_boundaries: Vec<f64>,
    /// `start(next) - end(previous)` at each internal boundary.
    pub jumps: Vec<f64>,
}

impl Signal {
    pub fn max_abs_jump(&self) -> f64 {
        self.jumps.iter().fold(0.0, |m, j| m.max(j.abs()))
    }
}

struct Segment {
    atom: String,
    kind: ShapeKind,
    params: Vec<f64>,
    duration: f64,
}

impl Segment {
    fn value(&self, t: f64) -> f64 {
        self.kind.eval(&self.params, t)
    }

    /// Shifts the additive offset so that the segment starts at `start`.
    fn anchor(&mut self, start: f64) {
        let p = &mut self.params;
        match self.kind {
            ShapeKind::Linear => p[1] = start,
            ShapeKind::Exponential => p[0] = start - p[1],
            ShapeKind::Sinusoid => p[3] = start - p[0] * p[2].sin(),
        }
    }
}

fn segments(e: &ShapeExpr, word: &ShapeWord, v: &BTreeMap<String, f64>) -> Result<Vec<Segment>, RenderError> {
    word.atoms
        .iter()
        .map(|atom| {
            let decl = e.decl(atom).ok_or_else(|| RenderError::UnknownAtom(atom.clone()))?;
            let params = decl
                .params
                .iter()
                .map(|p| v.get(p).copied().ok_or_else(|| RenderError::MissingParameter(p.clone())))
                .collect::<Result<Vec<f64>, _>>()?;
            let duration = *params.last().expect("duration parameter");
            if !(duration > 0.0 && duration.is_finite()) {
                return Err(RenderError::NonPositiveDuration {
                    atom: atom.clone(),
                    duration,
                });
            }
            Ok(Segment {
                atom: atom.clone(),
                kind: decl.kind,
                params,
                duration,
            })
        })
        .collect()
}

/// Samples the concatenation of the word's atoms on `[0, total)`; each
/// segment is evaluated in local time `[0, d)` and boundaries are always
/// sampled.
pub fn render(
    e: &ShapeExpr,
    word: &ShapeWord,
    v: &BTreeMap<String, f64>,
    opts: &RenderOptions,
) -> Result<Signal, RenderError> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(RenderError::InvalidDt(opts.dt));
    }
    let mut segs = segments(e, word, v)?;
    let mut starts = Vec::with_capacity(segs.len() + 1);
    let mut acc = BigRational::zero();
    for s in &segs {
        starts.push(acc.to_f64().expect("finite"));
        acc += BigRational::from_float(s.duration).expect("finite");
    }
    let total = acc.to_f64().expect("finite");
    starts.push(total);

    let mut jumps = Vec::new();
    for i in 1..segs.len() {
        let end = segs[i - 1].value(segs[i - 1].duration);
        if opts.project_continuity {
            segs[i].anchor(end);
        }
        jumps.push(segs[i].value(0.0) - end);
    }

    let mut samples = Vec::new();
    for (i, s) in segs.iter().enumerate() {
        let (start, next) = (starts[i], starts[i + 1]);
        let mut k = 0u64;
        loop {
            let local = k as f64 * opts.dt;
            let t = start + local;
            if local >= s.duration || t >= next {
                break;
            }
            if samples.last().is_none_or(|&(p, _)| t > p) {
                samples.push((t, s.value(local)));
            }
            k += 1;
        }
    }
    starts.pop();
    Ok(Signal {
        variable: "x".into(),
        samples,
        total_duration: total,
        segment_boundaries: starts,
        jumps,
    })
}

/// Names of the atoms rendered by [`render`], for diagnostics.
pub fn segment_atoms(e: &ShapeExpr, word: &ShapeWord, v: &BTreeMap<String, f64>) -> Result<Vec<String>, RenderError> {
    Ok(segments(e, word, v)?.into_iter().map(|s| s.atom).collect())
}

fn format_time(t: f64) -> String {
    let rounded: f64 = format!("{t:.8e}").parse().expect("formatted float");
    format!("{rounded}")
}

/// Header `t,<variable>` then one row per sample; times carry 9 significant
/// digits and values round-trip exactly.
pub fn to_csv(s: &Signal) -> String {
    let mut out = format!("t,{}\n", s.variable);
    for (t, x) in &s.samples {
        let _ = writeln!(out, "{},{}", format_time(*t), x);
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<(f64, f64)>, RenderError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("t,") => {}
        _ => {
            return Err(RenderError::Csv {
                line: 1,
                message: "missing `t,<variable>` header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let err = |message: &str| RenderError::Csv {
                line: i + 1,
                message: message.into(),
            };
            let (t, x) = l.split_once(',').ok_or_else(|| err("expected two fields"))?;
            Ok((
                t.parse().map_err(|_| err("bad time"))?,
                x.parse().map_err(|_| err("bad value"))?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalJson {
    pub word: ShapeWord,
    pub valuation: BTreeMap<String, f64>,
    pub samples: Vec<(f64, f64)>,
}

pub fn to_json(word: &ShapeWord, valuation: &BTreeMap<String, f64>, s: &Signal) -> String {
    serde_json::to_string(&SignalJson {
        word: word.clone(),
        valuation: valuation.clone(),
        samples: s.samples.clone(),
    })
    .expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_spec;

    fn spec() -> ShapeExpr {
        parse_spec(
            "shape A = lin(a1, b1, d1);\nshape B = lin(a2, b2, d2);\nexpr = A . B;\n\
             constraint = a1 in (-10, 10) && b1 in (-10, 10) && d1 in (0, 5)\n\
             && a2 in (-10, 10) && b2 in (-10, 10) && d2 in (0, 5);",
        )
        .unwrap()
    }

    fn val(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn ab() -> BTreeMap<String, f64> {
        val(&[("a1", 0.0), ("b1", 5.0), ("d1", 2.0), ("a2", -1.0), ("b2", 5.0), ("d2", 1.0)])
    }

    #[test]
    fn single_atom() {
        let s = render(&spec(), &ShapeWord::new(&["A"]), &ab(), &RenderOptions { dt: 1.0, ..Default::default() }).unwrap();
        assert_eq!(s.samples, [(0.0, 5.0), (1.0, 5.0)]);
        assert_eq!(s.total_duration, 2.0);
        assert!(s.jumps.is_empty());
    }

    #[test]
    fn concatenation_resets_local_time() {
        let s = render(&spec(), &ShapeWord::new(&["A", "B"]), &ab(), &RenderOptions { dt: 0.5, ..Default::default() }).unwrap();
        let at = s.samples.iter().find(|(t, _)| *t == 2.5).unwrap();
        assert_eq!(at.1, 4.5);
        assert_eq!(s.segment_boundaries, [0.0, 2.0]);
        assert_eq!(s.total_duration, 3.0);
        assert_eq!(s.jumps, [0.0]);
    }

    #[test]
    fn off_grid_boundaries_are_sampled() {
        let mut v = ab();
        v.insert("d1".into(), 0.25);
        let s = render(&spec(), &ShapeWord::new(&["A", "B"]), &v, &RenderOptions { dt: 0.1, ..Default::default() }).unwrap();
        assert!(s.samples.iter().any(|(t, _)| *t == 0.25));
        assert!(s.samples.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn projection_closes_jumps() {
        let mut v = ab();
        v.insert("b2".into(), 7.0);
        let w = ShapeWord::new(&["A", "B", "A"]);
        let loose = render(&spec(), &w, &v, &RenderOptions::default()).unwrap();
        assert_eq!(loose.jumps, [2.0, -1.0]);
        let tight = render(&spec(), &w, &v, &RenderOptions { project_continuity: true, ..Default::default() }).unwrap();
        assert_eq!(tight.max_abs_jump(), 0.0);
    }

    #[test]
    fn bad_duration_and_dt() {
        let mut v = ab();
        v.insert("d1".into(), 0.0);
        assert!(matches!(
            render(&spec(), &ShapeWord::new(&["A"]), &v, &RenderOptions::default()),
            Err(RenderError::NonPositiveDuration { .. })
        ));
        assert!(render(&spec(), &ShapeWord::new(&["A"]), &ab(), &RenderOptions { dt: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn csv_forms() {
        let empty = render(&spec(), &ShapeWord::new::<&str>(&[]), &ab(), &RenderOptions::default()).unwrap();
        assert_eq!(to_csv(&empty), "t,x\n");
        let two = render(&spec(), &ShapeWord::new(&["A"]), &ab(), &RenderOptions { dt: 1.0, ..Default::default() }).unwrap();
        assert_eq!(to_csv(&two).lines().count(), 3);
        let s = render(&spec(), &ShapeWord::new(&["A", "B"]), &ab(), &RenderOptions::default()).unwrap();
        let back = parse_csv(&to_csv(&s)).unwrap();
        assert_eq!(back.len(), s.samples.len());
        for ((t0, x0), (t1, x1)) in s.samples.iter().zip(&back) {
            assert!((t0 - t1).abs() <= 1e-9 * t0.abs().max(1.0));
            assert_eq!(x0, x1);
        }
        assert!(parse_csv("x,y\n").is_err());
    }

    #[test]
    fn json_form() {
        let w = ShapeWord::new(&["A"]);
        let s = render(&spec(), &w, &ab(), &RenderOptions { dt: 1.0, ..Default::default() }).unwrap();
        let j: SignalJson = serde_json::from_str(&to_json(&w, &ab(), &s)).unwrap();
        assert_eq!(j.samples, s.samples);
        assert_eq!(j.word, w);
    }
}
