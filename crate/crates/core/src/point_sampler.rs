//! Uniform sampling of valuations: rejection baseline and hit-and-run chains.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param_space::ParamSpace;
use crate::seed::{rng_for, CHAIN_STREAM};

pub const DEFAULT_MAX_LINE_REJECTS: u64 = 100_000;
pub const DEFAULT_REJECTION_BUDGET: u64 = 10_000_000;
pub const DEFAULT_BURN_IN: usize = 1000;
const NUDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Rejection,
    Hr,
    HrShrink,
    Cdhr,
    CdhrShrink,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Rejection,
        Variant::Hr,
        Variant::HrShrink,
        Variant::Cdhr,
        Variant::CdhrShrink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rejection => "rejection",
            Variant::Hr => "hr",
            Variant::HrShrink => "hr_shrink",
            Variant::Cdhr => "cdhr",
            Variant::CdhrShrink => "cdhr_shrink",
        }
    }

    pub fn shrinking(self) -> bool {
        matches!(self, Variant::HrShrink | Variant::CdhrShrink)
    }

    pub fn coordinate(self) -> bool {
        matches!(self, Variant::Cdhr | Variant::CdhrShrink)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected rejection, hr, hr_shrink, cdhr or cdhr_shrink)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub variant: Variant,
    pub burn_in: usize,
    /// Keep every `thin`-th state.
    pub thin: usize,
    pub max_line_rejects: u64,
    pub rejection_budget: u64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            variant: Variant::HrShrink,
            burn_in: DEFAULT_BURN_IN,
            thin: 1,
            max_line_rejects: DEFAULT_MAX_LINE_REJECTS,
            rejection_budget: DEFAULT_REJECTION_BUDGET,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ChainStats {
    /// Candidate points tested for membership.
    pub proposals: u64,
    /// Candidates that became the next state (or the next rejection sample).
    pub accepted: u64,
    pub line_rejections: u64,
    #[serde(serialize_with = "as_secs")]
    pub wall_time: Duration,
}

fn as_secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl ChainStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposals as f64
    }

    pub fn merge(&mut self, other: &ChainStats) {
        self.proposals += other.proposals;
        self.accepted += other.accepted;
        self.line_rejections += other.line_rejections;
        self.wall_time += other.wall_time;
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("acceptance too low: no sample after {trials} rejection trials")]
    RejectionBudget { trials: u64, stats: ChainStats },
    #[error("{limit} consecutive line rejections; the set is too thin or empty")]
    LineRejects { limit: u64, stats: ChainStats },
    #[error("point lies outside the bounding box")]
    OutsideBox,
    #[error("initial point is not in the set")]
    NotInside,
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
}

/// Current point of a chain together with its random stream and counters.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub current: Vec<f64>,
    pub step_index: u64,
    pub rng: ChaCha8Rng,
    pub stats: ChainStats,
}

impl ChainState {
    /// Starts a chain at `x0`, nudging coordinates that sit on the box
    /// boundary strictly inside.
    pub fn new(space: &ParamSpace, x0: &[f64], rng: ChaCha8Rng) -> Result<Self, ChainError> {
        if x0.len() != space.dim() {
            return Err(ChainError::DimensionMismatch {
                expected: space.dim(),
                got: x0.len(),
            });
        }
        let mut x = x0.to_vec();
        for (i, xi) in x.iter_mut().enumerate() {
            let (lo, hi) = (space.lower()[i], space.upper()[i]);
            if *xi <= lo {
                *xi = lo + NUDGE * (hi - lo);
            } else if *xi >= hi {
                *xi = hi - NUDGE * (hi - lo);
            }
        }
        if !space.member(&x) {
            return Err(ChainError::NotInside);
        }
        Ok(ChainState {
            current: x,
            step_index: 0,
            rng,
            stats: ChainStats::default(),
        })
    }
}

fn uniform_in_box<R: Rng + ?Sized>(space: &ParamSpace, rng: &mut R) -> Vec<f64> {
    space
        .lower()
        .iter()
        .zip(space.upper())
        .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
        .collect()
}

/// Uniform point of the box, retried until it lies in the set.
pub fn rejection_sample<R: Rng + ?Sized>(
    space: &ParamSpace,
    rng: &mut R,
    budget: u64,
    stats: &mut ChainStats,
) -> Result<Vec<f64>, ChainError> {
    for _ in 0..budget {
        let x = uniform_in_box(space, rng);
        stats.proposals += 1;
        if space.member(&x) {
            stats.accepted += 1;
            return Ok(x);
        }
    }
    Err(ChainError::RejectionBudget {
        trials: budget,
        stats: stats.clone(),
    })
}

/// Slab intersection of the line `x + r theta` with the box `[lo, hi]`.
pub fn line_box_intersection(lo: &[f64], hi: &[f64], x: &[f64], theta: &[f64]) -> Result<(f64, f64), ChainError> {
    let (mut r_min, mut r_max) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..x.len() {
        if !(lo[i] < x[i] && x[i] < hi[i]) {
            return Err(ChainError::OutsideBox);
        }
        if theta[i] == 0.0 {
            continue;
        }
        let t1 = (lo[i] - x[i]) / theta[i];
        let t2 = (hi[i] - x[i]) / theta[i];
        r_min = r_min.max(t1.min(t2));
        r_max = r_max.min(t1.max(t2));
    }
    Ok((r_min, r_max))
}

fn direction<R: Rng + ?Sized>(dim: usize, coordinate: bool, rng: &mut R) -> Vec<f64> {
    if coordinate {
        let mut theta = vec![0.0; dim];
        theta[rng.gen_range(0..dim)] = 1.0;
        return theta;
    }
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

fn step_impl(
    space: &ParamSpace,
    state: &mut ChainState,
    cfg: &SamplerConfig,
    mut trace: Option<&mut Vec<(f64, f64)>>,
) -> Result<(), ChainError> {
    let dim = space.dim();
    if dim == 0 {
        state.step_index += 1;
        return Ok(());
    }
    let theta = direction(dim, cfg.variant.coordinate(), &mut state.rng);
    let (mut r_min, mut r_max) = line_box_intersection(space.lower(), space.upper(), &state.current, &theta)?;
    let mut candidate = vec![0.0; dim];
    for _ in 0..cfg.max_line_rejects {
        if let Some(t) = trace.as_deref_mut() {
            t.push((r_min, r_max));
        }
        let r = r_min + (r_max - r_min) * state.rng.gen::<f64>();
        for i in 0..dim {
            candidate[i] = state.current[i] + r * theta[i];
        }
        state.stats.proposals += 1;
        if space.member(&candidate) {
            state.stats.accepted += 1;
            state.current.copy_from_slice(&candidate);
            state.step_index += 1;
            return Ok(());
        }
        state.stats.line_rejections += 1;
        if cfg.variant.shrinking() {
            if r < 0.0 {
                r_min = r;
            } else {
                r_max = r;
            }
        }
    }
    Err(ChainError::LineRejects {
        limit: cfg.max_line_rejects,
        stats: state.stats.clone(),
    })
}

/// One hit-and-run move: random direction, chord through the box, then
/// 1-D rejection (optionally shrinking) along the chord.
pub fn hr_step(space: &ParamSpace, state: &mut ChainState, cfg: &SamplerConfig) -> Result<(), ChainError> {
    step_impl(space, state, cfg, None)
}

/// Like [`hr_step`], also returning the chord interval before each proposal.
pub fn hr_step_traced(
    space: &ParamSpace,
    state: &mut ChainState,
    cfg: &SamplerConfig,
) -> Result<Vec<(f64, f64)>, ChainError> {
    let mut trace = Vec::new();
    step_impl(space, state, cfg, Some(&mut trace))?;
    Ok(trace)
}

fn check_config(cfg: &SamplerConfig, count: usize) -> Result<(), ChainError> {
    if cfg.thin == 0 {
        return Err(ChainError::InvalidConfig("thin must be at least 1".into()));
    }
    if count == 0 {
        return Err(ChainError::InvalidConfig("count must be at least 1".into()));
    }
    if cfg.max_line_rejects == 0 || cfg.rejection_budget == 0 {
        return Err(ChainError::InvalidConfig("rejection limits must be positive".into()));
    }
    Ok(())
}

/// Continues an existing chain: discards nothing, emits `count` states taken
/// every `thin` steps.
pub fn continue_chain(
    space: &ParamSpace,
    state: &mut ChainState,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Vec<Vec<f64>>, ChainError> {
    check_config(cfg, count)?;
    let started = Instant::now();
    let mut out = Vec::with_capacity(count);
    let result = (|| {
        for _ in 0..count {
            if cfg.variant == Variant::Rejection {
                state.current = rejection_sample(space, &mut state.rng, cfg.rejection_budget, &mut state.stats)?;
                state.step_index += 1;
            } else {
                for _ in 0..cfg.thin {
                    hr_step(space, state, cfg)?;
                }
            }
            out.push(state.current.clone());
        }
        Ok(())
    })();
    state.stats.wall_time += started.elapsed();
    result.map(|()| out)
}

/// Runs `burn_in` discarded steps from `x0`, then emits `count` samples.
/// The rejection variant ignores `x0`, burn-in and thinning.
pub fn run_chain(
    space: &ParamSpace,
    cfg: &SamplerConfig,
    x0: &[f64],
    count: usize,
) -> Result<(Vec<Vec<f64>>, ChainStats), ChainError> {
    check_config(cfg, count)?;
    let rng = rng_for(cfg.seed, CHAIN_STREAM, 0);
    let mut state = if cfg.variant == Variant::Rejection {
        ChainState {
            current: Vec::new(),
            step_index: 0,
            rng,
            stats: ChainStats::default(),
        }
    } else {
        let mut s = ChainState::new(space, x0, rng)?;
        let started = Instant::now();
        for _ in 0..cfg.burn_in {
            hr_step(space, &mut s, cfg)?;
        }
        s.stats.wall_time += started.elapsed();
        s
    };
    let out = continue_chain(space, &mut state, cfg, count)?;
    Ok((out, state.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{ArithExpr, CmpOp, Constraint};

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    fn unit_square() -> ParamSpace {
        let gamma = Constraint::and(Constraint::within("x", -1.0, 1.0), Constraint::within("y", -1.0, 1.0));
        ParamSpace::compile(&gamma, &names(&["x", "y"]), 1e-3).unwrap()
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
        ParamSpace::compile(&gamma, &names(&["x", "y"]), 1e-3).unwrap()
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
    }

    #[test]
    fn slab_examples() {
        let (lo, hi) = ([-1.0, -1.0], [1.0, 1.0]);
        assert_eq!(line_box_intersection(&lo, &hi, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), (-1.0, 1.0));
        assert_eq!(line_box_intersection(&lo, &hi, &[0.5, 0.0], &[0.0, 1.0]).unwrap(), (-1.0, 1.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = line_box_intersection(&[0.0, 0.0], &[2.0, 4.0], &[1.0, 1.0], &[s, s]).unwrap();
        assert!((a + 2f64.sqrt()).abs() < 1e-12 && (b - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            line_box_intersection(&lo, &hi, &[1.0, 0.0], &[1.0, 0.0]),
            Err(ChainError::OutsideBox)
        );
    }

    #[test]
    fn ring_rejection_rate() {
        let s = ring2();
        let mut rng = rng_for(11, 0, 0);
        let mut stats = ChainStats::default();
        for _ in 0..20_000 {
            rejection_sample(&s, &mut rng, 1000, &mut stats).unwrap();
        }
        let expected = std::f64::consts::PI * 0.19 / 4.0;
        assert!((stats.acceptance_rate() - expected).abs() < 0.01, "{}", stats.acceptance_rate());
    }

    #[test]
    fn every_variant_stays_in_ring() {
        let s = ring2();
        for v in Variant::ALL {
            let cfg = SamplerConfig {
                variant: v,
                burn_in: 10,
                seed: 5,
                ..SamplerConfig::default()
            };
            let (xs, stats) = run_chain(&s, &cfg, &[0.95, 0.0], 2000).unwrap();
            assert_eq!(xs.len(), 2000);
            assert!(xs.iter().all(|x| s.member(x)), "{v}");
            assert!(stats.acceptance_rate() > 0.0);
        }
    }

    #[test]
    fn shrinking_interval_decreases() {
        let s = ring2();
        let cfg = SamplerConfig::default();
        let mut st = ChainState::new(&s, &[0.0, 0.95], rng_for(2, 0, 0)).unwrap();
        let mut saw_rejection = false;
        for _ in 0..500 {
            let trace = hr_step_traced(&s, &mut st, &cfg).unwrap();
            saw_rejection |= trace.len() > 1;
            for w in trace.windows(2) {
                assert!(w[1].1 - w[1].0 < w[0].1 - w[0].0);
            }
        }
        assert!(saw_rejection);
    }

    #[test]
    fn cdhr_moves_one_coordinate() {
        let s = unit_square();
        let cfg = SamplerConfig {
            variant: Variant::Cdhr,
            ..SamplerConfig::default()
        };
        let mut st = ChainState::new(&s, &[0.0, 0.0], rng_for(4, 0, 0)).unwrap();
        for _ in 0..100 {
            let before = st.current.clone();
            hr_step(&s, &mut st, &cfg).unwrap();
            let moved = before.iter().zip(&st.current).filter(|(a, b)| a != b).count();
            assert_eq!(moved, 1);
        }
    }

    #[test]
    fn boundary_start_is_nudged() {
        let s = unit_square();
        let st = ChainState::new(&s, &[-1.0, 1.0], rng_for(0, 0, 0)).unwrap();
        assert!(st.current[0] > -1.0 && st.current[1] < 1.0);
        assert!(matches!(ChainState::new(&ring2(), &[0.0, 0.0], rng_for(0, 0, 0)), Err(ChainError::NotInside)));
    }

    #[test]
    fn deterministic() {
        let s = ring2();
        let cfg = SamplerConfig {
            seed: 99,
            burn_in: 5,
            ..SamplerConfig::default()
        };
        let a = run_chain(&s, &cfg, &[0.95, 0.0], 100).unwrap().0;
        let b = run_chain(&s, &cfg, &[0.95, 0.0], 100).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn line_reject_limit_reports_stats() {
        let s = ring2();
        let cfg = SamplerConfig {
            variant: Variant::Hr,
            max_line_rejects: 1,
            burn_in: 0,
            ..SamplerConfig::default()
        };
        let err = run_chain(&s, &cfg, &[0.95, 0.0], 10_000).unwrap_err();
        assert!(matches!(err, ChainError::LineRejects { limit: 1, .. }));
    }

    #[test]
    fn invalid_config() {
        let cfg = SamplerConfig {
            thin: 0,
            ..SamplerConfig::default()
        };
        assert!(matches!(run_chain(&unit_square(), &cfg, &[0.0, 0.0], 1), Err(ChainError::InvalidConfig(_))));
    }
}
