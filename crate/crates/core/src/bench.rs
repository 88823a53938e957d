//! Hyper-ring benchmark: acceptance rate and wall time of the samplers on
//! `c2^2 < |x|^2 < c1^2` inside the box `(-c, c)^n`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::ast::{ArithExpr, CmpOp, Constraint};
use crate::diagnostics::{chi_square_test, ks_one_sample, ks_two_sample};
use crate::initializer::{initialize, InitMethod, PsoConfig};
use crate::param_space::{ParamSpace, DEFAULT_EPSILON};
use crate::point_sampler::{run_chain, ChainError, ChainStats, SamplerConfig, Variant};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid ring: {0}")]
    InvalidRing(String),
    #[error("insufficient samples: {got} given, {needed} needed")]
    Insufficient { got: usize, needed: usize },
    #[error("invalid benchmark configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
}

impl RingSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let ok = self.n >= 1
            && [self.c, self.c1, self.c2].iter().all(|v| v.is_finite())
            && self.c >= self.c1
            && self.c1 > self.c2
            && self.c2 >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(BenchError::InvalidRing(format!(
                "need n >= 1 and c >= c1 > c2 >= 0, got {self:?}"
            )))
        }
    }

    /// Ring volume over box volume.
    pub fn analytic_acceptance(&self) -> f64 {
        let n = self.n as f64;
        let log_unit = n / 2.0 * PI.ln() - ln_gamma(n / 2.0 + 1.0);
        let outer = (log_unit + n * self.c1.ln() - n * (2.0 * self.c).ln()).exp();
        let inner = if self.c2 > 0.0 {
            (log_unit + n * self.c2.ln() - n * (2.0 * self.c).ln()).exp()
        } else {
            0.0
        };
        outer - inner
    }

    pub fn param_names(&self) -> Vec<String> {
        (1..=self.n).map(|i| format!("x{i}")).collect()
    }
}

/// Volume of the `n`-ball of radius `r`.
pub fn n_ball_volume(n: usize, r: f64) -> f64 {
    let n = n as f64;
    (n / 2.0 * PI.ln() - ln_gamma(n / 2.0 + 1.0)).exp() * r.powf(n)
}

pub fn make_ring_space(r: &RingSpec) -> Result<ParamSpace, BenchError> {
    r.validate()?;
    let names = r.param_names();
    let mut gamma = Constraint::True;
    let mut sum: Option<ArithExpr> = None;
    for p in &names {
        gamma = Constraint::and(gamma, Constraint::within(p.as_str(), -r.c, r.c));
        let sq = ArithExpr::pow(ArithExpr::param(p.as_str()), 2);
        sum = Some(match sum {
            None => sq,
            Some(s) => ArithExpr::add(s, sq),
        });
    }
    let sum = sum.expect("n >= 1");
    gamma = Constraint::and(gamma, Constraint::cmp(sum.clone(), CmpOp::Lt, ArithExpr::Num(r.c1 * r.c1)));
    gamma = Constraint::and(gamma, Constraint::cmp(sum, CmpOp::Gt, ArithExpr::Num(r.c2 * r.c2)));
    ParamSpace::compile(&gamma, &names, DEFAULT_EPSILON).map_err(|e| BenchError::InvalidRing(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub samples: usize,
    pub repeats: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub pso: PsoConfig,
    pub init: InitMethod,
    /// Rejection sampling is skipped above this dimension.
    pub rejection_max_dim: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            samples: 100,
            repeats: 5,
            seed: 0,
            sampler: SamplerConfig::default(),
            pso: PsoConfig::default(),
            init: InitMethod::Pso,
            rejection_max_dim: Some(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub samples: usize,
    pub wall_time: f64,
    pub acceptance_rate: f64,
    pub proposals: u64,
    pub accepted: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub ring: RingSpec,
    pub variant: Variant,
    pub samples: usize,
    pub skipped: bool,
    pub mean_acceptance: f64,
    pub sd_acceptance: f64,
    pub mean_wall_time: f64,
    pub sd_wall_time: f64,
    pub analytic_rejection_acceptance: f64,
    pub repeats: Vec<RepeatResult>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn one_repeat(space: &ParamSpace, variant: Variant, opts: &BenchOptions, seed: u64) -> (Vec<Vec<f64>>, ChainStats, f64, Option<String>) {
    let started = Instant::now();
    let cfg = SamplerConfig {
        variant,
        seed,
        ..opts.sampler.clone()
    };
    let x0 = if variant == Variant::Rejection {
        Ok(Vec::new())
    } else {
        initialize(space, opts.init, &PsoConfig { seed, ..opts.pso.clone() }).map_err(|e| e.to_string())
    };
    let outcome = x0.and_then(|x0| run_chain(space, &cfg, &x0, opts.samples).map_err(|e| e.to_string()));
    let wall = started.elapsed().as_secs_f64();
    match outcome {
        Ok((xs, stats)) => (xs, stats, wall, None),
        Err(e) => (Vec::new(), ChainStats::default(), wall, Some(e)),
    }
}

/// Runs every variant `repeats` times on one ring. Failures are recorded
/// per repeat.
pub fn run_bench(r: &RingSpec, variants: &[Variant], opts: &BenchOptions) -> Result<Vec<BenchResult>, BenchError> {
    if opts.samples == 0 || opts.repeats == 0 {
        return Err(BenchError::InvalidConfig("samples and repeats must be positive".into()));
    }
    let space = make_ring_space(r)?;
    let mut out = Vec::new();
    for (vi, &variant) in variants.iter().enumerate() {
        let skipped = variant == Variant::Rejection && opts.rejection_max_dim.is_some_and(|m| r.n > m);
        let mut repeats = Vec::new();
        if !skipped {
            for k in 0..opts.repeats {
                let seed = derive_seed(opts.seed, vi as u64, k as u64);
                let (xs, stats, wall, error) = one_repeat(&space, variant, opts, seed);
                repeats.push(RepeatResult {
                    repeat: k,
                    samples: xs.len(),
                    wall_time: wall,
                    acceptance_rate: stats.acceptance_rate(),
                    proposals: stats.proposals,
                    accepted: stats.accepted,
                    error,
                });
            }
        }
        let ok: Vec<&RepeatResult> = repeats.iter().filter(|x| x.error.is_none()).collect();
        let (mean_acceptance, sd_acceptance) = mean_sd(&ok.iter().map(|x| x.acceptance_rate).collect::<Vec<_>>());
        let (mean_wall_time, sd_wall_time) = mean_sd(&ok.iter().map(|x| x.wall_time).collect::<Vec<_>>());
        out.push(BenchResult {
            ring: *r,
            variant,
            samples: opts.samples,
            skipped,
            mean_acceptance,
            sd_acceptance,
            mean_wall_time,
            sd_wall_time,
            analytic_rejection_acceptance: r.analytic_acceptance(),
            repeats,
        });
    }
    Ok(out)
}

/// Samples one set of points for uniformity diagnostics.
pub fn sample_ring(r: &RingSpec, variant: Variant, opts: &BenchOptions) -> Result<(Vec<Vec<f64>>, ChainStats), String> {
    let space = make_ring_space(r).map_err(|e| e.to_string())?;
    let cfg = SamplerConfig {
        variant,
        seed: opts.seed,
        ..opts.sampler.clone()
    };
    let x0 = if variant == Variant::Rejection {
        Vec::new()
    } else {
        initialize(&space, opts.init, &PsoConfig { seed: opts.seed, ..opts.pso.clone() }).map_err(|e| e.to_string())?
    };
    run_chain(&space, &cfg, &x0, opts.samples).map_err(|e: ChainError| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    /// Angular bins for `n = 2`, radius deciles otherwise.
    pub chi_square_p: f64,
    pub per_dim_ks: Vec<f64>,
    pub radius_ks: f64,
}

/// Equal-measure binning test plus per-coordinate KS distances to a
/// reference sample.
pub fn uniformity_report(
    samples: &[Vec<f64>],
    reference: &[Vec<f64>],
    ring: &RingSpec,
    bins: usize,
) -> Result<UniformityReport, BenchError> {
    if bins < 2 || samples.len() < 10 * bins {
        return Err(BenchError::Insufficient {
            got: samples.len(),
            needed: 10 * bins.max(2),
        });
    }
    let n = ring.n as i32;
    let radius = |x: &Vec<f64>| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (lo, hi) = (ring.c2.powi(n), ring.c1.powi(n));
    let radius_cdf = |r: f64| ((r.powi(n) - lo) / (hi - lo)).clamp(0.0, 1.0);
    let mut counts = vec![0.0; bins];
    for x in samples {
        let u = if ring.n == 2 {
            (x[1].atan2(x[0]) + PI) / (2.0 * PI)
        } else {
            radius_cdf(radius(x))
        };
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    let expected = vec![samples.len() as f64 / bins as f64; bins];
    let (_, chi_square_p) = chi_square_test(&counts, &expected);
    let per_dim_ks = (0..ring.n)
        .map(|i| {
            let a: Vec<f64> = samples.iter().map(|x| x[i]).collect();
            let b: Vec<f64> = reference.iter().map(|x| x[i]).collect();
            ks_two_sample(&a, &b)
        })
        .collect();
    let radii: Vec<f64> = samples.iter().map(radius).collect();
    Ok(UniformityReport {
        chi_square_p,
        per_dim_ks,
        radius_ks: ks_one_sample(&radii, radius_cdf),
    })
}

pub fn results_to_csv(results: &[BenchResult]) -> String {
    let mut out = String::from(
        "n,c1,c2,c,variant,repeat,samples,wall_time,acceptance_rate,proposals,accepted,analytic_rejection_acceptance,error\n",
    );
    for b in results {
        let r = &b.ring;
        if b.skipped {
            let _ = writeln!(out, "{},{},{},{},{},,0,,,,,{},skipped", r.n, r.c1, r.c2, r.c, b.variant, b.analytic_rejection_acceptance);
            continue;
        }
        for x in &b.repeats {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.n,
                r.c1,
                r.c2,
                r.c,
                b.variant,
                x.repeat,
                x.samples,
                x.wall_time,
                x.acceptance_rate,
                x.proposals,
                x.accepted,
                b.analytic_rejection_acceptance,
                x.error.as_deref().unwrap_or("").replace(',', ";")
            );
        }
    }
    out
}
