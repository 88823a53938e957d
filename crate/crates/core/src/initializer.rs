//! Initial points for hit-and-run: particle swarm optimization or compass
//! search on the constraint penalty.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::param_space::ParamSpace;
use crate::seed::{rng_for, INIT_STREAM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitError {
    #[error("initialization failed: best penalty {best_penalty:e} at {argmin:?}")]
    Failed { best_penalty: f64, argmin: Vec<f64> },
    #[error("invalid initializer configuration: {0}")]
    InvalidConfig(String),
}

/// Produces a point of the set to start a chain from.
pub trait Initializer {
    fn find_initial(&self, space: &ParamSpace) -> Result<Vec<f64>, InitError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive_scale: f64,
    pub social_scale: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 10,
            max_iterations: 10,
            inertia: 0.5,
            cognitive_scale: 0.5,
            social_scale: 0.5,
            restarts: 20,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), InitError> {
        if self.swarm_size < 2 {
            return Err(InitError::InvalidConfig("swarm size must be at least 2".into()));
        }
        let scales = [self.inertia, self.cognitive_scale, self.social_scale];
        if scales.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(InitError::InvalidConfig("scales must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best: Vec<f64>,
    pub best_penalty: f64,
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub gbest: Vec<f64>,
    pub gbest_penalty: f64,
    rng: ChaCha8Rng,
}

fn penalty(space: &ParamSpace, x: &[f64]) -> f64 {
    space.penalty(x).expect("dimension checked")
}

impl Swarm {
    /// Fresh swarm: positions uniform in the box, velocities uniform in
    /// `[-(hi - lo), hi - lo]`.
    pub fn new(space: &ParamSpace, size: usize, mut rng: ChaCha8Rng) -> Self {
        let (lo, hi) = (space.lower(), space.upper());
        let mut particles = Vec::with_capacity(size);
        for _ in 0..size {
            let position: Vec<f64> = (0..space.dim())
                .map(|i| lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>())
                .collect();
            let velocity = (0..space.dim())
                .map(|i| (hi[i] - lo[i]) * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            let p = penalty(space, &position);
            particles.push(Particle {
                best: position.clone(),
                position,
                velocity,
                best_penalty: p,
            });
        }
        let leader = particles
            .iter()
            .min_by(|a, b| a.best_penalty.total_cmp(&b.best_penalty))
            .expect("non-empty swarm");
        Swarm {
            gbest: leader.best.clone(),
            gbest_penalty: leader.best_penalty,
            particles,
            rng,
        }
    }

    /// A personal best with zero penalty that lies in the set, if any.
    pub fn feasible(&self, space: &ParamSpace) -> Option<Vec<f64>> {
        self.particles
            .iter()
            .filter(|p| p.best_penalty == 0.0)
            .map(|p| &p.best)
            .find(|x| space.member(x))
            .cloned()
    }
}

/// One velocity and position update of every particle, positions clamped to
/// the box.
pub fn pso_iterate(swarm: &mut Swarm, space: &ParamSpace, cfg: &PsoConfig) {
    let (lo, hi) = (space.lower(), space.upper());
    for k in 0..swarm.particles.len() {
        let p = &mut swarm.particles[k];
        for i in 0..p.position.len() {
            let r1: f64 = swarm.rng.gen();
            let r2: f64 = swarm.rng.gen();
            p.velocity[i] = cfg.inertia * p.velocity[i]
                + cfg.cognitive_scale * r1 * (p.best[i] - p.position[i])
                + cfg.social_scale * r2 * (swarm.gbest[i] - p.position[i]);
            p.position[i] = (p.position[i] + p.velocity[i]).clamp(lo[i], hi[i]);
        }
        let pen = penalty(space, &p.position);
        if pen < p.best_penalty {
            p.best_penalty = pen;
            p.best.clone_from(&p.position);
            if pen < swarm.gbest_penalty {
                swarm.gbest_penalty = pen;
                swarm.gbest.clone_from(&p.position);
            }
        }
    }
}

/// Particle swarm search with random restarts.
#[derive(Debug, Clone, Default)]
pub struct Pso(pub PsoConfig);

impl Initializer for Pso {
    fn find_initial(&self, space: &ParamSpace) -> Result<Vec<f64>, InitError> {
        find_initial(space, &self.0)
    }
}

pub fn find_initial(space: &ParamSpace, cfg: &PsoConfig) -> Result<Vec<f64>, InitError> {
    cfg.validate()?;
    if space.dim() == 0 {
        return if space.member(&[]) {
            Ok(Vec::new())
        } else {
            Err(InitError::Failed {
                best_penalty: penalty(space, &[]),
                argmin: Vec::new(),
            })
        };
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for attempt in 0..=cfg.restarts {
        let mut swarm = Swarm::new(space, cfg.swarm_size, rng_for(cfg.seed, INIT_STREAM, attempt as u64));
        let mut iter = 0;
        loop {
            if let Some(x) = swarm.feasible(space) {
                return Ok(x);
            }
            if iter == cfg.max_iterations {
                break;
            }
            pso_iterate(&mut swarm, space, cfg);
            iter += 1;
        }
        if best.as_ref().is_none_or(|(p, _)| swarm.gbest_penalty < *p) {
            best = Some((swarm.gbest_penalty, swarm.gbest));
        }
    }
    let (best_penalty, argmin) = best.expect("at least one attempt");
    Err(InitError::Failed { best_penalty, argmin })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    /// Penalty evaluations per start point.
    pub max_evaluations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            max_evaluations: 200_000,
            restarts: 20,
            seed: 0,
        }
    }
}

/// Compass search on the penalty: axis moves of shrinking step size, from
/// the box centre first and then from random points of the box.
#[derive(Debug, Clone, Default)]
pub struct PatternSearch(pub PatternConfig);

impl Initializer for PatternSearch {
    fn find_initial(&self, space: &ParamSpace) -> Result<Vec<f64>, InitError> {
        pattern_search(space, &self.0)
    }
}

fn compass(space: &ParamSpace, mut x: Vec<f64>, budget: usize) -> Result<Vec<f64>, (f64, Vec<f64>)> {
    let (lo, hi) = (space.lower(), space.upper());
    let mut step: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (h - l) / 4.0).collect();
    let mut best = penalty(space, &x);
    let mut evals = 1;
    while evals < budget {
        if best == 0.0 && space.member(&x) {
            return Ok(x);
        }
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let cand = x[i] + sign * step[i];
                if !(lo[i] < cand && cand < hi[i]) {
                    continue;
                }
                let old = std::mem::replace(&mut x[i], cand);
                let p = penalty(space, &x);
                evals += 1;
                if p < best {
                    best = p;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            let mut alive = false;
            for (i, s) in step.iter_mut().enumerate() {
                *s *= 0.5;
                alive |= *s > 1e-12 * (hi[i] - lo[i]);
            }
            if !alive {
                break;
            }
        }
    }
    if best == 0.0 && space.member(&x) {
        return Ok(x);
    }
    Err((best, x))
}

pub fn pattern_search(space: &ParamSpace, cfg: &PatternConfig) -> Result<Vec<f64>, InitError> {
    let (lo, hi) = (space.lower(), space.upper());
    let mut best: Option<(f64, Vec<f64>)> = None;
    for attempt in 0..=cfg.restarts {
        let start: Vec<f64> = if attempt == 0 {
            lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect()
        } else {
            let mut rng = rng_for(cfg.seed, INIT_STREAM, (1 << 32) + attempt as u64);
            lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.gen::<f64>()).collect()
        };
        match compass(space, start, cfg.max_evaluations) {
            Ok(x) => return Ok(x),
            Err((p, x)) => {
                if best.as_ref().is_none_or(|(b, _)| p < *b) {
                    best = Some((p, x));
                }
            }
        }
    }
    let (best_penalty, argmin) = best.expect("at least one attempt");
    Err(InitError::Failed { best_penalty, argmin })
}

/// Initializer selection for the command line and the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    #[default]
    Pso,
    Pattern,
    /// Particle swarm first, compass search if it fails.
    Auto,
}

impl std::str::FromStr for InitMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pso" => Ok(InitMethod::Pso),
            "pattern" => Ok(InitMethod::Pattern),
            "auto" => Ok(InitMethod::Auto),
            _ => Err(format!("unknown initializer `{s}` (expected pso, pattern or auto)")),
        }
    }
}

/// Runs the selected initializer with a common seed.
pub fn initialize(space: &ParamSpace, method: InitMethod, pso: &PsoConfig) -> Result<Vec<f64>, InitError> {
    let pattern = PatternSearch(PatternConfig {
        restarts: pso.restarts,
        seed: pso.seed,
        ..PatternConfig::default()
    });
    match method {
        InitMethod::Pso => find_initial(space, pso),
        InitMethod::Pattern => pattern.find_initial(space),
        InitMethod::Auto => find_initial(space, pso).or_else(|_| pattern.find_initial(space)),
    }
}
