//! The two-stage generator: draw a shape word, draw a valuation from a
//! per-word hit-and-run chain, render the signal.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::ast::ShapeExpr;
use crate::automaton::{check_ambiguity, AmbiguityReport, PositionAutomaton};
use crate::genfun::{generating_function, tune_z, GenfunError};
use crate::initializer::{initialize, InitError, InitMethod, PsoConfig};
use crate::param_space::{ParamSpace, SpaceError};
use crate::parser::SpecError;
use crate::point_sampler::{continue_chain, hr_step, rejection_sample, ChainError, ChainState, ChainStats, SamplerConfig, Variant};
use crate::seed::{derive_seed, rng_for, CHAIN_STREAM, WORD_STREAM};
use crate::signal::{render, to_csv, to_json, RenderError, RenderOptions, Signal};
use crate::word_sampler::{BoltzmannOracle, ShapeWord, WordError, DEFAULT_MAX_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boltzmann {
    Z(f64),
    MeanLength(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub count: usize,
    /// Ignored when `fixed_word` is set.
    pub boltzmann: Boltzmann,
    pub fixed_word: Option<ShapeWord>,
    pub sampler: SamplerConfig,
    pub pso: PsoConfig,
    pub init: InitMethod,
    pub epsilon: Option<f64>,
    pub render: RenderOptions,
    pub max_word_length: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            count: 1,
            boltzmann: Boltzmann::MeanLength(10.0),
            fixed_word: None,
            sampler: SamplerConfig::default(),
            pso: PsoConfig::default(),
            init: InitMethod::Pso,
            epsilon: None,
            render: RenderOptions::default(),
            max_word_length: DEFAULT_MAX_LENGTH,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] SpecError),
    #[error("regular expression is ambiguous; witness `{}`", .0.join(" "))]
    Ambiguous(Vec<String>),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Genfun(#[from] GenfunError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl PipelineError {
    /// 1 spec errors, 2 ambiguity, 3 initialization, 4 chain, 5 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Parse(_) | PipelineError::Space(_) => 1,
            PipelineError::Ambiguous(_) => 2,
            PipelineError::Init(_) => 3,
            PipelineError::Chain(_) => 4,
            _ => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Parse(_) => "parse",
            PipelineError::Ambiguous(_) => "ambiguous",
            PipelineError::Space(_) => "constraint",
            PipelineError::Init(_) => "init_failed",
            PipelineError::Chain(_) => "chain_failed",
            PipelineError::Genfun(_) => "genfun",
            PipelineError::Word(_) => "word",
            PipelineError::Render(_) => "render",
            PipelineError::InvalidArgument(_) => "invalid_argument",
            PipelineError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            PipelineError::Ambiguous(w) => v["witness"] = json!(w),
            PipelineError::Init(InitError::Failed { best_penalty, argmin }) => {
                v["best_penalty"] = json!(best_penalty);
                v["argmin"] = json!(argmin);
            }
            PipelineError::Chain(ChainError::LineRejects { stats, .. } | ChainError::RejectionBudget { stats, .. }) => {
                v["stats"] = json!(stats);
            }
            PipelineError::Parse(SpecError::Syntax { line, col, .. }) => {
                v["line"] = json!(line);
                v["col"] = json!(col);
            }
            _ => {}
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSample {
    pub step: usize,
    pub word_id: usize,
    pub word: ShapeWord,
    pub valuation: BTreeMap<String, f64>,
    #[serde(skip)]
    pub signal: Signal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub count: usize,
    pub z: Option<f64>,
    pub distinct_words: usize,
    pub chains: usize,
    pub free_dims: usize,
    pub epsilon: f64,
    pub max_abs_jump: f64,
    pub stats: ChainStats,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub samples: Vec<PipelineSample>,
    pub report: PipelineReport,
}

enum WordSource {
    Fixed(ShapeWord),
    Boltzmann(BoltzmannOracle, rand_chacha::ChaCha8Rng),
}

impl WordSource {
    fn next(&mut self) -> Result<ShapeWord, WordError> {
        match self {
            WordSource::Fixed(w) => Ok(w.clone()),
            WordSource::Boltzmann(o, rng) => o.sample_word(rng),
        }
    }
}

/// Resolves the Boltzmann parameter, tuning it when a mean length is given.
pub fn resolve_z(spec: &ShapeExpr, b: Boltzmann) -> Result<f64, PipelineError> {
    match b {
        Boltzmann::Z(z) => Ok(z),
        Boltzmann::MeanLength(n) => Ok(tune_z(&generating_function(&spec.regex)?, n)?.z),
    }
}

struct Chain {
    word: ShapeWord,
    state: ChainState,
}

pub fn run_pipeline(spec: &ShapeExpr, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    if cfg.count == 0 {
        return Err(PipelineError::InvalidArgument("count must be at least 1".into()));
    }
    if let AmbiguityReport::Ambiguous { witness } = check_ambiguity(&spec.regex) {
        return Err(PipelineError::Ambiguous(witness));
    }
    let space = ParamSpace::from_spec(spec, cfg.epsilon)?;
    let (mut source, z) = match &cfg.fixed_word {
        Some(w) => {
            if !PositionAutomaton::new(&spec.regex).accepts(&w.atoms) {
                return Err(PipelineError::Word(WordError::NotInLanguage(w.to_string())));
            }
            (WordSource::Fixed(w.clone()), None)
        }
        None => {
            let z = resolve_z(spec, cfg.boltzmann)?;
            let oracle = BoltzmannOracle::build(&spec.regex, z)?.with_max_length(cfg.max_word_length);
            (WordSource::Boltzmann(oracle, rng_for(cfg.seed, WORD_STREAM, 0)), Some(z))
        }
    };

    let sampler = SamplerConfig {
        seed: cfg.seed,
        ..cfg.sampler.clone()
    };
    let mut word_ids: BTreeMap<ShapeWord, usize> = BTreeMap::new();
    let mut chain: Option<Chain> = None;
    let mut chains = 0usize;
    let mut total = ChainStats::default();
    let mut samples = Vec::with_capacity(cfg.count);
    for step in 0..cfg.count {
        let word = source.next()?;
        let next_id = word_ids.len();
        let word_id = *word_ids.entry(word.clone()).or_insert(next_id);
        if chain.as_ref().is_none_or(|c| c.word != word) {
            if let Some(old) = chain.take() {
                total.merge(&old.state.stats);
            }
            chains += 1;
            let index = chains as u64;
            let rng = rng_for(cfg.seed, CHAIN_STREAM, index);
            let state = if sampler.variant == Variant::Rejection {
                ChainState {
                    current: Vec::new(),
                    step_index: 0,
                    rng,
                    stats: ChainStats::default(),
                }
            } else {
                let pso = PsoConfig {
                    seed: derive_seed(cfg.seed, crate::seed::INIT_STREAM, index),
                    ..cfg.pso.clone()
                };
                let x0 = initialize(&space, cfg.init, &pso)?;
                let mut st = ChainState::new(&space, &x0, rng)?;
                for _ in 0..sampler.burn_in {
                    hr_step(&space, &mut st, &sampler)?;
                }
                st
            };
            chain = Some(Chain { word: word.clone(), state });
        }
        let c = chain.as_mut().expect("chain just ensured");
        let x = if sampler.variant == Variant::Rejection {
            rejection_sample(&space, &mut c.state.rng, sampler.rejection_budget, &mut c.state.stats)?
        } else {
            continue_chain(&space, &mut c.state, &sampler, 1)?.pop().expect("one sample")
        };
        let valuation = space.full_valuation(&x);
        let signal = render(spec, &word, &valuation, &cfg.render)?;
        samples.push(PipelineSample {
            step,
            word_id,
            word,
            valuation,
            signal,
        });
    }
    if let Some(c) = chain {
        total.merge(&c.state.stats);
    }
    let report = PipelineReport {
        count: samples.len(),
        z,
        distinct_words: word_ids.len(),
        chains,
        free_dims: space.dim(),
        epsilon: space.epsilon(),
        max_abs_jump: samples.iter().fold(0.0, |m, s| m.max(s.signal.max_abs_jump())),
        acceptance_rate: total.acceptance_rate(),
        stats: total,
    };
    Ok(PipelineOutput { samples, report })
}

/// Writes `contents` through a temporary file in the same directory and a
/// rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalFormat {
    #[default]
    Csv,
    Json,
}

/// One JSON object per sample: `{step, word_id, word, valuation}`.
pub fn samples_jsonl(samples: &[PipelineSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("serializable"));
        out.push('\n');
    }
    out
}

/// Writes `signals/NNN.{csv,json}` and `samples.jsonl` under `dir`.
pub fn write_outputs(dir: &Path, samples: &[PipelineSample], format: SignalFormat) -> io::Result<()> {
    let signals = dir.join("signals");
    fs::create_dir_all(&signals)?;
    let width = samples.len().saturating_sub(1).to_string().len().max(3);
    for s in samples {
        let (ext, body) = match format {
            SignalFormat::Csv => ("csv", to_csv(&s.signal)),
            SignalFormat::Json => ("json", to_json(&s.word, &s.valuation, &s.signal)),
        };
        write_atomic(&signals.join(format!("{:0width$}.{ext}", s.step)), body.as_bytes())?;
    }
    write_atomic(&dir.join("samples.jsonl"), samples_jsonl(samples).as_bytes())
}
