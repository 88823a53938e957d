use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use shapegen::ast::ShapeExpr;
use shapegen::automaton::{check_ambiguity, disambiguate_with_limit, AmbiguityReport, DEFAULT_NODE_LIMIT};
use shapegen::bench::{results_to_csv, run_bench, BenchOptions, RingSpec};
use shapegen::diagnostics::{length_law_test, same_length_test, WordStats};
use shapegen::genfun::{convergence_radius, generating_function, mean_length_function, taylor_coefficients, tune_z, tuning_polynomial};
use shapegen::initializer::{InitMethod, PsoConfig};
use shapegen::param_space::ParamSpace;
use shapegen::parser::parse_spec;
use shapegen::pipeline::{resolve_z, run_pipeline, write_outputs, Boltzmann, PipelineConfig, PipelineError, SignalFormat};
use shapegen::point_sampler::{SamplerConfig, Variant, DEFAULT_BURN_IN, DEFAULT_MAX_LINE_REJECTS, DEFAULT_REJECTION_BUDGET};
use shapegen::poly::Polynomial;
use shapegen::seed::{rng_for, WORD_STREAM};
use shapegen::signal::{RenderOptions, DEFAULT_DT};
use shapegen::word_sampler::{BoltzmannOracle, ShapeWord, DEFAULT_MAX_LENGTH};

/// Random signals from shape expressions.
#[derive(Parser)]
#[command(name = "shapegen", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a spec and check that its regex is unambiguous.
    Check {
        #[arg(long)]
        spec: PathBuf,
        /// Print an equivalent unambiguous regex when the check fails.
        #[arg(long)]
        disambiguate: bool,
        #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
        node_limit: usize,
    },
    /// Generating function, convergence radius and mean-length function.
    Genfun {
        #[arg(long)]
        spec: PathBuf,
        /// Number of Taylor coefficients to print.
        #[arg(long, default_value_t = 16)]
        terms: usize,
    },
    /// Boltzmann parameter for a target mean word length.
    Tune {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        mean_length: f64,
    },
    /// Sample shape words.
    Words(WordsArgs),
    /// Sample words, valuations and signals.
    Sample(SampleArgs),
    /// Statistics over JSONL output of `words` or `sample`.
    Stats(StatsArgs),
    /// Hyper-ring benchmarks.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
}

#[derive(Args, Clone, Copy)]
#[group(required = true, multiple = false)]
struct BoltzmannArgs {
    /// Boltzmann parameter.
    #[arg(long)]
    z: Option<f64>,
    /// Target mean word length; `z` is tuned to it.
    #[arg(long)]
    mean_length: Option<f64>,
}

impl BoltzmannArgs {
    fn get(self) -> Boltzmann {
        match (self.z, self.mean_length) {
            (Some(z), _) => Boltzmann::Z(z),
            (_, Some(n)) => Boltzmann::MeanLength(n),
            _ => unreachable!("clap enforces one of --z / --mean-length"),
        }
    }
}

#[derive(Args)]
struct WordsArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, env = "SHAPEGEN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[command(flatten)]
    boltzmann: BoltzmannArgs,
    /// Emit JSON lines instead of plain words.
    #[arg(long)]
    jsonl: bool,
    /// Keep only words of this length (naive rejection).
    #[arg(long)]
    exact_length: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_LENGTH)]
    max_length: usize,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, env = "SHAPEGEN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long, conflicts_with = "z")]
    mean_length: Option<f64>,
    /// Use this word for every sample (atoms separated by spaces or commas;
    /// single-letter atoms may be run together, e.g. ABCFA).
    #[arg(long, conflicts_with_all = ["z", "mean_length"])]
    fixed_word: Option<String>,
    #[arg(long, default_value = "hr_shrink")]
    variant: Variant,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_LINE_REJECTS)]
    max_line_rejects: u64,
    #[arg(long, default_value_t = DEFAULT_REJECTION_BUDGET)]
    rejection_budget: u64,
    #[command(flatten)]
    pso: PsoArgs,
    /// Override the spec's relaxation width for equalities.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
    /// Make rendered signals exactly continuous at segment boundaries.
    #[arg(long)]
    project_continuity: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    #[arg(long, default_value_t = DEFAULT_MAX_LENGTH)]
    max_length: usize,
}

#[derive(Args, Clone)]
struct PsoArgs {
    #[arg(long, default_value_t = 10)]
    pso_swarm: usize,
    #[arg(long, default_value_t = 10)]
    pso_iters: usize,
    #[arg(long, default_value_t = 20)]
    pso_restarts: usize,
    /// Initializer: pso, pattern (compass search) or auto (pso, then pattern).
    #[arg(long, default_value = "pso")]
    init: InitMethod,
}

impl PsoArgs {
    fn config(&self) -> PsoConfig {
        PsoConfig {
            swarm_size: self.pso_swarm,
            max_iterations: self.pso_iters,
            restarts: self.pso_restarts,
            ..PsoConfig::default()
        }
    }
}

#[derive(Args)]
struct StatsArgs {
    /// JSONL files; `-` or none reads standard input.
    inputs: Vec<PathBuf>,
    /// Spec for the same-length, length-law and membership checks.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long, conflicts_with = "z")]
    mean_length: Option<f64>,
    /// Word length for the same-length uniformity test.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Acceptance rate and wall time on hyper-rings.
    Ring(RingArgs),
}

#[derive(Args)]
struct RingArgs {
    /// Ring as JSON `{n, c1, c2, c}`; overrides the sweep flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    c1: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.9")]
    c2: Vec<f64>,
    #[arg(long = "box", value_delimiter = ',', default_value = "1")]
    box_half_width: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "rejection,hr,hr_shrink,cdhr,cdhr_shrink")]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, env = "SHAPEGEN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[command(flatten)]
    pso: PsoArgs,
    /// Rejection sampling is skipped above this dimension.
    #[arg(long, default_value_t = 3)]
    rejection_max_dim: usize,
    /// Report path; both `.csv` and `.json` are written next to each other.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    body: Value,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code(),
            body: e.to_json(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        PipelineError::Io(e).into()
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    PipelineError::InvalidArgument(msg.into()).into()
}

type CmdResult = Result<(), Failure>;

fn print_json(v: &Value) {
    let text = serde_json::to_string_pretty(v).expect("serializable");
    // A closed pipe (e.g. `| head`) is not an error for a report printer.
    let _ = writeln!(io::stdout().lock(), "{text}");
}

fn load_spec(path: &Path) -> Result<ShapeExpr, Failure> {
    let text = fs::read_to_string(path)?;
    parse_spec(&text).map_err(|e| PipelineError::Parse(e).into())
}

fn coeff_json(p: &Polynomial) -> Value {
    match p.integer_coeffs() {
        Some(cs) => json!(cs
            .iter()
            .map(|c| i64::try_from(c).map(Value::from).unwrap_or_else(|_| Value::from(c.to_string())))
            .collect::<Vec<_>>()),
        None => json!(p.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>()),
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn require_unambiguous(e: &ShapeExpr) -> CmdResult {
    match check_ambiguity(&e.regex) {
        AmbiguityReport::Unambiguous => Ok(()),
        AmbiguityReport::Ambiguous { witness } => Err(PipelineError::Ambiguous(witness).into()),
    }
}

fn cmd_check(spec: &Path, disambiguate: bool, node_limit: usize) -> CmdResult {
    let e = load_spec(spec)?;
    let report = check_ambiguity(&e.regex);
    let space = ParamSpace::from_spec(&e, None).map_err(PipelineError::from)?;
    let mut out = json!({
        "regex": e.regex.to_string(),
        "ambiguity": report,
        "parameters": e.parameters().len(),
        "free_dims": space.dim(),
        "epsilon": space.epsilon(),
    });
    match &report {
        AmbiguityReport::Unambiguous => {
            eprintln!("ok: unambiguous, {} free dimensions", space.dim());
            print_json(&out);
            Ok(())
        }
        AmbiguityReport::Ambiguous { witness } => {
            eprintln!("ambiguous: `{}` has two derivations", witness.join(" "));
            if disambiguate {
                match disambiguate_with_limit(&e.regex, node_limit) {
                    Ok(r) => {
                        out["disambiguated"] = json!(r.to_string());
                        print_json(&out);
                        return Ok(());
                    }
                    Err(err) => out["disambiguate_error"] = json!(err.to_string()),
                }
            }
            print_json(&out);
            Err(PipelineError::Ambiguous(witness.clone()).into())
        }
    }
}

fn cmd_genfun(spec: &Path, terms: usize) -> CmdResult {
    let e = load_spec(spec)?;
    require_unambiguous(&e)?;
    let g = generating_function(&e.regex).map_err(PipelineError::from)?;
    let n = mean_length_function(&g).map_err(PipelineError::from)?;
    let taylor = taylor_coefficients(&g, terms.saturating_sub(1)).map_err(PipelineError::from)?;
    let rconv = convergence_radius(&g);
    eprintln!("g(z) = {g}\nRconv = {rconv:.5}");
    print_json(&json!({
        "numerator": coeff_json(g.numerator()),
        "denominator": coeff_json(g.denominator()),
        "display": g.to_string(),
        "rconv": finite_or_null(rconv),
        "mean_length": {
            "numerator": coeff_json(n.numerator()),
            "denominator": coeff_json(n.denominator()),
            "display": n.to_string(),
        },
        "taylor": taylor.iter().map(|c| i64::try_from(c).map(Value::from).unwrap_or_else(|_| Value::from(c.to_string()))).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn cmd_tune(spec: &Path, mean_length: f64) -> CmdResult {
    let e = load_spec(spec)?;
    require_unambiguous(&e)?;
    let g = generating_function(&e.regex).map_err(PipelineError::from)?;
    let t = tune_z(&g, mean_length).map_err(PipelineError::from)?;
    let poly = tuning_polynomial(&g, mean_length).map_err(PipelineError::from)?;
    eprintln!("z={:.5} rconv={:.5}", t.z, t.rconv);
    print_json(&json!({
        "z": t.z,
        "rconv": finite_or_null(t.rconv),
        "mean_length_at_z": t.mean_length_at_z,
        "tuning_polynomial": coeff_json(&poly),
    }));
    Ok(())
}

fn cmd_words(a: WordsArgs) -> CmdResult {
    let e = load_spec(&a.spec)?;
    require_unambiguous(&e)?;
    let z = resolve_z(&e, a.boltzmann.get())?;
    let oracle = BoltzmannOracle::build(&e.regex, z)
        .map_err(PipelineError::from)?
        .with_max_length(a.max_length);
    let mut rng = rng_for(a.seed, WORD_STREAM, 0);
    let budget = (a.count as u64).saturating_mul(1_000_000).max(1_000_000);
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let (mut emitted, mut draws) = (0usize, 0u64);
    while emitted < a.count {
        if draws >= budget {
            return Err(invalid(format!(
                "no more words of length {} after {draws} draws",
                a.exact_length.unwrap_or(0)
            )));
        }
        draws += 1;
        let w = oracle.sample_word(&mut rng).map_err(PipelineError::from)?;
        if a.exact_length.is_some_and(|n| n != w.len()) {
            continue;
        }
        let written = if a.jsonl {
            writeln!(out, "{}", json!({"index": emitted, "word": w, "length": w.len()}))
        } else {
            writeln!(out, "{w}")
        };
        match written {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(()),
            r => r?,
        }
        emitted += 1;
    }
    match out.flush() {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
        _ => {}
    }
    eprintln!("z={z:.6} words={emitted} draws={draws}");
    Ok(())
}

/// Splits a `--fixed-word` argument into atom names.
fn parse_word(e: &ShapeExpr, text: &str) -> Result<ShapeWord, Failure> {
    let parts: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .collect();
    let atoms: Vec<String> = if parts.len() == 1 && e.decl(parts[0]).is_none() {
        parts[0].chars().map(String::from).collect()
    } else {
        parts.iter().map(|s| s.to_string()).collect()
    };
    if let Some(bad) = atoms.iter().find(|a| e.decl(a).is_none()) {
        return Err(invalid(format!("unknown atom `{bad}` in --fixed-word")));
    }
    Ok(ShapeWord { atoms })
}

fn cmd_sample(a: SampleArgs) -> CmdResult {
    let e = load_spec(&a.spec)?;
    let fixed_word = a.fixed_word.as_deref().map(|w| parse_word(&e, w)).transpose()?;
    let boltzmann = match (a.z, a.mean_length) {
        (Some(z), _) => Boltzmann::Z(z),
        (_, Some(n)) => Boltzmann::MeanLength(n),
        _ if fixed_word.is_some() => Boltzmann::Z(0.0),
        _ => return Err(invalid("one of --z, --mean-length or --fixed-word is required")),
    };
    let cfg = PipelineConfig {
        seed: a.seed,
        count: a.count,
        boltzmann,
        fixed_word,
        sampler: SamplerConfig {
            variant: a.variant,
            burn_in: a.burn_in,
            thin: a.thin,
            max_line_rejects: a.max_line_rejects,
            rejection_budget: a.rejection_budget,
            seed: a.seed,
        },
        pso: a.pso.config(),
        init: a.pso.init,
        epsilon: a.epsilon,
        render: RenderOptions {
            dt: a.dt,
            project_continuity: a.project_continuity,
        },
        max_word_length: a.max_length,
    };
    let out = run_pipeline(&e, &cfg)?;
    let format = if a.format == "json" { SignalFormat::Json } else { SignalFormat::Csv };
    write_outputs(&a.out, &out.samples, format)?;
    let r = &out.report;
    eprintln!(
        "{} samples, {} distinct words, {} chains, acceptance {:.4}, max jump {:.3e}, written to {}",
        r.count,
        r.distinct_words,
        r.chains,
        r.acceptance_rate,
        r.max_abs_jump,
        a.out.display()
    );
    print_json(&serde_json::to_value(r).expect("serializable"));
    Ok(())
}

fn read_lines(inputs: &[PathBuf]) -> io::Result<Vec<String>> {
    let mut lines = Vec::new();
    if inputs.is_empty() || inputs.iter().any(|p| p.as_os_str() == "-") {
        for l in io::stdin().lock().lines() {
            lines.push(l?);
        }
    }
    for p in inputs.iter().filter(|p| p.as_os_str() != "-") {
        lines.extend(fs::read_to_string(p)?.lines().map(String::from));
    }
    Ok(lines)
}

fn cmd_stats(a: StatsArgs) -> CmdResult {
    let spec = a.spec.as_deref().map(load_spec).transpose()?;
    let space = spec
        .as_ref()
        .map(|e| ParamSpace::from_spec(e, a.epsilon))
        .transpose()
        .map_err(PipelineError::from)?;
    let mut stats = WordStats::new();
    let (mut valuations, mut violations) = (0u64, 0u64);
    for (i, line) in read_lines(&a.inputs)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|err| invalid(format!("line {}: {err}", i + 1)))?;
        let word: ShapeWord = serde_json::from_value(v["word"].clone())
            .map_err(|err| invalid(format!("line {}: bad `word`: {err}", i + 1)))?;
        stats.add(&word);
        if let (Some(space), Some(val)) = (&space, v.get("valuation").and_then(Value::as_object)) {
            valuations += 1;
            let free: Option<Vec<f64>> = space.dims().iter().map(|d| val.get(d).and_then(Value::as_f64)).collect();
            if !free.is_some_and(|x| space.member(&x)) {
                violations += 1;
            }
        }
    }
    let mut out = json!({
        "count": stats.count,
        "mean_length": finite_or_null(stats.mean_length()),
        "length_variance": finite_or_null(stats.length_variance()),
        "length_histogram": stats.length_histogram,
        "distinct_words": stats.frequencies.len() as u64 + stats.untracked.min(1),
    });
    if let Some(e) = &spec {
        if space.is_some() && valuations > 0 {
            out["valuations_checked"] = json!(valuations);
            out["membership_violations"] = json!(violations);
        }
        if let Some(n) = a.length {
            out["same_length"] = match same_length_test(&stats, &e.regex, n) {
                Ok(r) => json!(r),
                Err(err) => json!({"skipped": err.to_string()}),
            };
        }
        let b = match (a.z, a.mean_length) {
            (Some(z), _) => Some(Boltzmann::Z(z)),
            (_, Some(n)) => Some(Boltzmann::MeanLength(n)),
            _ => None,
        };
        if let Some(b) = b {
            let z = resolve_z(e, b)?;
            let g = generating_function(&e.regex).map_err(PipelineError::from)?;
            out["length_law"] = match length_law_test(&stats, &g, z) {
                Ok(r) => json!(r),
                Err(err) => json!({"skipped": err.to_string()}),
            };
        }
    }
    eprintln!("{} words, mean length {:.4}", stats.count, stats.mean_length());
    print_json(&out);
    if violations > 0 {
        return Err(Failure {
            code: 4,
            body: json!({"error": "membership_violation", "message": format!("{violations} valuation(s) outside the constraint set"), "exit_code": 4}),
        });
    }
    Ok(())
}

fn report_paths(out: &Path) -> (PathBuf, PathBuf) {
    match out.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("json") => (out.with_extension("csv"), out.with_extension("json")),
        _ => {
            let stem = out.as_os_str().to_owned();
            let mut csv = stem.clone();
            csv.push(".csv");
            let mut js = stem;
            js.push(".json");
            (PathBuf::from(csv), PathBuf::from(js))
        }
    }
}

fn cmd_bench_ring(a: RingArgs) -> CmdResult {
    let rings: Vec<RingSpec> = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            vec![serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?]
        }
        None => {
            let mut v = Vec::new();
            for &n in &a.dims {
                for &c1 in &a.c1 {
                    for &c2 in &a.c2 {
                        for &c in &a.box_half_width {
                            v.push(RingSpec { n, c1, c2, c });
                        }
                    }
                }
            }
            v
        }
    };
    let opts = BenchOptions {
        samples: a.samples,
        repeats: a.repeats,
        seed: a.seed,
        sampler: SamplerConfig {
            burn_in: a.burn_in,
            thin: a.thin,
            ..SamplerConfig::default()
        },
        pso: a.pso.config(),
        init: a.pso.init,
        rejection_max_dim: Some(a.rejection_max_dim),
    };
    let mut results = Vec::new();
    for r in &rings {
        let res = run_bench(r, &a.variants, &opts).map_err(|e| invalid(e.to_string()))?;
        for b in &res {
            let failures = b.repeats.iter().filter(|x| x.error.is_some()).count();
            eprintln!(
                "n={} c1={} c2={} c={} {:<11} acceptance {:.4} ± {:.4}  time {:.4}s{}",
                r.n,
                r.c1,
                r.c2,
                r.c,
                b.variant.name(),
                b.mean_acceptance,
                b.sd_acceptance,
                b.mean_wall_time,
                if b.skipped {
                    "  (skipped)".to_string()
                } else if failures > 0 {
                    format!("  ({failures} failed)")
                } else {
                    String::new()
                }
            );
        }
        results.extend(res);
    }
    let report = serde_json::to_value(&results).expect("serializable");
    if let Some(out) = &a.out {
        let (csv, js) = report_paths(out);
        if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&csv, results_to_csv(&results))?;
        fs::write(&js, serde_json::to_string_pretty(&report).expect("serializable"))?;
    }
    print_json(&report);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check {
            spec,
            disambiguate,
            node_limit,
        } => cmd_check(&spec, disambiguate, node_limit),
        Command::Genfun { spec, terms } => cmd_genfun(&spec, terms),
        Command::Tune { spec, mean_length } => cmd_tune(&spec, mean_length),
        Command::Words(a) => cmd_words(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Bench {
            which: BenchCommand::Ring(a),
        } => cmd_bench_ring(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.body);
            ExitCode::from(f.code)
        }
    }
}
