//! Command-line front end for the `biasmark` library.
//!
//! Subcommands cover the full pipeline: `keygen` → `watermark` →
//! `detect-weights` / `generate` → `detect-text`, plus `attack`,
//! `calibrate`, the `sweep` experiment runners, `verify-bounds`, and
//! `report`. Every command takes `--seed`, `--config <json>`, and
//! `--out <path>`; what the config file holds depends on the command and
//! is described in its long help. Exit codes: 0 on success, 2 on
//! malformed input (bad files, bad JSON, usage errors), 3 on contract
//! violations (invalid parameters, dimension mismatches).

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use biasmark::attack::{gaussian_perturb_attack, token_substitute_attack, AttackKind, AttackSpec};
use biasmark::bounds::{
    check_expected_val_lemma, check_gaussian_norm_tail, check_gaussian_tail, check_hoeffding,
    check_unremovability_geometry,
};
use biasmark::io::{bias_to_json, key_to_json, read_bias_file, read_key_file};
use biasmark::text::format_tokens;
use biasmark::{
    calibrate_threshold, count_detect, loss_budget, parse_token_sequence, read_sweep_csv,
    rows_to_csv_string, run_detectability_sweep, run_removal_sweep, run_substitution_sweep, setup,
    text_detect, watermark, weight_detect, BiasVector, Detector, Error, ExperimentConfig,
    GenerationConfig, Label, NormBound, Result, SweepRow, TextDetectConfig, TextFormat, ToyModel,
    ToyModelSpec, WeightDetectConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "biasmark",
    version,
    about = "Gaussian bias-vector watermarking: keys, embedding, detection, attacks, sweeps"
)]
struct Cli {
    /// Seed for whatever randomness the command owns (key draw, sampler,
    /// attack noise, calibration nulls, sweep master seed). Deterministic
    /// commands ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON config file; the schema depends on the subcommand (see its
    /// long help). Explicit flags override config values.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    Keygen(KeygenArgs),
    Watermark(WatermarkArgs),
    DetectWeights(DetectWeightsArgs),
    DetectText(DetectTextArgs),
    Generate(GenerateArgs),
    Attack(AttackArgs),
    Calibrate(CalibrateArgs),
    #[command(subcommand)]
    Sweep(SweepCmd),
    VerifyBounds(VerifyBoundsArgs),
    Report(ReportArgs),
}

/// Sample a fresh watermark key and print it as a key file.
///
/// Config schema: `{"n": usize, "epsilon": f64, "seed": u64}`, all
/// optional; flags win.
#[derive(Args, Debug)]
struct KeygenArgs {
    /// Alphabet size (bias dimension).
    #[arg(long)]
    n: Option<usize>,

    /// Per-coordinate standard deviation of the key.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct KeygenConfig {
    n: Option<usize>,
    epsilon: Option<f64>,
    seed: Option<u64>,
}

/// Embed a key into a bias vector: writes `x + delta` as a bias file.
///
/// Config schema: `{"key": path, "original": path}`; flags win.
#[derive(Args, Debug)]
struct WatermarkArgs {
    /// Key file from `keygen`.
    #[arg(long)]
    key: Option<PathBuf>,

    /// Original bias file; all zeros when omitted.
    #[arg(long)]
    original: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct WatermarkConfig {
    key: Option<PathBuf>,
    original: Option<PathBuf>,
}

/// Run the weight-space detector on a candidate bias file.
///
/// Config schema: a full `WeightDetectConfig`, e.g.
/// `{"tau": 0.5, "norm_bound": "eps_n"}`; flags win.
#[derive(Args, Debug)]
struct DetectWeightsArgs {
    /// Key file from `keygen`.
    #[arg(long)]
    key: PathBuf,

    /// Candidate bias file to test.
    #[arg(long)]
    candidate: PathBuf,

    /// Original bias file; all zeros when omitted.
    #[arg(long)]
    original: Option<PathBuf>,

    /// Correlation threshold coefficient in (c - x)·delta >= tau·eps²·n.
    #[arg(long)]
    tau: Option<f64>,

    /// Residual norm bound: eps-n is ½·eps·n, eps-sq-n is ½·eps²·n.
    #[arg(long, value_enum)]
    norm_bound: Option<NormBoundArg>,
}

/// Run a text-space detector on a token sequence.
///
/// Config schema: a full `TextDetectConfig`, e.g.
/// `{"lambda": 20, "tau_text": 0.5, "min_distinct_report": 20}`; flags win.
#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "text"])))]
struct DetectTextArgs {
    /// Key file from `keygen`.
    #[arg(long)]
    key: PathBuf,

    /// Token text file.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Inline token text (alternative to --input).
    #[arg(long)]
    text: Option<String>,

    #[arg(long, value_enum, default_value_t = FormatArg::Whitespace)]
    format: FormatArg,

    /// inner-product is the primary first-crossing detector; count is the
    /// sign-only baseline.
    #[arg(long, value_enum, default_value_t = DetectorArg::InnerProduct)]
    detector: DetectorArg,

    /// Minimum distinct tokens before the detector may trigger.
    #[arg(long)]
    lambda: Option<usize>,

    /// Threshold coefficient on the running delta sum.
    #[arg(long)]
    tau_text: Option<f64>,

    /// Distinct-token floor below which reports carry a diagnostic.
    #[arg(long)]
    min_distinct: Option<usize>,
}

/// Sample tokens from the toy model under a served bias vector.
///
/// Config schema: `{"model": ToyModelSpec, "generation": GenerationConfig}`,
/// both optional; flags win.
#[derive(Args, Debug)]
struct GenerateArgs {
    /// Bias file served as the logit offset; all zeros when omitted.
    #[arg(long)]
    bias: Option<PathBuf>,

    #[command(flatten)]
    model: ModelArgs,

    #[arg(long)]
    max_tokens: Option<usize>,

    #[arg(long)]
    temperature: Option<f64>,

    /// Comma-separated prompt token ids.
    #[arg(long, value_delimiter = ',')]
    prompt: Option<Vec<u32>>,

    #[arg(long, value_enum, default_value_t = FormatArg::Whitespace)]
    format: FormatArg,
}

/// Apply an attack to a watermarked artifact.
///
/// gaussian-perturb reads a bias file and adds N(0, (k·eps)² I);
/// token-substitute reads a token text file and rewrites ceil(rho·len)
/// positions. Config schema: a full `AttackSpec`, e.g.
/// `{"kind": "gaussian_perturb", "magnitude": 2.0, "seed": 7}`; flags win.
#[derive(Args, Debug)]
struct AttackArgs {
    /// Input artifact (bias file or token text file, depending on kind).
    #[arg(long)]
    input: PathBuf,

    #[arg(long, value_enum)]
    kind: Option<AttackKindArg>,

    /// Noise multiplier k (gaussian-perturb) or substitution rate rho
    /// (token-substitute).
    #[arg(long)]
    magnitude: Option<f64>,

    /// Key epsilon the noise scales with; required for gaussian-perturb.
    #[arg(long)]
    key_epsilon: Option<f64>,

    /// Alphabet size for token text; required for token-substitute.
    #[arg(long)]
    n: Option<usize>,

    #[arg(long, value_enum, default_value_t = FormatArg::Whitespace)]
    format: FormatArg,
}

/// Calibrate a text-detector threshold against fresh-key nulls.
///
/// Config schema: `{"model": ToyModelSpec, "generation": GenerationConfig}`,
/// both optional; flags win.
#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, value_enum)]
    detector: DetectorArg,

    /// Key epsilon the detector will run with.
    #[arg(long)]
    epsilon: f64,

    /// Target false-positive rate.
    #[arg(long, default_value_t = 0.01)]
    fpr: f64,

    /// Null texts to generate; must be at least 20 / fpr.
    #[arg(long, default_value_t = 2000)]
    trials: usize,

    #[command(flatten)]
    model: ModelArgs,

    #[arg(long)]
    max_tokens: Option<usize>,

    #[arg(long)]
    temperature: Option<f64>,

    /// Comma-separated prompt token ids.
    #[arg(long, value_delimiter = ',')]
    prompt: Option<Vec<u32>>,
}

/// Run an experiment sweep and print the rows as CSV.
#[derive(Subcommand, Debug)]
enum SweepCmd {
    /// Detectability of unattacked watermarked text across epsilons.
    Detect(SweepArgs),
    /// Gaussian weight-noise removal attacks across (epsilon, k).
    Remove(SweepArgs),
    /// Token-substitution attacks across (epsilon, rho).
    Substitute(SweepArgs),
}

/// Config schema: a full or partial `ExperimentConfig`; flags win.
#[derive(Args, Debug)]
struct SweepArgs {
    /// Root seed every per-trial stream is derived from.
    #[arg(long)]
    master_seed: Option<u64>,

    /// Comma-separated key epsilons.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,

    /// Watermarked responses generated per grid point.
    #[arg(long)]
    responses_per_point: Option<usize>,

    /// Comma-separated target false-positive rates.
    #[arg(long, value_delimiter = ',')]
    target_fprs: Option<Vec<f64>>,

    #[arg(long)]
    calibration_trials: Option<usize>,

    /// Distinct-token floor for a response to count toward TPR.
    #[arg(long)]
    min_distinct: Option<usize>,

    /// Comma-separated noise multipliers for the removal sweep.
    #[arg(long, value_delimiter = ',')]
    attack_ks: Option<Vec<f64>>,

    /// Comma-separated substitution rates for the substitution sweep.
    #[arg(long, value_delimiter = ',')]
    substitution_rhos: Option<Vec<f64>>,

    /// Random contexts per grid point for the KL quality estimate.
    #[arg(long)]
    quality_contexts: Option<usize>,

    /// Entropy-quality certificate upper constant c1.
    #[arg(long)]
    cert_c1: Option<f64>,

    /// Entropy-quality certificate lower constant c2.
    #[arg(long)]
    cert_c2: Option<f64>,

    #[arg(long)]
    max_tokens: Option<usize>,

    #[arg(long)]
    temperature: Option<f64>,

    /// Comma-separated prompt token ids.
    #[arg(long, value_delimiter = ',')]
    prompt: Option<Vec<u32>>,

    #[command(flatten)]
    model: ModelArgs,
}

/// Monte Carlo checks of the analytic guarantees, one JSON line each.
///
/// Battery: Gaussian norm concentration, the scalar Gaussian tail,
/// Hoeffding on bounded sums, the expected-value lemma on a small uniform
/// model at epsilon 0.2 (trials capped at 4000; larger epsilons leave no
/// certifiable steps at the standard constants), and the unremovability
/// geometry at attacker norms {¼, 1, 4}·l(n) (trials capped at 5000).
/// Config schema: `{"trials": usize, "n": usize, "epsilon": f64,
/// "tau": f64}`; flags win.
#[derive(Args, Debug)]
struct VerifyBoundsArgs {
    /// Monte Carlo trials per check [default: 20000].
    #[arg(long)]
    trials: Option<usize>,

    /// Dimension for the norm and geometry checks [default: 4096].
    #[arg(long)]
    n: Option<usize>,

    /// Key epsilon for the tail and geometry checks [default: 0.5].
    #[arg(long)]
    epsilon: Option<f64>,

    /// Correlation threshold coefficient for the geometry check
    /// [default: 0.5].
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct BoundsConfig {
    trials: Option<usize>,
    n: Option<usize>,
    epsilon: Option<f64>,
    tau: Option<f64>,
}

/// Aggregate sweep CSVs into a summary table.
///
/// Groups rows by (sweep, attack, detector, target FPR) and reports TPR
/// statistics across epsilons plus quality and filtering aggregates.
/// `--config` is unused.
#[derive(Args, Debug)]
struct ReportArgs {
    /// Sweep CSV files.
    #[arg(required = true, value_name = "CSV")]
    inputs: Vec<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Alphabet size of the toy model.
    #[arg(long)]
    model_n: Option<usize>,

    /// Trailing context tokens the logits depend on.
    #[arg(long)]
    model_context_order: Option<usize>,

    /// Standard deviation of the raw logits; 0 gives a uniform model.
    #[arg(long)]
    model_logit_scale: Option<f64>,

    /// Seed for the logit tables.
    #[arg(long)]
    model_base_seed: Option<u64>,

    /// Probability floor defining the significant token set.
    #[arg(long)]
    model_significance_floor: Option<f64>,

    /// Context-dependent plausible-token set size; 0 disables the plateau.
    #[arg(long)]
    model_plateau_size: Option<usize>,

    /// Logit boost added to each plateau token.
    #[arg(long)]
    model_plateau_boost: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, spec: &mut ToyModelSpec) {
        if let Some(v) = self.model_n {
            spec.n = v;
        }
        if let Some(v) = self.model_context_order {
            spec.context_order = v;
        }
        if let Some(v) = self.model_logit_scale {
            spec.logit_scale = v;
        }
        if let Some(v) = self.model_base_seed {
            spec.base_seed = v;
        }
        if let Some(v) = self.model_significance_floor {
            spec.significance_floor = v;
        }
        if let Some(v) = self.model_plateau_size {
            spec.plateau_size = v;
        }
        if let Some(v) = self.model_plateau_boost {
            spec.plateau_boost = v;
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DetectorArg {
    InnerProduct,
    Count,
}

impl From<DetectorArg> for Detector {
    fn from(d: DetectorArg) -> Self {
        match d {
            DetectorArg::InnerProduct => Detector::InnerProduct,
            DetectorArg::Count => Detector::Count,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NormBoundArg {
    EpsN,
    EpsSqN,
}

impl From<NormBoundArg> for NormBound {
    fn from(b: NormBoundArg) -> Self {
        match b {
            NormBoundArg::EpsN => NormBound::EpsN,
            NormBoundArg::EpsSqN => NormBound::EpsSqN,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Whitespace,
    Json,
}

impl From<FormatArg> for TextFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Whitespace => TextFormat::Whitespace,
            FormatArg::Json => TextFormat::Json,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AttackKindArg {
    GaussianPerturb,
    TokenSubstitute,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Keygen(a) => cmd_keygen(cli, a),
        Cmd::Watermark(a) => cmd_watermark(cli, a),
        Cmd::DetectWeights(a) => cmd_detect_weights(cli, a),
        Cmd::DetectText(a) => cmd_detect_text(cli, a),
        Cmd::Generate(a) => cmd_generate(cli, a),
        Cmd::Attack(a) => cmd_attack(cli, a),
        Cmd::Calibrate(a) => cmd_calibrate(cli, a),
        Cmd::Sweep(kind) => cmd_sweep(cli, kind),
        Cmd::VerifyBounds(a) => cmd_verify_bounds(cli, a),
        Cmd::Report(a) => cmd_report(cli, a),
    }
}

fn load_config<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let raw = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&raw)?)
}

fn config_or_default<T: serde::de::DeserializeOwned + Default>(cli: &Cli) -> Result<T> {
    match &cli.config {
        Some(path) => load_config(path),
        None => Ok(T::default()),
    }
}

fn emit(cli: &Cli, content: &str) -> Result<()> {
    match &cli.out {
        Some(path) => Ok(fs::write(path, content)?),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn missing(what: &'static str, hint: &str) -> Error {
    Error::Format {
        what,
        reason: format!("missing parameter: {hint}"),
    }
}

fn cmd_keygen(cli: &Cli, a: &KeygenArgs) -> Result<()> {
    let file: KeygenConfig = config_or_default(cli)?;
    let n = a
        .n
        .or(file.n)
        .ok_or_else(|| missing("keygen parameters", "pass --n or a config with `n`"))?;
    let epsilon = a.epsilon.or(file.epsilon).ok_or_else(|| {
        missing(
            "keygen parameters",
            "pass --epsilon or a config with `epsilon`",
        )
    })?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let key = setup(n, epsilon, seed)?;
    emit(cli, &format!("{}\n", key_to_json(&key)))
}

fn cmd_watermark(cli: &Cli, a: &WatermarkArgs) -> Result<()> {
    let file: WatermarkConfig = config_or_default(cli)?;
    let key_path = a.key.clone().or(file.key).ok_or_else(|| {
        missing(
            "watermark parameters",
            "pass --key or a config with `key`",
        )
    })?;
    let key = read_key_file(&key_path)?;
    let original = match a.original.clone().or(file.original) {
        Some(p) => read_bias_file(&p)?,
        None => BiasVector::zeros(key.n(), Label::Original),
    };
    let marked = watermark(&original, &key)?;
    emit(cli, &format!("{}\n", bias_to_json(&marked)))
}

fn cmd_detect_weights(cli: &Cli, a: &DetectWeightsArgs) -> Result<()> {
    let mut cfg: WeightDetectConfig = config_or_default(cli)?;
    if let Some(tau) = a.tau {
        cfg.tau = tau;
    }
    if let Some(nb) = a.norm_bound {
        cfg.norm_bound = nb.into();
    }
    let key = read_key_file(&a.key)?;
    let candidate = read_bias_file(&a.candidate)?;
    let original = match &a.original {
        Some(p) => read_bias_file(p)?,
        None => BiasVector::zeros(key.n(), Label::Original),
    };
    let report = weight_detect(&candidate, &original, &key, &cfg)?;
    emit(cli, &format!("{}\n", report.to_json()))
}

fn cmd_detect_text(cli: &Cli, a: &DetectTextArgs) -> Result<()> {
    let mut cfg: TextDetectConfig = config_or_default(cli)?;
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = a.tau_text {
        cfg.tau_text = v;
    }
    if let Some(v) = a.min_distinct {
        cfg.min_distinct_report = v;
    }
    let key = read_key_file(&a.key)?;
    let raw = match (&a.input, &a.text) {
        (Some(path), _) => fs::read_to_string(path)?,
        (None, Some(text)) => text.clone(),
        (None, None) => unreachable!("clap group requires one source"),
    };
    let seq = parse_token_sequence(&raw, a.format.into(), key.n())?;
    let report = match a.detector {
        DetectorArg::InnerProduct => text_detect(&seq, &key, &cfg)?,
        DetectorArg::Count => count_detect(&seq, &key, &cfg)?,
    };
    emit(cli, &format!("{}\n", report.to_json()))
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ModelFileConfig {
    model: ToyModelSpec,
    generation: GenerationConfig,
}

fn resolve_model_gen(
    cli: &Cli,
    model: &ModelArgs,
    max_tokens: Option<usize>,
    temperature: Option<f64>,
    prompt: Option<&[u32]>,
) -> Result<(ToyModelSpec, GenerationConfig)> {
    let mut file: ModelFileConfig = config_or_default(cli)?;
    model.apply(&mut file.model);
    if let Some(v) = max_tokens {
        file.generation.max_tokens = v;
    }
    if let Some(v) = temperature {
        file.generation.temperature = v;
    }
    if let Some(p) = prompt {
        file.generation.prompt = p.to_vec();
    }
    if let Some(s) = cli.seed {
        file.generation.sampler_seed = s;
    }
    Ok((file.model, file.generation))
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let (spec, gen) = resolve_model_gen(
        cli,
        &a.model,
        a.max_tokens,
        a.temperature,
        a.prompt.as_deref(),
    )?;
    let model = ToyModel::new(spec)?;
    let bias = match &a.bias {
        Some(p) => read_bias_file(p)?,
        None => BiasVector::zeros(model.spec().n, Label::Original),
    };
    let seq = model.generate(&bias, &gen)?;
    emit(cli, &format!("{}\n", format_tokens(seq.tokens(), a.format.into())))
}

fn cmd_attack(cli: &Cli, a: &AttackArgs) -> Result<()> {
    let file: Option<AttackSpec> = match &cli.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let kind = match (a.kind, file.map(|s| s.kind)) {
        (Some(AttackKindArg::GaussianPerturb), _) => AttackKind::GaussianPerturb,
        (Some(AttackKindArg::TokenSubstitute), _) => AttackKind::TokenSubstitute,
        (None, Some(k)) => k,
        (None, None) => {
            return Err(missing(
                "attack parameters",
                "pass --kind or a config with `kind`",
            ))
        }
    };
    let magnitude = a.magnitude.or(file.map(|s| s.magnitude)).ok_or_else(|| {
        missing(
            "attack parameters",
            "pass --magnitude or a config with `magnitude`",
        )
    })?;
    let seed = cli.seed.or(file.map(|s| s.seed)).unwrap_or(0);
    match kind {
        AttackKind::GaussianPerturb => {
            let epsilon = a
                .key_epsilon
                .ok_or_else(|| missing("attack parameters", "gaussian-perturb needs --key-epsilon"))?;
            let w = read_bias_file(&a.input)?;
            let attacked = gaussian_perturb_attack(&w, epsilon, magnitude, seed)?;
            emit(cli, &format!("{}\n", bias_to_json(&attacked)))
        }
        AttackKind::TokenSubstitute => {
            let n = a
                .n
                .ok_or_else(|| missing("attack parameters", "token-substitute needs --n"))?;
            let raw = fs::read_to_string(&a.input)?;
            let seq = parse_token_sequence(&raw, a.format.into(), n)?;
            let attacked = token_substitute_attack(&seq, magnitude, seed)?;
            emit(
                cli,
                &format!("{}\n", format_tokens(attacked.tokens(), a.format.into())),
            )
        }
        AttackKind::CustomBiasEdit => Err(Error::InvalidParameter {
            name: "kind",
            reason: "custom_bias_edit attacks are library-only; \
                     use gaussian_perturb or token_substitute"
                .into(),
        }),
    }
}

fn cmd_calibrate(cli: &Cli, a: &CalibrateArgs) -> Result<()> {
    let (spec, gen) = resolve_model_gen(
        cli,
        &a.model,
        a.max_tokens,
        a.temperature,
        a.prompt.as_deref(),
    )?;
    let seed = cli.seed.unwrap_or(0);
    let detector: Detector = a.detector.into();
    let threshold = calibrate_threshold(detector, &spec, &gen, a.epsilon, a.fpr, a.trials, seed)?;
    let summary = json!({
        "detector": detector.name(),
        "epsilon": a.epsilon,
        "target_fpr": a.fpr,
        "trials": a.trials,
        "seed": seed,
        "threshold": threshold,
    });
    emit(cli, &format!("{summary}\n"))
}

type SweepRunner = fn(&ExperimentConfig) -> Result<Vec<SweepRow>>;

fn cmd_sweep(cli: &Cli, kind: &SweepCmd) -> Result<()> {
    let (args, runner): (&SweepArgs, SweepRunner) = match kind {
        SweepCmd::Detect(a) => (a, run_detectability_sweep),
        SweepCmd::Remove(a) => (a, run_removal_sweep),
        SweepCmd::Substitute(a) => (a, run_substitution_sweep),
    };
    let mut cfg: ExperimentConfig = config_or_default(cli)?;
    if let Some(v) = args.master_seed.or(cli.seed) {
        cfg.master_seed = v;
    }
    if let Some(v) = &args.epsilons {
        cfg.epsilons = v.clone();
    }
    if let Some(v) = args.responses_per_point {
        cfg.responses_per_point = v;
    }
    if let Some(v) = &args.target_fprs {
        cfg.target_fprs = v.clone();
    }
    if let Some(v) = args.calibration_trials {
        cfg.calibration_trials = v;
    }
    if let Some(v) = args.min_distinct {
        cfg.min_distinct = v;
    }
    if let Some(v) = &args.attack_ks {
        cfg.attack_ks = v.clone();
    }
    if let Some(v) = &args.substitution_rhos {
        cfg.substitution_rhos = v.clone();
    }
    if let Some(v) = args.quality_contexts {
        cfg.quality_contexts = v;
    }
    if let Some(v) = args.cert_c1 {
        cfg.cert_c1 = v;
    }
    if let Some(v) = args.cert_c2 {
        cfg.cert_c2 = v;
    }
    if let Some(v) = args.max_tokens {
        cfg.max_tokens = v;
    }
    if let Some(v) = args.temperature {
        cfg.temperature = v;
    }
    if let Some(v) = &args.prompt {
        cfg.prompt = v.clone();
    }
    args.model.apply(&mut cfg.model);
    let rows = runner(&cfg)?;
    emit(cli, &rows_to_csv_string(&rows)?)
}

fn cmd_verify_bounds(cli: &Cli, a: &VerifyBoundsArgs) -> Result<()> {
    let file: BoundsConfig = config_or_default(cli)?;
    let trials = a.trials.or(file.trials).unwrap_or(20_000);
    let n = a.n.or(file.n).unwrap_or(4096);
    let epsilon = a.epsilon.or(file.epsilon).unwrap_or(0.5);
    let tau = a.tau.or(file.tau).unwrap_or(0.5);
    let seed = cli.seed.unwrap_or(0);

    let mut lines = String::new();
    let mut push = |name: &str, value: serde_json::Value| {
        lines.push_str(&json!({ "check": name, "result": value }).to_string());
        lines.push('\n');
    };

    let norm = check_gaussian_norm_tail(n, 0.25, trials, seed)?;
    push("gaussian_norm_concentration", serde_json::to_value(&norm)?);

    let tail = check_gaussian_tail(epsilon, 3.0 * epsilon, trials, seed)?;
    push("gaussian_tail", serde_json::to_value(&tail)?);

    let hoeffding = check_hoeffding(64, -1.0, 1.0, 16.0, trials, seed)?;
    push("hoeffding", serde_json::to_value(&hoeffding)?);

    let lemma_spec = ToyModelSpec {
        n: 64,
        context_order: 1,
        logit_scale: 0.0,
        base_seed: 3,
        ..ToyModelSpec::default()
    };
    let lemma = check_expected_val_lemma(
        &lemma_spec,
        0.2,
        2.0,
        0.5,
        0.0,
        1.0,
        trials.min(4000),
        seed,
    )?;
    push("expected_val_lemma", serde_json::to_value(lemma)?);

    let budget = loss_budget(n, epsilon);
    let geometry = check_unremovability_geometry(
        n,
        epsilon,
        tau,
        &[0.25 * budget, budget, 4.0 * budget],
        trials.min(5000),
        seed,
    )?;
    push("unremovability_geometry", serde_json::to_value(&geometry)?);

    emit(cli, &lines)
}

/// Formats like `{}` so 0.01 prints as "0.01" and 1.0 as "1".
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn cmd_report(cli: &Cli, a: &ReportArgs) -> Result<()> {
    let mut rows: Vec<SweepRow> = Vec::new();
    for path in &a.inputs {
        rows.extend(read_sweep_csv(path)?);
    }
    let mut groups: BTreeMap<(String, String, String, String), Vec<&SweepRow>> = BTreeMap::new();
    for row in &rows {
        groups
            .entry((
                row.sweep.clone(),
                row.attack.clone(),
                row.detector.clone(),
                fmt_f64(row.target_fpr),
            ))
            .or_default()
            .push(row);
    }

    let mut out = String::new();
    out.push_str(&format!(
        "{} rows from {} file(s)\n\n",
        rows.len(),
        a.inputs.len()
    ));
    out.push_str(&format!(
        "{:<12} {:<20} {:<14} {:>6} {:>4} {:>12} {:>9} {:>9} {:>9} {:>10} {:>7} {:>10}\n",
        "sweep",
        "attack",
        "detector",
        "fpr",
        "pts",
        "eps",
        "tpr_mean",
        "tpr_min",
        "tpr_max",
        "kl_mean",
        "delta",
        "filtered"
    ));
    for ((sweep, attack, detector, fpr), members) in &groups {
        let count = members.len() as f64;
        let tprs: Vec<f64> = members.iter().map(|r| r.tpr).collect();
        let tpr_mean = tprs.iter().sum::<f64>() / count;
        let tpr_min = tprs.iter().cloned().fold(f64::INFINITY, f64::min);
        let tpr_max = tprs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let kl_mean = members.iter().map(|r| r.quality_kl).sum::<f64>() / count;
        let delta_mean = members.iter().map(|r| r.empirical_delta).sum::<f64>() / count;
        let filtered: usize = members.iter().map(|r| r.filtered_out).sum();
        let trials: usize = members.iter().map(|r| r.trials).sum();
        let eps_min = members.iter().map(|r| r.epsilon).fold(f64::INFINITY, f64::min);
        let eps_max = members
            .iter()
            .map(|r| r.epsilon)
            .fold(f64::NEG_INFINITY, f64::max);
        let eps_range = if eps_min == eps_max {
            fmt_f64(eps_min)
        } else {
            format!("{}..{}", fmt_f64(eps_min), fmt_f64(eps_max))
        };
        out.push_str(&format!(
            "{:<12} {:<20} {:<14} {:>6} {:>4} {:>12} {:>9.4} {:>9.4} {:>9.4} {:>10.6} {:>7.3} {:>10}\n",
            sweep,
            attack,
            detector,
            fpr,
            members.len(),
            eps_range,
            tpr_mean,
            tpr_min,
            tpr_max,
            kl_mean,
            delta_mean,
            format!("{filtered}/{trials}")
        ));
    }
    emit(cli, &out)
}
