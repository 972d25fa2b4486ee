//! Experiment sweeps: detectability, removal, and substitution grids.
//!
//! Every sweep is a deterministic function of an [`ExperimentConfig`]:
//! per-trial seeds are derived from `master_seed` with fixed tags, so a
//! repeated run reproduces the output CSV byte for byte. The detect and
//! substitution sweeps share generation seeds, which makes the ρ = 0
//! substitution rows identical to the unattacked baseline rows.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::{gaussian_perturb_attack, token_substitute_attack};
use crate::calibrate::{calibrate_threshold, Detector};
use crate::error::{Error, Result};
use crate::key::setup;
use crate::rng::derive_seed;
use crate::text::TokenSequence;
use crate::text_detect::normalized_scores;
use crate::toy_lm::{certify_entropy_quality, GenerationConfig, ToyModel, ToyModelSpec};
use crate::vector::{l2_distance, BiasVector, Label};

const TAG_CALIBRATE: u64 = 0x53570001;
const TAG_GEN_KEY: u64 = 0x53570002;
const TAG_GEN_SAMPLE: u64 = 0x53570003;
const TAG_ATTACK_NOISE: u64 = 0x53570004;
const TAG_SUBSTITUTE: u64 = 0x53570005;
const TAG_QUALITY_CTX: u64 = 0x53570006;

/// How many leading responses per grid point feed the per-step
/// entropy-quality certificate, and the stride between certified steps.
const CERT_RESPONSES: usize = 12;
const CERT_STRIDE: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub epsilons: Vec<f64>,
    /// Watermarked responses generated per grid point.
    pub responses_per_point: usize,
    pub target_fprs: Vec<f64>,
    pub calibration_trials: usize,
    /// Responses with fewer distinct tokens are excluded from TPR.
    pub min_distinct: usize,
    pub attack_ks: Vec<f64>,
    pub substitution_rhos: Vec<f64>,
    /// Random contexts used for the KL quality estimate per grid point.
    pub quality_contexts: usize,
    /// Entropy-quality certificate targets (c1 upper, c2 lower).
    pub cert_c1: f64,
    pub cert_c2: f64,
    pub model: ToyModelSpec,
    pub max_tokens: usize,
    pub temperature: f64,
    pub prompt: Vec<u32>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            epsilons: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            responses_per_point: 200,
            target_fprs: vec![0.01, 0.05],
            calibration_trials: 2000,
            min_distinct: 20,
            attack_ks: vec![1.0, 2.0, 5.0],
            substitution_rhos: vec![0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9],
            quality_contexts: 128,
            cert_c1: 2.0,
            cert_c2: 0.5,
            model: ToyModelSpec::default(),
            max_tokens: 300,
            temperature: 0.9,
            prompt: vec![],
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epsilons.is_empty() {
            return Err(Error::InvalidParameter {
                name: "epsilons",
                reason: "at least one epsilon is required".into(),
            });
        }
        for &e in &self.epsilons {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "epsilons",
                    reason: format!("entries must be finite and >= 0, got {e}"),
                });
            }
        }
        if self.responses_per_point == 0 {
            return Err(Error::InvalidParameter {
                name: "responses_per_point",
                reason: "must be at least 1".into(),
            });
        }
        for &f in &self.target_fprs {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "target_fprs",
                    reason: format!("entries must lie in (0, 1), got {f}"),
                });
            }
        }
        for &k in &self.attack_ks {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "attack_ks",
                    reason: format!("entries must be finite and >= 0, got {k}"),
                });
            }
        }
        for &r in &self.substitution_rhos {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter {
                    name: "substitution_rhos",
                    reason: format!("entries must lie in [0, 1], got {r}"),
                });
            }
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: format!("must be finite and > 0, got {}", self.temperature),
            });
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidParameter {
                name: "max_tokens",
                reason: "must be at least 1".into(),
            });
        }
        for &t in &self.prompt {
            if t as usize >= self.model.n {
                return Err(Error::TokenOutOfRange {
                    token: t,
                    n: self.model.n,
                });
            }
        }
        if !(self.cert_c1 >= 1.0) || !(self.cert_c2 > 0.0 && self.cert_c2 <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "cert_c1/cert_c2",
                reason: format!(
                    "need c1 >= 1 and 0 < c2 <= 1, got ({}, {})",
                    self.cert_c1, self.cert_c2
                ),
            });
        }
        Ok(())
    }

    fn generation(&self, sampler_seed: u64) -> GenerationConfig {
        GenerationConfig {
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            prompt: self.prompt.clone(),
            sampler_seed,
        }
    }
}

/// Version of the CSV row layout; bumped on any column change.
pub const SWEEP_SCHEMA_VERSION: u32 = 1;

/// One output row: a (sweep, ε, attack, detector, target FPR) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub schema: u32,
    pub sweep: String,
    pub epsilon: f64,
    pub attack: String,
    pub detector: String,
    pub target_fpr: f64,
    pub threshold: f64,
    /// Responses generated for this grid point.
    pub trials: usize,
    /// Responses that met the `min_distinct` reporting floor.
    pub eligible: usize,
    pub hits: usize,
    pub tpr: f64,
    pub filtered_out: usize,
    pub mean_distinct: f64,
    /// Mean L2 distance between the served bias and the original weights.
    pub quality_l2: f64,
    /// Mean KL(unwatermarked ‖ served) over random contexts, in nats.
    pub quality_kl: f64,
    /// Fraction of sampled generation steps whose step distribution
    /// passed the (c1, c2) entropy-quality certificate.
    pub empirical_delta: f64,
}

struct TrialScore {
    inner: f64,
    fraction: f64,
    distinct: usize,
}

/// Everything measured at one grid point, before detector/FPR fan-out.
struct PointStats {
    scores: Vec<TrialScore>,
    quality_l2: f64,
    quality_kl: f64,
    certified_fraction: f64,
}

/// Detectability of unattacked watermarked text across epsilons.
pub fn run_detectability_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let model = ToyModel::new(cfg.model.clone())?;
    let mut rows = Vec::new();
    for (ei, &eps) in cfg.epsilons.iter().enumerate() {
        let thresholds = calibrate_point(cfg, eps)?;
        let stats = run_point(cfg, &model, eps, ei, 0.0, None)?;
        push_rows(&mut rows, cfg, "detect", eps, "none", &thresholds, &stats);
    }
    Ok(rows)
}

/// Detectability after a Gaussian perturbation attack of relative
/// strength k on the served weights, for each (ε, k) pair.
pub fn run_removal_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let model = ToyModel::new(cfg.model.clone())?;
    let mut rows = Vec::new();
    for (ei, &eps) in cfg.epsilons.iter().enumerate() {
        let thresholds = calibrate_point(cfg, eps)?;
        for &k in &cfg.attack_ks {
            let stats = run_point(cfg, &model, eps, ei, k, None)?;
            let label = format!("gaussian_k={}", fmt_f64(k));
            push_rows(&mut rows, cfg, "remove", eps, &label, &thresholds, &stats);
        }
    }
    Ok(rows)
}

/// Detectability after replacing a fraction ρ of tokens in the generated
/// text with uniform random tokens. Generations are shared across ρ
/// values (and with the detect sweep), so ρ only controls how far a
/// fixed per-trial substitution schedule is applied.
pub fn run_substitution_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let model = ToyModel::new(cfg.model.clone())?;
    let mut rows = Vec::new();
    for (ei, &eps) in cfg.epsilons.iter().enumerate() {
        let thresholds = calibrate_point(cfg, eps)?;
        for &rho in &cfg.substitution_rhos {
            let stats = run_point(cfg, &model, eps, ei, 0.0, Some(rho))?;
            let label = format!("substitute_rho={}", fmt_f64(rho));
            push_rows(
                &mut rows, cfg, "substitute", eps, &label, &thresholds, &stats,
            );
        }
    }
    Ok(rows)
}

/// Thresholds for every (detector, target FPR) pair at one epsilon.
/// Calibration seeds do not depend on the sweep kind, so detect, remove
/// and substitute runs at equal ε share thresholds.
fn calibrate_point(cfg: &ExperimentConfig, eps: f64) -> Result<BTreeMap<(usize, usize), f64>> {
    let eps_tag = eps.to_bits();
    let gen = cfg.generation(0);
    let mut out = BTreeMap::new();
    for (di, det) in [Detector::InnerProduct, Detector::Count].iter().enumerate() {
        for (fi, &fpr) in cfg.target_fprs.iter().enumerate() {
            let seed = derive_seed(cfg.master_seed, &[TAG_CALIBRATE, eps_tag, di as u64]);
            let thr = calibrate_threshold(
                *det,
                &cfg.model,
                &gen,
                eps,
                fpr,
                cfg.calibration_trials,
                seed,
            )?;
            out.insert((di, fi), thr);
        }
    }
    Ok(out)
}

/// Generates and scores all responses for one grid point.
///
/// `attack_k = 0` serves the watermarked weights unchanged; `rho` applies
/// token substitution after generation. Key and sampler seeds depend only
/// on (master, ε index, trial), so points at the same ε differ only in
/// the attack applied.
fn run_point(
    cfg: &ExperimentConfig,
    model: &ToyModel,
    eps: f64,
    eps_index: usize,
    attack_k: f64,
    rho: Option<f64>,
) -> Result<PointStats> {
    let n = cfg.model.n;
    let ei = eps_index as u64;
    let original = BiasVector::zeros(n, Label::Original);
    let k_tag = attack_k.to_bits();

    let mut scores = Vec::with_capacity(cfg.responses_per_point);
    let mut l2_sum = 0.0;
    let mut cert_pass = 0usize;
    let mut cert_total = 0usize;
    let mut kl_bias: Option<BiasVector> = None;

    for trial in 0..cfg.responses_per_point as u64 {
        let key = setup(n, eps, derive_seed(cfg.master_seed, &[TAG_GEN_KEY, ei, trial]))?;
        let watermarked = crate::watermark::watermark(&original, &key)?;
        let served = if attack_k > 0.0 {
            let noise_seed =
                derive_seed(cfg.master_seed, &[TAG_ATTACK_NOISE, ei, trial, k_tag]);
            gaussian_perturb_attack(&watermarked, eps, attack_k, noise_seed)?
        } else {
            watermarked
        };
        l2_sum += l2_distance(served.values(), original.values());

        let sampler_seed = derive_seed(cfg.master_seed, &[TAG_GEN_SAMPLE, ei, trial]);
        let mut text = model.generate(&served, &cfg.generation(sampler_seed))?;
        if let Some(rho) = rho {
            let sub_seed = derive_seed(cfg.master_seed, &[TAG_SUBSTITUTE, ei, trial]);
            text = token_substitute_attack(&text, rho, sub_seed)?;
        }

        let s = normalized_scores(&text, &key)?;
        scores.push(TrialScore {
            inner: s.inner,
            fraction: s.count_fraction,
            distinct: s.distinct,
        });

        if (trial as usize) < CERT_RESPONSES {
            let (pass, total) = certify_steps(cfg, model, &served, &text)?;
            cert_pass += pass;
            cert_total += total;
        }
        if trial == 0 {
            kl_bias = Some(served);
        }
    }

    let kl = mean_context_kl(
        cfg,
        model,
        kl_bias.as_ref().expect("responses_per_point >= 1"),
    )?;

    Ok(PointStats {
        scores,
        quality_l2: l2_sum / cfg.responses_per_point as f64,
        quality_kl: kl,
        certified_fraction: if cert_total == 0 {
            0.0
        } else {
            cert_pass as f64 / cert_total as f64
        },
    })
}

/// Replays every CERT_STRIDE-th step of a generated text and checks the
/// (c1, c2) certificate of the served distribution against the
/// unwatermarked one at the same context.
fn certify_steps(
    cfg: &ExperimentConfig,
    model: &ToyModel,
    served: &BiasVector,
    text: &TokenSequence,
) -> Result<(usize, usize)> {
    let zero = BiasVector::zeros(cfg.model.n, Label::Original);
    let mut context = cfg.prompt.clone();
    let mut pass = 0;
    let mut total = 0;
    for (i, &tok) in text.tokens().iter().enumerate() {
        if i % CERT_STRIDE == 0 {
            let p = model.step_distribution(&context, served, cfg.temperature)?;
            let q = model.step_distribution(&context, &zero, cfg.temperature)?;
            let cert = certify_entropy_quality(&p, &q, cfg.cert_c1, cfg.cert_c2)?;
            total += 1;
            if cert.satisfied {
                pass += 1;
            }
        }
        context.push(tok);
    }
    Ok((pass, total))
}

/// Mean KL(q ‖ p) in nats over random contexts, where q is the
/// unwatermarked step distribution and p the served one.
fn mean_context_kl(
    cfg: &ExperimentConfig,
    model: &ToyModel,
    served: &BiasVector,
) -> Result<f64> {
    let n = cfg.model.n;
    let zero = BiasVector::zeros(n, Label::Original);
    let mut rng = crate::rng::rng_from_seed(derive_seed(
        cfg.master_seed,
        &[TAG_QUALITY_CTX, served.values().len() as u64],
    ));
    let mut total = 0.0;
    for _ in 0..cfg.quality_contexts.max(1) {
        let context: Vec<u32> = (0..cfg.model.context_order)
            .map(|_| rand::Rng::random_range(&mut rng, 0..n as u32))
            .collect();
        let p = model.step_distribution(&context, served, cfg.temperature)?;
        let q = model.step_distribution(&context, &zero, cfg.temperature)?;
        let kl: f64 = q
            .probs()
            .iter()
            .zip(p.probs())
            .map(|(&qt, &pt)| if qt > 0.0 { qt * (qt / pt).ln() } else { 0.0 })
            .sum();
        total += kl;
    }
    Ok(total / cfg.quality_contexts.max(1) as f64)
}

fn push_rows(
    rows: &mut Vec<SweepRow>,
    cfg: &ExperimentConfig,
    sweep: &str,
    eps: f64,
    attack: &str,
    thresholds: &BTreeMap<(usize, usize), f64>,
    stats: &PointStats,
) {
    let eligible_scores: Vec<&TrialScore> = stats
        .scores
        .iter()
        .filter(|s| s.distinct >= cfg.min_distinct)
        .collect();
    let filtered_out = stats.scores.len() - eligible_scores.len();
    let mean_distinct = if stats.scores.is_empty() {
        0.0
    } else {
        stats.scores.iter().map(|s| s.distinct as f64).sum::<f64>() / stats.scores.len() as f64
    };
    for (di, det) in [Detector::InnerProduct, Detector::Count].iter().enumerate() {
        for (fi, &fpr) in cfg.target_fprs.iter().enumerate() {
            let threshold = thresholds[&(di, fi)];
            let hits = eligible_scores
                .iter()
                .filter(|s| {
                    let score = match det {
                        Detector::InnerProduct => s.inner,
                        Detector::Count => s.fraction,
                    };
                    score >= threshold
                })
                .count();
            let eligible = eligible_scores.len();
            rows.push(SweepRow {
                schema: SWEEP_SCHEMA_VERSION,
                sweep: sweep.to_string(),
                epsilon: eps,
                attack: attack.to_string(),
                detector: det.name().to_string(),
                target_fpr: fpr,
                threshold,
                trials: stats.scores.len(),
                eligible,
                hits,
                tpr: if eligible == 0 {
                    0.0
                } else {
                    hits as f64 / eligible as f64
                },
                filtered_out,
                mean_distinct,
                quality_l2: stats.quality_l2,
                quality_kl: stats.quality_kl,
                empirical_delta: stats.certified_fraction,
            });
        }
    }
}

/// Formats a float for attack labels without trailing zeros noise
/// ("1" not "1.0", "0.25" stays "0.25").
fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn rows_to_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Format {
                what: "sweep csv",
                reason: e.to_string(),
            })?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Format {
        what: "sweep csv",
        reason: e.to_string(),
    })?;
    String::from_utf8(bytes).map_err(|e| Error::Format {
        what: "sweep csv",
        reason: e.to_string(),
    })
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, rows_to_csv_string(rows)?)?;
    Ok(())
}

pub fn rows_from_csv_string(csv: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record.map_err(|e| Error::Format {
            what: "sweep csv",
            reason: e.to_string(),
        })?);
    }
    Ok(rows)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    rows_from_csv_string(&std::fs::read_to_string(path)?)
}
