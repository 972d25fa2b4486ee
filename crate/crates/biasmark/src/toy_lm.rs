//! A deterministic toy autoregressive model.
//!
//! Real language models are far too heavy for the Monte Carlo experiments
//! here, so this module fakes one with the same interface contract: a
//! context-conditional categorical distribution over n tokens, produced by
//! softmax((logits + bias) / temperature). Logits are pseudo-random
//! standard normals scaled by `logit_scale`, derived purely from
//! (base_seed, last `context_order` tokens), so the same context always
//! yields the same distribution and experiments are replayable from seeds.
//!
//! An optional plateau mimics how a real model concentrates on a handful
//! of plausible next tokens: per context, `plateau_size` pseudo-random
//! tokens get `plateau_boost` added to their logits. With a zero or small
//! `logit_scale` this yields steps that are near-uniform over a small
//! significant set, the regime where entropy-quality certificates with
//! tight constants actually hold.
//!
//! The bias argument is the watermark surface: generation with
//! bias = x + Δ is "text from the watermarked model".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, normal_vec, rng_from_seed};
use crate::text::TokenSequence;
use crate::vector::BiasVector;

const TAG_LOGITS: u64 = 0x4c4f_4749_5453;
const TAG_PLATEAU: u64 = 0x504c_4154;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyModelSpec {
    /// Alphabet size.
    pub n: usize,
    /// How many trailing context tokens the logits depend on.
    pub context_order: usize,
    /// Standard deviation of the raw logits. 0 gives a uniform model.
    pub logit_scale: f64,
    /// Seed for the logit tables.
    pub base_seed: u64,
    /// Probability floor defining the significant token set of a step.
    pub significance_floor: f64,
    /// Context-dependent plausible-token set size; 0 disables the plateau.
    pub plateau_size: usize,
    /// Logit boost added to each plateau token.
    pub plateau_boost: f64,
}

impl Default for ToyModelSpec {
    fn default() -> Self {
        Self {
            n: 4096,
            context_order: 2,
            logit_scale: 1.0,
            base_seed: 0,
            significance_floor: 1e-9,
            plateau_size: 0,
            plateau_boost: 0.0,
        }
    }
}

impl ToyModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > crate::key::MAX_DIMENSION {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("alphabet size must be in 2..={}, got {}", crate::key::MAX_DIMENSION, self.n),
            });
        }
        if !self.logit_scale.is_finite() || self.logit_scale < 0.0 {
            return Err(Error::InvalidParameter {
                name: "logit_scale",
                reason: format!("must be finite and >= 0, got {}", self.logit_scale),
            });
        }
        if !(self.significance_floor > 0.0 && self.significance_floor < 1.0) {
            return Err(Error::InvalidParameter {
                name: "significance_floor",
                reason: format!("must lie in (0, 1), got {}", self.significance_floor),
            });
        }
        if self.plateau_size > self.n {
            return Err(Error::InvalidParameter {
                name: "plateau_size",
                reason: format!(
                    "cannot exceed alphabet size {}, got {}",
                    self.n, self.plateau_size
                ),
            });
        }
        if !self.plateau_boost.is_finite() {
            return Err(Error::InvalidParameter {
                name: "plateau_boost",
                reason: format!("must be finite, got {}", self.plateau_boost),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub max_tokens: usize,
    pub temperature: f64,
    /// Initial context; generated tokens are appended after it.
    pub prompt: Vec<u32>,
    pub sampler_seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            max_tokens: 300,
            temperature: 0.9,
            prompt: Vec::new(),
            sampler_seed: 0,
        }
    }
}

/// One step's conditional distribution.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    probs: Vec<f64>,
    significant: Vec<u32>,
    /// Set by callers that ran [`certify_entropy_quality`]; (c1, c2).
    pub entropy_cert: Option<(f64, f64)>,
}

impl StepDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Token ids with probability at or above the significance floor,
    /// ascending.
    pub fn significant_set(&self) -> &[u32] {
        &self.significant
    }

    pub fn significant_mass(&self) -> f64 {
        self.significant
            .iter()
            .map(|&t| self.probs[t as usize])
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct ToyModel {
    spec: ToyModelSpec,
}

impl ToyModel {
    pub fn new(spec: ToyModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &ToyModelSpec {
        &self.spec
    }

    /// Raw logits for a context. Only the trailing `context_order` tokens
    /// participate; shorter contexts (including the empty prompt) hash
    /// their full length.
    pub fn logits(&self, context: &[u32]) -> Vec<f64> {
        let tail_len = context.len().min(self.spec.context_order);
        let tail = &context[context.len() - tail_len..];
        let mut tags = Vec::with_capacity(tail_len + 2);
        tags.push(TAG_LOGITS);
        tags.push(tail_len as u64);
        tags.extend(tail.iter().map(|&t| t as u64));
        let seed = derive_seed(self.spec.base_seed, &tags);
        let mut logits =
            normal_vec(&mut rng_from_seed(seed), self.spec.n, self.spec.logit_scale);
        if self.spec.plateau_size > 0 {
            tags[0] = TAG_PLATEAU;
            let plateau_seed = derive_seed(self.spec.base_seed, &tags);
            for t in sample_distinct(
                self.spec.n,
                self.spec.plateau_size,
                &mut rng_from_seed(plateau_seed),
            ) {
                logits[t] += self.spec.plateau_boost;
            }
        }
        logits
    }

    /// The plateau token set for a context (empty when disabled), sorted.
    pub fn plateau(&self, context: &[u32]) -> Vec<u32> {
        if self.spec.plateau_size == 0 {
            return Vec::new();
        }
        let tail_len = context.len().min(self.spec.context_order);
        let tail = &context[context.len() - tail_len..];
        let mut tags = Vec::with_capacity(tail_len + 2);
        tags.push(TAG_PLATEAU);
        tags.push(tail_len as u64);
        tags.extend(tail.iter().map(|&t| t as u64));
        let seed = derive_seed(self.spec.base_seed, &tags);
        let mut set: Vec<u32> =
            sample_distinct(self.spec.n, self.spec.plateau_size, &mut rng_from_seed(seed))
                .into_iter()
                .map(|t| t as u32)
                .collect();
        set.sort_unstable();
        set
    }

    /// softmax((logits + bias) / temperature) with the significant set.
    pub fn step_distribution(
        &self,
        context: &[u32],
        bias: &BiasVector,
        temperature: f64,
    ) -> Result<StepDistribution> {
        if bias.len() != self.spec.n {
            return Err(Error::DimensionMismatch {
                expected: self.spec.n,
                got: bias.len(),
            });
        }
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: format!("must be finite and > 0, got {temperature}"),
            });
        }
        let logits = self.logits(context);
        let probs = softmax_scaled(&logits, bias.values(), temperature);
        let significant: Vec<u32> = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= self.spec.significance_floor)
            .map(|(t, _)| t as u32)
            .collect();
        if significant.is_empty() {
            return Err(Error::EmptySignificantSet);
        }
        Ok(StepDistribution {
            probs,
            significant,
            entropy_cert: None,
        })
    }

    /// Samples `max_tokens` tokens autoregressively after the prompt.
    /// Deterministic in (spec, bias, cfg).
    pub fn generate(&self, bias: &BiasVector, cfg: &GenerationConfig) -> Result<TokenSequence> {
        for &t in &cfg.prompt {
            if t as usize >= self.spec.n {
                return Err(Error::TokenOutOfRange {
                    token: t,
                    n: self.spec.n,
                });
            }
        }
        let mut sampler = rng_from_seed(derive_seed(cfg.sampler_seed, &[0x53414d50]));
        let mut context = cfg.prompt.clone();
        let mut out = Vec::with_capacity(cfg.max_tokens);
        for _ in 0..cfg.max_tokens {
            let dist = self.step_distribution(&context, bias, cfg.temperature)?;
            let token = sample_index(dist.probs(), &mut sampler);
            context.push(token);
            out.push(token);
        }
        TokenSequence::new(out, self.spec.n)
    }
}

/// Numerically stable softmax of (logits + bias) / temperature.
fn softmax_scaled(logits: &[f64], bias: &[f64], temperature: f64) -> Vec<f64> {
    debug_assert_eq!(logits.len(), bias.len());
    let scaled: Vec<f64> = logits
        .iter()
        .zip(bias)
        .map(|(l, b)| (l + b) / temperature)
        .collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = scaled.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

/// Floyd's algorithm: m distinct indices from 0..n in O(m) draws.
fn sample_distinct(
    n: usize,
    m: usize,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> std::collections::HashSet<usize> {
    debug_assert!(m <= n);
    let mut chosen = std::collections::HashSet::with_capacity(m);
    for j in n - m..n {
        let t = rand::Rng::random_range(rng, 0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen
}

/// Inverse-CDF sampling from a probability vector.
fn sample_index(probs: &[f64], rng: &mut rand_chacha::ChaCha12Rng) -> u32 {
    let u: f64 = rand::Rng::random(rng);
    let mut acc = 0.0;
    for (t, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return t as u32;
        }
    }
    (probs.len() - 1) as u32
}

/// Tightest entropy and quality constants of a step, plus whether the
/// requested bounds hold.
///
/// * `c1`: smallest value with p_t ≥ 1/(c1·|T|) for every significant t,
///   i.e. how far the step is from uniform over its significant set.
/// * `c2`: largest value with q_t ≥ c2·p_t on the significant set, i.e.
///   how much probability the reference model q concedes to p there.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EntropyQualityCert {
    pub c1: f64,
    pub c2: f64,
    pub satisfied: bool,
}

pub fn certify_entropy_quality(
    p: &StepDistribution,
    q: &StepDistribution,
    c1_max: f64,
    c2_min: f64,
) -> Result<EntropyQualityCert> {
    if p.probs.len() != q.probs.len() {
        return Err(Error::DimensionMismatch {
            expected: p.probs.len(),
            got: q.probs.len(),
        });
    }
    let t_set = p.significant_set();
    if t_set.is_empty() {
        return Err(Error::EmptySignificantSet);
    }
    let size = t_set.len() as f64;
    let mut c1 = 0.0f64;
    let mut c2 = f64::INFINITY;
    for &t in t_set {
        let pt = p.probs[t as usize];
        let qt = q.probs[t as usize];
        c1 = c1.max(1.0 / (size * pt));
        c2 = c2.min(qt / pt);
    }
    // Consistency of the two constants: 1/q_t ≤ c1·|T|/c2 must hold on the
    // significant set whenever both were computed as above.
    if c2 > 0.0 {
        let cap = c1 * size / c2;
        for &t in t_set {
            debug_assert!(
                1.0 / q.probs[t as usize] <= cap * (1.0 + 1e-9),
                "certificate arithmetic inconsistent at token {t}"
            );
        }
    }
    Ok(EntropyQualityCert {
        c1,
        c2,
        satisfied: c1 <= c1_max && c2 >= c2_min,
    })
}
