//! Attacks on the watermark and the removability game.
//!
//! Two concrete attackers are built in: additive Gaussian noise on the
//! bias vector (weight-space) and uniform token substitution (text-space).
//! `play_removability_game` runs the full challenger/adversary loop for
//! weight-space attackers: the adversary sees only the watermarked bias
//! and public parameters, and wins a trial when detection fails while its
//! output stays within the ℓ(n) distortion budget of the hidden original.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::key::setup;
use crate::rng::{derive_seed, normal_vec, rng_from_seed};
use crate::text::TokenSequence;
use crate::vector::{l2_distance, BiasVector, Label};
use crate::watermark::{loss_budget, watermark, weight_detect, WeightDetectConfig};

const TAG_GAME: u64 = 0x47414d45;
const TAG_SUBST_POS: u64 = 0x53554250;
const TAG_SUBST_TOK: u64 = 0x53554254;

/// Declarative attack description, as accepted by the CLI.
///
/// `magnitude` is the noise multiplier k for `gaussian_perturb` (noise sd
/// is k·ε) and the substitution rate ρ for `token_substitute`.
/// `custom_bias_edit` marks attacks supplied as closures through
/// [`GameAttacker::Custom`]; it carries no parameters a file could express.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub magnitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    GaussianPerturb,
    TokenSubstitute,
    CustomBiasEdit,
}

/// w + N(0, (k·ε)² I), labelled adversarial.
pub fn gaussian_perturb_attack(
    w: &BiasVector,
    key_epsilon: f64,
    k: f64,
    seed: u64,
) -> Result<BiasVector> {
    if !k.is_finite() || k < 0.0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("must be finite and >= 0, got {k}"),
        });
    }
    if !key_epsilon.is_finite() || key_epsilon < 0.0 {
        return Err(Error::InvalidParameter {
            name: "key_epsilon",
            reason: format!("must be finite and >= 0, got {key_epsilon}"),
        });
    }
    let noise = normal_vec(&mut rng_from_seed(seed), w.len(), k * key_epsilon);
    w.add(&noise, Label::Adversarial)
}

/// Number of positions `token_substitute_attack` rewrites: ⌈ρ·len⌉, with a
/// 1e-9 slack so exact products like 0.3·10 do not round up to 4.
pub fn substitution_count(len: usize, rho: f64) -> usize {
    let raw = rho * len as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(len)
}

/// Replaces ⌈ρ·len⌉ positions, chosen uniformly without replacement, with
/// uniform random token ids. Length is preserved; a replacement may
/// coincide with the original token.
///
/// For a fixed seed the choice is prefix-coupled in ρ: the attack at rate
/// ρ₁ < ρ₂ rewrites a subset of the positions rewritten at ρ₂, with the
/// same replacement values. Sweeps rely on this to compare rates on a
/// common sample path.
pub fn token_substitute_attack(text: &TokenSequence, rho: f64, seed: u64) -> Result<TokenSequence> {
    if !(0.0..=1.0).contains(&rho) || !rho.is_finite() {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("must lie in [0, 1], got {rho}"),
        });
    }
    let len = text.len();
    let m = substitution_count(len, rho);
    let mut tokens = text.tokens().to_vec();
    if m > 0 {
        let mut positions: Vec<usize> = (0..len).collect();
        let mut pos_rng = rng_from_seed(derive_seed(seed, &[TAG_SUBST_POS]));
        // Partial Fisher-Yates: the first m slots are a uniform sample
        // without replacement, and extending m only appends to it.
        for i in 0..len.min(len - 1) {
            let j = rand::Rng::random_range(&mut pos_rng, i..len);
            positions.swap(i, j);
        }
        let mut tok_rng = rng_from_seed(derive_seed(seed, &[TAG_SUBST_TOK]));
        for &p in positions.iter().take(m) {
            tokens[p] = rand::Rng::random_range(&mut tok_rng, 0..text.n() as u32);
        }
    }
    TokenSequence::new(tokens, text.n())
}

/// Public knowledge available to a weight-space attacker: everything
/// except the original bias and the key's delta.
#[derive(Debug, Clone, Copy)]
pub struct GamePublic {
    pub n: usize,
    pub epsilon: f64,
}

/// Adversary in the removability game.
///
/// `Custom` receives only the watermarked bias and the public parameters;
/// the harness never exposes the original or the delta to it.
/// `OracleOriginal` is the deliberate exception for tests: it plays back
/// the hidden original, showing what an attacker with perfect knowledge
/// achieves and thereby that the secrecy assumption carries the scheme.
pub enum GameAttacker<'a> {
    Identity,
    GaussianPerturb { k: f64 },
    Custom(&'a dyn Fn(&BiasVector, &GamePublic) -> BiasVector),
    OracleOriginal,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GameOutcome {
    pub trials: usize,
    pub wins: usize,
    pub win_rate: f64,
    /// 95% Wilson score interval for the win rate.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean ‖z − w_wat‖: how far the attacker moved the weights.
    pub mean_attack_norm: f64,
    /// Mean ‖z − w*‖: distortion against the hidden original.
    pub mean_distortion: f64,
    /// ℓ(n) distortion budget a winning output must stay within.
    pub budget: f64,
}

/// Runs `trials` rounds: sample w* ~ N(0, content_sigma² I), watermark it
/// with a fresh key, hand the watermarked bias to the attacker, then score
/// `weight_detect(z, w*, key)` and the distortion ‖z − w*‖ against ℓ(n).
pub fn play_removability_game(
    attacker: &GameAttacker,
    content_sigma: f64,
    n: usize,
    epsilon: f64,
    cfg: &WeightDetectConfig,
    trials: usize,
    seed: u64,
) -> Result<GameOutcome> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    if !content_sigma.is_finite() || content_sigma < 0.0 {
        return Err(Error::InvalidParameter {
            name: "content_sigma",
            reason: format!("must be finite and >= 0, got {content_sigma}"),
        });
    }
    let public = GamePublic { n, epsilon };
    let budget = loss_budget(n, epsilon);
    let mut wins = 0usize;
    let mut attack_norm_sum = 0.0;
    let mut distortion_sum = 0.0;
    for t in 0..trials {
        let t64 = t as u64;
        let original = BiasVector::new(
            normal_vec(
                &mut rng_from_seed(derive_seed(seed, &[TAG_GAME, t64, 0])),
                n,
                content_sigma,
            ),
            Label::Original,
        )?;
        let key = setup(n, epsilon, derive_seed(seed, &[TAG_GAME, t64, 1]))?;
        let watermarked = watermark(&original, &key)?;
        let z = match attacker {
            GameAttacker::Identity => watermarked.clone(),
            GameAttacker::GaussianPerturb { k } => gaussian_perturb_attack(
                &watermarked,
                epsilon,
                *k,
                derive_seed(seed, &[TAG_GAME, t64, 2]),
            )?,
            GameAttacker::Custom(f) => f(&watermarked, &public),
            GameAttacker::OracleOriginal => original.clone().with_label(Label::Adversarial),
        };
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        let detected = weight_detect(&z, &original, &key, cfg)?.decision;
        let distortion = l2_distance(z.values(), original.values());
        if !detected && distortion <= budget {
            wins += 1;
        }
        attack_norm_sum += l2_distance(z.values(), watermarked.values());
        distortion_sum += distortion;
    }
    let (ci_low, ci_high) = wilson_interval(wins, trials, 1.96);
    Ok(GameOutcome {
        trials,
        wins,
        win_rate: wins as f64 / trials as f64,
        ci_low,
        ci_high,
        mean_attack_norm: attack_norm_sum / trials as f64,
        mean_distortion: distortion_sum / trials as f64,
        budget,
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
