//! Gaussian bias-vector watermarking for autoregressive language models.
//!
//! An owner who is about to publish model weights samples a secret key
//! Δ ∈ ℝⁿ with i.i.d. N(0, ε²) coordinates over the n-token vocabulary
//! and ships `x' = x + Δ` instead of `x`, where `x` is the final-layer
//! bias (equivalently, a per-token logit offset). Detection comes in two
//! forms:
//!
//! * **Weight detection** ([`weight_detect`]): given candidate weights
//!   `c`, test the correlation `(c − x)·Δ` against `τ·ε²·n` and the
//!   residual norm `‖c − x'‖` against a bound. This identifies
//!   republished or lightly modified copies of the weights.
//! * **Text detection** ([`text_detect`], [`count_detect`]): given only
//!   tokens sampled from the model, accumulate Δ over the first
//!   occurrence of each distinct token and flag the text once enough
//!   distinct tokens have been seen and the running sum crosses
//!   `distinct · ε² · τ`. The count detector is a coarser baseline that
//!   only looks at the fraction of positive-bias tokens.
//!
//! The rest of the crate supports evaluating that scheme end to end:
//! a deterministic toy autoregressive model ([`toy_lm`]) with an
//! entropy-quality certificate, removal and substitution attacks with a
//! removability game ([`attack`]), threshold calibration against
//! fresh-key nulls ([`calibrate`]), reproducible experiment sweeps with
//! CSV output ([`sweep`]), and Monte Carlo checks of the analytic
//! guarantees ([`bounds`]).
//!
//! All randomness flows through seeded ChaCha12 streams ([`rng`]); every
//! public experiment is a pure function of its seeds and parameters.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod bounds;
pub mod calibrate;
pub mod error;
pub mod io;
pub mod key;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod text;
pub mod text_detect;
pub mod toy_lm;
pub mod vector;
pub mod watermark;

pub use attack::{
    play_removability_game, AttackKind, AttackSpec, GameAttacker, GameOutcome, GamePublic,
};
pub use calibrate::{calibrate_threshold, Detector};
pub use error::{Error, Result};
pub use key::{setup, WatermarkKey, MAX_DIMENSION};
pub use report::DetectionReport;
pub use sweep::{
    read_sweep_csv, rows_from_csv_string, rows_to_csv_string, run_detectability_sweep,
    run_removal_sweep, run_substitution_sweep, write_sweep_csv, ExperimentConfig, SweepRow,
};
pub use text::{parse_token_sequence, TextFormat, TokenSequence};
pub use text_detect::{
    count_detect, normalized_scores, text_detect, NormalizedScores, TextDetectConfig,
};
pub use toy_lm::{
    certify_entropy_quality, EntropyQualityCert, GenerationConfig, StepDistribution, ToyModel,
    ToyModelSpec,
};
pub use vector::{BiasVector, Label};
pub use watermark::{
    embedding_cost, loss_budget, quality_loss, watermark, weight_detect, NormBound,
    QualityLossReport, WeightDetectConfig,
};
