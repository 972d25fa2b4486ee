//! Threshold calibration against fresh-key nulls.
//!
//! The null model for text detection is "this text was written with no
//! knowledge of the key": scores of a fixed text against freshly sampled
//! keys. Calibration generates one text from the unwatermarked toy model,
//! scores it under `trials` fresh keys, and returns the empirical upper
//! quantile at the requested false-positive rate.
//!
//! Scores are scale-free (see [`crate::text_detect::normalized_scores`]),
//! so a threshold calibrated here transfers to texts of other lengths:
//! for the primary detector it is directly a `tau_text` coefficient, for
//! the count baseline a positive-sign fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::key::setup;
use crate::rng::derive_seed;
use crate::text_detect::normalized_scores;
use crate::toy_lm::{GenerationConfig, ToyModel, ToyModelSpec};
use crate::vector::{BiasVector, Label};

const TAG_CAL_TEXT: u64 = 0x43414c54;
const TAG_CAL_KEY: u64 = 0x43414c4b;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    InnerProduct,
    Count,
}

impl Detector {
    pub fn name(&self) -> &'static str {
        match self {
            Detector::InnerProduct => "inner_product",
            Detector::Count => "count",
        }
    }
}

/// Calibrates a decision threshold for `detector` at `target_fpr`.
///
/// Needs `trials ≥ 20/target_fpr` so the tail being cut is supported by
/// at least 20 null scores. Returns the smallest observed score value
/// whose empirical FPR (with the detector's `score ≥ threshold`
/// convention) does not exceed the target; with continuous scores this is
/// the usual (1 − fpr) order statistic, and tied scores push the
/// threshold up rather than let the FPR overshoot.
pub fn calibrate_threshold(
    detector: Detector,
    null_model: &ToyModelSpec,
    gen: &GenerationConfig,
    epsilon: f64,
    target_fpr: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(target_fpr > 0.0 && target_fpr < 1.0) {
        return Err(Error::InvalidParameter {
            name: "target_fpr",
            reason: format!("must lie in (0, 1), got {target_fpr}"),
        });
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be finite and >= 0, got {epsilon}"),
        });
    }
    let needed = (20.0 / target_fpr).ceil() as usize;
    if trials < needed {
        return Err(Error::InsufficientTrials {
            needed,
            got: trials,
        });
    }

    let model = ToyModel::new(null_model.clone())?;
    let zero_bias = BiasVector::zeros(null_model.n, Label::Original);
    let null_text = model.generate(
        &zero_bias,
        &GenerationConfig {
            sampler_seed: derive_seed(seed, &[TAG_CAL_TEXT, gen.sampler_seed]),
            ..gen.clone()
        },
    )?;

    let mut scores = Vec::with_capacity(trials);
    for t in 0..trials {
        let key = setup(
            null_model.n,
            epsilon,
            derive_seed(seed, &[TAG_CAL_KEY, t as u64]),
        )?;
        let s = normalized_scores(&null_text, &key)?;
        scores.push(match detector {
            Detector::InnerProduct => s.inner,
            Detector::Count => s.count_fraction,
        });
    }
    Ok(upper_quantile_threshold(&mut scores, target_fpr))
}

/// Smallest value `thr` such that at most `fpr`·N of the samples satisfy
/// `s ≥ thr`. Sorts in place.
pub(crate) fn upper_quantile_threshold(scores: &mut [f64], fpr: f64) -> f64 {
    scores.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let n = scores.len();
    let allowed = (fpr * n as f64).floor() as usize;
    // Everything at or above the threshold must fit in `allowed`; the cut
    // value itself therefore has to exceed scores[n - allowed - 1].
    let floor_value = scores[n - allowed - 1];
    match scores[n - allowed..].iter().find(|&&s| s > floor_value) {
        Some(&next) => next,
        // All remaining scores are tied with the floor: step just past it.
        None => floor_value + floor_value.abs().max(1.0) * 1e-12,
    }
}
