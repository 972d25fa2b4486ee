//! Text-space detection.
//!
//! The primary detector streams through a token sequence, adds Δ(t) the
//! first time each distinct token t appears, and fires at the first index
//! where at least `lambda` distinct tokens have been seen and the running
//! sum clears `distinct · ε² · tau_text`. Repeated tokens contribute
//! nothing, so scores depend only on the set of distinct tokens.
//!
//! `count_detect` is the sign-only baseline: it looks at the fraction of
//! distinct tokens with positive delta. It throws away magnitude
//! information and is kept as the comparison point the sweeps measure
//! against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::key::WatermarkKey;
use crate::report::DetectionReport;
use crate::text::TokenSequence;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TextDetectConfig {
    /// Minimum distinct tokens before the detector may trigger.
    pub lambda: usize,
    /// Threshold coefficient: the primary detector triggers at
    /// count ≥ distinct·ε²·tau_text; the count baseline uses it as the
    /// additive margin over ½ on the positive-sign fraction.
    pub tau_text: f64,
    /// Reports on texts with fewer distinct tokens get a diagnostic flag;
    /// sweep code uses the same cutoff to exclude rows from rate estimates.
    pub min_distinct_report: usize,
}

impl Default for TextDetectConfig {
    fn default() -> Self {
        Self {
            lambda: 20,
            tau_text: 0.5,
            min_distinct_report: 20,
        }
    }
}

impl TextDetectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: "must be >= 1".into(),
            });
        }
        if !self.tau_text.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tau_text",
                reason: format!("must be finite, got {}", self.tau_text),
            });
        }
        Ok(())
    }
}

/// Full-scan statistics of a text against a key: delta sum over first
/// occurrences, distinct count, and how many distinct tokens have positive
/// delta.
#[derive(Debug, Clone, Copy)]
pub struct TextScan {
    pub count: f64,
    pub distinct: usize,
    pub positive: usize,
}

pub fn scan(text: &TokenSequence, key: &WatermarkKey) -> Result<TextScan> {
    let mut seen = vec![false; key.n()];
    let mut count = 0.0;
    let mut distinct = 0;
    let mut positive = 0;
    for &t in text.tokens() {
        let d = key.delta_at(t)?;
        if !seen[t as usize] {
            seen[t as usize] = true;
            distinct += 1;
            count += d;
            if d > 0.0 {
                positive += 1;
            }
        }
    }
    Ok(TextScan {
        count,
        distinct,
        positive,
    })
}

/// Primary text detector.
///
/// The decision follows first-crossing semantics; the report's `score` and
/// `threshold` are computed over the whole text so downstream ROC analysis
/// can re-threshold final scores. A degenerate key reports `false` with a
/// diagnostic, mirroring the weight detector.
pub fn text_detect(
    text: &TokenSequence,
    key: &WatermarkKey,
    cfg: &TextDetectConfig,
) -> Result<DetectionReport> {
    cfg.validate()?;
    let eps_sq = key.epsilon() * key.epsilon();

    let mut seen = vec![false; key.n()];
    let mut count = 0.0;
    let mut distinct = 0usize;
    let mut trigger_index = None;
    for (i, &t) in text.tokens().iter().enumerate() {
        let d = key.delta_at(t)?;
        if !seen[t as usize] {
            seen[t as usize] = true;
            distinct += 1;
            count += d;
        }
        if trigger_index.is_none()
            && !key.is_degenerate()
            && distinct >= cfg.lambda
            && count >= distinct as f64 * eps_sq * cfg.tau_text
        {
            trigger_index = Some(i);
        }
    }

    let mut diagnostics = Vec::new();
    if key.is_degenerate() {
        diagnostics.push("degenerate key: epsilon = 0, detector disabled".to_string());
    }
    if distinct < cfg.min_distinct_report {
        diagnostics.push(format!(
            "insufficient distinct tokens: {distinct} below reporting floor {}",
            cfg.min_distinct_report
        ));
    }
    if trigger_index.is_none() && !key.is_degenerate() && distinct < cfg.lambda {
        diagnostics.push(format!(
            "distinct tokens {distinct} below lambda {}",
            cfg.lambda
        ));
    }

    Ok(DetectionReport {
        decision: trigger_index.is_some(),
        score: count,
        threshold: distinct as f64 * eps_sq * cfg.tau_text,
        norm: None,
        distinct_tokens: Some(distinct),
        trigger_index,
        diagnostics,
    })
}

/// Sign-count baseline: score is the fraction of distinct tokens with
/// Δ(t) > 0, and the decision requires score ≥ ½ + tau_text alongside the
/// lambda floor.
pub fn count_detect(
    text: &TokenSequence,
    key: &WatermarkKey,
    cfg: &TextDetectConfig,
) -> Result<DetectionReport> {
    cfg.validate()?;
    let s = scan(text, key)?;
    let score = if s.distinct == 0 {
        0.5
    } else {
        s.positive as f64 / s.distinct as f64
    };
    let threshold = 0.5 + cfg.tau_text;

    let mut diagnostics = Vec::new();
    let mut decision = s.distinct >= cfg.lambda && score >= threshold;
    if key.is_degenerate() {
        diagnostics.push("degenerate key: epsilon = 0, detector disabled".to_string());
        decision = false;
    }
    if s.distinct < cfg.min_distinct_report {
        diagnostics.push(format!(
            "insufficient distinct tokens: {} below reporting floor {}",
            s.distinct, cfg.min_distinct_report
        ));
    }

    Ok(DetectionReport {
        decision,
        score,
        threshold,
        norm: None,
        distinct_tokens: Some(s.distinct),
        trigger_index: None,
        diagnostics,
    })
}

/// Scale-free final scores used for calibration and sweeps.
///
/// `inner` is count/(distinct·ε²), the coefficient the primary detector
/// compares against `tau_text`; `count_fraction` is the baseline's score.
/// Empty texts report the neutral values (0, ½). A degenerate ε = 0 key
/// carries no evidence either way, so both scores collapse to 0.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedScores {
    pub inner: f64,
    pub count_fraction: f64,
    pub distinct: usize,
}

pub fn normalized_scores(text: &TokenSequence, key: &WatermarkKey) -> Result<NormalizedScores> {
    let s = scan(text, key)?;
    if key.is_degenerate() {
        return Ok(NormalizedScores {
            inner: 0.0,
            count_fraction: 0.0,
            distinct: s.distinct,
        });
    }
    let eps_sq = key.epsilon() * key.epsilon();
    if s.distinct == 0 {
        return Ok(NormalizedScores {
            inner: 0.0,
            count_fraction: 0.5,
            distinct: 0,
        });
    }
    Ok(NormalizedScores {
        inner: s.count / (s.distinct as f64 * eps_sq),
        count_fraction: s.positive as f64 / s.distinct as f64,
        distinct: s.distinct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::key::{setup, WatermarkKey};
    use crate::text::TokenSequence;

    fn seq(tokens: &[u32], n: usize) -> TokenSequence {
        TokenSequence::new(tokens.to_vec(), n).unwrap()
    }

    #[test]
    fn triggers_at_lambda_with_uniform_positive_delta() {
        let key = WatermarkKey::stub(vec![1.0; 8], 1.0).unwrap();
        let cfg = TextDetectConfig {
            lambda: 3,
            tau_text: 0.1,
            min_distinct_report: 1,
        };
        // Third distinct token appears at index 3.
        let report = text_detect(&seq(&[0, 1, 1, 2, 3], 8), &key, &cfg).unwrap();
        assert!(report.decision);
        assert_eq!(report.trigger_index, Some(3));
        assert_eq!(report.distinct_tokens, Some(4));
        assert_eq!(report.score, 4.0);
    }

    #[test]
    fn repeats_count_once() {
        let key = WatermarkKey::stub(vec![1.0; 4], 1.0).unwrap();
        let cfg = TextDetectConfig {
            lambda: 1,
            tau_text: 0.1,
            min_distinct_report: 1,
        };
        let a = text_detect(&seq(&[2, 2, 2, 2, 2], 4), &key, &cfg).unwrap();
        assert_eq!(a.score, 1.0);
        assert_eq!(a.distinct_tokens, Some(1));
    }

    #[test]
    fn final_score_is_permutation_invariant() {
        let key = setup(64, 0.5, 5).unwrap();
        let cfg = TextDetectConfig::default();
        let a = text_detect(&seq(&[5, 9, 9, 13, 5, 40], 64), &key, &cfg).unwrap();
        let b = text_detect(&seq(&[40, 13, 5, 9, 40, 40], 64), &key, &cfg).unwrap();
        assert_eq!(a.score, b.score);
        assert_eq!(a.distinct_tokens, b.distinct_tokens);
    }

    #[test]
    fn balanced_delta_does_not_trigger() {
        let delta: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let key = WatermarkKey::stub(delta, 1.0).unwrap();
        let cfg = TextDetectConfig {
            lambda: 4,
            tau_text: 0.25,
            min_distinct_report: 1,
        };
        let report = text_detect(&seq(&[0, 1, 2, 3, 4, 5, 6, 7], 8), &key, &cfg).unwrap();
        assert!(!report.decision);
        assert_eq!(report.score, 0.0);
    }

    #[test]
    fn decision_sticks_after_trigger_even_if_score_collapses() {
        let key = WatermarkKey::stub(vec![1.0, 1.0, -100.0], 1.0).unwrap();
        let cfg = TextDetectConfig {
            lambda: 2,
            tau_text: 0.1,
            min_distinct_report: 1,
        };
        let report = text_detect(&seq(&[0, 1, 2], 3), &key, &cfg).unwrap();
        assert!(report.decision, "first-crossing semantics");
        assert_eq!(report.trigger_index, Some(1));
        assert_eq!(report.score, -98.0, "score still reflects the full text");
    }

    #[test]
    fn lambda_floor_blocks_short_texts() {
        let key = WatermarkKey::stub(vec![10.0; 8], 1.0).unwrap();
        let cfg = TextDetectConfig {
            lambda: 5,
            tau_text: 0.1,
            min_distinct_report: 5,
        };
        let report = text_detect(&seq(&[0, 1, 2], 8), &key, &cfg).unwrap();
        assert!(!report.decision);
        assert!(report.diagnostics.iter().any(|d| d.contains("below lambda")));
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.contains("reporting floor")));
    }

    #[test]
    fn degenerate_key_reports_false() {
        let key = setup(16, 0.0, 0).unwrap();
        let cfg = TextDetectConfig {
            lambda: 2,
            tau_text: 0.0,
            min_distinct_report: 1,
        };
        let report = text_detect(&seq(&[0, 1, 2, 3], 16), &key, &cfg).unwrap();
        assert!(!report.decision);
        assert!(report.diagnostics.iter().any(|d| d.contains("degenerate")));
        let report = count_detect(&seq(&[0, 1, 2, 3], 16), &key, &cfg).unwrap();
        assert!(!report.decision);
        // Degenerate keys yield zero-evidence scores rather than an error,
        // so epsilon = 0 sweep points stay well defined.
        let s = normalized_scores(&seq(&[0, 1], 16), &key).unwrap();
        assert_eq!(s.inner, 0.0);
        assert_eq!(s.count_fraction, 0.0);
        assert_eq!(s.distinct, 2);
    }

    #[test]
    fn out_of_range_token_errors() {
        let key = setup(10, 0.5, 0).unwrap();
        // The sequence's own alphabet is larger than the key's.
        let text = seq(&[3, 15], 20);
        let err = text_detect(&text, &key, &TextDetectConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TokenOutOfRange { token: 15, n: 10 }));
    }

    #[test]
    fn count_detect_all_positive_stub() {
        let key = WatermarkKey::stub(vec![0.5; 8], 1.0).unwrap();
        let cfg = TextDetectConfig {
            lambda: 3,
            tau_text: 0.4,
            min_distinct_report: 1,
        };
        let report = count_detect(&seq(&[0, 1, 2, 3], 8), &key, &cfg).unwrap();
        assert_eq!(report.score, 1.0);
        assert_eq!(report.threshold, 0.9);
        assert!(report.decision);

        let short = count_detect(&seq(&[0, 1], 8), &key, &cfg).unwrap();
        assert!(!short.decision, "lambda floor applies to the baseline too");
    }

    // Null behaviour of the baseline: with a fresh key, each distinct
    // token's delta sign is an independent fair coin, so the positive
    // fraction over 500 distinct tokens is Binomial(500, ½)/500. The band
    // ½ ± 0.07 is ±3.1σ, missed with probability ≈ 1.7e-3 per trial.
    #[test]
    fn count_score_concentrates_at_half_under_null() {
        let tokens: Vec<u32> = (0..500).collect();
        let text = seq(&tokens, 2048);
        let mut outside = 0;
        let trials = 1000;
        for t in 0..trials {
            let key = setup(2048, 0.5, 50_000 + t).unwrap();
            let s = scan(&text, &key).unwrap();
            let frac = s.positive as f64 / s.distinct as f64;
            if (frac - 0.5).abs() > 0.07 {
                outside += 1;
            }
        }
        assert!(
            outside <= trials / 100,
            "{outside}/{trials} null scores left the ½ ± 0.07 band"
        );
    }

    #[test]
    fn normalized_scores_match_manual_computation() {
        let key = WatermarkKey::stub(vec![0.2, -0.4, 0.6, 0.0], 0.5).unwrap();
        let text = seq(&[0, 1, 2, 0], 4);
        let s = normalized_scores(&text, &key).unwrap();
        // count = 0.2 - 0.4 + 0.6 = 0.4 over 3 distinct; ε² = 0.25.
        assert!((s.inner - 0.4 / (3.0 * 0.25)).abs() < 1e-12);
        assert!((s.count_fraction - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.distinct, 3);
    }

    #[test]
    fn empty_text_is_neutral() {
        let key = setup(8, 0.5, 0).unwrap();
        let s = normalized_scores(&seq(&[], 8), &key).unwrap();
        assert_eq!(s.inner, 0.0);
        assert_eq!(s.count_fraction, 0.5);
        assert_eq!(s.distinct, 0);
    }
}
