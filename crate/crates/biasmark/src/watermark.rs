//! Embedding and weight-space detection.
//!
//! Embedding adds the secret delta to a bias vector. Detection takes a
//! candidate bias `c`, the original `x` and the key, and accepts when both
//!
//! * the correlation is strong: (c − x)·Δ ≥ τ ε² n, and
//! * the candidate sits close to the watermarked point:
//!   ‖c − (x + Δ)‖ ≤ bound,
//!
//! where the bound is ½εn by default (½ε²n selectable; the two agree at
//! ε = 1 and diverge fast elsewhere, so both are kept testable).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::key::WatermarkKey;
use crate::report::DetectionReport;
use crate::vector::{dot, l2_distance, l2_norm, BiasVector, Label};

/// Which closeness bound `weight_detect` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormBound {
    /// ‖c − (x + Δ)‖ ≤ ½ ε n
    #[default]
    EpsN,
    /// ‖c − (x + Δ)‖ ≤ ½ ε² n
    EpsSqN,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightDetectConfig {
    /// Correlation threshold coefficient τ in (c − x)·Δ ≥ τ ε² n.
    pub tau: f64,
    pub norm_bound: NormBound,
}

impl Default for WeightDetectConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            norm_bound: NormBound::EpsN,
        }
    }
}

impl WeightDetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("must be finite and > 0, got {}", self.tau),
            });
        }
        Ok(())
    }
}

/// Embeds the watermark: returns x + Δ labelled `Watermarked`.
pub fn watermark(x: &BiasVector, key: &WatermarkKey) -> Result<BiasVector> {
    if x.len() != key.n() {
        return Err(Error::DimensionMismatch {
            expected: key.n(),
            got: x.len(),
        });
    }
    x.add(key.delta(), Label::Watermarked)
}

/// Weight-space detector.
///
/// The report's `score` is the raw inner product (c − x)·Δ and `norm` is
/// the distance to the watermarked point. A degenerate (ε = 0) key always
/// yields `decision = false` with an explanatory diagnostic: with no noise
/// there is nothing to detect, and the thresholds would otherwise collapse
/// to zero and fire on everything.
pub fn weight_detect(
    candidate: &BiasVector,
    original: &BiasVector,
    key: &WatermarkKey,
    cfg: &WeightDetectConfig,
) -> Result<DetectionReport> {
    cfg.validate()?;
    if original.len() != key.n() {
        return Err(Error::DimensionMismatch {
            expected: key.n(),
            got: original.len(),
        });
    }
    if candidate.len() != key.n() {
        return Err(Error::DimensionMismatch {
            expected: key.n(),
            got: candidate.len(),
        });
    }

    let n = key.n() as f64;
    let eps = key.epsilon();
    let diff: Vec<f64> = candidate
        .values()
        .iter()
        .zip(original.values())
        .map(|(c, x)| c - x)
        .collect();
    let score = dot(&diff, key.delta());
    let threshold = cfg.tau * eps * eps * n;
    let watermarked: Vec<f64> = original
        .values()
        .iter()
        .zip(key.delta())
        .map(|(x, d)| x + d)
        .collect();
    let norm = l2_distance(candidate.values(), &watermarked);
    let bound = match cfg.norm_bound {
        NormBound::EpsN => 0.5 * eps * n,
        NormBound::EpsSqN => 0.5 * eps * eps * n,
    };

    let mut diagnostics = Vec::new();
    if key.is_degenerate() {
        diagnostics.push("degenerate key: epsilon = 0, detector disabled".to_string());
        return Ok(DetectionReport {
            decision: false,
            score,
            threshold,
            norm: Some(norm),
            distinct_tokens: None,
            trigger_index: None,
            diagnostics,
        });
    }

    let correlated = score >= threshold;
    let close = norm <= bound;
    if !correlated {
        diagnostics.push(format!(
            "inner product {score:.6} below threshold {threshold:.6}"
        ));
    }
    if !close {
        diagnostics.push(format!("norm {norm:.6} exceeds bound {bound:.6}"));
    }

    Ok(DetectionReport {
        decision: correlated && close,
        score,
        threshold,
        norm: Some(norm),
        distinct_tokens: None,
        trigger_index: None,
        diagnostics,
    })
}

/// Distortion budget ℓ(n) = ε n / √(log₂ n): modifications below this
/// Euclidean distance count as quality-preserving. Returns infinity for
/// n = 1, where the budget is unconstrained.
pub fn loss_budget(n: usize, epsilon: f64) -> f64 {
    let log2n = (n as f64).log2();
    if log2n <= 0.0 {
        return f64::INFINITY;
    }
    epsilon * n as f64 / log2n.sqrt()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QualityLossReport {
    /// ‖modified − original‖₂
    pub l2: f64,
    /// ℓ(n) for the given ε.
    pub budget: f64,
    pub within_budget: bool,
}

/// Measures the weight-space distortion of `modified` against `original`
/// and compares it to the ℓ(n) budget at noise scale `epsilon`.
pub fn quality_loss(
    original: &BiasVector,
    modified: &BiasVector,
    epsilon: f64,
) -> Result<QualityLossReport> {
    if modified.len() != original.len() {
        return Err(Error::DimensionMismatch {
            expected: original.len(),
            got: modified.len(),
        });
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be finite and >= 0, got {epsilon}"),
        });
    }
    let l2 = l2_distance(original.values(), modified.values());
    let budget = loss_budget(original.len(), epsilon);
    Ok(QualityLossReport {
        l2,
        budget,
        within_budget: l2 <= budget,
    })
}

/// Convenience: ‖Δ‖ of a key, the embedding cost of `watermark`.
pub fn embedding_cost(key: &WatermarkKey) -> f64 {
    l2_norm(key.delta())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::key::setup;

    #[test]
    fn watermark_is_componentwise_addition() {
        let key = setup(1000, 0.5, 77).unwrap();
        let x = BiasVector::new(
            crate::rng::normal_vec(&mut crate::rng::rng_from_seed(5), 1000, 1.0),
            Label::Original,
        )
        .unwrap();
        let wm = watermark(&x, &key).unwrap();
        assert_eq!(wm.label(), Label::Watermarked);
        for i in 0..1000 {
            assert_eq!(wm.values()[i], x.values()[i] + key.delta()[i]);
        }
    }

    #[test]
    fn detects_exact_watermark_and_rejects_original() {
        let n = 10_000;
        let key = setup(n, 0.5, 3).unwrap();
        let x = BiasVector::zeros(n, Label::Original);
        let wm = watermark(&x, &key).unwrap();
        let cfg = WeightDetectConfig {
            tau: 0.9,
            ..Default::default()
        };

        let hit = weight_detect(&wm, &x, &key, &cfg).unwrap();
        assert!(hit.decision);
        // (c − x)·Δ = ‖Δ‖² ≈ ε²n = 2500, sd ≈ ε²√(2n) ≈ 35.
        assert!((2300.0..=2700.0).contains(&hit.score), "score {}", hit.score);
        assert_eq!(hit.norm, Some(0.0));

        let miss = weight_detect(&x, &x, &key, &cfg).unwrap();
        assert!(!miss.decision);
        assert_eq!(miss.score, 0.0);
        assert!(miss
            .diagnostics
            .iter()
            .any(|d| d.contains("below threshold")));
    }

    #[test]
    fn norm_bound_variants_differ() {
        // ε = 2, n = 16: the ½εn bound is 16, the ½ε²n bound is 32. A
        // perturbation of norm 20 orthogonal to Δ keeps the inner product
        // untouched and lands between the two bounds.
        let n = 16;
        let key = WatermarkKey::stub(vec![2.0; n], 2.0).unwrap();
        let x = BiasVector::zeros(n, Label::Original);
        let mut c: Vec<f64> = key.delta().to_vec();
        for (i, v) in c.iter_mut().enumerate() {
            *v += if i % 2 == 0 { 5.0 } else { -5.0 };
        }
        let c = BiasVector::new(c, Label::Adversarial).unwrap();

        let tight = WeightDetectConfig {
            tau: 0.5,
            norm_bound: NormBound::EpsN,
        };
        let loose = WeightDetectConfig {
            tau: 0.5,
            norm_bound: NormBound::EpsSqN,
        };
        let r1 = weight_detect(&c, &x, &key, &tight).unwrap();
        let r2 = weight_detect(&c, &x, &key, &loose).unwrap();
        assert_eq!(r1.score, 64.0);
        assert_eq!(r1.norm, Some(20.0));
        assert!(!r1.decision, "norm 20 must fail the ½εn = 16 bound");
        assert!(r2.decision, "norm 20 must pass the ½ε²n = 32 bound");
        assert!(r1.diagnostics.iter().any(|d| d.contains("exceeds bound")));
    }

    #[test]
    fn degenerate_key_never_detects() {
        let n = 64;
        let key = setup(n, 0.0, 1).unwrap();
        let x = BiasVector::zeros(n, Label::Original);
        let wm = watermark(&x, &key).unwrap();
        let report = weight_detect(&wm, &x, &key, &WeightDetectConfig::default()).unwrap();
        assert!(!report.decision);
        assert!(report.diagnostics.iter().any(|d| d.contains("degenerate")));
    }

    #[test]
    fn dimension_mismatches_error() {
        let key = setup(8, 0.5, 0).unwrap();
        let x = BiasVector::zeros(8, Label::Original);
        let short = BiasVector::zeros(7, Label::Original);
        assert!(watermark(&short, &key).is_err());
        assert!(weight_detect(&short, &x, &key, &WeightDetectConfig::default()).is_err());
        assert!(weight_detect(&x, &short, &key, &WeightDetectConfig::default()).is_err());
        assert!(quality_loss(&x, &short, 0.5).is_err());
    }

    #[test]
    fn rejects_non_positive_tau() {
        let key = setup(8, 0.5, 0).unwrap();
        let x = BiasVector::zeros(8, Label::Original);
        let cfg = WeightDetectConfig {
            tau: 0.0,
            ..Default::default()
        };
        assert!(weight_detect(&x, &x, &key, &cfg).is_err());
    }

    // Embedding cost concentration: ‖Δ‖² / ε² is χ²(n), so over 300 keys at
    // n = 10⁴ every draw lands in ε√(n(1 ± 0.1)) except with probability
    // well under 1e-9 per key.
    #[test]
    fn embedding_cost_concentrates() {
        let n = 10_000;
        let eps = 0.5;
        let lo = eps * (n as f64 * 0.9).sqrt();
        let hi = eps * (n as f64 * 1.1).sqrt();
        for trial in 0..300u64 {
            let key = setup(n, eps, 1000 + trial).unwrap();
            let cost = embedding_cost(&key);
            assert!(
                (lo..=hi).contains(&cost),
                "trial {trial}: cost {cost} outside [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn quality_loss_of_watermarking_is_within_budget() {
        let n = 10_000;
        let key = setup(n, 0.5, 11).unwrap();
        let x = BiasVector::zeros(n, Label::Original);
        let wm = watermark(&x, &key).unwrap();
        let report = quality_loss(&x, &wm, 0.5).unwrap();
        // ‖Δ‖ ≈ 50; ℓ(10⁴) = 0.5·10⁴/√(log₂ 10⁴) = 1371.66.
        assert!((47.5..=52.5).contains(&report.l2), "l2 {}", report.l2);
        assert!((report.budget - 1371.66).abs() < 0.01, "budget {}", report.budget);
        assert!(report.within_budget);
    }

    #[test]
    fn loss_budget_edge_cases() {
        assert!(loss_budget(1, 0.5).is_infinite());
        assert_eq!(loss_budget(4, 1.0), 4.0 / 2.0f64.sqrt());
    }
}
