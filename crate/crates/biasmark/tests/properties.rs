//! Property tests for the algebraic invariants of the crate.

use proptest::prelude::*;

use biasmark::key::WatermarkKey;
use biasmark::text::{format_tokens, parse_tokens, TextFormat, TokenSequence};
use biasmark::text_detect::scan;
use biasmark::toy_lm::{ToyModel, ToyModelSpec};
use biasmark::vector::{BiasVector, Label};
use biasmark::watermark::{watermark, weight_detect, WeightDetectConfig};
use biasmark::{io, setup};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e6f64..1e6, len..=len)
}

fn token_sequence() -> impl Strategy<Value = TokenSequence> {
    (8u32..96).prop_flat_map(|n| {
        prop::collection::vec(0..n, 1..160)
            .prop_map(move |tokens| TokenSequence::new(tokens, n as usize).unwrap())
    })
}

proptest! {
    // Watermarking is exact componentwise addition, for any weights.
    #[test]
    fn watermark_adds_componentwise(
        x in (2usize..40).prop_flat_map(finite_vec),
        seed in any::<u64>(),
    ) {
        let key = setup(x.len(), 0.5, seed).unwrap();
        let original = BiasVector::new(x.clone(), Label::Original).unwrap();
        let wm = watermark(&original, &key).unwrap();
        for i in 0..x.len() {
            prop_assert_eq!(wm.values()[i], x[i] + key.delta()[i]);
        }
    }

    // Detecting the exact published weights leaves a residual of exactly
    // zero, and the decision is exactly the threshold comparison.
    #[test]
    fn weight_detect_on_exact_copy_has_zero_residual(
        x in (2usize..40).prop_flat_map(finite_vec),
        seed in any::<u64>(),
        tau in 0.01f64..2.0,
    ) {
        let key = setup(x.len(), 0.7, seed).unwrap();
        let original = BiasVector::new(x, Label::Original).unwrap();
        let wm = watermark(&original, &key).unwrap();
        let cfg = WeightDetectConfig { tau, ..WeightDetectConfig::default() };
        let report = weight_detect(&wm, &original, &key, &cfg).unwrap();
        prop_assert_eq!(report.norm, Some(0.0));
        prop_assert_eq!(report.decision, report.score >= report.threshold);
    }

    // The full-scan text score ignores token order.
    #[test]
    fn scan_is_permutation_invariant(
        text in token_sequence(),
        seed in any::<u64>(),
        rot in 0usize..160,
    ) {
        let key = setup(text.n(), 0.4, seed).unwrap();
        let mut rotated = text.tokens().to_vec();
        let k = rot % rotated.len();
        rotated.rotate_left(k);
        let rotated = TokenSequence::new(rotated, text.n()).unwrap();
        let a = scan(&text, &key).unwrap();
        let b = scan(&rotated, &key).unwrap();
        prop_assert_eq!(a.distinct, b.distinct);
        prop_assert_eq!(a.positive, b.positive);
        prop_assert!((a.count - b.count).abs() <= 1e-9 * a.count.abs().max(1.0));
    }

    // Repeating already-seen tokens never changes the scan.
    #[test]
    fn scan_ignores_duplicate_tokens(
        text in token_sequence(),
        extra in prop::collection::vec(0usize..160, 1..40),
    ) {
        let key = setup(text.n(), 0.4, 123).unwrap();
        let base = scan(&text, &key).unwrap();
        let mut padded = text.tokens().to_vec();
        for e in extra {
            let pick = padded[e % text.tokens().len()];
            padded.push(pick);
        }
        let padded = TokenSequence::new(padded, text.n()).unwrap();
        let again = scan(&padded, &key).unwrap();
        prop_assert_eq!(base.distinct, again.distinct);
        prop_assert_eq!(base.positive, again.positive);
        prop_assert_eq!(base.count, again.count);
    }

    // Shifting every logit bias by the same constant leaves the step
    // distribution unchanged (softmax shift invariance).
    #[test]
    fn step_distribution_is_shift_invariant(
        shift in -20.0f64..20.0,
        ctx in prop::collection::vec(0u32..32, 0..4),
        seed in any::<u64>(),
    ) {
        let spec = ToyModelSpec {
            n: 32,
            context_order: 2,
            logit_scale: 1.0,
            base_seed: seed,
            significance_floor: 1e-9,
            ..ToyModelSpec::default()
        };
        let model = ToyModel::new(spec).unwrap();
        let key = setup(32, 0.5, seed ^ 1).unwrap();
        let bias = BiasVector::new(key.delta().to_vec(), Label::Watermarked).unwrap();
        let shifted = BiasVector::new(
            key.delta().iter().map(|d| d + shift).collect(),
            Label::Watermarked,
        )
        .unwrap();
        let p = model.step_distribution(&ctx, &bias, 0.9).unwrap();
        let q = model.step_distribution(&ctx, &shifted, 0.9).unwrap();
        for (a, b) in p.probs().iter().zip(q.probs()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.max(*b).max(1e-300));
        }
    }

    // Key files survive a JSON round trip bit for bit.
    #[test]
    fn key_json_round_trip(n in 1usize..64, seed in any::<u64>(), eps in 0.01f64..4.0) {
        let key = setup(n, eps, seed).unwrap();
        let json = io::key_to_json(&key);
        let back = io::key_from_json(&json).unwrap();
        prop_assert_eq!(key.delta(), back.delta());
        prop_assert_eq!(key.epsilon().to_bits(), back.epsilon().to_bits());
        prop_assert_eq!(key.seed(), back.seed());
    }

    // Bias files survive a JSON round trip bit for bit, labels included.
    #[test]
    fn bias_json_round_trip(values in (1usize..64).prop_flat_map(finite_vec)) {
        let bias = BiasVector::new(values, Label::Adversarial).unwrap();
        let json = io::bias_to_json(&bias);
        let back = io::bias_from_json(&json).unwrap();
        prop_assert_eq!(bias.values().len(), back.values().len());
        for (a, b) in bias.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(bias.label(), back.label());
    }

    // Token text round-trips through both serialization formats.
    #[test]
    fn token_text_round_trips(tokens in prop::collection::vec(0u32..1000, 0..80)) {
        for format in [TextFormat::Whitespace, TextFormat::Json] {
            let text = format_tokens(&tokens, format);
            let back = parse_tokens(&text, format).unwrap();
            prop_assert_eq!(&back, &tokens);
        }
    }

    // A key regenerated from (seed, epsilon, n) matches its stored delta.
    #[test]
    fn regenerate_agrees_with_stored_delta(n in 1usize..48, seed in any::<u64>()) {
        let key = setup(n, 1.3, seed).unwrap();
        let rebuilt = WatermarkKey::from_parts(
            key.n(),
            key.epsilon(),
            key.seed(),
            key.prng().to_string(),
            key.delta().to_vec(),
        )
        .unwrap();
        prop_assert!(rebuilt.regenerate().is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Substitution schedules are prefix-coupled: every position changed
    // at a smaller rho is also changed (to the same value) at a larger.
    #[test]
    fn substitution_is_prefix_coupled(
        text in token_sequence(),
        seed in any::<u64>(),
        lo in 0.0f64..1.0,
        hi in 0.0f64..1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let a = biasmark::attack::token_substitute_attack(&text, lo, seed).unwrap();
        let b = biasmark::attack::token_substitute_attack(&text, hi, seed).unwrap();
        for i in 0..text.tokens().len() {
            if a.tokens()[i] != text.tokens()[i] {
                prop_assert_eq!(a.tokens()[i], b.tokens()[i]);
            }
        }
        let changed = |s: &TokenSequence| {
            s.tokens()
                .iter()
                .zip(text.tokens())
                .filter(|(x, y)| x != y)
                .count()
        };
        prop_assert!(changed(&a) <= biasmark::attack::substitution_count(text.tokens().len(), lo));
        prop_assert!(changed(&b) <= biasmark::attack::substitution_count(text.tokens().len(), hi));
    }
}
