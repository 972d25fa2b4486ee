//! Token-text parsers, both formats: arbitrary bytes must yield Ok or
//! Err, never a panic, and accepted sequences must respect the alphabet.

#![no_main]

use biasmark::text::{parse_tokens, TextFormat};
use biasmark::parse_token_sequence;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    for format in [TextFormat::Whitespace, TextFormat::Json] {
        let _ = parse_tokens(s, format);
        if let Ok(seq) = parse_token_sequence(s, format, 4096) {
            assert!(seq.tokens().iter().all(|&t| (t as usize) < 4096));
            assert!(seq.distinct_count() <= seq.len());
        }
    }
});
