//! Bias-file envelope parser: arbitrary bytes must yield Ok or Err,
//! never a panic, and a parsed vector must round-trip bit-exactly.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(bias) = biasmark::io::bias_from_json(s) {
        let again = biasmark::io::bias_from_json(&biasmark::io::bias_to_json(&bias))
            .expect("serialized bias reparses");
        assert_eq!(bias.values(), again.values());
        assert_eq!(bias.label(), again.label());
    }
});
