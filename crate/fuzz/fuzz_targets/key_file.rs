//! Key-file envelope parser: arbitrary bytes must yield Ok or Err,
//! never a panic, and a parsed key must round-trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(key) = biasmark::io::key_from_json(s) {
        let again = biasmark::io::key_from_json(&biasmark::io::key_to_json(&key))
            .expect("serialized key reparses");
        assert_eq!(key.n(), again.n());
        assert_eq!(key.delta(), again.delta());
    }
});
