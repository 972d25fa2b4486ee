//! Attack-spec JSON: deserialization must never panic, and specs that
//! parse must serialize back to JSON that reparses to the same spec.

#![no_main]

use biasmark::AttackSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = serde_json::from_str::<AttackSpec>(s) {
        let json = serde_json::to_string(&spec).expect("spec serializes");
        let again: AttackSpec = serde_json::from_str(&json).expect("spec reparses");
        assert_eq!(spec.kind, again.kind);
        assert_eq!(spec.seed, again.seed);
        assert_eq!(spec.magnitude.to_bits(), again.magnitude.to_bits());
    }
});
