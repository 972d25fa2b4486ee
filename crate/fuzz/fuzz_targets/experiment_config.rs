//! Experiment-config JSON: deserialization and validation must never
//! panic, whatever the field values.

#![no_main]

use biasmark::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = serde_json::from_str::<ExperimentConfig>(s) {
        let _ = cfg.validate();
    }
});
