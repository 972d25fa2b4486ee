//! On-disk formats.
//!
//! Keys and bias vectors travel as single JSON objects with the float
//! payload packed as base64 over little-endian f64 words:
//!
//! ```json
//! {"version":1,"n":4,"epsilon":0.5,"seed":7,"prng":"chacha12-ziggurat-v1","delta":"..."}
//! ```
//!
//! A bias-vector file is the same envelope without `epsilon`, `seed` and
//! `prng`, plus an optional `label`. Parsing is strict: unknown versions,
//! payload length mismatches, non-finite floats and oversized dimensions
//! are all rejected before any value reaches the numeric code.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::key::{WatermarkKey, MAX_DIMENSION};
use crate::vector::{BiasVector, Label};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct KeyEnvelope {
    version: u32,
    n: usize,
    epsilon: f64,
    seed: u64,
    prng: String,
    delta: String,
}

#[derive(Serialize, Deserialize)]
struct BiasEnvelope {
    version: u32,
    n: usize,
    delta: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_f64s(what: &'static str, payload: &str, expected_n: usize) -> Result<Vec<f64>> {
    let bytes = BASE64.decode(payload).map_err(|e| Error::Format {
        what,
        reason: format!("payload is not valid base64: {e}"),
    })?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format {
            what,
            reason: format!("payload length {} is not a multiple of 8", bytes.len()),
        });
    }
    let count = bytes.len() / 8;
    if count != expected_n {
        return Err(Error::Format {
            what,
            reason: format!("payload holds {count} floats but n = {expected_n}"),
        });
    }
    let mut values = Vec::with_capacity(count);
    for chunk in bytes.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunks_exact(8)"));
        if !v.is_finite() {
            return Err(Error::Format {
                what,
                reason: format!("payload contains non-finite value at index {}", values.len()),
            });
        }
        values.push(v);
    }
    Ok(values)
}

fn check_envelope(what: &'static str, version: u32, n: usize) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            what,
            reason: format!("unsupported version {version}, expected {FORMAT_VERSION}"),
        });
    }
    if n == 0 || n > MAX_DIMENSION {
        return Err(Error::Format {
            what,
            reason: format!("n = {n} outside 1..={MAX_DIMENSION}"),
        });
    }
    Ok(())
}

pub fn key_to_json(key: &WatermarkKey) -> String {
    let env = KeyEnvelope {
        version: FORMAT_VERSION,
        n: key.n(),
        epsilon: key.epsilon(),
        seed: key.seed(),
        prng: key.prng().to_string(),
        delta: encode_f64s(key.delta()),
    };
    serde_json::to_string(&env).expect("key envelope serializes")
}

pub fn key_from_json(json: &str) -> Result<WatermarkKey> {
    let env: KeyEnvelope = serde_json::from_str(json).map_err(|e| Error::Format {
        what: "key file",
        reason: e.to_string(),
    })?;
    check_envelope("key file", env.version, env.n)?;
    if !env.epsilon.is_finite() || env.epsilon < 0.0 {
        return Err(Error::Format {
            what: "key file",
            reason: format!("epsilon must be finite and >= 0, got {}", env.epsilon),
        });
    }
    let delta = decode_f64s("key file", &env.delta, env.n)?;
    WatermarkKey::from_parts(env.n, env.epsilon, env.seed, env.prng, delta)
}

pub fn bias_to_json(bias: &BiasVector) -> String {
    let env = BiasEnvelope {
        version: FORMAT_VERSION,
        n: bias.len(),
        delta: encode_f64s(bias.values()),
        label: Some(bias.label()),
    };
    serde_json::to_string(&env).expect("bias envelope serializes")
}

pub fn bias_from_json(json: &str) -> Result<BiasVector> {
    let env: BiasEnvelope = serde_json::from_str(json).map_err(|e| Error::Format {
        what: "bias file",
        reason: e.to_string(),
    })?;
    check_envelope("bias file", env.version, env.n)?;
    let values = decode_f64s("bias file", &env.delta, env.n)?;
    BiasVector::new(values, env.label.unwrap_or(Label::Original))
}

pub fn write_key_file(path: &Path, key: &WatermarkKey) -> Result<()> {
    std::fs::write(path, key_to_json(key) + "\n")?;
    Ok(())
}

pub fn read_key_file(path: &Path) -> Result<WatermarkKey> {
    key_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_bias_file(path: &Path, bias: &BiasVector) -> Result<()> {
    std::fs::write(path, bias_to_json(bias) + "\n")?;
    Ok(())
}

pub fn read_bias_file(path: &Path) -> Result<BiasVector> {
    bias_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::key::setup;

    #[test]
    fn key_round_trip_is_bit_exact() {
        let key = setup(128, 0.5, 41).unwrap();
        let back = key_from_json(&key_to_json(&key)).unwrap();
        assert_eq!(key, back);
        back.regenerate().unwrap();
    }

    #[test]
    fn bias_round_trip_is_bit_exact() {
        let bias = BiasVector::new(
            vec![0.1, -2.5e-17, 3.9e300, f64::MIN_POSITIVE],
            Label::Adversarial,
        )
        .unwrap();
        let back = bias_from_json(&bias_to_json(&bias)).unwrap();
        assert_eq!(bias, back);
    }

    #[test]
    fn rejects_wrong_version() {
        let key = setup(4, 0.5, 0).unwrap();
        let json = key_to_json(&key).replace("\"version\":1", "\"version\":2");
        let err = key_from_json(&json).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_length_mismatch() {
        let key = setup(4, 0.5, 0).unwrap();
        let json = key_to_json(&key).replace("\"n\":4", "\"n\":3");
        assert!(key_from_json(&json).is_err());
    }

    #[test]
    fn rejects_bad_base64_and_ragged_payload() {
        let key = setup(2, 0.5, 0).unwrap();
        let json = key_to_json(&key);
        let bad = regex_replace_delta(&json, "@@@not-base64@@@");
        assert!(key_from_json(&bad).is_err());
        // 9 bytes: valid base64, not a multiple of 8.
        let ragged = regex_replace_delta(&json, &BASE64.encode([0u8; 9]));
        assert!(key_from_json(&ragged).is_err());
    }

    #[test]
    fn rejects_non_finite_payload() {
        let key = setup(1, 0.5, 0).unwrap();
        let json = key_to_json(&key);
        let nan = regex_replace_delta(&json, &BASE64.encode(f64::NAN.to_le_bytes()));
        assert!(key_from_json(&nan).is_err());
    }

    #[test]
    fn rejects_oversized_n() {
        let json = format!(
            "{{\"version\":1,\"n\":{},\"epsilon\":0.5,\"seed\":0,\"prng\":\"x\",\"delta\":\"\"}}",
            MAX_DIMENSION + 1
        );
        let err = key_from_json(&json).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bias_file_defaults_label() {
        let json = format!(
            "{{\"version\":1,\"n\":1,\"delta\":\"{}\"}}",
            encode_f64s(&[1.5])
        );
        let bias = bias_from_json(&json).unwrap();
        assert_eq!(bias.label(), Label::Original);
        assert_eq!(bias.values(), &[1.5]);
    }

    fn regex_replace_delta(json: &str, new_payload: &str) -> String {
        let start = json.find("\"delta\":\"").unwrap() + "\"delta\":\"".len();
        let end = json[start..].find('"').unwrap() + start;
        format!("{}{}{}", &json[..start], new_payload, &json[end..])
    }
}
