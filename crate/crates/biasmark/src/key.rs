//! Secret watermark keys.
//!
//! A key is a Gaussian perturbation Δ ∈ ℝⁿ with i.i.d. N(0, ε²) components,
//! together with the parameters needed to regenerate it bit-exactly:
//! the alphabet size n, the noise scale ε, the 64-bit seed, and the name of
//! the generator stack that turned the seed into the samples.

use crate::error::{Error, Result};
use crate::rng::{normal_vec, rng_from_seed, PRNG_ID};

/// Largest supported dimension (2^20). Guards file parsing against
/// allocation bombs; callers needing more should split the bias.
pub const MAX_DIMENSION: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkKey {
    n: usize,
    epsilon: f64,
    seed: u64,
    prng: String,
    delta: Vec<f64>,
}

/// Samples a fresh key: Δᵢ ~ N(0, ε²) independently for i < n.
///
/// `epsilon = 0` is accepted and produces the degenerate all-zero key;
/// detectors treat it as a disabled watermark rather than an error.
pub fn setup(n: usize, epsilon: f64, seed: u64) -> Result<WatermarkKey> {
    validate_dims(n)?;
    validate_epsilon(epsilon)?;
    let delta = normal_vec(&mut rng_from_seed(seed), n, epsilon);
    Ok(WatermarkKey {
        n,
        epsilon,
        seed,
        prng: PRNG_ID.to_string(),
        delta,
    })
}

impl WatermarkKey {
    /// Rebuilds a key from stored fields, e.g. when loading a key file.
    /// The delta is taken as-is; `regenerate` can verify it against the
    /// seed when the generator is recognized.
    pub fn from_parts(
        n: usize,
        epsilon: f64,
        seed: u64,
        prng: String,
        delta: Vec<f64>,
    ) -> Result<Self> {
        validate_dims(n)?;
        validate_epsilon(epsilon)?;
        if delta.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: delta.len(),
            });
        }
        crate::vector::check_finite(&delta)?;
        Ok(Self {
            n,
            epsilon,
            seed,
            prng,
            delta,
        })
    }

    /// Test helper: a key with an explicit delta and the given ε, bypassing
    /// the sampler. The prng field records that the delta is synthetic.
    pub fn stub(delta: Vec<f64>, epsilon: f64) -> Result<Self> {
        let n = delta.len();
        Self::from_parts(n, epsilon, 0, "stub".to_string(), delta)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn prng(&self) -> &str {
        &self.prng
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Δ(token), erroring on out-of-range ids.
    pub fn delta_at(&self, token: u32) -> Result<f64> {
        self.delta
            .get(token as usize)
            .copied()
            .ok_or(Error::TokenOutOfRange {
                token,
                n: self.n,
            })
    }

    /// A zero-ε key carries no watermark; detectors report `false` with a
    /// diagnostic instead of dividing by zero.
    pub fn is_degenerate(&self) -> bool {
        self.epsilon == 0.0
    }

    /// Re-derives the delta from (seed, epsilon, n) and checks it matches
    /// bit for bit. Errors if the recorded generator is not the one this
    /// build implements.
    pub fn regenerate(&self) -> Result<()> {
        if self.prng != PRNG_ID {
            return Err(Error::Format {
                what: "key",
                reason: format!(
                    "unknown prng `{}`; this build regenerates only `{PRNG_ID}`",
                    self.prng
                ),
            });
        }
        let fresh = normal_vec(&mut rng_from_seed(self.seed), self.n, self.epsilon);
        if fresh != self.delta {
            return Err(Error::Format {
                what: "key",
                reason: "stored delta does not match regeneration from seed".into(),
            });
        }
        Ok(())
    }
}

fn validate_dims(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIMENSION {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("must be in 1..={MAX_DIMENSION}, got {n}"),
        });
    }
    Ok(())
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be finite and >= 0, got {epsilon}"),
        });
    }
    Ok(())
}
