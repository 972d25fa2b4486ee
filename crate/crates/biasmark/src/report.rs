use serde::{Deserialize, Serialize};

/// Outcome of a detection run, shared by the weight-space and text-space
/// detectors.
///
/// `score` and `threshold` are in the detector's native units: the raw
/// inner product for weight detection, the accumulated delta sum (or
/// positive-sign fraction for the count baseline) for text detection.
/// Fields that only one detector produces are optional and omitted from
/// JSON when absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    pub decision: bool,
    pub score: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distinct_tokens: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trigger_index: Option<usize>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
