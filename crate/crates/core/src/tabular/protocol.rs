//! Newline-delimited JSON wire format spoken with external tabular learners,
//! plus a deterministic echo responder used for testing the transport.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::subsample::{MAX_CLASSES, MAX_COLUMNS, MAX_CONTEXT_ROWS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRows {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRows {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub id: String,
    pub seed: u64,
    pub num_classes: usize,
    pub context: ContextRows,
    pub query: QueryRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictResponse {
    Success { id: String, probs: Vec<Vec<f64>> },
    Failure { id: String, error: String },
}

impl PredictResponse {
    pub fn id(&self) -> &str {
        match self {
            Self::Success { id, .. } | Self::Failure { id, .. } => id,
        }
    }
}

impl PredictRequest {
    /// `Err("limits")` when the request exceeds learner size limits.
    pub fn check_limits(&self) -> Result<(), String> {
        let width = self.context.rows.first().map_or(0, Vec::len);
        if self.context.rows.len() > MAX_CONTEXT_ROWS || width > MAX_COLUMNS || self.num_classes > MAX_CLASSES {
            return Err("limits".into());
        }
        Ok(())
    }
}

/// Answers one request line in echo mode: probabilities depend only on the
/// request bytes (SHA-256 seeded), never on time or environment.
pub fn echo_response(line: &str) -> String {
    let response = match serde_json::from_str::<PredictRequest>(line) {
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_owned))
                .unwrap_or_default();
            PredictResponse::Failure { id, error: format!("malformed request: {e}") }
        }
        Ok(req) => match req.check_limits() {
            Err(error) => PredictResponse::Failure { id: req.id, error },
            Ok(()) => {
                let digest = Sha256::digest(line.as_bytes());
                let base = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
                let mut counter = 0u64;
                let probs = req
                    .query
                    .rows
                    .iter()
                    .map(|_| {
                        let raw: Vec<f64> = (0..req.num_classes)
                            .map(|_| {
                                counter += 1;
                                let bits = crate::seeding::derive_seed(base, &[counter]);
                                1.0 + (bits >> 11) as f64 / (1u64 << 53) as f64
                            })
                            .collect();
                        let total: f64 = raw.iter().sum();
                        raw.into_iter().map(|x| x / total).collect()
                    })
                    .collect();
                PredictResponse::Success { id: req.id, probs }
            }
        },
    };
    serde_json::to_string(&response).expect("response serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(num_classes: usize) -> PredictRequest {
        PredictRequest {
            id: "r1".into(),
            seed: 3,
            num_classes,
            context: ContextRows { rows: vec![vec![0.1, 0.2], vec![1.0 / 3.0, -2.5]], labels: vec![0, 1] },
            query: QueryRows { rows: vec![vec![0.0, 0.0]; 3] },
        }
    }

    #[test]
    fn floats_round_trip_exactly() {
        let req = request(2);
        let back: PredictRequest = serde_json::from_str(&serde_json::to_string(&req).unwrap()).unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn echo_is_deterministic_and_stochastic() {
        let line = serde_json::to_string(&request(4)).unwrap();
        let a = echo_response(&line);
        assert_eq!(a, echo_response(&line));
        match serde_json::from_str::<PredictResponse>(&a).unwrap() {
            PredictResponse::Success { id, probs } => {
                assert_eq!(id, "r1");
                assert_eq!(probs.len(), 3);
                for row in probs {
                    assert_eq!(row.len(), 4);
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn echo_limits_and_malformed() {
        let line = serde_json::to_string(&request(11)).unwrap();
        assert_eq!(
            serde_json::from_str::<PredictResponse>(&echo_response(&line)).unwrap(),
            PredictResponse::Failure { id: "r1".into(), error: "limits".into() }
        );
        let bad = echo_response(r#"{"id": "x", "seed": 1}"#);
        assert!(matches!(serde_json::from_str(&bad).unwrap(), PredictResponse::Failure { id, .. } if id == "x"));
    }
}
