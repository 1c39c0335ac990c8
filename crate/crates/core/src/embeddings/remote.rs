use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingMatrix, EmbeddingProvider, ProviderDescriptor, ProviderKind};

/// Body of `POST /embed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

/// Response of `POST /embed`: one `rows x dim` matrix (as a list of rows)
/// per requested text, in request order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub matrices: Vec<Vec<Vec<f64>>>,
}

/// Client for an embedding sidecar wrapping a real encoder.
pub struct RemoteProvider {
    endpoint: String,
    descriptor: ProviderDescriptor,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(base_url: &str, identity: &str, dim: usize) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Malformed("dim must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| EmbedError::Remote(e.to_string()))?;
        Ok(RemoteProvider {
            endpoint: format!("{}/embed", base_url.trim_end_matches('/')),
            descriptor: ProviderDescriptor {
                kind: ProviderKind::Remote,
                dim,
                identity: identity.to_string(),
            },
            client,
        })
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn embed(&self, text: &str) -> Result<EmbeddingMatrix, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop().ok_or_else(|| EmbedError::Remote("empty response".into()))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingMatrix>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let request = EmbedRequest {
            texts: texts.iter().map(|t| t.to_string()).collect(),
        };
        let response = self
            .client
            .post(&self.endpoint)
            .json(&request)
            .send()
            .map_err(|e| EmbedError::Remote(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(EmbedError::Remote(format!("HTTP {status}: {body}")));
        }
        let body: EmbedResponse = response
            .json()
            .map_err(|e| EmbedError::Remote(format!("bad response body: {e}")))?;
        if body.dim != self.descriptor.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.descriptor.dim,
                found: body.dim,
            });
        }
        if body.matrices.len() != texts.len() {
            return Err(EmbedError::Remote(format!(
                "asked for {} matrices, received {}",
                texts.len(),
                body.matrices.len()
            )));
        }
        body.matrices
            .iter()
            .map(|rows| {
                let m = EmbeddingMatrix::from_rows(rows)?;
                if m.dim() != self.descriptor.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.descriptor.dim,
                        found: m.dim(),
                    });
                }
                Ok(m)
            })
            .collect()
    }
}
