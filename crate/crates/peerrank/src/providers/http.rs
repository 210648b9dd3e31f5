//! HTTP-backed chat provider. The network surface is deliberately thin:
//! request bodies, response parsing, and status classification are pure
//! functions; this type only moves bytes and clamps concurrency.

use std::sync::Arc;
use std::time::Instant;

use tokio::sync::Semaphore;

use super::dialect::{auth_headers, build_request_body, parse_response_body, Dialect};
use super::{ChatProvider, ChatRequest, ChatResponse, ProviderError};

/// Default cap on in-flight requests per provider.
pub const DEFAULT_MAX_CONCURRENT: usize = 4;

/// Maps an HTTP status (with its body as context) onto the error taxonomy.
pub fn classify_status(status: u16, body: &str) -> ProviderError {
    let message = truncate(body, 300);
    match status {
        429 => ProviderError::RateLimited { message },
        500..=599 => ProviderError::ServerError { status, message },
        401 | 403 => ProviderError::Auth { message },
        _ => ProviderError::InvalidRequest { status, message },
    }
}

fn truncate(s: &str, max_chars: usize) -> String {
    if s.chars().count() <= max_chars {
        s.to_string()
    } else {
        let cut: String = s.chars().take(max_chars).collect();
        format!("{cut}…")
    }
}

/// A live chat endpoint for one cohort model.
pub struct HttpChatProvider {
    provider_id: String,
    dialect: Dialect,
    endpoint: String,
    /// Wire-level model name (defaults to the cohort model id).
    model_name: String,
    api_key: String,
    client: reqwest::Client,
    permits: Arc<Semaphore>,
}

impl HttpChatProvider {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        provider_id: impl Into<String>,
        dialect: Dialect,
        endpoint: impl Into<String>,
        model_name: impl Into<String>,
        api_key: impl Into<String>,
        client: reqwest::Client,
        permits: Arc<Semaphore>,
    ) -> Self {
        HttpChatProvider {
            provider_id: provider_id.into(),
            dialect,
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            api_key: api_key.into(),
            client,
            permits,
        }
    }
}

#[async_trait::async_trait]
impl ChatProvider for HttpChatProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    async fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| ProviderError::Transport {
                message: "provider concurrency limiter closed".into(),
            })?;
        let body = build_request_body(self.dialect, &self.model_name, request);
        let started = Instant::now();
        let mut call = self.client.post(&self.endpoint).json(&body);
        for (name, value) in auth_headers(self.dialect, &self.api_key) {
            call = call.header(name, value);
        }
        let response = call.send().await.map_err(|e| ProviderError::Transport {
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let text = response.text().await.map_err(|e| ProviderError::Transport {
            message: e.to_string(),
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, &text));
        }
        let json: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ProviderError::MalformedResponse {
                message: format!("non-JSON success body: {e}"),
            })?;
        let (text, completion_tokens) = parse_response_body(self.dialect, &json)?;
        Ok(ChatResponse {
            text,
            completion_tokens,
            latency_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classification_covers_the_taxonomy() {
        assert!(matches!(classify_status(429, "slow"), ProviderError::RateLimited { .. }));
        assert!(matches!(
            classify_status(500, "oops"),
            ProviderError::ServerError { status: 500, .. }
        ));
        assert!(matches!(
            classify_status(503, "oops"),
            ProviderError::ServerError { status: 503, .. }
        ));
        assert!(matches!(classify_status(401, "no"), ProviderError::Auth { .. }));
        assert!(matches!(classify_status(403, "no"), ProviderError::Auth { .. }));
        assert!(matches!(
            classify_status(400, "bad"),
            ProviderError::InvalidRequest { status: 400, .. }
        ));
        assert!(matches!(
            classify_status(404, "bad"),
            ProviderError::InvalidRequest { status: 404, .. }
        ));
    }

    #[test]
    fn retriability_follows_from_classification() {
        assert!(classify_status(429, "").retriable());
        assert!(classify_status(502, "").retriable());
        assert!(!classify_status(401, "").retriable());
        assert!(!classify_status(422, "").retriable());
    }

    #[test]
    fn long_error_bodies_are_truncated() {
        let body = "x".repeat(1000);
        match classify_status(400, &body) {
            ProviderError::InvalidRequest { message, .. } => {
                assert!(message.chars().count() <= 301);
                assert!(message.ends_with('…'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
