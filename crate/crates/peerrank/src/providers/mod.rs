//! Model-provider abstraction: chat and retrieval traits, wire dialects,
//! retry with exponential backoff and full jitter, and the registry that
//! binds cohort models to live endpoints.
//!
//! Credentials are read exclusively from environment variables named
//! `PEERRANK_<PROVIDER>_API_KEY`; they never appear in config files.

pub mod dialect;
pub mod http;
pub mod registry;
pub mod retrieval;
pub mod testing;

pub use registry::{JudgingProviders, ProviderRegistry, ProvidersConfig, RegistryError};

use std::future::Future;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::types::ModelId;

/// One chat turn sent to a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    /// Logical cohort model the call is addressed to (providers that serve
    /// several models dispatch on this).
    pub model_id: ModelId,
    pub system_text: Option<String>,
    pub user_text: String,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(model_id: &ModelId, user_text: impl Into<String>) -> Self {
        ChatRequest {
            model_id: model_id.clone(),
            system_text: None,
            user_text: user_text.into(),
            temperature: None,
            max_tokens: None,
        }
    }
}

/// A model's reply plus the call metadata the pipeline records.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub completion_tokens: Option<u64>,
    pub latency_ms: u64,
}

/// One retrieval hit handed to a respondent as hidden context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

/// Errors from provider calls, split by whether retrying can help.
#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("rate limited: {message}")]
    RateLimited { message: String },
    #[error("server error (status {status}): {message}")]
    ServerError { status: u16, message: String },
    #[error("transport failure: {message}")]
    Transport { message: String },
    #[error("authentication rejected: {message}")]
    Auth { message: String },
    #[error("invalid request (status {status}): {message}")]
    InvalidRequest { status: u16, message: String },
    #[error("missing API key: set the {env_var} environment variable")]
    MissingApiKey { env_var: String },
    #[error("malformed provider response: {message}")]
    MalformedResponse { message: String },
}

impl ProviderError {
    /// Rate limits, 5xx, and transport failures are transient; auth,
    /// request, and parse failures are not.
    pub fn retriable(&self) -> bool {
        matches!(
            self,
            ProviderError::RateLimited { .. }
                | ProviderError::ServerError { .. }
                | ProviderError::Transport { .. }
        )
    }
}

/// A chat-completion backend (live endpoint or simulated cohort).
#[async_trait::async_trait]
pub trait ChatProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    async fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

/// A web-search backend used only while answering grounded categories.
#[async_trait::async_trait]
pub trait RetrievalProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    async fn search(
        &self,
        query: &str,
        max_results: usize,
    ) -> Result<Vec<RetrievalResult>, ProviderError>;
}

/// Exponential backoff with full jitter: before retry k the wait is drawn
/// uniformly from [0, base * factor^(k-1)].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 1_000,
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the jitter window before retry number `failures`
    /// (1-based count of failures so far).
    pub fn delay_cap_ms(&self, failures: u32) -> f64 {
        self.base_delay_ms as f64 * self.factor.powi(failures.saturating_sub(1) as i32)
    }
}

/// Runs `op` under the policy. The operation receives the 1-based attempt
/// number; non-retriable errors and exhaustion return the last error.
/// Jitter is drawn from the caller's RNG so schedules are reproducible.
pub async fn with_retry<T, F, Fut>(
    policy: &RetryPolicy,
    rng: &mut ChaCha20Rng,
    mut op: F,
) -> Result<T, ProviderError>
where
    F: FnMut(u32) -> Fut,
    Fut: Future<Output = Result<T, ProviderError>>,
{
    let attempts = policy.max_attempts.max(1);
    let mut failures = 0u32;
    loop {
        let attempt = failures + 1;
        match op(attempt).await {
            Ok(value) => return Ok(value),
            Err(err) => {
                failures += 1;
                if !err.retriable() || failures >= attempts {
                    return Err(err);
                }
                let cap = policy.delay_cap_ms(failures);
                let wait_ms = rng.gen_range(0.0..=cap.max(0.0));
                log::warn!(
                    "retriable provider failure (attempt {attempt}/{attempts}), \
                     backing off {wait_ms:.0}ms: {err}"
                );
                tokio::time::sleep(std::time::Duration::from_millis(wait_ms as u64)).await;
            }
        }
    }
}

/// Environment variable holding the API key for a provider id
/// (`openai` -> `PEERRANK_OPENAI_API_KEY`).
pub fn api_key_env_var(provider_id: &str) -> String {
    let upper: String = provider_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_uppercase()
            } else {
                '_'
            }
        })
        .collect();
    format!("PEERRANK_{upper}_API_KEY")
}

/// Reads the provider's key from the environment, erroring with the exact
/// variable name when unset.
pub fn api_key_from_env(provider_id: &str) -> Result<String, ProviderError> {
    let env_var = api_key_env_var(provider_id);
    match std::env::var(&env_var) {
        Ok(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(ProviderError::MissingApiKey { env_var }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::derived_rng;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn env_var_name_uppercases_and_sanitizes() {
        assert_eq!(api_key_env_var("openai"), "PEERRANK_OPENAI_API_KEY");
        assert_eq!(api_key_env_var("z-ai"), "PEERRANK_Z_AI_API_KEY");
        assert_eq!(api_key_env_var("Tavily"), "PEERRANK_TAVILY_API_KEY");
    }

    #[test]
    fn retriability_split() {
        assert!(ProviderError::RateLimited { message: "x".into() }.retriable());
        assert!(ProviderError::ServerError { status: 503, message: "x".into() }.retriable());
        assert!(ProviderError::Transport { message: "x".into() }.retriable());
        assert!(!ProviderError::Auth { message: "x".into() }.retriable());
        assert!(!ProviderError::InvalidRequest { status: 400, message: "x".into() }.retriable());
        assert!(!ProviderError::MalformedResponse { message: "x".into() }.retriable());
        assert!(!ProviderError::MissingApiKey { env_var: "X".into() }.retriable());
    }

    #[test]
    fn delay_caps_double_per_failure() {
        let policy = RetryPolicy::default();
        assert_eq!(policy.delay_cap_ms(1), 1000.0);
        assert_eq!(policy.delay_cap_ms(2), 2000.0);
        assert_eq!(policy.delay_cap_ms(3), 4000.0);
        assert_eq!(policy.delay_cap_ms(4), 8000.0);
    }

    #[tokio::test(start_paused = true)]
    async fn retries_transient_failures_until_success() {
        let calls = AtomicU32::new(0);
        let mut rng = derived_rng(7, &["retry_test"]);
        let started = tokio::time::Instant::now();
        let out = with_retry(&RetryPolicy::default(), &mut rng, |_attempt| {
            let n = calls.fetch_add(1, Ordering::SeqCst);
            async move {
                if n < 2 {
                    Err(ProviderError::RateLimited { message: "slow down".into() })
                } else {
                    Ok(n)
                }
            }
        })
        .await
        .unwrap();
        assert_eq!(out, 2);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        // Two jittered waits, capped by 1s + 2s.
        let waited = started.elapsed();
        assert!(waited <= std::time::Duration::from_millis(3_000));
    }

    #[tokio::test(start_paused = true)]
    async fn fatal_errors_do_not_retry() {
        let calls = AtomicU32::new(0);
        let mut rng = derived_rng(7, &["retry_test"]);
        let out: Result<(), _> = with_retry(&RetryPolicy::default(), &mut rng, |_| {
            calls.fetch_add(1, Ordering::SeqCst);
            async { Err(ProviderError::Auth { message: "bad key".into() }) }
        })
        .await;
        assert!(matches!(out, Err(ProviderError::Auth { .. })));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test(start_paused = true)]
    async fn exhaustion_returns_last_error_after_max_attempts() {
        let calls = AtomicU32::new(0);
        let mut rng = derived_rng(7, &["retry_test"]);
        let out: Result<(), _> = with_retry(&RetryPolicy::default(), &mut rng, |_| {
            calls.fetch_add(1, Ordering::SeqCst);
            async { Err(ProviderError::ServerError { status: 500, message: "boom".into() }) }
        })
        .await;
        assert!(matches!(out, Err(ProviderError::ServerError { status: 500, .. })));
        assert_eq!(calls.load(Ordering::SeqCst), 5);
    }

    #[tokio::test(start_paused = true)]
    async fn jitter_schedule_is_reproducible_for_a_seed() {
        async fn total_wait(seed: u64) -> std::time::Duration {
            let mut rng = derived_rng(seed, &["retry_test"]);
            let started = tokio::time::Instant::now();
            let _: Result<(), _> = with_retry(&RetryPolicy::default(), &mut rng, |_| async {
                Err(ProviderError::Transport { message: "x".into() })
            })
            .await;
            started.elapsed()
        }
        let a = total_wait(42).await;
        let b = total_wait(42).await;
        let c = total_wait(43).await;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
