//! Deterministic in-process providers for tests: a handler-driven chat
//! provider with programmable faults and a canned retrieval provider.
//! These live in the library (not behind `cfg(test)`) so integration
//! tests and downstream harnesses can drive the pipeline offline.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::{ChatProvider, ChatRequest, ChatResponse, ProviderError, RetrievalProvider, RetrievalResult};

/// Builds a plain success reply.
pub fn reply(text: impl Into<String>) -> Result<ChatResponse, ProviderError> {
    let text = text.into();
    Ok(ChatResponse {
        completion_tokens: Some(text.split_whitespace().count() as u64),
        latency_ms: 5,
        text,
    })
}

type ChatHandler =
    dyn Fn(u64, &ChatRequest) -> Result<ChatResponse, ProviderError> + Send + Sync;

/// A chat provider that answers from a closure. The closure receives the
/// zero-based global call index, so tests can inject failures on specific
/// calls; every request is recorded for later assertions.
pub struct ScriptedChatProvider {
    provider_id: String,
    calls: AtomicU64,
    requests: Mutex<Vec<ChatRequest>>,
    handler: Box<ChatHandler>,
}

impl ScriptedChatProvider {
    pub fn new<F>(provider_id: impl Into<String>, handler: F) -> Arc<Self>
    where
        F: Fn(u64, &ChatRequest) -> Result<ChatResponse, ProviderError> + Send + Sync + 'static,
    {
        Arc::new(ScriptedChatProvider {
            provider_id: provider_id.into(),
            calls: AtomicU64::new(0),
            requests: Mutex::new(Vec::new()),
            handler: Box::new(handler),
        })
    }

    /// A provider that always replies with the same text.
    pub fn constant(provider_id: impl Into<String>, text: impl Into<String>) -> Arc<Self> {
        let text = text.into();
        Self::new(provider_id, move |_, _| reply(text.clone()))
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }
}

#[async_trait::async_trait]
impl ChatProvider for ScriptedChatProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    async fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let index = self.calls.fetch_add(1, Ordering::SeqCst);
        self.requests.lock().unwrap().push(request.clone());
        (self.handler)(index, request)
    }
}

/// A retrieval provider returning fixed hits; records queries.
pub struct CannedRetrievalProvider {
    provider_id: String,
    hits: Vec<RetrievalResult>,
    queries: Mutex<Vec<String>>,
}

impl CannedRetrievalProvider {
    pub fn new(provider_id: impl Into<String>, hits: Vec<RetrievalResult>) -> Arc<Self> {
        Arc::new(CannedRetrievalProvider {
            provider_id: provider_id.into(),
            hits,
            queries: Mutex::new(Vec::new()),
        })
    }

    pub fn queries(&self) -> Vec<String> {
        self.queries.lock().unwrap().clone()
    }
}

#[async_trait::async_trait]
impl RetrievalProvider for CannedRetrievalProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    async fn search(
        &self,
        query: &str,
        max_results: usize,
    ) -> Result<Vec<RetrievalResult>, ProviderError> {
        self.queries.lock().unwrap().push(query.to_string());
        Ok(self.hits.iter().take(max_results).cloned().collect())
    }
}
