//! Retrieval (web search) providers. A run uses exactly one retrieval
//! backend, and only while answering categories marked as grounded.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::http::classify_status;
use super::{ProviderError, RetrievalProvider, RetrievalResult};

/// Search-API wire protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalDialect {
    /// JSON POST with the key in the body; hits under `results[]` with
    /// `title` / `url` / `content`.
    Tavily,
    /// GET with query parameters; hits under `organic_results[]` with
    /// `title` / `link` / `snippet`.
    Serpapi,
}

impl RetrievalDialect {
    pub fn as_str(&self) -> &'static str {
        match self {
            RetrievalDialect::Tavily => "tavily",
            RetrievalDialect::Serpapi => "serpapi",
        }
    }

    pub fn default_endpoint(&self) -> &'static str {
        match self {
            RetrievalDialect::Tavily => "https://api.tavily.com/search",
            RetrievalDialect::Serpapi => "https://serpapi.com/search.json",
        }
    }
}

/// A fully specified search call: URL, optional JSON body, query pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchCall {
    pub url: String,
    pub body: Option<Value>,
    pub query_params: Vec<(String, String)>,
}

/// Builds the wire call for one search.
pub fn build_search_call(
    dialect: RetrievalDialect,
    endpoint: &str,
    api_key: &str,
    query: &str,
    max_results: usize,
) -> SearchCall {
    match dialect {
        RetrievalDialect::Tavily => SearchCall {
            url: endpoint.to_string(),
            body: Some(json!({
                "api_key": api_key,
                "query": query,
                "max_results": max_results,
            })),
            query_params: vec![],
        },
        RetrievalDialect::Serpapi => SearchCall {
            url: endpoint.to_string(),
            body: None,
            query_params: vec![
                ("q".into(), query.to_string()),
                ("num".into(), max_results.to_string()),
                ("api_key".into(), api_key.to_string()),
            ],
        },
    }
}

/// Extracts hits from a success body, capped at `max_results`.
pub fn parse_search_response(
    dialect: RetrievalDialect,
    body: &Value,
    max_results: usize,
) -> Result<Vec<RetrievalResult>, ProviderError> {
    let malformed = |message: &str| ProviderError::MalformedResponse {
        message: format!("{} body: {message}", dialect.as_str()),
    };
    let (list_key, url_key, snippet_key) = match dialect {
        RetrievalDialect::Tavily => ("results", "url", "content"),
        RetrievalDialect::Serpapi => ("organic_results", "link", "snippet"),
    };
    let hits = body
        .get(list_key)
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(&format!("missing {list_key} array")))?;
    let mut out = Vec::new();
    for hit in hits.iter().take(max_results) {
        out.push(RetrievalResult {
            title: hit
                .get("title")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            url: hit
                .get(url_key)
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            snippet: hit
                .get(snippet_key)
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
        });
    }
    Ok(out)
}

/// A live search endpoint.
pub struct HttpRetrievalProvider {
    provider_id: String,
    dialect: RetrievalDialect,
    endpoint: String,
    api_key: String,
    client: reqwest::Client,
    permits: Arc<Semaphore>,
}

impl HttpRetrievalProvider {
    pub fn new(
        provider_id: impl Into<String>,
        dialect: RetrievalDialect,
        endpoint: impl Into<String>,
        api_key: impl Into<String>,
        client: reqwest::Client,
        permits: Arc<Semaphore>,
    ) -> Self {
        HttpRetrievalProvider {
            provider_id: provider_id.into(),
            dialect,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            client,
            permits,
        }
    }
}

#[async_trait::async_trait]
impl RetrievalProvider for HttpRetrievalProvider {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    async fn search(
        &self,
        query: &str,
        max_results: usize,
    ) -> Result<Vec<RetrievalResult>, ProviderError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| ProviderError::Transport {
                message: "provider concurrency limiter closed".into(),
            })?;
        let call = build_search_call(self.dialect, &self.endpoint, &self.api_key, query, max_results);
        let mut request = self.client.get(&call.url);
        if let Some(body) = &call.body {
            request = self.client.post(&call.url).json(body);
        } else {
            request = request.query(&call.query_params);
        }
        let response = request.send().await.map_err(|e| ProviderError::Transport {
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let text = response.text().await.map_err(|e| ProviderError::Transport {
            message: e.to_string(),
        })?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, &text));
        }
        let json: Value = serde_json::from_str(&text).map_err(|e| ProviderError::MalformedResponse {
            message: format!("non-JSON success body: {e}"),
        })?;
        parse_search_response(self.dialect, &json, max_results)
    }
}
