//! Wire dialects for chat endpoints. Request building and response parsing
//! are pure functions over JSON values so they can be tested against
//! recorded fixtures without any network.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatRequest, ProviderError};

/// Maximum output tokens sent when the caller does not specify one. The
/// messages dialect requires the field; the chat dialect just benefits
/// from a bound.
pub const DEFAULT_MAX_TOKENS: u32 = 4096;

/// Wire protocol spoken by an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    /// `POST /v1/chat/completions` style: `messages` array with system
    /// role inline, reply under `choices[0].message.content`.
    OpenaiChat,
    /// `POST /v1/messages` style: top-level `system`, reply as a list of
    /// typed content blocks, `max_tokens` mandatory.
    AnthropicMessages,
}

impl Dialect {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dialect::OpenaiChat => "openai_chat",
            Dialect::AnthropicMessages => "anthropic_messages",
        }
    }
}

/// Builds the JSON request body for one chat turn.
pub fn build_request_body(dialect: Dialect, model_name: &str, request: &ChatRequest) -> Value {
    match dialect {
        Dialect::OpenaiChat => {
            let mut messages = Vec::new();
            if let Some(system) = &request.system_text {
                messages.push(json!({"role": "system", "content": system}));
            }
            messages.push(json!({"role": "user", "content": request.user_text}));
            let mut body = json!({
                "model": model_name,
                "messages": messages,
            });
            if let Some(t) = request.temperature {
                body["temperature"] = json!(t);
            }
            if let Some(m) = request.max_tokens {
                body["max_tokens"] = json!(m);
            }
            body
        }
        Dialect::AnthropicMessages => {
            let mut body = json!({
                "model": model_name,
                "max_tokens": request.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
                "messages": [{"role": "user", "content": request.user_text}],
            });
            if let Some(system) = &request.system_text {
                body["system"] = json!(system);
            }
            if let Some(t) = request.temperature {
                body["temperature"] = json!(t);
            }
            body
        }
    }
}

/// HTTP headers carrying the credential for the dialect.
pub fn auth_headers(dialect: Dialect, api_key: &str) -> Vec<(String, String)> {
    match dialect {
        Dialect::OpenaiChat => vec![("authorization".into(), format!("Bearer {api_key}"))],
        Dialect::AnthropicMessages => vec![
            ("x-api-key".into(), api_key.to_string()),
            ("anthropic-version".into(), "2023-06-01".into()),
        ],
    }
}

/// Extracts the reply text and completion-token count from a success body.
pub fn parse_response_body(
    dialect: Dialect,
    body: &Value,
) -> Result<(String, Option<u64>), ProviderError> {
    let malformed = |message: &str| ProviderError::MalformedResponse {
        message: format!("{} body: {message}", dialect.as_str()),
    };
    match dialect {
        Dialect::OpenaiChat => {
            let text = body
                .pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .ok_or_else(|| malformed("missing choices[0].message.content"))?
                .to_string();
            let tokens = body.pointer("/usage/completion_tokens").and_then(Value::as_u64);
            Ok((text, tokens))
        }
        Dialect::AnthropicMessages => {
            let blocks = body
                .get("content")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("missing content array"))?;
            let mut text = String::new();
            for block in blocks {
                if block.get("type").and_then(Value::as_str) == Some("text") {
                    text.push_str(
                        block
                            .get("text")
                            .and_then(Value::as_str)
                            .ok_or_else(|| malformed("text block without text field"))?,
                    );
                }
            }
            if text.is_empty() && blocks.iter().all(|b| {
                b.get("type").and_then(Value::as_str) != Some("text")
            }) && !blocks.is_empty()
            {
                return Err(malformed("no text blocks in content"));
            }
            let tokens = body.pointer("/usage/output_tokens").and_then(Value::as_u64);
            Ok((text, tokens))
        }
    }
}
