//! Endpoint configuration and the registry binding cohort models to
//! providers. Config files carry routing only — credentials come from
//! `PEERRANK_<PROVIDER>_API_KEY` environment variables, and the schema
//! rejects unknown fields so keys cannot be smuggled into config.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::dialect::Dialect;
use super::http::{HttpChatProvider, DEFAULT_MAX_CONCURRENT};
use super::retrieval::{HttpRetrievalProvider, RetrievalDialect};
use super::{api_key_from_env, ChatProvider, ProviderError, RetrievalProvider};
use crate::types::{ModelId, ModelSpec};

/// Routing for one cohort model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    /// Provider id; selects the `PEERRANK_<PROVIDER>_API_KEY` variable and
    /// the concurrency pool.
    pub provider: String,
    pub dialect: Dialect,
    pub endpoint: String,
    /// Wire model name when it differs from the cohort model id.
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub max_concurrent: Option<usize>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

/// Routing for the run's single retrieval backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalEndpoint {
    pub provider: String,
    pub dialect: RetrievalDialect,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub max_concurrent: Option<usize>,
}

/// The `providers.json` schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersConfig {
    pub models: BTreeMap<String, ModelEndpoint>,
    #[serde(default)]
    pub retrieval: Option<RetrievalEndpoint>,
}

impl ProvidersConfig {
    pub fn from_json_str(text: &str) -> Result<Self, RegistryError> {
        serde_json::from_str(text).map_err(|e| RegistryError::Config {
            message: e.to_string(),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("invalid providers config: {message}")]
    Config { message: String },
    #[error("no provider configured for cohort model {model_id}")]
    MissingModel { model_id: ModelId },
    #[error("no retrieval provider configured but the run requires grounding via {wanted}")]
    MissingRetrieval { wanted: String },
    #[error(
        "configured retrieval provider {configured} does not match the run's \
         grounding provider {wanted}"
    )]
    RetrievalMismatch { configured: String, wanted: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// The run's resolved providers: one chat backend per cohort model and at
/// most one retrieval backend.
#[derive(Default)]
pub struct ProviderRegistry {
    chat: BTreeMap<ModelId, Arc<dyn ChatProvider>>,
    retrieval: Option<Arc<dyn RetrievalProvider>>,
}

impl std::fmt::Debug for ProviderRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderRegistry")
            .field("chat", &self.chat.keys().collect::<Vec<_>>())
            .field("retrieval", &self.retrieval.as_ref().map(|r| r.provider_id()))
            .finish()
    }
}

/// Chat-only capability set handed to judging phases. The type has no
/// field for a retrieval client, so judges cannot search by construction —
/// a compile-time guarantee, not a runtime check.
#[derive(Clone)]
pub struct JudgingProviders {
    chat: BTreeMap<ModelId, Arc<dyn ChatProvider>>,
}

impl JudgingProviders {
    pub fn chat_for(&self, model_id: &ModelId) -> Result<Arc<dyn ChatProvider>, RegistryError> {
        self.chat
            .get(model_id)
            .cloned()
            .ok_or_else(|| RegistryError::MissingModel {
                model_id: model_id.clone(),
            })
    }
}

impl ProviderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_chat(&mut self, model_id: ModelId, provider: Arc<dyn ChatProvider>) {
        self.chat.insert(model_id, provider);
    }

    pub fn set_retrieval(&mut self, provider: Arc<dyn RetrievalProvider>) {
        self.retrieval = Some(provider);
    }

    pub fn chat_for(&self, model_id: &ModelId) -> Result<Arc<dyn ChatProvider>, RegistryError> {
        self.chat
            .get(model_id)
            .cloned()
            .ok_or_else(|| RegistryError::MissingModel {
                model_id: model_id.clone(),
            })
    }

    pub fn retrieval(&self) -> Option<Arc<dyn RetrievalProvider>> {
        self.retrieval.clone()
    }

    /// Drops the retrieval capability, keeping only chat backends. Judging
    /// phases accept this narrowed type.
    pub fn judging_view(&self) -> JudgingProviders {
        JudgingProviders {
            chat: self.chat.clone(),
        }
    }

    /// Binds every cohort model to its configured endpoint, sharing one
    /// concurrency pool per provider id. `grounding_provider` names the
    /// retrieval backend the run expects; pass `None` to skip retrieval
    /// (judging contexts never get one).
    pub fn from_config(
        config: &ProvidersConfig,
        cohort: &[ModelSpec],
        grounding_provider: Option<&str>,
    ) -> Result<Self, RegistryError> {
        let client = reqwest::Client::new();
        let mut pools: BTreeMap<String, Arc<Semaphore>> = BTreeMap::new();
        let mut registry = ProviderRegistry::new();
        for spec in cohort {
            let endpoint = config
                .models
                .get(&spec.model_id.0)
                .ok_or_else(|| RegistryError::MissingModel {
                    model_id: spec.model_id.clone(),
                })?;
            let api_key = api_key_from_env(&endpoint.provider)?;
            let permits = pools
                .entry(endpoint.provider.clone())
                .or_insert_with(|| {
                    Arc::new(Semaphore::new(
                        endpoint.max_concurrent.unwrap_or(DEFAULT_MAX_CONCURRENT),
                    ))
                })
                .clone();
            let provider = HttpChatProvider::new(
                endpoint.provider.clone(),
                endpoint.dialect,
                endpoint.endpoint.clone(),
                endpoint
                    .model_name
                    .clone()
                    .unwrap_or_else(|| spec.model_id.0.clone()),
                api_key,
                client.clone(),
                permits,
            );
            registry.insert_chat(spec.model_id.clone(), Arc::new(provider));
        }
        if let Some(wanted) = grounding_provider {
            let retrieval = config
                .retrieval
                .as_ref()
                .ok_or_else(|| RegistryError::MissingRetrieval {
                    wanted: wanted.to_string(),
                })?;
            if retrieval.provider != wanted {
                return Err(RegistryError::RetrievalMismatch {
                    configured: retrieval.provider.clone(),
                    wanted: wanted.to_string(),
                });
            }
            let api_key = api_key_from_env(&retrieval.provider)?;
            let permits = Arc::new(Semaphore::new(
                retrieval.max_concurrent.unwrap_or(DEFAULT_MAX_CONCURRENT),
            ));
            let provider = HttpRetrievalProvider::new(
                retrieval.provider.clone(),
                retrieval.dialect,
                retrieval
                    .endpoint
                    .clone()
                    .unwrap_or_else(|| retrieval.dialect.default_endpoint().to_string()),
                api_key,
                client,
                permits,
            );
            registry.set_retrieval(Arc::new(provider));
        }
        Ok(registry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ModelSpec;

    fn config_json() -> &'static str {
        r#"{
          "models": {
            "alpha": {
              "provider": "regtestalpha",
              "dialect": "openai_chat",
              "endpoint": "https://alpha.example/v1/chat/completions"
            },
            "beta": {
              "provider": "regtestbeta",
              "dialect": "anthropic_messages",
              "endpoint": "https://beta.example/v1/messages",
              "model_name": "beta-wire-name",
              "max_concurrent": 2
            }
          },
          "retrieval": {
            "provider": "regtesttavily",
            "dialect": "tavily"
          }
        }"#
    }

    #[test]
    fn config_parses_and_round_trips() {
        let config = ProvidersConfig::from_json_str(config_json()).unwrap();
        assert_eq!(config.models.len(), 2);
        assert_eq!(config.models["beta"].model_name.as_deref(), Some("beta-wire-name"));
        assert_eq!(config.retrieval.as_ref().unwrap().provider, "regtesttavily");
        let text = serde_json::to_string(&config).unwrap();
        assert_eq!(ProvidersConfig::from_json_str(&text).unwrap(), config);
    }

    #[test]
    fn config_rejects_embedded_credentials() {
        let sneaky = r#"{
          "models": {
            "alpha": {
              "provider": "p",
              "dialect": "openai_chat",
              "endpoint": "https://x.example",
              "api_key": "sk-leaked"
            }
          }
        }"#;
        let err = ProvidersConfig::from_json_str(sneaky).unwrap_err();
        assert!(err.to_string().contains("api_key"));
    }

    #[test]
    fn registry_requires_env_keys_and_names_the_variable() {
        let config = ProvidersConfig::from_json_str(config_json()).unwrap();
        let cohort = vec![
            ModelSpec::new("alpha", "regtestalpha", "Alpha"),
            ModelSpec::new("beta", "regtestbeta", "Beta"),
        ];
        std::env::remove_var("PEERRANK_REGTESTALPHA_API_KEY");
        let err = ProviderRegistry::from_config(&config, &cohort, None).unwrap_err();
        assert!(err.to_string().contains("PEERRANK_REGTESTALPHA_API_KEY"));

        std::env::set_var("PEERRANK_REGTESTALPHA_API_KEY", "k1");
        std::env::set_var("PEERRANK_REGTESTBETA_API_KEY", "k2");
        let registry = ProviderRegistry::from_config(&config, &cohort, None).unwrap();
        assert!(registry.chat_for(&ModelId::from("alpha")).is_ok());
        assert!(registry.chat_for(&ModelId::from("beta")).is_ok());
        assert!(registry.chat_for(&ModelId::from("gamma")).is_err());
        // No grounding requested: no retrieval client is built.
        assert!(registry.retrieval().is_none());
        std::env::remove_var("PEERRANK_REGTESTALPHA_API_KEY");
        std::env::remove_var("PEERRANK_REGTESTBETA_API_KEY");
    }

    #[test]
    fn registry_matches_grounding_provider_name() {
        let config = ProvidersConfig::from_json_str(config_json()).unwrap();
        let cohort = vec![ModelSpec::new("alpha", "regtestalpha", "Alpha")];
        std::env::set_var("PEERRANK_REGTESTALPHA_API_KEY", "k1");
        std::env::set_var("PEERRANK_REGTESTTAVILY_API_KEY", "k3");
        let registry =
            ProviderRegistry::from_config(&config, &cohort, Some("regtesttavily")).unwrap();
        assert!(registry.retrieval().is_some());

        let err = ProviderRegistry::from_config(&config, &cohort, Some("otherengine")).unwrap_err();
        assert!(matches!(err, RegistryError::RetrievalMismatch { .. }));
        std::env::remove_var("PEERRANK_REGTESTALPHA_API_KEY");
        std::env::remove_var("PEERRANK_REGTESTTAVILY_API_KEY");
    }

    #[test]
    fn missing_cohort_model_is_an_error() {
        let config = ProvidersConfig::from_json_str(config_json()).unwrap();
        let cohort = vec![ModelSpec::new("gamma", "p", "Gamma")];
        let err = ProviderRegistry::from_config(&config, &cohort, None).unwrap_err();
        assert!(matches!(err, RegistryError::MissingModel { .. }));
    }
}
