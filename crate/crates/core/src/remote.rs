//! Minimal blocking JSON-over-HTTP client shared by the live adapters.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RemoteError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited (HTTP 429)")]
    RateLimited,
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("bad response body: {0}")]
    Decode(String),
    #[error("environment variable {0} is not set")]
    MissingKey(String),
}

/// Endpoint settings as they appear in the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout_ms: u64,
    /// Name of the environment variable holding an API key, if any.
    pub api_key_env: Option<String>,
    /// Query parameter carrying the key; when unset the key is sent as a
    /// bearer token.
    pub api_key_param: Option<String>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            timeout_ms: 10_000,
            api_key_env: None,
            api_key_param: None,
        }
    }
}

pub struct HttpClient {
    agent: ureq::Agent,
    config: EndpointConfig,
    api_key: Option<String>,
}

impl HttpClient {
    pub fn new(config: EndpointConfig) -> Result<Self, RemoteError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| RemoteError::MissingKey(var.clone()))?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            config,
            api_key,
        })
    }

    fn read<T: DeserializeOwned>(
        result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T, RemoteError> {
        let mut response = result.map_err(|e| RemoteError::Transport(e.to_string()))?;
        match response.status().as_u16() {
            200..=299 => response
                .body_mut()
                .read_json::<T>()
                .map_err(|e| RemoteError::Decode(e.to_string())),
            429 => Err(RemoteError::RateLimited),
            code => Err(RemoteError::Status(code)),
        }
    }

    pub fn post_json<T: DeserializeOwned>(&self, body: &serde_json::Value) -> Result<T, RemoteError> {
        let mut req = self.agent.post(&self.config.url);
        match (&self.api_key, &self.config.api_key_param) {
            (Some(key), Some(param)) => req = req.query(param, key),
            (Some(key), None) => req = req.header("Authorization", &format!("Bearer {key}")),
            _ => {}
        }
        Self::read(req.send_json(body))
    }

    pub fn get_json<T: DeserializeOwned>(&self, params: &[(&str, &str)]) -> Result<T, RemoteError> {
        let mut req = self.agent.get(&self.config.url);
        for (k, v) in params {
            req = req.query(*k, *v);
        }
        match (&self.api_key, &self.config.api_key_param) {
            (Some(key), Some(param)) => req = req.query(param, key),
            (Some(key), None) => req = req.header("Authorization", &format!("Bearer {key}")),
            _ => {}
        }
        Self::read(req.call())
    }
}
