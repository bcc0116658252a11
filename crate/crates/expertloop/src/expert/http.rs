//! HTTP completion backend.
//!
//! Speaks a minimal JSON contract: `POST endpoint` with
//! `{"prompt", "max_tokens", "temperature", "stop"}` and a `200` reply of
//! `{"text": "..."}`. Credentials are never stored; an optional
//! environment-variable name supplies a bearer token at request time.

use std::time::Duration;

use serde::Serialize;

use super::{ExpertBackend, ExpertError, ExpertRequest};

/// Remote expert reachable over HTTP.
pub struct HttpExpert {
    endpoint: String,
    /// Name of the environment variable holding the bearer token.
    auth_env: Option<String>,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    stop: &'a [String],
}

impl HttpExpert {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_timeout(endpoint, Duration::from_secs(30))
    }

    pub fn with_timeout(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            auth_env: None,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// Send `Authorization: Bearer <value of the named variable>` with each
    /// request. Only the variable name is held here, so configs and debug
    /// output never contain the secret.
    pub fn with_auth_env(mut self, var_name: impl Into<String>) -> Self {
        self.auth_env = Some(var_name.into());
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn bearer_token(&self) -> Result<Option<String>, ExpertError> {
        match &self.auth_env {
            None => Ok(None),
            Some(name) => match std::env::var(name) {
                Ok(value) => Ok(Some(value)),
                Err(_) => Err(ExpertError::protocol(format!(
                    "auth environment variable {name} is not set"
                ))),
            },
        }
    }
}

impl ExpertBackend for HttpExpert {
    fn complete(&self, request: &ExpertRequest) -> Result<String, ExpertError> {
        let body = WireRequest {
            prompt: &request.prompt_text,
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            stop: &request.stop,
        };
        let mut call = self.agent.post(&self.endpoint);
        if let Some(token) = self.bearer_token()? {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let response = match call.send_json(&body) {
            Ok(resp) => resp,
            // Server-side failures are treated as transient; client-side
            // statuses mean the request itself is wrong and a retry cannot
            // help.
            Err(ureq::Error::Status(code, _)) if code >= 500 => {
                return Err(ExpertError::transport(format!("server returned status {code}")));
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(ExpertError::protocol(format!("server returned status {code}")));
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(ExpertError::transport(t.to_string()));
            }
        };
        let json: serde_json::Value = response
            .into_json()
            .map_err(|e| ExpertError::protocol(format!("reply is not valid JSON: {e}")))?;
        match json.get("text").and_then(|t| t.as_str()) {
            Some(text) => Ok(text.to_string()),
            None => Err(ExpertError::protocol("reply lacks a string \"text\" field")),
        }
    }

    fn id(&self) -> String {
        format!("http:{}", self.endpoint)
    }
}
