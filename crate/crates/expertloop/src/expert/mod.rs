//! Expert consultation: pluggable completion backends, retry with
//! exponential backoff, stop-marker truncation, and a content-addressed
//! reply cache.

pub mod cache;
pub mod http;
pub mod mock;
pub mod parse;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{request_fingerprint, FileCache};
pub use http::HttpExpert;
pub use mock::{FlakyFailure, FlakyExpert, MockExpert};
pub use parse::{parse_reasoning, CueConfig, ParseError, ParsedReasoning};

/// Decoding parameters shared by every request in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodingParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self { max_tokens: 256, temperature: 0.0, stop: vec!["\n\n".to_string()] }
    }
}

impl DecodingParams {
    pub fn request(&self, prompt_text: impl Into<String>) -> ExpertRequest {
        ExpertRequest {
            prompt_text: prompt_text.into(),
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            stop: self.stop.clone(),
        }
    }
}

/// One completion request to an expert backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertRequest {
    pub prompt_text: String,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Generation is cut before the earliest occurrence of any marker.
    pub stop: Vec<String>,
}

impl ExpertRequest {
    pub fn new(prompt_text: impl Into<String>) -> Self {
        Self {
            prompt_text: prompt_text.into(),
            max_tokens: 256,
            temperature: 0.0,
            stop: vec!["\n\n".to_string()],
        }
    }
}

/// The reply to one consultation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consultation {
    /// Backend output after stop-marker truncation.
    pub raw_text: String,
    pub backend_id: String,
    pub from_cache: bool,
    /// Wall-clock latency; omitted for cached replies and deterministic
    /// backends so that reruns produce byte-identical artifacts.
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ExpertError {
    /// Network-level failure; retryable.
    #[error("expert transport failure: {message}")]
    Transport { message: String },
    /// The backend answered but violated the reply contract; not retryable.
    #[error("expert protocol failure: {message}")]
    Protocol { message: String },
    #[error("expert cache i/o failure")]
    Io(#[from] std::io::Error),
}

impl ExpertError {
    pub fn transport(message: impl Into<String>) -> Self {
        Self::Transport { message: message.into() }
    }

    pub fn protocol(message: impl Into<String>) -> Self {
        Self::Protocol { message: message.into() }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport { .. })
    }
}

/// A completion backend. Implementations must be safe to share across
/// worker threads.
pub trait ExpertBackend: Send + Sync {
    /// Raw completion for a request, before stop-marker truncation.
    fn complete(&self, request: &ExpertRequest) -> Result<String, ExpertError>;

    /// Stable identity mixed into cache keys, so replies from different
    /// backends never collide.
    fn id(&self) -> String;

    /// Whether equal requests always yield equal replies. Deterministic
    /// backends get no latency recorded, keeping artifacts reproducible.
    fn deterministic(&self) -> bool {
        false
    }
}

/// Retry discipline for transport failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Retries after the first attempt; `max_retries = 3` allows at most
    /// four attempts in total.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each subsequent one.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay_ms: 100 }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and mock backends.
    pub fn immediate(max_retries: u32) -> Self {
        Self { max_retries, base_delay_ms: 0 }
    }
}

/// Cut `text` before the earliest occurrence of any stop marker.
pub fn truncate_at_stop(text: &str, stop: &[String]) -> String {
    let cut = stop
        .iter()
        .filter(|marker| !marker.is_empty())
        .filter_map(|marker| text.find(marker.as_str()))
        .min();
    match cut {
        Some(i) => text[..i].to_string(),
        None => text.to_string(),
    }
}

/// Consult an expert: serve from the cache when possible, otherwise call
/// the backend, retrying transport failures with exponential backoff, then
/// truncate at the earliest stop marker and store the reply.
pub fn consult(
    backend: &dyn ExpertBackend,
    request: &ExpertRequest,
    policy: &RetryPolicy,
    cache: Option<&FileCache>,
) -> Result<Consultation, ExpertError> {
    let backend_id = backend.id();
    let key = cache.map(|c| c.key(&backend_id, request));
    if let (Some(c), Some(k)) = (cache, key.as_deref()) {
        if let Some(raw_text) = c.get(k)? {
            return Ok(Consultation { raw_text, backend_id, from_cache: true, latency_ms: None });
        }
    }

    let started = Instant::now();
    let mut attempt = 0u32;
    let raw = loop {
        match backend.complete(request) {
            Ok(text) => break text,
            Err(err) if err.is_retryable() && attempt < policy.max_retries => {
                let delay = policy.base_delay_ms.saturating_mul(1u64 << attempt.min(16));
                if delay > 0 {
                    std::thread::sleep(Duration::from_millis(delay));
                }
                attempt += 1;
            }
            Err(err) => return Err(err),
        }
    };

    let raw_text = truncate_at_stop(&raw, &request.stop);
    if let (Some(c), Some(k)) = (cache, key.as_deref()) {
        c.put(k, &raw_text)?;
    }
    let latency_ms = if backend.deterministic() {
        None
    } else {
        Some(started.elapsed().as_millis() as u64)
    };
    Ok(Consultation { raw_text, backend_id, from_cache: false, latency_ms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mock::{FlakyExpert, FlakyFailure, MockExpert};

    fn request(prompt: &str) -> ExpertRequest {
        ExpertRequest::new(prompt)
    }

    #[test]
    fn stop_truncation_cuts_before_the_earliest_marker() {
        let stop = vec!["STOP".to_string(), "END".to_string()];
        assert_eq!(truncate_at_stop("abc END def STOP", &stop), "abc ");
        assert_eq!(truncate_at_stop("no markers here", &stop), "no markers here");
        assert_eq!(truncate_at_stop("STOPfront", &stop), "");
    }

    #[test]
    fn empty_stop_markers_are_ignored() {
        let stop = vec![String::new()];
        assert_eq!(truncate_at_stop("abc", &stop), "abc");
    }

    #[test]
    fn transport_failures_are_retried_until_success() {
        let backend = FlakyExpert::new(MockExpert::new(7), 2, FlakyFailure::Transport);
        let got = consult(&backend, &request("hi"), &RetryPolicy::immediate(3), None).unwrap();
        assert_eq!(backend.attempts(), 3);
        assert!(!got.from_cache);
        let direct = MockExpert::new(7).complete(&request("hi")).unwrap();
        assert_eq!(got.raw_text, truncate_at_stop(&direct, &request("hi").stop));
    }

    #[test]
    fn retries_stop_after_max_retries() {
        let backend = FlakyExpert::new(MockExpert::new(7), 10, FlakyFailure::Transport);
        let err = consult(&backend, &request("hi"), &RetryPolicy::immediate(3), None).unwrap_err();
        assert!(matches!(err, ExpertError::Transport { .. }));
        // max_retries = 3 means at most four attempts.
        assert_eq!(backend.attempts(), 4);
    }

    #[test]
    fn protocol_failures_are_not_retried() {
        let backend = FlakyExpert::new(MockExpert::new(7), 1, FlakyFailure::Protocol);
        let err = consult(&backend, &request("hi"), &RetryPolicy::immediate(3), None).unwrap_err();
        assert!(matches!(err, ExpertError::Protocol { .. }));
        assert_eq!(backend.attempts(), 1);
    }

    #[test]
    fn deterministic_backends_record_no_latency() {
        let backend = MockExpert::new(1);
        let got = consult(&backend, &request("hi"), &RetryPolicy::immediate(0), None).unwrap();
        assert_eq!(got.latency_ms, None);
    }
}
