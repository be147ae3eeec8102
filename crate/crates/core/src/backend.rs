//! Text-completion backends shared by the planner and the judge.
//!
//! Wire contract for both: `POST {"prompt": ..., "media_ref": ...}` and a
//! `{"text": ...}` reply. `media_ref` is omitted when absent.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const JUDGE_KEY_ENV: &str = "EDUSTORY_JUDGE_KEY";
pub const GEN_KEY_ENV: &str = "EDUSTORY_GEN_KEY";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {0}")]
    Status(u16),
    #[error("invalid backend response: {0}")]
    InvalidResponse(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRequest {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
}

/// Backend behind the instruction planner.
pub trait PlannerBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Backend behind the VLM judge. `media_ref` is a frame handle in
/// integration mode and `None` when the prompt carries a descriptor.
pub trait JudgeBackend: Send + Sync {
    fn judge(&self, prompt: &str, media_ref: Option<&str>) -> Result<String, BackendError>;
}

/// JSON-over-HTTP client. The optional key is sent as a bearer token.
#[derive(Debug, Clone)]
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            api_key,
            agent,
        }
    }

    /// Reads the key from `env_var` when set.
    pub fn from_env(endpoint: impl Into<String>, env_var: &str, timeout: Duration) -> Self {
        Self::new(endpoint, std::env::var(env_var).ok(), timeout)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn post_json<B: Serialize, R: DeserializeOwned>(&self, body: &B) -> Result<R, BackendError> {
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let response = request.send_json(body).map_err(map_ureq)?;
        response
            .into_body()
            .read_json::<R>()
            .map_err(|e| BackendError::InvalidResponse(e.to_string()))
    }

    fn text(&self, prompt: &str, media_ref: Option<&str>) -> Result<String, BackendError> {
        let request = TextRequest {
            prompt: prompt.to_string(),
            media_ref: media_ref.map(str::to_string),
        };
        let response: TextResponse = self.post_json(&request)?;
        Ok(response.text)
    }
}

fn map_ureq(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::StatusCode(code) => BackendError::Status(code),
        other => BackendError::Transport(other.to_string()),
    }
}

impl PlannerBackend for HttpClient {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.text(prompt, None)
    }
}

impl JudgeBackend for HttpClient {
    fn judge(&self, prompt: &str, media_ref: Option<&str>) -> Result<String, BackendError> {
        self.text(prompt, media_ref)
    }
}

/// Replays a fixed queue of replies and records every request. Running
/// past the end of the script is a backend error.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<Result<String, BackendError>>>,
    requests: Mutex<Vec<TextRequest>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_results(replies.into_iter().map(|r| Ok(r.into())))
    }

    pub fn with_results<I>(replies: I) -> Self
    where
        I: IntoIterator<Item = Result<String, BackendError>>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<TextRequest> {
        self.requests.lock().expect("poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.requests.lock().expect("poisoned").len()
    }

    fn next(&self, prompt: &str, media_ref: Option<&str>) -> Result<String, BackendError> {
        self.requests.lock().expect("poisoned").push(TextRequest {
            prompt: prompt.to_string(),
            media_ref: media_ref.map(str::to_string),
        });
        self.replies
            .lock()
            .expect("poisoned")
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::Other("scripted backend exhausted".into())))
    }
}

impl PlannerBackend for ScriptedBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.next(prompt, None)
    }
}

impl JudgeBackend for ScriptedBackend {
    fn judge(&self, prompt: &str, media_ref: Option<&str>) -> Result<String, BackendError> {
        self.next(prompt, media_ref)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_backend_replays_in_order() {
        let backend = ScriptedBackend::new(["one", "two"]);
        assert_eq!(backend.complete("p1").unwrap(), "one");
        assert_eq!(backend.judge("p2", Some("frame-7")).unwrap(), "two");
        assert!(backend.complete("p3").is_err());
        let requests = backend.requests();
        assert_eq!(requests.len(), 3);
        assert_eq!(requests[1].media_ref.as_deref(), Some("frame-7"));
    }

    #[test]
    fn request_omits_absent_media_ref() {
        let json = serde_json::to_string(&TextRequest {
            prompt: "hi".into(),
            media_ref: None,
        })
        .unwrap();
        assert_eq!(json, r#"{"prompt":"hi"}"#);
    }

    #[test]
    fn http_client_speaks_text_contract() {
        let (url, server) = test_server::serve(vec![
            (200, r#"{"text":"hello"}"#.to_string()),
            (500, "{}".to_string()),
        ]);
        let client = HttpClient::new(url, Some("secret".into()), Duration::from_secs(5));
        assert_eq!(client.judge("judge this", Some("frame-1")).unwrap(), "hello");
        assert_eq!(client.complete("plan").unwrap_err(), BackendError::Status(500));
        let captured = server.join().unwrap();
        let body = |i: usize| serde_json::from_str::<serde_json::Value>(&captured[i].body).unwrap();
        assert_eq!(body(0), serde_json::json!({"prompt": "judge this", "media_ref": "frame-1"}));
        assert!(captured[0].head.to_ascii_lowercase().contains("authorization: bearer secret"));
        assert_eq!(body(1), serde_json::json!({"prompt": "plan"}));
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let client = HttpClient::new("http://127.0.0.1:9/", None, Duration::from_millis(500));
        assert!(matches!(client.complete("x"), Err(BackendError::Transport(_))));
    }
}
