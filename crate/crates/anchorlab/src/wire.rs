//! HTTP backend speaking the OpenAI-compatible chat-completions and
//! embeddings protocol.
//!
//! The API key is read from the environment once at construction, held
//! privately, and sent only as a bearer header — it never appears in
//! errors, logs, or debug output.

use std::env;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use anchorlab_core::anchor::EmbeddingVector;
use anchorlab_core::backend::{Backend, BackendError, Capabilities, GenerationRequest};
use serde_json::{json, Value};

/// How in-context exemplars become prompt messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    /// Each shot is a user/assistant message pair before the query.
    ChatTurns,
    /// All shots collapse into one user message of completed lines.
    Concat,
}

/// Everything needed to talk to an endpoint.
///
/// The settings carry the *name* of the environment variable holding the
/// API key, never the key itself, so they are safe to print and hash.
#[derive(Debug, Clone, PartialEq)]
pub struct WireSettings {
    /// Base URL, e.g. `http://127.0.0.1:8080/v1`.
    pub url: String,
    /// Generation model name.
    pub model: String,
    /// Embedding model name; `None` disables embeddings.
    pub embed_model: Option<String>,
    /// Environment variable holding the API key; `None` sends no auth.
    pub api_key_env: Option<String>,
    /// Prompt construction style.
    pub prompt_mode: PromptMode,
    /// Per-request timeout in seconds.
    pub timeout_s: u64,
    /// Retries after the first attempt of each request.
    pub retries: u32,
    /// Sampling temperature applied to generation requests.
    pub temperature: f64,
    /// Completion budget applied to generation requests.
    pub max_tokens: u32,
}

impl Default for WireSettings {
    fn default() -> Self {
        WireSettings {
            url: String::new(),
            model: String::new(),
            embed_model: None,
            api_key_env: None,
            prompt_mode: PromptMode::ChatTurns,
            timeout_s: 60,
            retries: 3,
            temperature: 0.0,
            max_tokens: 64,
        }
    }
}

/// Base delay of the exponential retry backoff.
const BACKOFF_BASE_MS: u64 = 250;

/// A minute-granularity token bucket shared across worker threads.
struct TokenBucket {
    tokens: f64,
    capacity: f64,
    per_second: f64,
    last_refill: Instant,
}

impl TokenBucket {
    fn new(rpm: u32) -> Self {
        TokenBucket {
            tokens: rpm as f64,
            capacity: rpm as f64,
            per_second: rpm as f64 / 60.0,
            last_refill: Instant::now(),
        }
    }

    fn refill(&mut self) {
        let now = Instant::now();
        let elapsed = now.duration_since(self.last_refill).as_secs_f64();
        self.tokens = (self.tokens + elapsed * self.per_second).min(self.capacity);
        self.last_refill = now;
    }

    /// Takes one token if available; otherwise says how long to wait.
    fn try_take(&mut self) -> Option<Duration> {
        self.refill();
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            None
        } else {
            Some(Duration::from_secs_f64(
                (1.0 - self.tokens) / self.per_second,
            ))
        }
    }
}

/// HTTP-backed [`Backend`] with retries, backoff, and rate limiting.
pub struct WireBackend {
    settings: WireSettings,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    limiter: Option<Mutex<TokenBucket>>,
    retries_used: AtomicU64,
}

impl std::fmt::Debug for WireBackend {
    /// Manual impl so the key can never leak through `{:?}`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WireBackend")
            .field("settings", &self.settings)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("rate_limited", &self.limiter.is_some())
            .finish()
    }
}

impl WireBackend {
    /// Builds a client from settings plus a requests-per-minute cap
    /// (`0` = unlimited).
    pub fn new(settings: WireSettings, rate_limit_rpm: u32) -> Result<Self, BackendError> {
        if settings.url.is_empty() {
            return Err(BackendError::InvalidConfig {
                detail: "wire_url must be set".into(),
            });
        }
        if settings.model.is_empty() {
            return Err(BackendError::InvalidConfig {
                detail: "wire_model must be set".into(),
            });
        }
        let api_key = match &settings.api_key_env {
            None => None,
            Some(name) => match env::var(name) {
                Ok(value) if !value.is_empty() => Some(value),
                _ => {
                    return Err(BackendError::InvalidConfig {
                        detail: format!("environment variable {name} is not set"),
                    })
                }
            },
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_s.max(1)))
            .build()
            .map_err(|e| BackendError::InvalidConfig {
                detail: format!("http client: {e}"),
            })?;
        let limiter = (rate_limit_rpm > 0).then(|| Mutex::new(TokenBucket::new(rate_limit_rpm)));
        Ok(WireBackend {
            settings,
            api_key,
            client,
            limiter,
            retries_used: AtomicU64::new(0),
        })
    }

    /// Retries actually spent across the backend's lifetime.
    pub fn retries_used(&self) -> u64 {
        self.retries_used.load(Ordering::Relaxed)
    }

    fn throttle(&self) {
        if let Some(limiter) = &self.limiter {
            loop {
                let wait = limiter.lock().expect("limiter poisoned").try_take();
                match wait {
                    None => return,
                    Some(delay) => thread::sleep(delay),
                }
            }
        }
    }

    /// One POST, classified but not retried.
    fn try_post(&self, url: &str, body: &Value) -> Result<Value, BackendError> {
        let mut builder = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| BackendError::Transport {
            detail: e.to_string(),
        })?;
        let status = response.status();
        if status.as_u16() == 429 {
            let retry_after_ms = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(|secs| secs * 1000);
            return Err(BackendError::RateLimited { retry_after_ms });
        }
        if status.is_server_error() {
            return Err(BackendError::Transport {
                detail: format!("http {}", status.as_u16()),
            });
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            let snippet: String = body.chars().take(200).collect();
            return Err(BackendError::InvalidConfig {
                detail: format!("http {} from {url}: {snippet}", status.as_u16()),
            });
        }
        response
            .json::<Value>()
            .map_err(|e| BackendError::MalformedResponse {
                detail: e.to_string(),
            })
    }

    /// POST with throttling, retries, and exponential backoff.
    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}/{path}", self.settings.url.trim_end_matches('/'));
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            self.throttle();
            let error = match self.try_post(&url, body) {
                Ok(value) => return Ok(value),
                Err(e) => e,
            };
            let retryable = matches!(
                error,
                BackendError::Transport { .. } | BackendError::RateLimited { .. }
            );
            if !retryable {
                return Err(error);
            }
            if attempts > self.settings.retries {
                return Err(BackendError::Exhausted {
                    attempts,
                    detail: error.to_string(),
                });
            }
            self.retries_used.fetch_add(1, Ordering::Relaxed);
            let mut delay = Duration::from_millis(BACKOFF_BASE_MS << (attempts - 1).min(6));
            if let BackendError::RateLimited {
                retry_after_ms: Some(ms),
            } = error
            {
                delay = delay.max(Duration::from_millis(ms));
            }
            thread::sleep(delay);
        }
    }
}

/// Lays a request out as chat messages in the configured style.
fn build_messages(mode: PromptMode, request: &GenerationRequest) -> Vec<Value> {
    let mut messages = Vec::new();
    if !request.system_context.is_empty() {
        messages.push(json!({"role": "system", "content": request.system_context}));
    }
    match mode {
        PromptMode::ChatTurns => {
            for shot in &request.shots {
                messages.push(json!({"role": "user", "content": shot.input}));
                messages.push(json!({"role": "assistant", "content": shot.output}));
            }
            messages.push(json!({"role": "user", "content": request.query}));
        }
        PromptMode::Concat => {
            let mut lines: Vec<String> = request.shots.iter().map(|s| s.rendered()).collect();
            lines.push(request.query.clone());
            messages.push(json!({"role": "user", "content": lines.join("\n")}));
        }
    }
    messages
}

impl Backend for WireBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let mut body = json!({
            "model": self.settings.model,
            "messages": build_messages(self.settings.prompt_mode, request),
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        let value = self.post("chat/completions", &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| BackendError::MalformedResponse {
                detail: "response lacks choices[0].message.content".into(),
            })
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        let model = self
            .settings
            .embed_model
            .as_ref()
            .ok_or(BackendError::Unsupported {
                operation: "embeddings".into(),
            })?;
        let body = json!({"model": model, "input": text});
        let value = self.post("embeddings", &body)?;
        let raw = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| BackendError::MalformedResponse {
                detail: "response lacks data[0].embedding".into(),
            })?;
        let mut values = Vec::with_capacity(raw.len());
        for v in raw {
            values.push(v.as_f64().ok_or_else(|| BackendError::MalformedResponse {
                detail: "embedding holds a non-numeric entry".into(),
            })?);
        }
        EmbeddingVector::new(values).map_err(|e| BackendError::MalformedResponse {
            detail: e.to_string(),
        })
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            name: self.settings.model.clone(),
            supports_embeddings: self.settings.embed_model.is_some(),
            max_context: 32768,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anchorlab_core::backend::Shot;

    fn request_with_shots() -> GenerationRequest {
        GenerationRequest::new("[base=8] 54_8 + 13_8 = ?")
            .with_shots(vec![
                Shot {
                    input: "[base=8] 1_8 + 2_8 = ?".into(),
                    output: "3_8".into(),
                },
                Shot {
                    input: "[base=8] 5_8 + 6_8 = ?".into(),
                    output: "13_8".into(),
                },
            ])
            .with_system_context("answer with a single numeral")
    }

    #[test]
    fn chat_turns_alternate_roles_around_the_query() {
        let messages = build_messages(PromptMode::ChatTurns, &request_with_shots());
        let roles: Vec<&str> = messages.iter().map(|m| m["role"].as_str().unwrap()).collect();
        assert_eq!(
            roles,
            ["system", "user", "assistant", "user", "assistant", "user"]
        );
        assert_eq!(messages[2]["content"], "3_8");
        assert_eq!(messages[5]["content"], "[base=8] 54_8 + 13_8 = ?");
    }

    #[test]
    fn concat_mode_renders_completed_lines_into_one_message() {
        let messages = build_messages(PromptMode::Concat, &request_with_shots());
        assert_eq!(messages.len(), 2);
        assert_eq!(messages[1]["role"], "user");
        assert_eq!(
            messages[1]["content"],
            "[base=8] 1_8 + 2_8 = 3_8\n[base=8] 5_8 + 6_8 = 13_8\n[base=8] 54_8 + 13_8 = ?"
        );
    }

    #[test]
    fn construction_validates_settings_without_touching_the_network() {
        let err = WireBackend::new(WireSettings::default(), 0).unwrap_err();
        assert!(matches!(err, BackendError::InvalidConfig { .. }));

        let missing_model = WireSettings {
            url: "http://127.0.0.1:1/v1".into(),
            ..WireSettings::default()
        };
        let err = WireBackend::new(missing_model, 0).unwrap_err();
        assert!(err.to_string().contains("wire_model"));

        let missing_key = WireSettings {
            url: "http://127.0.0.1:1/v1".into(),
            model: "m".into(),
            api_key_env: Some("ANCHORLAB_TEST_KEY_THAT_IS_NOT_SET".into()),
            ..WireSettings::default()
        };
        let err = WireBackend::new(missing_key, 0).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("ANCHORLAB_TEST_KEY_THAT_IS_NOT_SET"));
    }

    #[test]
    fn embeddings_require_an_embedding_model() {
        let settings = WireSettings {
            url: "http://127.0.0.1:1/v1".into(),
            model: "m".into(),
            ..WireSettings::default()
        };
        let backend = WireBackend::new(settings, 0).unwrap();
        assert!(!backend.capabilities().supports_embeddings);
        let err = backend.embed("text").unwrap_err();
        assert!(matches!(err, BackendError::Unsupported { .. }));
    }

    #[test]
    fn token_bucket_spends_capacity_then_waits() {
        // 60 rpm = one token per second, so scheduler jitter between the
        // takes refills only a few microtokens.
        let mut bucket = TokenBucket::new(60);
        bucket.tokens = 2.0;
        assert!(bucket.try_take().is_none());
        assert!(bucket.try_take().is_none());
        let wait = bucket.try_take().expect("bucket should be empty");
        assert!(wait > Duration::from_millis(500) && wait <= Duration::from_secs(1));
    }
}
