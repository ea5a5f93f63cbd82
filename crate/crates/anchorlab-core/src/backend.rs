//! The generation/embedding backend abstraction.
//!
//! Experiments talk to a [`Backend`] trait object so the same harness drives
//! the deterministic in-process [`mock`] repository and real HTTP endpoints
//! (implemented in the `anchorlab` companion crate) interchangeably.

pub mod mock;

use alloc::string::String;
use alloc::vec::Vec;

use crate::anchor::EmbeddingVector;

/// One in-context exemplar: a prompt and its expected completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shot {
    /// Prompt text, e.g. `[base=8] 54_8 + 13_8 = ?`.
    pub input: String,
    /// Gold completion, e.g. `67_8`.
    pub output: String,
}

impl Shot {
    /// The completed single-line form used for concatenated prompts.
    pub fn rendered(&self) -> String {
        crate::anchor::anchor_text(&self.input, &self.output)
    }
}

/// A deterministic text-generation request.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    /// System preamble; may be empty.
    pub system_context: String,
    /// In-context exemplars, in prompt order.
    pub shots: Vec<Shot>,
    /// The query the model must answer.
    pub query: String,
    /// Completion budget in tokens.
    pub max_tokens: u32,
    /// Sampling temperature; 0 requests greedy decoding.
    pub temperature: f64,
    /// Backend-visible seed; `None` lets the backend pick its own default.
    pub seed: Option<u64>,
}

impl GenerationRequest {
    /// A zero-shot, temperature-zero request for `query`.
    pub fn new(query: &str) -> Self {
        Self {
            system_context: String::new(),
            shots: Vec::new(),
            query: String::from(query),
            max_tokens: 64,
            temperature: 0.0,
            seed: None,
        }
    }

    /// Replaces the shot list.
    pub fn with_shots(mut self, shots: Vec<Shot>) -> Self {
        self.shots = shots;
        self
    }

    /// Sets the backend seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Sets the system preamble.
    pub fn with_system_context(mut self, system_context: &str) -> Self {
        self.system_context = String::from(system_context);
        self
    }
}

/// What a backend claims to support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capabilities {
    /// Human-readable backend name.
    pub name: String,
    /// Whether [`Backend::embed`] works.
    pub supports_embeddings: bool,
    /// Context window in tokens.
    pub max_context: u32,
}

/// Failures surfaced by backends.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendError {
    /// Connection-level failure (DNS, refused, timeout, ...).
    Transport {
        /// Human-readable cause.
        detail: String,
    },
    /// The endpoint throttled the request.
    RateLimited {
        /// Server-suggested wait, when provided.
        retry_after_ms: Option<u64>,
    },
    /// The endpoint answered with something undecodable.
    MalformedResponse {
        /// Human-readable cause.
        detail: String,
    },
    /// The query does not parse as a task this backend understands.
    UnparseableQuery {
        /// The offending query text.
        query: String,
    },
    /// The query names a base the repository is not configured for.
    UnknownDomain {
        /// The unconfigured base.
        base: u32,
    },
    /// The backend does not implement the requested operation.
    Unsupported {
        /// Operation name, e.g. `embeddings`.
        operation: String,
    },
    /// Retries were exhausted without a usable response.
    Exhausted {
        /// Attempts actually made.
        attempts: u32,
        /// Last failure seen.
        detail: String,
    },
    /// The backend configuration itself is invalid.
    InvalidConfig {
        /// Human-readable cause.
        detail: String,
    },
}

impl core::fmt::Display for BackendError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BackendError::Transport { detail } => write!(f, "transport failure: {detail}"),
            BackendError::RateLimited { retry_after_ms } => match retry_after_ms {
                Some(ms) => write!(f, "rate limited (retry after {ms} ms)"),
                None => write!(f, "rate limited"),
            },
            BackendError::MalformedResponse { detail } => {
                write!(f, "malformed response: {detail}")
            }
            BackendError::UnparseableQuery { query } => {
                write!(f, "query not understood: {query:?}")
            }
            BackendError::UnknownDomain { base } => {
                write!(f, "no pattern repository for base {base}")
            }
            BackendError::Unsupported { operation } => {
                write!(f, "backend does not support {operation}")
            }
            BackendError::Exhausted { attempts, detail } => {
                write!(f, "gave up after {attempts} attempts: {detail}")
            }
            BackendError::InvalidConfig { detail } => {
                write!(f, "invalid backend configuration: {detail}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BackendError {}

/// Text generation plus embeddings behind one object-safe interface.
pub trait Backend {
    /// Produces a completion for `request`.
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError>;

    /// Embeds `text` into the backend's vector space.
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError>;

    /// Reports what this backend supports.
    fn capabilities(&self) -> Capabilities;
}
