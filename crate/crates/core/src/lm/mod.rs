//! Language-model plumbing: chat messages, the three model roles, prompt
//! templates for every evolutionary step, response parsing, an HTTP
//! chat-completions client and an offline mock that edits csg programs.

mod corpus;
mod gateway;
mod mock;
mod prompts;
mod ranking;
mod wire;

pub use corpus::{Corpus, CorpusError};
pub use gateway::{Gateway, DEFAULT_IN_FLIGHT};
pub use mock::{target_holes, MockBackend};
pub use prompts::{
    build_crossover_prompt, build_describe_prompt, build_init_prompt, build_mutation_prompt,
    build_rank_prompt, build_selfdebug_prompt, extract_code, extract_description, task_of,
    CadLanguage, Parent, Task, CADQUERY, CSG, TEMPLATE_VERSION,
};
pub use ranking::{average_rankings, parse_ranking, rank_once, Ranking};
pub use wire::WireBackend;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    pub images: Vec<Image>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self::new(Role::System, text)
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self::new(Role::User, text)
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::new(Role::Assistant, text)
    }

    fn new(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            text: text.into(),
            images: Vec::new(),
        }
    }

    pub fn with_image(mut self, img: Image) -> Self {
        self.images.push(img);
        self
    }
}

/// Which of the three models a call is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    /// Writes, combines, mutates and repairs programs.
    Generator,
    /// Looks at renders and describes them.
    Describer,
    /// Orders descriptions by fit to the request.
    Ranker,
}

impl ModelRole {
    pub const ALL: [ModelRole; 3] = [ModelRole::Generator, ModelRole::Describer, ModelRole::Ranker];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn default_temperature(self) -> f64 {
        match self {
            ModelRole::Generator => 0.5,
            ModelRole::Describer | ModelRole::Ranker => 0.2,
        }
    }
}

impl fmt::Display for ModelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelRole::Generator => "generator",
            ModelRole::Describer => "describer",
            ModelRole::Ranker => "ranker",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRoleConfig {
    pub role: ModelRole,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout: Duration,
}

impl ModelRoleConfig {
    pub fn new(role: ModelRole, model_name: impl Into<String>) -> Self {
        Self {
            role,
            model_name: model_name.into(),
            temperature: role.default_temperature(),
            max_retries: 3,
            timeout: Duration::from_secs(120),
        }
    }

    pub fn validate(&self) -> Result<(), LmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LmError::InvalidConfig(format!(
                "{} temperature {} outside [0, 2]",
                self.role, self.temperature
            )));
        }
        if self.timeout.is_zero() {
            return Err(LmError::InvalidConfig(format!("{} timeout must be > 0", self.role)));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("empty response")]
    EmptyResponse,
    #[error("rankings cover different ids")]
    MismatchedIds,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl LmError {
    /// Failures of the backend itself, as opposed to unusable content.
    pub fn is_backend(&self) -> bool {
        matches!(self, LmError::Transport(_) | LmError::Timeout | LmError::Http { .. })
    }
}

/// A chat model. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], cfg: &ModelRoleConfig) -> Result<String, LmError>;

    fn identity(&self) -> String;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_temperatures() {
        assert_eq!(ModelRoleConfig::new(ModelRole::Describer, "m").temperature, 0.2);
        assert_eq!(ModelRoleConfig::new(ModelRole::Ranker, "m").temperature, 0.2);
        assert_eq!(ModelRoleConfig::new(ModelRole::Generator, "m").temperature, 0.5);
    }

    #[test]
    fn config_validation() {
        let mut c = ModelRoleConfig::new(ModelRole::Generator, "m");
        assert!(c.validate().is_ok());
        c.temperature = 2.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn backend_error_classes() {
        assert!(LmError::Timeout.is_backend());
        assert!(LmError::Http { status: 500, body: String::new() }.is_backend());
        assert!(!LmError::EmptyResponse.is_backend());
        assert!(!LmError::MalformedResponse("x".into()).is_backend());
    }
}
