//! Chat-completions agent backend: prompt construction for the three stages,
//! transport with retry and transcript logging, structured-trajectory
//! parsing, and the diversity mechanisms that differentiate agents.
//!
//! Nothing in the verification or simulation paths needs this module; it
//! exists so the same orchestrator can drive real agents. The wire protocol
//! is a POST of a chat-completions-style JSON body `{model, messages[],
//! temperature, max_tokens}` with a bearer token taken from an environment
//! variable. Every outbound request is captured in a transcript, so a run is
//! fully reconstructible from its logs.

mod agent;
mod parse;
mod prompts;
mod transport;

pub use agent::{
    generate_answer, generate_exploration, generate_refinement, EndpointSession, LlmAgent,
    LlmVerifier,
};
pub use parse::{extract_fenced_json, parse_trajectory_response};
pub use prompts::{
    answer_prompt, exploration_prompt, preference_text, refinement_prompt, repair_prompt,
    verification_prompt, PromptCatalog, PROMPT_CATALOG, PROMPT_VERSION,
};
pub use transport::{
    ChatMessage, ChatRequest, ChatResponse, ChatTransport, HttpTransport, ScriptedTransport,
    SharedTranscripts, Transcript, TransportError,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling-temperature band an agent operates in. Tiers map to strictly
/// increasing temperatures, giving the roster a spectrum from conservative
/// to exploratory behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureTier {
    Reliable,
    Balanced,
    Exploratory,
}

/// How one agent is differentiated from its peers: a problem-solving
/// preference prompt, a tool allowlist, and a sampling tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityProfile {
    pub preference_prompt_id: String,
    pub tool_set: Vec<String>,
    pub temperature_tier: TemperatureTier,
}

impl DiversityProfile {
    pub fn new(preference_prompt_id: impl Into<String>, tier: TemperatureTier) -> Self {
        DiversityProfile {
            preference_prompt_id: preference_prompt_id.into(),
            tool_set: Vec::new(),
            temperature_tier: tier,
        }
    }
}

/// Temperatures per tier; validated strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureMap {
    pub reliable: f64,
    pub balanced: f64,
    pub exploratory: f64,
}

impl Default for TemperatureMap {
    fn default() -> Self {
        TemperatureMap {
            reliable: 0.2,
            balanced: 0.7,
            exploratory: 1.0,
        }
    }
}

impl TemperatureMap {
    pub fn validate(&self) -> Result<()> {
        if !(self.reliable < self.balanced && self.balanced < self.exploratory) {
            return Err(Error::invalid(
                "temperature map",
                "tiers must map to strictly increasing temperatures",
            ));
        }
        Ok(())
    }

    pub fn temperature(&self, tier: TemperatureTier) -> f64 {
        match tier {
            TemperatureTier::Reliable => self.reliable,
            TemperatureTier::Balanced => self.balanced,
            TemperatureTier::Exploratory => self.exploratory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// `http(s)://...` for a live endpoint, or `stub://<path>` pointing at a
    /// scripted-responses JSON file for offline runs.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub max_tokens: u32,
    #[serde(default)]
    pub temperatures: Option<TemperatureMap>,
    /// Rough context budget in characters; tool logs truncate oldest-first
    /// to fit, the trajectory and facts ledger never do.
    #[serde(default = "default_context_chars")]
    pub max_context_chars: usize,
}

fn default_context_chars() -> usize {
    120_000
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timeout_secs == 0 {
            return Err(Error::invalid("timeout_secs", "must be positive"));
        }
        if let Some(map) = &self.temperatures {
            map.validate()?;
        }
        Ok(())
    }

    pub fn temperature_map(&self) -> TemperatureMap {
        self.temperatures.clone().unwrap_or_default()
    }
}
