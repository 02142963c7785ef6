//! Endpoint session, the three stage operations, and the agent adapter.

use std::sync::{Arc, Mutex};

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::orchestrator::{AgentPort, ContextFragment, Task};
use crate::refine::{ExternalVerifier, PortUnavailable, VerifyOutcome};
use crate::trajectory::{Cell, ReferenceState, TrajectoryGraph};

use super::parse::parse_trajectory_response;
use super::prompts::{
    answer_prompt, exploration_prompt, preference_text, refinement_prompt, repair_prompt,
    verification_prompt,
};
use super::transport::{
    ChatMessage, ChatRequest, ChatTransport, HttpTransport, ScriptedTransport, SharedTranscripts,
    Transcript,
};
use super::{DiversityProfile, EndpointConfig, TemperatureMap};

/// A configured endpoint plus its transcript log. Cheap to clone behind the
/// shared transport; requests from concurrent agents interleave safely and
/// transcripts accumulate in completion order.
pub struct EndpointSession {
    config: EndpointConfig,
    temperatures: TemperatureMap,
    transport: Arc<Mutex<dyn ChatTransport>>,
    transcripts: SharedTranscripts,
}

impl EndpointSession {
    pub fn new(config: EndpointConfig, transport: impl ChatTransport + 'static) -> Result<Self> {
        config.validate()?;
        let temperatures = config.temperature_map();
        Ok(EndpointSession {
            config,
            temperatures,
            transport: Arc::new(Mutex::new(transport)),
            transcripts: Arc::new(Mutex::new(Vec::new())),
        })
    }

    /// Builds the transport the base URL calls for: `stub://<path>` loads a
    /// scripted-responses JSON file (an array of reply strings, cycled),
    /// anything else goes over HTTP with a bearer token. The auth variable is
    /// checked before any request is made.
    pub fn connect(config: EndpointConfig) -> Result<Self> {
        if let Some(path) = config.base_url.strip_prefix("stub://") {
            let text = std::fs::read_to_string(path)?;
            let responses: Vec<String> = serde_json::from_str(&text)?;
            return Self::new(config, ScriptedTransport::cycling(responses));
        }
        let transport = HttpTransport::new(
            &config.base_url,
            &config.auth_env,
            config.timeout_secs,
            config.retries,
        )?;
        Self::new(config, transport)
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn transcripts(&self) -> Vec<Transcript> {
        self.transcripts.lock().expect("transcript lock").clone()
    }

    fn complete(&self, messages: Vec<ChatMessage>, temperature: f64) -> Result<String> {
        let request = ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature,
            max_tokens: self.config.max_tokens,
        };
        let response = self
            .transport
            .lock()
            .expect("transport lock")
            .complete(&request)?;
        self.transcripts
            .lock()
            .expect("transcript lock")
            .push(Transcript {
                request,
                response: response.clone(),
            });
        Ok(response)
    }

    fn complete_trajectory(&self, prompt: String, temperature: f64) -> Result<TrajectoryGraph> {
        let first = self.complete(vec![ChatMessage::user(prompt.clone())], temperature)?;
        match parse_trajectory_response(&first) {
            Ok(graph) => Ok(graph),
            Err(Error::Parse { reason, .. }) => {
                // One repair pass: hand the parse error back, then fail for real.
                let retry = self.complete(
                    vec![
                        ChatMessage::user(prompt),
                        ChatMessage {
                            role: "assistant".to_string(),
                            content: first,
                        },
                        ChatMessage::user(repair_prompt(&reason)),
                    ],
                    temperature,
                )?;
                parse_trajectory_response(&retry)
            }
            Err(e) => Err(e),
        }
    }
}

fn fragment_from(
    graph: &TrajectoryGraph,
    profile: &DiversityProfile,
    stage: &str,
) -> ContextFragment {
    let mut fragment = ContextFragment::default();
    fragment.tool_logs.push(format!(
        "{stage} via profile {} (tools: {})",
        profile.preference_prompt_id,
        if profile.tool_set.is_empty() {
            "none".to_string()
        } else {
            profile.tool_set.join(",")
        },
    ));
    for node in &graph.nodes {
        fragment
            .confidences
            .insert(node.id.clone(), node.confidence);
    }
    fragment
}

/// Exploration-stage generation: unconditioned on any reference.
pub fn generate_exploration(
    task: &Task,
    j: usize,
    profile: &DiversityProfile,
    session: &EndpointSession,
) -> Result<(TrajectoryGraph, ContextFragment)> {
    let temperature = session.temperatures.temperature(profile.temperature_tier);
    let prompt = exploration_prompt(
        &task.question,
        preference_text(&profile.preference_prompt_id),
        j,
    );
    let graph = session.complete_trajectory(prompt, temperature)?;
    let fragment = fragment_from(&graph, profile, "exploration");
    Ok((graph, fragment))
}

/// Enhancement-stage generation conditioned on the reference state. Tool
/// logs truncate oldest-first until the prompt fits the context budget; the
/// trajectory and the facts ledger are never truncated.
pub fn generate_refinement(
    task: &Task,
    state: &ReferenceState,
    profile: &DiversityProfile,
    session: &EndpointSession,
) -> Result<(TrajectoryGraph, ContextFragment)> {
    let temperature = session.temperatures.temperature(profile.temperature_tier);
    let preference = preference_text(&profile.preference_prompt_id);
    let budget = session.config.max_context_chars;
    let mut from = 0usize;
    let prompt = loop {
        let logs = &state.context.tool_logs[from..];
        let prompt = refinement_prompt(&task.question, preference, state, logs);
        if prompt.len() <= budget || logs.is_empty() {
            break prompt;
        }
        from += 1;
    };
    let graph = session.complete_trajectory(prompt, temperature)?;
    let fragment = fragment_from(&graph, profile, "refinement");
    Ok((graph, fragment))
}

/// Answer-stage generation: free text, no graph parsing.
pub fn generate_answer(
    task: &Task,
    state: &ReferenceState,
    session: &EndpointSession,
) -> Result<String> {
    let temperature = session.temperatures.reliable;
    session.complete(
        vec![ChatMessage::user(answer_prompt(&task.question, state))],
        temperature,
    )
}

/// One endpoint-backed agent. Determinism holds exactly when the transport
/// is deterministic (the scripted stub is; live endpoints sample
/// server-side).
pub struct LlmAgent {
    id: String,
    j: usize,
    profile: DiversityProfile,
    session: Arc<EndpointSession>,
}

impl LlmAgent {
    pub fn new(
        id: impl Into<String>,
        j: usize,
        profile: DiversityProfile,
        session: Arc<EndpointSession>,
    ) -> Self {
        LlmAgent {
            id: id.into(),
            j,
            profile,
            session,
        }
    }
}

impl AgentPort for LlmAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn profile(&self) -> &DiversityProfile {
        &self.profile
    }

    fn generate(
        &self,
        task: &Task,
        state: Option<&ReferenceState>,
        _rng: &mut ChaCha12Rng,
    ) -> Result<(TrajectoryGraph, ContextFragment)> {
        match state {
            None => generate_exploration(task, self.j, &self.profile, &self.session),
            Some(state) => generate_refinement(task, state, &self.profile, &self.session),
        }
    }

    fn answer(
        &self,
        task: &Task,
        state: &ReferenceState,
        _rng: &mut ChaCha12Rng,
    ) -> Result<String> {
        generate_answer(task, state, &self.session)
    }
}

/// External verification port backed by the endpoint itself: disputed
/// contents go to a judge prompt, the reply is parsed as an index or
/// `unknown`. Transport failures surface as an unavailable port, which the
/// resolver turns into an escalation.
pub struct LlmVerifier {
    session: Arc<EndpointSession>,
}

impl LlmVerifier {
    pub fn new(session: Arc<EndpointSession>) -> Self {
        LlmVerifier { session }
    }
}

impl ExternalVerifier for LlmVerifier {
    fn verify(
        &mut self,
        cell: Cell,
        contents: &[String],
    ) -> std::result::Result<VerifyOutcome, PortUnavailable> {
        let prompt = verification_prompt(&cell.to_string(), contents);
        let temperature = self.session.temperatures.reliable;
        let reply = self
            .session
            .complete(vec![ChatMessage::user(prompt)], temperature)
            .map_err(|_| PortUnavailable)?;
        Ok(parse_verdict(&reply, contents.len()))
    }
}

fn parse_verdict(reply: &str, n: usize) -> VerifyOutcome {
    let lowered = reply.to_lowercase();
    if lowered.contains("unknown") {
        return VerifyOutcome::Unknown;
    }
    // Accept "[2]", "2", or "content 2".
    let digits: String = reply
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    match digits.parse::<usize>() {
        Ok(i) if i < n => VerifyOutcome::Index(i),
        _ => VerifyOutcome::Unknown,
    }
}
