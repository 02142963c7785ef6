//! Prompt catalog for the three stages, versioned in-repo.
//!
//! All stage prompts instruct the model to emit the trajectory as a fenced
//! `json` document matching the canonical graph schema, so responses parse
//! with the same serializer that writes them.

use crate::refine::FactsLedger;
use crate::trajectory::ReferenceState;

pub const PROMPT_VERSION: &str = "1";

pub type PromptCatalog = &'static [(&'static str, &'static str)];

/// Problem-solving preference prompts, one per profile id.
pub const PROMPT_CATALOG: PromptCatalog = &[
    (
        "systematic",
        "Work through the task step by step. Decompose it into the smallest \
         verifiable claims before combining them, and prefer deliberate, \
         well-sourced progress over speed.",
    ),
    (
        "skeptic",
        "Treat every intermediate claim as suspect until you have checked it \
         against an independent source or derivation. Prioritize finding and \
         fixing the weakest link in the current reasoning.",
    ),
    (
        "explorer",
        "Search broadly before committing. Consider at least two distinct \
         solution paths and keep whichever is better supported, noting \
         evidence the current approach may have missed.",
    ),
];

pub fn preference_text(id: &str) -> &'static str {
    PROMPT_CATALOG
        .iter()
        .find(|(pid, _)| *pid == id)
        .map(|(_, text)| *text)
        .unwrap_or(PROMPT_CATALOG[0].1)
}

const SCHEMA_INSTRUCTIONS: &str = r#"Return your reasoning trajectory as a fenced json document and nothing else after it:

```json
{"J": <dimension count>, "nodes": [{"id": "<unique id>", "kind": "fact" | "reasoning" | "action", "content": "<claim, inference, or action>", "depends_on": ["<id>", ...], "dimension": <1..J>, "step_index": <0-based step within the dimension>, "confidence": <0..1>, "sources": [{"authority": <0..1>, "verifiable": true | false}], "origin": "<your agent id>"}]}
```

List nodes so every dependency appears before its dependents. Use one dimension per evaluation aspect of the task and keep step indices contiguous within a dimension."#;

/// Exploration-stage prompt: task plus structured-output instructions plus
/// the agent's preference block.
pub fn exploration_prompt(question: &str, preference: &str, j: usize) -> String {
    format!(
        "You are one of several agents independently solving a task.\n\n\
         Preference: {preference}\n\n\
         Task:\n{question}\n\n\
         Evaluate your answer along {j} dimensions.\n\n{SCHEMA_INSTRUCTIONS}"
    )
}

/// Enhancement-stage prompt: embeds the canonical serialization of the
/// reference trajectory verbatim plus its supplementary context, and asks for
/// a refined candidate in the same schema.
pub fn refinement_prompt(
    question: &str,
    preference: &str,
    state: &ReferenceState,
    tool_logs: &[String],
) -> String {
    let mut sections = format!(
        "You are one of several agents refining a shared reference trajectory.\n\n\
         Preference: {preference}\n\n\
         Task:\n{question}\n\n\
         Current reference trajectory (round {round}):\n{trajectory}\n",
        round = state.round,
        trajectory = state.trajectory.to_canonical_json(),
    );
    sections.push_str(&facts_section(&state.context.verified_facts));
    if !state.context.confidences.is_empty() {
        sections.push_str("\nConfidences:\n");
        for (id, c) in &state.context.confidences {
            sections.push_str(&format!("- {id}: {c:.2}\n"));
        }
    }
    if !tool_logs.is_empty() {
        sections.push_str("\nTool logs:\n");
        for log in tool_logs {
            sections.push_str(&format!("- {log}\n"));
        }
    }
    sections.push_str(
        "\nImprove on the reference where you can: correct wrong facts, fill missing \
         steps, and repair broken reasoning. Keep segments you cannot improve \
         unchanged, including their node ids.\n\n",
    );
    sections.push_str(SCHEMA_INSTRUCTIONS);
    sections
}

/// Answer-stage prompt; includes the verified-facts section when non-empty.
pub fn answer_prompt(question: &str, state: &ReferenceState) -> String {
    format!(
        "Produce the final answer to the task below, relying on the refined \
         reference trajectory.\n\n\
         Task:\n{question}\n\n\
         Reference trajectory:\n{trajectory}\n{facts}\n\
         Answer with the final result only.",
        trajectory = state.trajectory.to_canonical_json(),
        facts = facts_section(&state.context.verified_facts),
    )
}

/// One repair attempt after a parse failure: the error goes back to the
/// model together with the schema.
pub fn repair_prompt(parse_error: &str) -> String {
    format!(
        "Your previous reply could not be parsed: {parse_error}\n\n\
         Re-emit the full trajectory, fixing the problem.\n\n{SCHEMA_INSTRUCTIONS}"
    )
}

/// Judge prompt for the external verification port: pick the supported
/// content for a disputed cell, or admit uncertainty.
pub fn verification_prompt(cell: &str, contents: &[String]) -> String {
    let mut body = format!(
        "Conflicting contents were proposed for reasoning step {cell}. \
         Decide which one is correct.\n\n"
    );
    for (i, content) in contents.iter().enumerate() {
        body.push_str(&format!("[{i}] {content}\n"));
    }
    body.push_str(
        "\nReply with the bracketed number of the correct content, or the single \
         word unknown if none can be verified.",
    );
    body
}

fn facts_section(ledger: &FactsLedger) -> String {
    if ledger.is_empty() {
        return String::new();
    }
    let mut out = String::from("\nVerified facts:\n");
    for entry in ledger.entries() {
        out.push_str(&format!(
            "- [{verdict:?}] {cell}: {content}\n",
            verdict = entry.verdict,
            cell = entry.cell,
            content = entry.content,
        ));
    }
    out
}
