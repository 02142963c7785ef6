//! Parsing model output into trajectory graphs.
//!
//! Models must reply with a fenced ```json block holding the canonical graph
//! document. Parse failures keep the raw text so the caller can log it or
//! feed it back in a repair prompt.

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryGraph;

/// Extracts the first fenced ```json block (or bare ``` block) from `text`.
pub fn extract_fenced_json(text: &str) -> Option<&str> {
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = match after.strip_prefix("json") {
            Some(tail) => tail,
            None => after,
        };
        let body_start = body_start.strip_prefix('\n').unwrap_or(body_start);
        let end = body_start.find("```")?;
        let body = body_start[..end].trim();
        if body.starts_with('{') {
            return Some(body);
        }
        rest = &body_start[end + 3..];
    }
    None
}

/// Parses a model reply into a trajectory graph, insisting on the fenced
/// document format. The error carries the full raw reply.
pub fn parse_trajectory_response(text: &str) -> Result<TrajectoryGraph> {
    let body = extract_fenced_json(text).ok_or_else(|| Error::Parse {
        reason: "no fenced json document found".to_string(),
        raw: text.to_string(),
    })?;
    TrajectoryGraph::from_canonical_json(body).map_err(|e| Error::Parse {
        reason: e.to_string(),
        raw: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_json_block() {
        let text = "Here you go:\n```json\n{\"J\":1,\"nodes\":[]}\n```\nDone.";
        assert_eq!(extract_fenced_json(text), Some("{\"J\":1,\"nodes\":[]}"));
    }

    #[test]
    fn skips_non_object_blocks() {
        let text = "```\nnot json\n```\n```json\n{\"J\":2,\"nodes\":[]}\n```";
        assert_eq!(extract_fenced_json(text), Some("{\"J\":2,\"nodes\":[]}"));
    }

    #[test]
    fn parse_keeps_raw_text_on_failure() {
        let text = "no fences here";
        match parse_trajectory_response(text) {
            Err(Error::Parse { raw, .. }) => assert_eq!(raw, text),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_round_trips_canonical_document() {
        let doc = r#"{"J":1,"nodes":[{"id":"a","kind":"fact","content":"x","depends_on":[],"dimension":1,"step_index":0,"confidence":0.5,"sources":[],"origin":"agent-0"}]}"#;
        let text = format!("```json\n{doc}\n```");
        let g = parse_trajectory_response(&text).unwrap();
        assert_eq!(g.to_canonical_json(), doc);
    }
}
