//! Helpers for JSON embedded in model replies.

/// Strips surrounding whitespace and a single Markdown code fence
/// (```` ```json ... ``` ````), if present. Anything else is returned as-is.
pub fn json_payload(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let Some(body) = rest.strip_suffix("```") else {
        return trimmed;
    };
    let body = body.strip_prefix("json").unwrap_or(body);
    body.trim()
}
