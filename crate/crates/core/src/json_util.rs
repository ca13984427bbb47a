//! Lenient recovery of a JSON value from model output.

use serde_json::Value;

/// Try, in order: a plain parse of the whole text, the body of the first
/// markdown code fence, then the first balanced top-level object or array
/// found anywhere in the text.
pub fn parse_lenient(text: &str) -> Option<Value> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return None;
    }
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Some(v);
    }
    if let Some(body) = fenced_body(trimmed) {
        if let Ok(v) = serde_json::from_str::<Value>(body.trim()) {
            return Some(v);
        }
    }
    first_balanced_value(trimmed)
}

fn fenced_body(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    // skip an info string such as `json`
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    Some(&body[..end])
}

fn first_balanced_value(text: &str) -> Option<Value> {
    for (i, c) in text.char_indices() {
        if c == '{' || c == '[' {
            let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
            if let Some(Ok(v)) = stream.next() {
                return Some(v);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn recovery_order() {
        assert_eq!(parse_lenient(r#"{"a":1}"#), Some(json!({"a":1})));
        assert_eq!(parse_lenient("```json\n{\"a\": 2}\n```"), Some(json!({"a":2})));
        assert_eq!(parse_lenient("Sure! Here it is: {\"a\": 3} hope that helps"), Some(json!({"a":3})));
        assert_eq!(parse_lenient("noise {broken then [1, 2] tail"), Some(json!([1, 2])));
        assert_eq!(parse_lenient("not json at all"), None);
        assert_eq!(parse_lenient("   "), None);
    }
}
