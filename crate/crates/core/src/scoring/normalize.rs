use serde_json::Value;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ScoreOptions {
    /// ANLS similarities below this threshold count as zero.
    pub tau: f64,
    pub case_sensitive: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self { tau: 0.5, case_sensitive: true }
    }
}

/// A normalized scalar. `null`, absent values and blank strings all
/// collapse to `Empty`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Normalized {
    Empty,
    Text(String),
}

impl Normalized {
    pub fn as_str(&self) -> &str {
        match self {
            Normalized::Empty => "",
            Normalized::Text(s) => s,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Normalized::Empty)
    }
}

/// NFC, trim, collapse whitespace runs to a single space and optionally
/// fold case.
pub fn normalize_text(s: &str, opts: &ScoreOptions) -> String {
    let nfc: String = s.nfc().collect();
    let collapsed = nfc.split_whitespace().collect::<Vec<_>>().join(" ");
    if opts.case_sensitive {
        collapsed
    } else {
        collapsed.to_lowercase()
    }
}

/// Shortest decimal that round-trips; integral values print without a
/// fractional part.
pub fn number_text(n: &serde_json::Number) -> String {
    if n.is_i64() || n.is_u64() {
        return n.to_string();
    }
    match n.as_f64() {
        Some(f) if f.fract() == 0.0 && f.abs() < 9.007_199_254_740_992e15 => format!("{}", f as i64),
        Some(f) => format!("{f}"),
        None => n.to_string(),
    }
}

pub fn normalize_value(v: Option<&Value>, opts: &ScoreOptions) -> Normalized {
    let text = match v {
        None | Some(Value::Null) => return Normalized::Empty,
        Some(Value::String(s)) => normalize_text(s, opts),
        Some(Value::Number(n)) => number_text(n),
        Some(Value::Bool(b)) => b.to_string(),
        Some(other) => normalize_text(&other.to_string(), opts),
    };
    if text.is_empty() {
        Normalized::Empty
    } else {
        Normalized::Text(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn examples() {
        let o = ScoreOptions::default();
        assert_eq!(normalize_value(Some(&json!("  Jasmineberg,  TX ")), &o), Normalized::Text("Jasmineberg, TX".into()));
        assert_eq!(normalize_value(Some(&json!(44064)), &o), normalize_value(Some(&json!("44064")), &o));
        assert_eq!(normalize_value(Some(&json!(44064.0)), &o), normalize_value(Some(&json!("44064")), &o));
        assert_eq!(normalize_value(Some(&json!(1.5)), &o), Normalized::Text("1.5".into()));
        assert_eq!(normalize_value(Some(&Value::Null), &o), Normalized::Empty);
        assert_eq!(normalize_value(None, &o), Normalized::Empty);
        assert_eq!(normalize_value(Some(&json!("   ")), &o), Normalized::Empty);
        assert_ne!(normalize_value(Some(&json!("abc")), &o), normalize_value(Some(&json!("ABC")), &o));
        let ci = ScoreOptions { case_sensitive: false, ..o };
        assert_eq!(normalize_value(Some(&json!("abc")), &ci), normalize_value(Some(&json!("ABC")), &ci));
        assert_eq!(normalize_text("e\u{301}", &o), "\u{e9}");
    }
}
