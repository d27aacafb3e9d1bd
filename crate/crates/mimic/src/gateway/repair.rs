//! Best-effort repair and shape parsing for LLM output.
//!
//! Models asked for JSON routinely wrap it in code fences, lead with prose,
//! use curly quotes, or emit Python literals. The repair pipeline applied
//! before every parse attempt is: strip code fences, extract the first
//! balanced `{…}`/`[…]` region, normalize smart quotes; a Python-flavored
//! fallback (single-quoted strings, `True`/`False`/`None`) runs only when
//! strict JSON parsing fails.

use serde_json::{Map, Value};

/// Expected result shape for a structured completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    JsonObject,
    JsonList,
    Integer,
    Delimited(Delimiter),
}

impl Shape {
    /// Content between `<tag>` and `</tag>`.
    pub fn tag(name: &str) -> Shape {
        Shape::Delimited(Delimiter::Tag(name.to_string()))
    }

    /// Content after a literal heading line such as `Refined Scene:`.
    pub fn heading(text: &str) -> Shape {
        Shape::Delimited(Delimiter::Heading(text.to_string()))
    }

    /// Human-readable expectation, used in re-prompt correction notes.
    pub fn describe(&self) -> String {
        match self {
            Shape::JsonObject => "a single JSON object".to_string(),
            Shape::JsonList => "a single JSON list".to_string(),
            Shape::Integer => "a single integer".to_string(),
            Shape::Delimited(Delimiter::Tag(tag)) => {
                format!("the result enclosed in <{tag}> and </{tag}> tags")
            }
            Shape::Delimited(Delimiter::Heading(h)) => {
                format!("the result placed after the heading \"{h}\"")
            }
        }
    }
}

/// How delimited content is marked in the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Delimiter {
    Tag(String),
    Heading(String),
}

/// A successfully parsed structured value.
#[derive(Debug, Clone, PartialEq)]
pub enum StructuredValue {
    Object(Map<String, Value>),
    List(Vec<Value>),
    Integer(i64),
    Text(String),
}

impl StructuredValue {
    pub fn into_object(self) -> Option<Map<String, Value>> {
        match self {
            StructuredValue::Object(m) => Some(m),
            _ => None,
        }
    }

    pub fn into_list(self) -> Option<Vec<Value>> {
        match self {
            StructuredValue::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn into_integer(self) -> Option<i64> {
        match self {
            StructuredValue::Integer(i) => Some(i),
            _ => None,
        }
    }

    pub fn into_text(self) -> Option<String> {
        match self {
            StructuredValue::Text(t) => Some(t),
            _ => None,
        }
    }
}

/// Parses a raw response into the requested shape, applying the repair
/// pipeline. Returns a short reason on failure.
pub fn parse_shaped(raw: &str, shape: &Shape) -> Result<StructuredValue, String> {
    match shape {
        Shape::JsonObject => parse_json_region(raw, '{', '}').map(|v| match v {
            Value::Object(m) => StructuredValue::Object(m),
            _ => unreachable!("balanced {{}} region parses to an object"),
        }),
        Shape::JsonList => parse_json_region(raw, '[', ']').map(|v| match v {
            Value::Array(l) => StructuredValue::List(l),
            _ => unreachable!("balanced [] region parses to an array"),
        }),
        Shape::Integer => first_integer(&normalize_quotes(&strip_code_fences(raw)))
            .map(StructuredValue::Integer)
            .ok_or_else(|| "no integer found in response".to_string()),
        Shape::Delimited(delim) => extract_delimited(raw, delim).map(StructuredValue::Text),
    }
}

fn parse_json_region(raw: &str, open: char, close: char) -> Result<Value, String> {
    let cleaned = normalize_quotes(&strip_code_fences(raw));
    let region = extract_balanced(&cleaned, open, close)
        .ok_or_else(|| format!("no balanced {open}{close} region in response"))?;
    match serde_json::from_str::<Value>(&region) {
        Ok(v) => Ok(v),
        Err(strict_err) => {
            let pythonish = pythonish_to_json(&region);
            serde_json::from_str::<Value>(&pythonish)
                .map_err(|_| format!("region is not valid JSON: {strict_err}"))
        }
    }
}

/// If the text contains a fenced code block, returns the content of the
/// first block; otherwise returns the text with any stray fence lines
/// removed.
pub fn strip_code_fences(text: &str) -> String {
    let Some(open) = text.find("```") else {
        return text.to_string();
    };
    let after_open = &text[open + 3..];
    // Skip the info string (e.g. "json") up to end of line.
    let body_start = after_open.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after_open[body_start..];
    match body.find("```") {
        Some(end) => body[..end].to_string(),
        None => body.to_string(),
    }
}

/// Replaces typographic quotes with their ASCII equivalents.
pub fn normalize_quotes(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{00AB}' | '\u{00BB}' => '"',
            '\u{2018}' | '\u{2019}' | '\u{201A}' => '\'',
            c => c,
        })
        .collect()
}

/// Extracts the first balanced `open`…`close` region, honoring JSON string
/// syntax so braces inside quoted strings do not affect nesting.
pub fn extract_balanced(text: &str, open: char, close: char) -> Option<String> {
    let start = text.find(open)?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut string_delim = '"';
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == string_delim {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' | '\'' => {
                in_string = true;
                string_delim = c;
            }
            c if c == open => depth += 1,
            c if c == close => {
                depth -= 1;
                if depth == 0 {
                    return Some(text[start..start + i + c.len_utf8()].to_string());
                }
            }
            _ => {}
        }
    }
    None
}

/// Finds the first (optionally signed) integer in free text.
pub fn first_integer(text: &str) -> Option<i64> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() || (bytes[i] == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if let Ok(n) = text[start..i].parse::<i64>() {
                return Some(n);
            }
        } else {
            i += 1;
        }
    }
    None
}

/// Rewrites Python literal syntax into JSON: single-quoted strings become
/// double-quoted, and bare `True`/`False`/`None` become JSON keywords.
fn pythonish_to_json(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let mut in_string = false;
    let mut delim = '"';
    while let Some(c) = chars.next() {
        if in_string {
            if c == '\\' {
                match chars.next() {
                    // \' has no meaning in JSON; the apostrophe itself is fine.
                    Some('\'') => out.push('\''),
                    Some(other) => {
                        out.push('\\');
                        out.push(other);
                    }
                    None => out.push('\\'),
                }
            } else if c == delim {
                in_string = false;
                out.push('"');
            } else if c == '"' && delim == '\'' {
                out.push_str("\\\"");
            } else {
                out.push(c);
            }
            continue;
        }
        match c {
            '\'' | '"' => {
                in_string = true;
                delim = c;
                out.push('"');
            }
            'T' if peek_word(&mut chars, "rue") => out.push_str("true"),
            'F' if peek_word(&mut chars, "alse") => out.push_str("false"),
            'N' if peek_word(&mut chars, "one") => out.push_str("null"),
            c => out.push(c),
        }
    }
    out
}

/// Consumes `rest` from the iterator if it matches exactly.
fn peek_word(chars: &mut std::iter::Peekable<std::str::Chars>, rest: &str) -> bool {
    let mut probe = chars.clone();
    for expected in rest.chars() {
        if probe.next() != Some(expected) {
            return false;
        }
    }
    // Reject a match inside a longer identifier (e.g. "Truename").
    if probe.peek().is_some_and(|c| c.is_alphanumeric() || *c == '_') {
        return false;
    }
    *chars = probe;
    true
}

/// ASCII case-insensitive substring search; returns the byte offset.
fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack
        .to_ascii_lowercase()
        .find(&needle.to_ascii_lowercase())
}

fn extract_delimited(raw: &str, delim: &Delimiter) -> Result<String, String> {
    match delim {
        Delimiter::Tag(tag) => {
            let open = format!("<{tag}>");
            let close = format!("</{tag}>");
            let start = find_ci(raw, &open)
                .ok_or_else(|| format!("opening tag {open} not found"))?;
            let content_start = start + open.len();
            let end = find_ci(&raw[content_start..], &close)
                .ok_or_else(|| format!("closing tag {close} not found"))?;
            Ok(raw[content_start..content_start + end].trim().to_string())
        }
        Delimiter::Heading(heading) => {
            let start = find_ci(raw, heading)
                .ok_or_else(|| format!("heading \"{heading}\" not found"))?;
            Ok(raw[start + heading.len()..].trim().to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_json_object_parses_without_reprompt() {
        let v = parse_shaped("```json\n{\"a\":1}\n```", &Shape::JsonObject).unwrap();
        let obj = v.into_object().unwrap();
        assert_eq!(obj.get("a"), Some(&Value::from(1)));
    }

    #[test]
    fn prose_wrapped_object_is_extracted() {
        let raw = "Here you go:\n{\"turn\": \"Hi {all}\", \"wants_vote\": false}\nHope that helps!";
        let obj = parse_shaped(raw, &Shape::JsonObject)
            .unwrap()
            .into_object()
            .unwrap();
        assert_eq!(obj.get("turn"), Some(&Value::from("Hi {all}")));
    }

    #[test]
    fn smart_quotes_are_normalized() {
        let raw = "{\u{201C}key\u{201D}: \u{201C}value\u{201D}}";
        let obj = parse_shaped(raw, &Shape::JsonObject)
            .unwrap()
            .into_object()
            .unwrap();
        assert_eq!(obj.get("key"), Some(&Value::from("value")));
    }

    #[test]
    fn python_list_with_single_quotes_parses() {
        let raw = "['Pandemics', 'Infectious diseases', 'World Health Organization (WHO)']";
        let list = parse_shaped(raw, &Shape::JsonList).unwrap().into_list().unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list[0], Value::from("Pandemics"));
    }

    #[test]
    fn python_booleans_and_apostrophes_survive_conversion() {
        let raw = "{'ready': True, 'note': 'it\\'s fine', 'gap': None}";
        let obj = parse_shaped(raw, &Shape::JsonObject)
            .unwrap()
            .into_object()
            .unwrap();
        assert_eq!(obj.get("ready"), Some(&Value::Bool(true)));
        assert_eq!(obj.get("note"), Some(&Value::from("it's fine")));
        assert_eq!(obj.get("gap"), Some(&Value::Null));
    }

    #[test]
    fn first_integer_extraction() {
        assert_eq!(first_integer("Sure! 3"), Some(3));
        assert_eq!(first_integer("-12 degrees"), Some(-12));
        assert_eq!(first_integer("none here"), None);
    }

    #[test]
    fn tag_delimiter_extracts_inner_text() {
        let raw = "Analysis:\n<feedback>\nToo uniform sentence lengths.\n</feedback>";
        let text = parse_shaped(raw, &Shape::tag("feedback"))
            .unwrap()
            .into_text()
            .unwrap();
        assert_eq!(text, "Too uniform sentence lengths.");
    }

    #[test]
    fn heading_delimiter_takes_the_remainder() {
        let raw = "Notes first.\nRefined Scene:\n>>Chair: Welcome back.";
        let text = parse_shaped(raw, &Shape::heading("Refined Scene:"))
            .unwrap()
            .into_text()
            .unwrap();
        assert_eq!(text, ">>Chair: Welcome back.");
    }

    #[test]
    fn missing_delimiters_fail_with_reason() {
        assert!(parse_shaped("no tags here", &Shape::tag("feedback")).is_err());
        assert!(parse_shaped("no heading", &Shape::heading("Refined Scene:")).is_err());
    }

    #[test]
    fn braces_inside_strings_do_not_break_extraction() {
        let raw = "{\"a\": \"closing } inside\", \"b\": 2}";
        let obj = parse_shaped(raw, &Shape::JsonObject)
            .unwrap()
            .into_object()
            .unwrap();
        assert_eq!(obj.get("b"), Some(&Value::from(2)));
    }
}
