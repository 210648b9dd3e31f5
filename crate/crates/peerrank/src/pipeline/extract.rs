//! Tolerant-location, strict-content JSON extraction. Models wrap their
//! JSON in prose or code fences; we locate the first balanced object with
//! a string-aware scanner, then parse that span strictly. A separate
//! depth-1 key scan catches duplicate keys that `serde_json` would
//! silently collapse (last value wins).

/// Returns the first balanced `{...}` span in `text`, respecting string
/// literals and escapes, or `None` when no complete object exists.
pub fn first_balanced_object(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Keys that appear more than once at the top level of a balanced object
/// span, in first-occurrence order. `serde_json` keeps only the last
/// value for a duplicated key, so this scan is the only way to notice.
pub fn duplicate_top_level_keys(object_span: &str) -> Vec<String> {
    let bytes = object_span.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut string_start = 0usize;
    // At depth 1, a string followed (after whitespace) by ':' is a key.
    let mut pending_key: Option<(usize, usize)> = None;
    let mut seen: Vec<String> = Vec::new();
    let mut duplicates: Vec<String> = Vec::new();
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
                if depth == 1 {
                    pending_key = Some((string_start, i));
                }
            }
            continue;
        }
        match b {
            b'"' => {
                in_string = true;
                string_start = i + 1;
            }
            b'{' | b'[' => {
                depth += 1;
                pending_key = None;
            }
            b'}' | b']' => {
                depth = depth.saturating_sub(1);
                pending_key = None;
            }
            b':' => {
                if let Some((ks, ke)) = pending_key.take() {
                    let key = &object_span[ks..ke];
                    if seen.iter().any(|k| k == key) {
                        if !duplicates.iter().any(|k| k == key) {
                            duplicates.push(key.to_string());
                        }
                    } else {
                        seen.push(key.to_string());
                    }
                }
            }
            b' ' | b'\t' | b'\r' | b'\n' => {}
            _ => {
                pending_key = None;
            }
        }
    }
    duplicates
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_object_inside_prose_and_fences() {
        let raw = "Sure! Here is the JSON:\n```json\n{\"a\": 1, \"b\": {\"c\": 2}}\n```\nHope that helps.";
        assert_eq!(first_balanced_object(raw), Some("{\"a\": 1, \"b\": {\"c\": 2}}"));
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_the_scanner() {
        let raw = "x {\"a\": \"left { right } and \\\" quote\", \"b\": 2} y";
        assert_eq!(
            first_balanced_object(raw),
            Some("{\"a\": \"left { right } and \\\" quote\", \"b\": 2}")
        );
    }

    #[test]
    fn unterminated_object_returns_none() {
        assert_eq!(first_balanced_object("{\"a\": {\"b\": 1}"), None);
        assert_eq!(first_balanced_object("no braces at all"), None);
        assert_eq!(first_balanced_object("{\"open string: "), None);
    }

    #[test]
    fn duplicate_keys_are_detected_at_top_level_only() {
        let dup = r#"{"A": {"score": 1}, "B": {"score": 2}, "A": {"score": 3}}"#;
        assert_eq!(duplicate_top_level_keys(dup), vec!["A".to_string()]);
        // "score" repeats across nested objects but never at the top level.
        let nested = r#"{"A": {"score": 1}, "B": {"score": 1}}"#;
        assert!(duplicate_top_level_keys(nested).is_empty());
    }

    #[test]
    fn duplicate_scan_is_escape_aware() {
        let tricky = r#"{"a\"x": 1, "a\"x": 2, "plain": 3}"#;
        assert_eq!(duplicate_top_level_keys(tricky), vec!["a\\\"x".to_string()]);
        // A colon inside a string value must not fabricate keys.
        let tricky2 = r#"{"a": "not:a:key", "b": 2, "a": 3}"#;
        assert_eq!(duplicate_top_level_keys(tricky2), vec!["a".to_string()]);
    }

    #[test]
    fn arrays_at_top_level_do_not_yield_keys() {
        let raw = r#"{"list": ["x", "y", "x"], "list2": [1, 2]}"#;
        assert!(duplicate_top_level_keys(raw).is_empty());
    }
}
