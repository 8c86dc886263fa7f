const ROMAN_MAX: u32 = 39;

fn to_roman(mut n: u32) -> String {
    const DIGITS: [(u32, &str); 6] = [(10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I"), (0, "")];
    let mut out = String::new();
    for (value, glyph) in DIGITS.iter().take(5) {
        while n >= *value {
            out.push_str(glyph);
            n -= value;
        }
    }
    out
}

/// Canonical upper-case Roman numeral in I..=XXXIX to its value.
pub fn roman_to_arabic(s: &str) -> Option<u32> {
    if s.is_empty() || s.len() > 7 || !s.bytes().all(|b| matches!(b, b'I' | b'V' | b'X')) {
        return None;
    }
    (1..=ROMAN_MAX).find(|&n| to_roman(n) == s)
}

fn is_number_component(s: &str) -> bool {
    (!s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())) || roman_to_arabic(s).is_some()
}

/// Apply the label rules: drop trailing periods, keep the last component of
/// dotted numbers (`III.16` -> `16`), convert Roman numerals to Arabic, and
/// keep any textual prefix (`Example 3.` -> `Example 3`). Idempotent.
pub fn normalize_label(raw: &str) -> String {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = collapsed.trim_end_matches(|c: char| c == '.' || c.is_whitespace());
    let (prefix, token) = match trimmed.rsplit_once(' ') {
        Some((p, t)) => (Some(p), t),
        None => (None, trimmed),
    };

    let mut token = token;
    if token.contains('.') {
        let parts: Vec<&str> = token.split('.').collect();
        if parts.iter().all(|p| is_number_component(p)) {
            token = parts[parts.len() - 1];
        }
    }
    let token = match roman_to_arabic(token) {
        Some(n) => n.to_string(),
        None => token.to_owned(),
    };

    match prefix {
        Some(p) => format!("{p} {token}"),
        None => token,
    }
}
