/// Lowercasing word tokenizer: splits on whitespace and punctuation,
/// keeps apostrophes and hyphens when they sit between alphanumerics,
/// and preserves digit runs as tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_case(text, true)
}

/// Tokenizer with the case decision exposed; lowercasing is the default
/// pipeline behaviour and a config flag preserves case instead.
pub fn tokenize_with_case(text: &str, lowercase: bool) -> Vec<String> {
    let chars: Vec<char> = if lowercase {
        text.chars().flat_map(char::to_lowercase).collect()
    } else {
        text.chars().collect()
    };
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if (c == '\'' || c == '-')
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
