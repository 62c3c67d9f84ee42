//! Tokenization and segmentation rules shared by every scorer and metric.

/// Lowercased alphanumeric runs. Any non-alphanumeric character separates tokens.
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Alphanumeric runs with their original casing, in order of appearance.
pub fn surface_tokens(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Splits a summary into sentences at `.`, `!` or `?` followed by whitespace.
///
/// The terminator stays with its sentence. Blank pieces are dropped.
pub fn summary_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            if let Some(&(j, next)) = chars.peek() {
                if next.is_whitespace() {
                    push_trimmed(&mut out, &text[start..j]);
                    start = j;
                }
            }
        }
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}

/// Number of items a fraction of `n` buys, rounded down.
///
/// A small tolerance absorbs binary representation error, so `0.29 * 100`
/// yields 29 rather than 28.
pub fn budget(n: usize, ratio: f64) -> usize {
    let raw = n as f64 * ratio + 1e-9;
    (raw.floor() as usize).min(n)
}
