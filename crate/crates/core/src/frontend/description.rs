//! Natural-language side: documentation comments and queries.

use serde::{Deserialize, Serialize};

use super::FrontendError;

/// Default cap on description length.
pub const MAX_DESCRIPTION_TOKENS: usize = 30;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionSequence {
    pub tokens: Vec<String>,
}

/// Turns the last block comment before a function into its description:
/// comment markers and leading `*` are stripped, only the first sentence is
/// kept, and the result is split into lowercase words.
pub fn extract_description(comment_block: &str) -> Result<DescriptionSequence, FrontendError> {
    extract_description_with_cap(comment_block, MAX_DESCRIPTION_TOKENS)
}

pub fn extract_description_with_cap(
    comment_block: &str,
    cap: usize,
) -> Result<DescriptionSequence, FrontendError> {
    let stripped = strip_comment_markers(comment_block);
    let sentence = first_sentence(&stripped);
    let mut tokens = tokenize_text(sentence);
    tokens.truncate(cap);
    if tokens.is_empty() {
        return Err(FrontendError::NoDescription);
    }
    Ok(DescriptionSequence { tokens })
}

/// Lowercase words of free text, split at whitespace and punctuation.
/// Used for queries as well as for descriptions.
pub fn tokenize_text(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn strip_comment_markers(block: &str) -> String {
    let trimmed = block.trim();
    let inner = trimmed.strip_prefix("/*").unwrap_or(trimmed);
    let inner = inner.strip_suffix("*/").unwrap_or(inner);
    inner
        .lines()
        .map(|line| line.trim().trim_start_matches('*').trim())
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Text up to the first `.` that is followed by whitespace or ends the text.
fn first_sentence(text: &str) -> &str {
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'.' && (i + 1 == bytes.len() || bytes[i + 1].is_ascii_whitespace()) {
            return &text[..i];
        }
    }
    text
}
